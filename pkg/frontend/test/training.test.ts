import { beforeAll, describe, expect, it } from 'vitest';

import { loadManifest, loadSplit, type RunSample } from '../src/dataset.js';
import { setupBackend } from '../src/backend.js';
import { buildModel } from '../src/models.js';
import { defaultTrainConfig, train } from '../src/train.js';
import { ensureTinyDataset } from './helpers.js';

const CAP = 64;

let trainSet: RunSample[];
let valSet: RunSample[];

beforeAll(async () => {
  const backend = await setupBackend();
  console.log(`[training] backend: ${backend}`);
  const dir = ensureTinyDataset();
  const manifest = loadManifest(dir);
  trainSet = loadSplit(dir, manifest, 'train', {}, CAP);
  valSet = loadSplit(dir, manifest, 'val', {}, CAP);
});

describe('training loop', () => {
  it('overfits 8 samples: training MSE drops at least 100x over 300 epochs', { timeout: 2_400_000 }, () => {
    // 6 train + 2 val runs of the small fixture = 8 samples to memorize.
    // The half-width image model keeps the 300 epochs under ~20 minutes on
    // the wasm backend (full width takes ~34 minutes for the same result).
    const samples = [...trainSet, ...valSet];
    expect(samples.length).toBe(8);
    const model = buildModel({
      architecture: 'unet',
      widthDivisor: 2,
      eventCap: CAP,
      seed: 3,
    });
    const history = train(model, samples, samples, {
      batchSize: 8,
      warmupEpochs: 300, // no early stopping during the smoke
      patience: 300,
      learningRate: 1e-3,
      maxEpochs: 300,
      seed: 3,
    });
    model.dispose();
    expect(history.trainLoss.length).toBe(300);
    const first = history.trainLoss[0];
    const last = history.trainLoss[history.trainLoss.length - 1];
    console.log(
      `[training] overfit smoke: epoch-1 MSE ${first.toExponential(3)}, ` +
        `epoch-300 MSE ${last.toExponential(3)}, ratio ${(first / last).toFixed(1)}x`,
    );
    expect(last).toBeLessThan(first / 100);
  });

  it('early stopping triggers after warmup once validation stalls', () => {
    const model = buildModel({
      architecture: 'comptonnet',
      widthDivisor: 8,
      eventCap: CAP,
      seed: 1,
    });
    // zero learning rate: validation improves only at epoch 0, then stalls
    const history = train(model, trainSet, valSet, {
      batchSize: 4,
      warmupEpochs: 2,
      patience: 3,
      learningRate: 0,
      maxEpochs: 50,
      seed: 1,
    });
    model.dispose();
    expect(history.bestEpoch).toBe(0);
    expect(history.stoppedEpoch).toBe(3); // epochs 1..3 without improvement
    expect(history.valLoss.length).toBe(4);
  });

  it('is reproducible for a fixed seed', () => {
    const run = () => {
      const model = buildModel({
        architecture: 'comptonnet',
        widthDivisor: 8,
        eventCap: CAP,
        seed: 7,
      });
      const history = train(
        model,
        trainSet,
        valSet,
        defaultTrainConfig('comptonnet', { maxEpochs: 3, warmupEpochs: 3, seed: 7 }),
      );
      model.dispose();
      return history;
    };
    const a = run();
    const b = run();
    expect(a.trainLoss).toEqual(b.trainLoss);
    expect(a.valLoss).toEqual(b.valLoss);
  });

  it('differs across seeds', () => {
    const run = (seed: number) => {
      const model = buildModel({
        architecture: 'comptonnet',
        widthDivisor: 8,
        eventCap: CAP,
        seed,
      });
      const history = train(
        model,
        trainSet,
        valSet,
        defaultTrainConfig('comptonnet', { maxEpochs: 2, warmupEpochs: 2, seed }),
      );
      model.dispose();
      return history;
    };
    expect(run(1).trainLoss).not.toEqual(run(2).trainLoss);
  });

  it('raises on non-finite loss instead of training through it', () => {
    const model = buildModel({
      architecture: 'comptonnet',
      widthDivisor: 8,
      eventCap: CAP,
      seed: 1,
    });
    const poisoned = trainSet.map((s) => ({
      ...s,
      target: (() => {
        const t = new Float32Array(s.target);
        t[0] = NaN;
        return t;
      })(),
    }));
    expect(() =>
      train(model, poisoned, valSet, {
        batchSize: 4,
        warmupEpochs: 0,
        patience: 1,
        learningRate: 1e-3,
        maxEpochs: 2,
        seed: 1,
      }),
    ).toThrow(/non-finite/);
    model.dispose();
  });

  it('rejects empty train or validation sets', () => {
    const model = buildModel({
      architecture: 'comptonnet',
      widthDivisor: 8,
      eventCap: CAP,
      seed: 1,
    });
    const config = defaultTrainConfig('comptonnet', { maxEpochs: 1 });
    expect(() => train(model, [], valSet, config)).toThrow(/empty training/);
    expect(() => train(model, trainSet, [], config)).toThrow(/empty validation/);
    model.dispose();
  });
});
