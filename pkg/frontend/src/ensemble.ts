/**
 * Seeded ensemble protocol: train one architecture under several seeds
 * (weight initialization and shuffling both vary with the seed), keep the
 * top-k runs by validation MSE, and report test-set metrics as mean +/- std
 * across the selected models.
 */

import { mkdirSync } from 'node:fs';
import { join } from 'node:path';

import type * as tf from '@tensorflow/tfjs';

import type { RunSample } from './dataset.js';
import { writeMap } from './formats.js';
import { mean, mse, peakOffset, sampleStd, ssim } from './metrics.js';
import type { ModelSpec } from './models.js';
import { buildModel } from './models.js';
import type { TrainConfig, TrainHistory } from './train.js';
import { predictMap, train } from './train.js';

export interface MetricStat {
  mean: number;
  std: number;
}

export interface SeedResult {
  seed: number;
  valMse: number;
  history: TrainHistory;
}

export interface EnsembleReport {
  completedSeeds: number[];
  contributingSeeds: number[];
  perSeed: SeedResult[];
  test: {
    mse: MetricStat;
    ssim: MetricStat;
    peakOffset: MetricStat;
  };
}

export interface TestMetrics {
  mse: number;
  ssim: number;
  peakOffset: number;
}

/** Mean test metrics of one trained model, via the shared definitions. */
export function testMetrics(model: tf.LayersModel, testSet: RunSample[]): TestMetrics {
  const perRun = testSet.map((sample) => {
    const pred = predictMap(model, sample);
    let offset: number;
    try {
      offset = peakOffset(pred, sample.truth.direction);
    } catch {
      // all-zero prediction carries no direction information
      offset = 90.0;
    }
    return {
      mse: mse(pred, sample.target),
      ssim: ssim(pred, sample.target),
      peakOffset: offset,
    };
  });
  return {
    mse: mean(perRun.map((r) => r.mse)),
    ssim: mean(perRun.map((r) => r.ssim)),
    peakOffset: mean(perRun.map((r) => r.peakOffset)),
  };
}

/** Write one model's test predictions as CCIMG001 files, one per run id. */
export function exportPredictions(
  model: tf.LayersModel,
  testSet: RunSample[],
  outDir: string,
): string[] {
  mkdirSync(outDir, { recursive: true });
  return testSet.map((sample) => {
    const path = join(outDir, `${sample.id}.img`);
    writeMap(predictMap(model, sample), path);
    return path;
  });
}

export function ensembleProtocol(
  spec: ModelSpec,
  trainSet: RunSample[],
  valSet: RunSample[],
  testSet: RunSample[],
  seeds: number[],
  config: TrainConfig,
  topK = 5,
  keepModels?: (seed: number, model: tf.LayersModel) => void,
): EnsembleReport {
  if (seeds.length < topK) {
    throw new Error(`need at least ${topK} seeds, got ${seeds.length}`);
  }
  const perSeed: SeedResult[] = [];
  const metricsBySeed = new Map<number, TestMetrics>();
  for (const seed of seeds) {
    const model = buildModel({ ...spec, seed });
    const history = train(model, trainSet, valSet, { ...config, seed });
    perSeed.push({ seed, valMse: history.bestValLoss, history });
    metricsBySeed.set(seed, testMetrics(model, testSet));
    if (keepModels) keepModels(seed, model);
    else model.dispose();
  }
  // selection uses validation MSE only; test data never enters the ranking
  const ranked = [...perSeed].sort((a, b) => a.valMse - b.valMse);
  const contributing = ranked.slice(0, topK).map((r) => r.seed);
  const chosen = contributing.map((s) => metricsBySeed.get(s)!);
  const stat = (xs: number[]): MetricStat => ({ mean: mean(xs), std: sampleStd(xs) });
  return {
    completedSeeds: seeds,
    contributingSeeds: contributing,
    perSeed,
    test: {
      mse: stat(chosen.map((m) => m.mse)),
      ssim: stat(chosen.map((m) => m.ssim)),
      peakOffset: stat(chosen.map((m) => m.peakOffset)),
    },
  };
}
