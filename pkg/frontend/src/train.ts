/**
 * Training loop: Adam on the MSE loss with warm-up, patience-based early
 * stopping, and best-validation weight restoration.
 *
 * The loop owns batching and shuffling (seeded, reproducible up to
 * framework-level float nondeterminism) so the same code path serves all
 * three architectures; models declare which inputs they take through their
 * input names ('images', 'events', 'mask').
 */

import * as tf from '@tensorflow/tfjs';

import type { RunSample } from './dataset.js';
import { N_CHANNELS } from './dataset.js';
import { MAP_SIZE, N_FEATURES } from './formats.js';

export interface TrainConfig {
  batchSize: number;
  warmupEpochs: number;
  patience: number;
  learningRate: number;
  maxEpochs: number;
  /** Shuffling seed; weight init is seeded at model build time. */
  seed: number;
  verbose?: boolean;
}

export function defaultTrainConfig(
  architecture: 'unet' | 'comptonnet' | 'comptonunet',
  overrides: Partial<TrainConfig> = {},
): TrainConfig {
  return {
    batchSize: architecture === 'unet' ? 16 : 4,
    warmupEpochs: 50,
    patience: 30,
    learningRate: 1e-3,
    maxEpochs: 500,
    seed: 0,
    ...overrides,
  };
}

export interface TrainHistory {
  trainLoss: number[];
  valLoss: number[];
  bestEpoch: number;
  bestValLoss: number;
  stoppedEpoch: number;
}

/** Small deterministic PRNG for shuffling (mulberry32). */
export function rng32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function shuffled(n: number, rand: () => number): number[] {
  const order = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  return order;
}

/** Stack the model's inputs for a list of samples, in declared input order. */
export function batchInputs(model: tf.LayersModel, batch: RunSample[]): tf.Tensor[] {
  const b = batch.length;
  const cap = batch[0].mask.length;
  return model.inputs.map((input) => {
    switch (input.name.replace(/_\d+$/, '')) {
      case 'images': {
        const data = new Float32Array(b * MAP_SIZE * MAP_SIZE * N_CHANNELS);
        batch.forEach((s, k) => data.set(s.images, k * s.images.length));
        return tf.tensor4d(data, [b, MAP_SIZE, MAP_SIZE, N_CHANNELS]);
      }
      case 'events': {
        const data = new Float32Array(b * cap * N_FEATURES);
        batch.forEach((s, k) => data.set(s.events, k * s.events.length));
        return tf.tensor3d(data, [b, cap, N_FEATURES]);
      }
      case 'mask': {
        const data = new Float32Array(b * cap);
        batch.forEach((s, k) => data.set(s.mask, k * s.mask.length));
        return tf.tensor3d(data, [b, cap, 1]);
      }
      default:
        throw new Error(`model has unexpected input ${input.name}`);
    }
  });
}

export function batchTargets(batch: RunSample[]): tf.Tensor {
  const b = batch.length;
  const data = new Float32Array(b * MAP_SIZE * MAP_SIZE);
  batch.forEach((s, k) => data.set(s.target, k * s.target.length));
  return tf.tensor4d(data, [b, MAP_SIZE, MAP_SIZE, 1]);
}

function forwardLoss(
  model: tf.LayersModel,
  inputs: tf.Tensor[],
  target: tf.Tensor,
  training: boolean,
): tf.Scalar {
  const pred = model.apply(inputs.length === 1 ? inputs[0] : inputs, {
    training,
  }) as tf.Tensor;
  return tf.losses.meanSquaredError(target, pred) as tf.Scalar;
}

/** Mean MSE over a sample list in inference mode. */
export function datasetLoss(
  model: tf.LayersModel,
  samples: RunSample[],
  batchSize: number,
): number {
  let acc = 0;
  for (let at = 0; at < samples.length; at += batchSize) {
    const batch = samples.slice(at, at + batchSize);
    const loss = tf.tidy(() => {
      const inputs = batchInputs(model, batch);
      const target = batchTargets(batch);
      return forwardLoss(model, inputs, target, false).dataSync()[0];
    });
    acc += loss * batch.length;
  }
  return acc / samples.length;
}

/**
 * Train in place; returns the loss history.  The model is left holding the
 * weights of the epoch with the lowest validation MSE.  Early stopping
 * triggers once the validation loss has not improved for `patience`
 * consecutive epochs, counted only after `warmupEpochs`.
 */
export function train(
  model: tf.LayersModel,
  trainSet: RunSample[],
  valSet: RunSample[],
  config: TrainConfig,
): TrainHistory {
  if (trainSet.length === 0) throw new Error('empty training set');
  if (valSet.length === 0) throw new Error('empty validation set');
  const optimizer = tf.train.adam(config.learningRate);
  const rand = rng32(config.seed);
  const history: TrainHistory = {
    trainLoss: [],
    valLoss: [],
    bestEpoch: -1,
    bestValLoss: Infinity,
    stoppedEpoch: -1,
  };
  let best: tf.Tensor[] | null = null;
  let sinceBest = 0;

  try {
    for (let epoch = 0; epoch < config.maxEpochs; epoch++) {
      const order = shuffled(trainSet.length, rand);
      let epochLoss = 0;
      for (let at = 0; at < order.length; at += config.batchSize) {
        const batch = order.slice(at, at + config.batchSize).map((i) => trainSet[i]);
        const loss = tf.tidy(() => {
          const inputs = batchInputs(model, batch);
          const target = batchTargets(batch);
          const value = optimizer.minimize(
            () => forwardLoss(model, inputs, target, true),
            true,
          ) as tf.Scalar;
          return value.dataSync()[0];
        });
        if (!Number.isFinite(loss)) {
          throw new Error(
            `non-finite training loss ${loss} at epoch ${epoch}, ` +
              `batch ${at / config.batchSize} (lr ${config.learningRate})`,
          );
        }
        epochLoss += loss * batch.length;
      }
      history.trainLoss.push(epochLoss / trainSet.length);

      const valLoss = datasetLoss(model, valSet, config.batchSize);
      if (!Number.isFinite(valLoss)) {
        throw new Error(`non-finite validation loss at epoch ${epoch}`);
      }
      history.valLoss.push(valLoss);

      if (valLoss < history.bestValLoss) {
        history.bestValLoss = valLoss;
        history.bestEpoch = epoch;
        sinceBest = 0;
        if (best) best.forEach((w) => w.dispose());
        best = model.getWeights().map((w) => w.clone());
      } else {
        sinceBest++;
      }
      if (config.verbose) {
        console.log(
          `epoch ${epoch}: train ${history.trainLoss[epoch].toExponential(3)} ` +
            `val ${valLoss.toExponential(3)}${sinceBest === 0 ? ' *' : ''}`,
        );
      }
      history.stoppedEpoch = epoch;
      if (epoch >= config.warmupEpochs && sinceBest >= config.patience) break;
    }
  } finally {
    if (best) {
      model.setWeights(best);
      best.forEach((w) => w.dispose());
    }
    optimizer.dispose();
  }
  return history;
}

/** Predict one sample's sky map as a flat row-major Float32Array. */
export function predictMap(model: tf.LayersModel, sample: RunSample): Float32Array {
  return tf.tidy(() => {
    const inputs = batchInputs(model, [sample]);
    const pred = model.apply(inputs.length === 1 ? inputs[0] : inputs, {
      training: false,
    }) as tf.Tensor;
    return new Float32Array(pred.dataSync());
  });
}
