import * as tf from '@tensorflow/tfjs';
import { describe, expect, it } from 'vitest';

import { buildModel } from '../src/models.js';
import { rng32 } from '../src/train.js';

/**
 * Analytic gradients vs central finite differences on the tiny
 * (widths / 8) model variant.
 *
 * Finite differences only match the analytic gradient where the loss is
 * smooth, and in float32 only where the signal clears the rounding noise.
 * The check is therefore made at a deliberately smooth, well-scaled point:
 *
 *  - all weights are set positive (scaled by 1 / fan-in so activations
 *    stay O(1)) and all inputs positive, so no ReLU / LeakyReLU sits at
 *    its kink anywhere in the network and the loss is locally C^2 in
 *    every parameter;
 *  - the loss is re-accumulated from the float32 predictions in float64,
 *    and the difference quotient is Richardson-extrapolated from step
 *    sizes h and h/2 (cancelling the h^2 truncation term), with the
 *    actually-realized float32 perturbation used as the denominator;
 *  - checked parameters are sampled among those carrying a gradient of at
 *    least 0.1% of the gradient max, since a relative comparison is
 *    meaningless at zero gradient.
 */

const CAP = 16;

describe('gradient check (tiny variant, widths / 8)', () => {
  it('analytic MSE gradients match finite differences within 1e-4 relative', () => {
    const model = buildModel({
      architecture: 'comptonnet',
      widthDivisor: 8,
      eventCap: CAP,
      seed: 42,
    });
    const rand = rng32(2026);

    // Re-initialize every weight positive, scaled to keep activations O(1).
    const vars = model.trainableWeights.map(
      (w) => (w as unknown as { val: tf.Variable }).val,
    );
    for (const v of vars) {
      const shape = v.shape as number[];
      const fanIn = shape.length > 1 ? shape.slice(0, -1).reduce((a, b) => a * b, 1) : 1;
      const scale = shape.length > 1 ? 2.0 / fanIn : 0.05;
      const d = new Float32Array(v.size);
      for (let i = 0; i < d.length; i++) d[i] = scale * (0.25 + rand());
      v.assign(tf.tensor(d, shape, 'float32'));
    }

    const eventData = new Float32Array(CAP * 16);
    for (let i = 0; i < eventData.length; i++) eventData[i] = 0.2 + 0.8 * rand();
    const events = tf.tensor3d(eventData, [1, CAP, 16]);
    const mask = tf.ones([1, CAP, 1]);
    const inputs = [events, mask];
    const target = new Float64Array(256 * 256);
    for (let i = 0; i < target.length; i++) target[i] = Math.fround(rand());
    const target32 = tf.tensor4d(Float32Array.from(target), [1, 256, 256, 1]);

    const f64Loss = (): number =>
      tf.tidy(() => {
        const pred = model.apply(inputs, { training: false }) as tf.Tensor;
        const p = pred.dataSync();
        let acc = 0;
        for (let i = 0; i < p.length; i++) {
          const d = p[i] - target[i];
          acc += d * d;
        }
        return acc / p.length;
      });

    const { value, grads } = tf.variableGrads(
      () =>
        tf.losses.meanSquaredError(
          target32,
          model.apply(inputs, { training: false }) as tf.Tensor,
        ) as tf.Scalar,
      vars,
    );
    const loss0 = value.dataSync()[0];
    expect(Number.isFinite(loss0)).toBe(true);
    expect(loss0).toBeLessThan(10); // the scaled point keeps the loss O(1)

    // flatten (variable, element) pairs carrying a usable gradient
    const flat: { v: tf.Variable; idx: number; g: number }[] = [];
    let gmax = 0;
    for (const v of vars) {
      const g = grads[v.name].dataSync();
      for (let i = 0; i < g.length; i++) gmax = Math.max(gmax, Math.abs(g[i]));
    }
    for (const v of vars) {
      const g = grads[v.name].dataSync();
      for (let i = 0; i < g.length; i++) {
        if (Math.abs(g[i]) >= 0.001 * gmax) flat.push({ v, idx: i, g: g[i] });
      }
    }
    expect(flat.length).toBeGreaterThan(1000);

    let worst = 0;
    for (let k = 0; k < 10; k++) {
      const { v, idx, g } = flat[Math.floor(rand() * flat.length)];
      const data = new Float32Array(v.dataSync() as Float32Array);
      const p0 = data[idx];
      const evalAt = (p: number): number => {
        data[idx] = Math.fround(p);
        v.assign(tf.tensor(data, v.shape as number[], 'float32'));
        return f64Loss();
      };
      const quotient = (h: number): number => {
        const pPlus = Math.fround(p0 + h);
        const pMinus = Math.fround(p0 - h);
        const lp = evalAt(pPlus);
        const lm = evalAt(pMinus);
        return (lp - lm) / (pPlus - pMinus);
      };
      const h = Math.max(Math.abs(p0), 0.05) * 0.05;
      const fd = (4 * quotient(h / 2) - quotient(h)) / 3;
      evalAt(p0); // restore
      const rel = Math.abs(fd - g) / Math.max(Math.abs(fd), Math.abs(g));
      worst = Math.max(worst, rel);
      console.log(
        `[grad] ${v.name}[${idx}] analytic ${g.toExponential(6)} ` +
          `fd ${fd.toExponential(6)} rel ${rel.toExponential(2)}`,
      );
    }
    console.log(`[grad] worst relative error ${worst.toExponential(3)} over 10 params`);
    expect(worst).toBeLessThan(1e-4);

    value.dispose();
    model.dispose();
  });
});
