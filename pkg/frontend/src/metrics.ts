/**
 * Sky-map quality metrics, numerically matched to the ccbox Python library.
 *
 * All maps are 256x256 row-major arrays on the direction-cosine grid:
 * pixel (i, j) has u = (i + 0.5)/128 - 1, v = (j + 0.5)/128 - 1 and points
 * along (u, v, sqrt(1 - u^2 - v^2)); pixels outside the unit disk are
 * invalid.  Computations run in float64 so the cross-implementation check
 * against the primary `evaluate` command holds to 1e-6.
 */

import { MAP_SIZE } from './formats.js';

const HALF = MAP_SIZE / 2;

function axisCoord(i: number): number {
  return (i + 0.5) / HALF - 1.0;
}

/** Unit direction of pixel center (i, j). */
export function pixelToDirection(i: number, j: number): [number, number, number] {
  const u = axisCoord(i);
  const v = axisCoord(j);
  const w2 = 1.0 - u * u - v * v;
  if (w2 < 0) throw new Error(`pixel (${i}, ${j}) outside the valid disk`);
  return [u, v, Math.sqrt(w2)];
}

export function mse(a: ArrayLike<number>, b: ArrayLike<number>): number {
  if (a.length !== b.length) throw new Error('shape mismatch');
  let acc = 0;
  for (let i = 0; i < a.length; i++) {
    const d = a[i] - b[i];
    acc += d * d;
  }
  return acc / a.length;
}

function gaussianWindow(size = 11, sigma = 1.5): Float64Array {
  const g = new Float64Array(size);
  let gsum = 0;
  for (let i = 0; i < size; i++) {
    const x = i - (size - 1) / 2;
    g[i] = Math.exp(-(x * x) / (2 * sigma * sigma));
    gsum += g[i];
  }
  const kernel = new Float64Array(size * size);
  for (let i = 0; i < size; i++) {
    for (let j = 0; j < size; j++) kernel[i * size + j] = (g[i] * g[j]) / (gsum * gsum);
  }
  return kernel;
}

const SSIM_WINDOW = gaussianWindow();
const SSIM_SIZE = 11;

function convolveValid(img: Float64Array, n: number): Float64Array {
  // valid-mode correlation with the (symmetric) Gaussian window
  const m = n - SSIM_SIZE + 1;
  const out = new Float64Array(m * m);
  for (let i = 0; i < m; i++) {
    for (let j = 0; j < m; j++) {
      let acc = 0;
      for (let di = 0; di < SSIM_SIZE; di++) {
        const row = (i + di) * n + j;
        const krow = di * SSIM_SIZE;
        for (let dj = 0; dj < SSIM_SIZE; dj++) {
          acc += img[row + dj] * SSIM_WINDOW[krow + dj];
        }
      }
      out[i * m + j] = acc;
    }
  }
  return out;
}

/** Mean local SSIM over all fully-interior 11x11 Gaussian windows. */
export function ssim(
  a: ArrayLike<number>,
  b: ArrayLike<number>,
  dataRange = 1.0,
  k1 = 0.01,
  k2 = 0.03,
): number {
  if (a.length !== b.length || a.length !== MAP_SIZE * MAP_SIZE) {
    throw new Error('shape mismatch');
  }
  if (dataRange <= 0) throw new Error('dynamic range must be positive');
  const n = MAP_SIZE;
  const va = new Float64Array(n * n);
  const vb = new Float64Array(n * n);
  const vaa = new Float64Array(n * n);
  const vbb = new Float64Array(n * n);
  const vab = new Float64Array(n * n);
  for (let i = 0; i < n * n; i++) {
    va[i] = a[i];
    vb[i] = b[i];
    vaa[i] = va[i] * va[i];
    vbb[i] = vb[i] * vb[i];
    vab[i] = va[i] * vb[i];
  }
  const c1 = (k1 * dataRange) ** 2;
  const c2 = (k2 * dataRange) ** 2;
  const muA = convolveValid(va, n);
  const muB = convolveValid(vb, n);
  const eAA = convolveValid(vaa, n);
  const eBB = convolveValid(vbb, n);
  const eAB = convolveValid(vab, n);
  let acc = 0;
  for (let i = 0; i < muA.length; i++) {
    const varA = eAA[i] - muA[i] * muA[i];
    const varB = eBB[i] - muB[i] * muB[i];
    const cov = eAB[i] - muA[i] * muB[i];
    const num = (2 * muA[i] * muB[i] + c1) * (2 * cov + c2);
    const den = (muA[i] * muA[i] + muB[i] * muB[i] + c1) * (varA + varB + c2);
    acc += num / den;
  }
  return acc / muA.length;
}

/** Intensity-weighted centroid direction of a map; invalid pixels ignored. */
export function weightedCentroid(map: ArrayLike<number>): [number, number, number] {
  let total = 0;
  let su = 0;
  let sv = 0;
  for (let i = 0; i < MAP_SIZE; i++) {
    const u = axisCoord(i);
    for (let j = 0; j < MAP_SIZE; j++) {
      const v = axisCoord(j);
      if (u * u + v * v > 1.0) continue;
      const w = map[i * MAP_SIZE + j];
      total += w;
      su += w * u;
      sv += w * v;
    }
  }
  if (total <= 0) throw new Error('cannot take the centroid of an all-zero map');
  let u = su / total;
  let v = sv / total;
  let rho2 = u * u + v * v;
  if (rho2 > 1.0) {
    const scale = 1.0 / Math.sqrt(rho2);
    u *= scale;
    v *= scale;
    rho2 = 1.0;
  }
  return [u, v, Math.sqrt(Math.max(0, 1 - rho2))];
}

/** Angular separation (deg) between map centroid and the true direction. */
export function peakOffset(map: ArrayLike<number>, truth: ArrayLike<number>): number {
  const c = weightedCentroid(map);
  const norm = Math.hypot(truth[0], truth[1], truth[2]);
  const dot =
    (c[0] * truth[0] + c[1] * truth[1] + c[2] * truth[2]) / norm;
  return (Math.acos(Math.min(1, Math.max(-1, dot))) * 180) / Math.PI;
}

export function mean(xs: number[]): number {
  return xs.reduce((a, b) => a + b, 0) / xs.length;
}

export function sampleStd(xs: number[]): number {
  if (xs.length < 2) return 0;
  const m = mean(xs);
  return Math.sqrt(xs.reduce((a, b) => a + (b - m) ** 2, 0) / (xs.length - 1));
}

export function median(xs: number[]): number {
  const s = [...xs].sort((a, b) => a - b);
  const mid = s.length >> 1;
  return s.length % 2 ? s[mid] : (s[mid - 1] + s[mid]) / 2;
}
