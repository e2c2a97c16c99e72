/**
 * Dataset access on top of the ccbox run directory layout.
 *
 * A dataset directory holds manifest.json plus runs/<split>/<id>/ with
 * events.bin (normalized 16-feature rows), compton.img, pinhole.img and
 * target.img.  Runs load into fixed-size arrays: events padded or truncated
 * to a cap with a 0/1 validity mask, and a 2-channel image stack
 * (channel 0 compton, channel 1 pinhole), each channel peak-scaled to 1.
 *
 * Ablations are applied here, at load time, as a lazy view: the files on
 * disk are never modified.
 */

import { readFileSync } from 'node:fs';
import { join } from 'node:path';

import { MAP_SIZE, N_FEATURES, readEvents, readMap } from './formats.js';

export const EVENT_CAP = 4096;
export const N_CHANNELS = 2;

/** Feature columns come in groups of 4 (E, x, y, z) per detector segment. */
export const SEGMENT_COLUMNS: Record<string, [number, number]> = {
  front: [0, 4],
  rear: [4, 8],
  side: [8, 12],
  bgo: [12, 16],
};

export interface AblationMask {
  front?: boolean;
  rear?: boolean;
  side?: boolean;
  bgo?: boolean;
  pinholeImage?: boolean;
  comptonImage?: boolean;
}

export const NO_ABLATION: AblationMask = {};

export interface RunEntry {
  id: string;
  split: 'train' | 'val' | 'test';
  seed: number;
  duration_s: number;
  path: string;
}

export interface Manifest {
  format_version: number;
  config: Record<string, unknown>;
  normalization: Record<string, unknown>;
  runs: RunEntry[];
}

export interface RunTruth {
  direction: [number, number, number];
  photon_index: number;
  duration_s: number;
  flux: number;
  seed: number;
  background: boolean;
  generated_photons: number;
  n_events: number;
}

export interface RunSample {
  id: string;
  split: string;
  /** (EVENT_CAP, 16) row-major, zero padded. */
  events: Float32Array;
  /** (EVENT_CAP,) 1 for real rows, 0 for padding. */
  mask: Float32Array;
  /** (256, 256, 2) row-major HWC, channel 0 compton, channel 1 pinhole. */
  images: Float32Array;
  /** (256, 256) ground-truth blob, peak 1. */
  target: Float32Array;
  truth: RunTruth;
  nEvents: number;
}

export function loadManifest(datasetDir: string): Manifest {
  const manifest = JSON.parse(
    readFileSync(join(datasetDir, 'manifest.json'), 'utf8'),
  ) as Manifest;
  if (manifest.format_version !== 1) {
    throw new Error(`unsupported manifest version ${manifest.format_version}`);
  }
  return manifest;
}

export function runsOfSplit(manifest: Manifest, split: string): RunEntry[] {
  return manifest.runs.filter((r) => r.split === split);
}

function peakScale(values: Float32Array): Float32Array {
  let peak = 0;
  for (let i = 0; i < values.length; i++) if (values[i] > peak) peak = values[i];
  if (peak <= 0) return values;
  const out = new Float32Array(values.length);
  for (let i = 0; i < values.length; i++) out[i] = values[i] / peak;
  return out;
}

export function loadRun(
  datasetDir: string,
  entry: RunEntry,
  ablation: AblationMask = NO_ABLATION,
  cap: number = EVENT_CAP,
): RunSample {
  const dir = join(datasetDir, entry.path);
  const { features, count } = readEvents(join(dir, 'events.bin'));
  const events = new Float32Array(cap * N_FEATURES);
  const mask = new Float32Array(cap);
  const kept = Math.min(count, cap);
  events.set(features.subarray(0, kept * N_FEATURES));
  mask.fill(1, 0, kept);
  if (kept === 0) {
    // empty runs keep one all-zero row valid so the set pooling stays finite
    mask[0] = 1;
  }
  for (const [segment, active] of Object.entries({
    front: !ablation.front,
    rear: !ablation.rear,
    side: !ablation.side,
    bgo: !ablation.bgo,
  })) {
    if (active) continue;
    const [lo, hi] = SEGMENT_COLUMNS[segment];
    for (let row = 0; row < kept; row++) {
      events.fill(0, row * N_FEATURES + lo, row * N_FEATURES + hi);
    }
  }

  const compton = ablation.comptonImage
    ? new Float32Array(MAP_SIZE * MAP_SIZE)
    : peakScale(readMap(join(dir, 'compton.img')));
  const pinhole = ablation.pinholeImage
    ? new Float32Array(MAP_SIZE * MAP_SIZE)
    : peakScale(readMap(join(dir, 'pinhole.img')));
  const images = new Float32Array(MAP_SIZE * MAP_SIZE * N_CHANNELS);
  for (let i = 0; i < MAP_SIZE * MAP_SIZE; i++) {
    images[i * N_CHANNELS] = compton[i];
    images[i * N_CHANNELS + 1] = pinhole[i];
  }

  const target = readMap(join(dir, 'target.img'));
  const truth = JSON.parse(readFileSync(join(dir, 'truth.json'), 'utf8')) as RunTruth;
  return {
    id: entry.id,
    split: entry.split,
    events,
    mask,
    images,
    target,
    truth,
    nEvents: count,
  };
}

export function loadSplit(
  datasetDir: string,
  manifest: Manifest,
  split: string,
  ablation: AblationMask = NO_ABLATION,
  cap: number = EVENT_CAP,
): RunSample[] {
  return runsOfSplit(manifest, split).map((r) => loadRun(datasetDir, r, ablation, cap));
}
