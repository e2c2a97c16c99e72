import { mkdtempSync, readFileSync, rmSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, describe, expect, it } from 'vitest';

import {
  FormatError,
  MAP_SIZE,
  N_FEATURES,
  readEvents,
  readMap,
  writeEvents,
  writeMap,
} from '../src/formats.js';
import { loadManifest, loadRun, runsOfSplit } from '../src/dataset.js';
import { ensureTinyDataset } from './helpers.js';

const tmp = mkdtempSync(join(tmpdir(), 'ccbox-fmt-'));
afterAll(() => rmSync(tmp, { recursive: true, force: true }));

describe('event files', () => {
  it('roundtrip bit-exact', () => {
    const n = 7;
    const features = new Float32Array(n * N_FEATURES);
    for (let i = 0; i < features.length; i++) features[i] = Math.sin(i) * 0.5 + 0.5;
    const path = join(tmp, 'events.bin');
    writeEvents(features, n, path);
    const back = readEvents(path);
    expect(back.count).toBe(n);
    expect(Buffer.from(back.features.buffer)).toEqual(Buffer.from(features.buffer));
  });

  it('byte layout: magic, LE count, LE float payload', () => {
    const features = new Float32Array(N_FEATURES).fill(0.25);
    const path = join(tmp, 'layout.bin');
    writeEvents(features, 1, path);
    const buf = readFileSync(path);
    expect(buf.toString('latin1', 0, 8)).toBe('CCEVT001');
    expect(buf.readUInt32LE(8)).toBe(1);
    expect(buf.length).toBe(12 + 16 * 4);
    expect(buf.readFloatLE(12)).toBe(0.25);
  });

  it('rejects bad magic and size mismatch', () => {
    const bad = join(tmp, 'bad.bin');
    writeFileSync(bad, Buffer.from('XXEVT001\x01\x00\x00\x00', 'latin1'));
    expect(() => readEvents(bad)).toThrow(FormatError);
    const short = join(tmp, 'short.bin');
    writeFileSync(short, Buffer.from('CCEVT001\x02\x00\x00\x00', 'latin1'));
    expect(() => readEvents(short)).toThrow(/payload size/);
  });
});

describe('map files', () => {
  it('roundtrip bit-exact', () => {
    const values = new Float32Array(MAP_SIZE * MAP_SIZE);
    for (let i = 0; i < values.length; i++) values[i] = (i % 97) / 97;
    const path = join(tmp, 'map.img');
    writeMap(values, path);
    const back = readMap(path);
    expect(Buffer.from(back.buffer)).toEqual(Buffer.from(values.buffer));
  });

  it('rejects wrong dimensions', () => {
    const path = join(tmp, 'dims.img');
    const buf = Buffer.alloc(16 + 4);
    buf.write('CCIMG001', 0, 'latin1');
    buf.writeUInt32LE(1, 8);
    buf.writeUInt32LE(1, 12);
    writeFileSync(path, buf);
    expect(() => readMap(path)).toThrow(/dimensions/);
  });
});

describe('reading datasets written by the simulation CLI', () => {
  const datasetDir = ensureTinyDataset();

  it('manifest lists runs with 6/2/2 splits per split_counts', () => {
    const manifest = loadManifest(datasetDir);
    expect(manifest.runs).toHaveLength(10);
    expect(runsOfSplit(manifest, 'train')).toHaveLength(6);
    expect(runsOfSplit(manifest, 'val')).toHaveLength(2);
    expect(runsOfSplit(manifest, 'test')).toHaveLength(2);
  });

  it('runs load with normalized events, scaled images, and truth', () => {
    const manifest = loadManifest(datasetDir);
    for (const entry of manifest.runs) {
      const s = loadRun(datasetDir, entry);
      expect(s.mask.length).toBe(4096);
      expect(s.events.length).toBe(4096 * N_FEATURES);
      let real = 0;
      for (const m of s.mask) real += m;
      expect(real).toBe(Math.max(1, Math.min(s.nEvents, 4096)));
      for (let i = 0; i < s.nEvents * N_FEATURES && i < s.events.length; i++) {
        expect(s.events[i]).toBeGreaterThanOrEqual(0);
        expect(s.events[i]).toBeLessThanOrEqual(1);
      }
      for (const img of [s.images, s.target]) {
        let peak = 0;
        for (const v of img) peak = Math.max(peak, v);
        expect(peak).toBeLessThanOrEqual(1);
      }
      expect(s.truth.direction).toHaveLength(3);
      expect(s.truth.duration_s).toBe(entry.duration_s);
    }
  });

  it('ablation masks are a lazy view: segments zeroed, files untouched', () => {
    const manifest = loadManifest(datasetDir);
    const entry = runsOfSplit(manifest, 'train')[0];
    const before = readFileSync(join(datasetDir, entry.path, 'events.bin'));
    const plain = loadRun(datasetDir, entry);
    const masked = loadRun(datasetDir, entry, { bgo: true, pinholeImage: true });
    for (let row = 0; row < plain.nEvents; row++) {
      for (let col = 0; col < N_FEATURES; col++) {
        const v = masked.events[row * N_FEATURES + col];
        if (col >= 12) expect(v).toBe(0);
        else expect(v).toBe(plain.events[row * N_FEATURES + col]);
      }
    }
    for (let i = 0; i < MAP_SIZE * MAP_SIZE; i++) {
      expect(masked.images[i * 2 + 1]).toBe(0); // pinhole channel zeroed
      expect(masked.images[i * 2]).toBe(plain.images[i * 2]); // compton intact
    }
    const after = readFileSync(join(datasetDir, entry.path, 'events.bin'));
    expect(after.equals(before)).toBe(true);
  });

  it('no ablation gives identical arrays', () => {
    const manifest = loadManifest(datasetDir);
    const entry = manifest.runs[0];
    const a = loadRun(datasetDir, entry);
    const b = loadRun(datasetDir, entry, {});
    expect(a.events).toEqual(b.events);
    expect(a.images).toEqual(b.images);
  });
});
