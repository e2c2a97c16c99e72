/**
 * Readers and writers for the ccbox binary file formats.
 *
 * Event files (CCEVT001): 8-byte magic, uint32 LE row count, then rows of
 * 16 little-endian float32 features already normalized to [0, 1].
 * Sky maps (CCIMG001): 8-byte magic, uint32 LE width and height, then
 * width*height little-endian float32 values in row-major order.
 */

import { readFileSync, writeFileSync } from 'node:fs';

export const EVENTS_MAGIC = 'CCEVT001';
export const IMAGE_MAGIC = 'CCIMG001';
export const N_FEATURES = 16;
export const MAP_SIZE = 256;

export class FormatError extends Error {}

function checkMagic(buf: Buffer, magic: string, path: string): void {
  if (buf.length < magic.length || buf.toString('latin1', 0, magic.length) !== magic) {
    throw new FormatError(`${path}: bad magic`);
  }
}

/** Read a CCEVT001 file into a flat Float32Array of n*16 features plus n. */
export function readEvents(path: string): { features: Float32Array; count: number } {
  const buf = readFileSync(path);
  checkMagic(buf, EVENTS_MAGIC, path);
  if (buf.length < 12) throw new FormatError(`${path}: truncated header`);
  const count = buf.readUInt32LE(8);
  const payload = buf.subarray(12);
  if (payload.length !== count * N_FEATURES * 4) {
    throw new FormatError(`${path}: payload size does not match header count ${count}`);
  }
  // copy out of the Buffer so the typed array owns aligned memory
  const features = new Float32Array(count * N_FEATURES);
  for (let i = 0; i < features.length; i++) {
    features[i] = payload.readFloatLE(i * 4);
  }
  return { features, count };
}

export function writeEvents(features: Float32Array, count: number, path: string): void {
  if (features.length !== count * N_FEATURES) {
    throw new FormatError(`feature array length ${features.length} != ${count}*16`);
  }
  const buf = Buffer.alloc(8 + 4 + features.length * 4);
  buf.write(EVENTS_MAGIC, 0, 'latin1');
  buf.writeUInt32LE(count, 8);
  for (let i = 0; i < features.length; i++) {
    buf.writeFloatLE(features[i], 12 + i * 4);
  }
  writeFileSync(path, buf);
}

/** Read a CCIMG001 sky map into a row-major Float32Array of 256*256 values. */
export function readMap(path: string): Float32Array {
  const buf = readFileSync(path);
  checkMagic(buf, IMAGE_MAGIC, path);
  if (buf.length < 16) throw new FormatError(`${path}: truncated header`);
  const width = buf.readUInt32LE(8);
  const height = buf.readUInt32LE(12);
  if (width !== MAP_SIZE || height !== MAP_SIZE) {
    throw new FormatError(`${path}: unexpected dimensions ${width}x${height}`);
  }
  const payload = buf.subarray(16);
  if (payload.length !== width * height * 4) {
    throw new FormatError(`${path}: payload size mismatch`);
  }
  const values = new Float32Array(width * height);
  for (let i = 0; i < values.length; i++) {
    values[i] = payload.readFloatLE(i * 4);
  }
  return values;
}

/** Write a 256x256 row-major map as CCIMG001, byte-compatible with readMap. */
export function writeMap(values: Float32Array, path: string): void {
  if (values.length !== MAP_SIZE * MAP_SIZE) {
    throw new FormatError(`map length ${values.length} != ${MAP_SIZE * MAP_SIZE}`);
  }
  const buf = Buffer.alloc(16 + values.length * 4);
  buf.write(IMAGE_MAGIC, 0, 'latin1');
  buf.writeUInt32LE(MAP_SIZE, 8);
  buf.writeUInt32LE(MAP_SIZE, 12);
  for (let i = 0; i < values.length; i++) {
    buf.writeFloatLE(values[i], 16 + i * 4);
  }
  writeFileSync(path, buf);
}
