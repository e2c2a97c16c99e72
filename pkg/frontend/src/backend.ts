/**
 * Backend selection: prefer the native tfjs-node binding when installed,
 * then the wasm backend (SIMD + threads), then the plain JS CPU backend.
 * The faster backends are optional dependencies; everything runs (slower)
 * on the pure JS fallback.
 */

import * as tf from '@tensorflow/tfjs';

import { registerWasmKernels } from './wasmKernels.js';

let ready: Promise<string> | null = null;

async function tryBackend(module: string, name: string): Promise<boolean> {
  try {
    await import(module);
    return await tf.setBackend(name);
  } catch {
    return false;
  }
}

export function setupBackend(): Promise<string> {
  if (!ready) {
    ready = (async () => {
      if (await tryBackend('@tensorflow/tfjs-node', 'tensorflow')) {
        // native binding: nothing to patch
      } else if (await tryBackend('@tensorflow/tfjs-backend-wasm', 'wasm')) {
        registerWasmKernels();
      } else {
        await tf.setBackend('cpu');
      }
      await tf.ready();
      return tf.getBackend();
    })();
  }
  return ready;
}
