export * from './formats.js';
export * from './dataset.js';
export * from './metrics.js';
export * from './models.js';
export * from './train.js';
export * from './ensemble.js';
export * from './bank.js';
export * from './backend.js';
export * from './wasmKernels.js';
