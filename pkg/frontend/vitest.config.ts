import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['test/**/*.test.ts'],
    testTimeout: 600_000,
    hookTimeout: 600_000,
    // tfjs keeps global engine state; run files one at a time
    fileParallelism: false,
    pool: 'forks',
  },
});
