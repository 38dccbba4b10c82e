import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['src/**/*.test.ts'],
    testTimeout: 600_000,
    hookTimeout: 600_000,
    // tfjs inference on CPU is the bottleneck; one worker avoids thrashing
    pool: 'forks',
    fileParallelism: false,
  },
});
