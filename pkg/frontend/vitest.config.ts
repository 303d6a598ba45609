import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'node',
    testTimeout: 30_000,
    hookTimeout: 60_000,
    // The integration suite spawns real service processes on fixed ports;
    // keep files sequential so the two suites never race on them.
    fileParallelism: false,
  },
});
