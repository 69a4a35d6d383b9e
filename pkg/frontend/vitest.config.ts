import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    testTimeout: 20_000,
    hookTimeout: 40_000,
    // the e2e test spawns one real server; keep files sequential
    fileParallelism: false,
  },
});
