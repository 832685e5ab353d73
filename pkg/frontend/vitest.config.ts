import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    testTimeout: 60_000,
    hookTimeout: 60_000,
    // The round-trip suites each own one spawned service; keep files serial
    // so two servers never race on fixture generation resources.
    fileParallelism: false,
  },
});
