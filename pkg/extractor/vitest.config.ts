import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // tfjs's CPU backend is slow to warm up; individual tests set their own
    // timeouts where inference is involved
    testTimeout: 15_000,
  },
});
