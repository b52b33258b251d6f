import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the e2e file drives a spawned simulation server end to end
    testTimeout: 60000,
    hookTimeout: 60000,
  },
});
