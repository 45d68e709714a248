import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 600_000, // trainer smoke runs real (tiny) optimization on CPU
    hookTimeout: 600_000,
    pool: "forks",
  },
});
