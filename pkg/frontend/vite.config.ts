import { defineConfig } from "vitest/config";

// The dev server proxies API routes to a locally running `decomp serve`,
// so the console and the service stay same-origin.
export default defineConfig({
  server: {
    proxy: {
      "/sessions": "http://127.0.0.1:8765",
      "/healthz": "http://127.0.0.1:8765",
    },
  },
  test: {
    environment: "node",
  },
});
