import { defineConfig } from 'vitest/config';

import { serviceBaseUrl } from './tests/port';

export default defineConfig({
  test: {
    environment: 'happy-dom',
    environmentOptions: {
      happyDOM: {
        url: serviceBaseUrl(),
      },
    },
    globalSetup: './tests/service.setup.ts',
    testTimeout: 30_000,
    hookTimeout: 60_000,
  },
});
