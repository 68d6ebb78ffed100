// Plain object config; unit suites run in node, the browser-like suites
// pick happy-dom per file.
export default {
  test: {
    environment: 'node',
    include: ['tests/**/*.test.ts'],
    testTimeout: 30000,
    hookTimeout: 90000,
  },
};
