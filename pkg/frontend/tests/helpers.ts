import { createApp, type App } from '../src/main.js';
import { ApiClient } from '../src/api.js';
import { installMockApi, type MockApi } from './mockApi.js';

export interface Harness {
  app: App;
  container: HTMLElement;
  mock: MockApi;
}

export async function bootApp(
  overrides: Parameters<typeof installMockApi>[0] = {},
): Promise<Harness> {
  const mock = installMockApi(overrides);
  const container = document.createElement('div');
  document.body.append(container);
  const app = createApp(container, new ApiClient(''), {
    sleep: () => Promise.resolve(),
    missingThreshold: 5,
  });
  await app.openSession('/fixtures/session');
  return { app, container, mock };
}

export function teardown(harness: Harness): void {
  harness.mock.restore();
  harness.container.remove();
}
