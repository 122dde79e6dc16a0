import { afterEach, describe, expect, it } from 'vitest';

import { bootApp, teardown, type Harness } from './helpers.js';
import { flush } from './mockApi.js';

let harness: Harness;

afterEach(() => teardown(harness));

async function buildPanorama(h: Harness): Promise<void> {
  await h.app.panorama.generate();
  await flush();
}

describe('panorama panel', () => {
  it('submits, polls to completion, and shows results', async () => {
    harness = await bootApp({
      jobStates: [
        { state: 'queued', result: null, error: null },
        { state: 'running', result: null, error: null },
        { state: 'done', result: null, error: null },
      ],
    });
    harness.mock.jobStates[2].result = harness.mock.panoramaId;
    await buildPanorama(harness);

    expect(harness.app.store.get().panoramaId).toBe(harness.mock.panoramaId);
    const img = harness.container.querySelector<HTMLImageElement>('.panorama-image')!;
    expect(img.src).toContain(`/panoramas/${harness.mock.panoramaId}/image`);
    expect(harness.mock.requests('GET', /^\/jobs\//).length).toBe(3);
    const excluded = harness.container.querySelectorAll('.excluded-frame');
    expect(excluded.length).toBeGreaterThanOrEqual(0);
  });

  it('includes the drafted alpha in the submitted parameters', async () => {
    harness = await bootApp();
    harness.app.panorama.form.alpha.value = '0.7';
    await buildPanorama(harness);
    const submits = harness.mock.requests('POST', /\/panoramas$/);
    expect(submits.length).toBe(1);
    expect((submits[0].body as { alpha: number }).alpha).toBeCloseTo(0.7);
    expect((submits[0].body as { frame_range: [number, number] }).frame_range).toEqual(
      harness.app.store.get().range,
    );
  });

  it('surfaces the failure reason of a failed job', async () => {
    harness = await bootApp({
      jobStates: [{ state: 'failed', result: null, error: 'NoModelFound: too few matches' }],
    });
    await buildPanorama(harness);
    const status = harness.container.querySelector('.build-status')!;
    expect(status.textContent).toContain('NoModelFound');
    expect(harness.app.store.get().panoramaId).toBeNull();
  });

  it('overlay toggles issue overlay requests only and never rebuild', async () => {
    harness = await bootApp();
    await buildPanorama(harness);
    const img = harness.container.querySelector<HTMLImageElement>('.panorama-image')!;
    const mosaicSrcBefore = img.src;
    harness.mock.log.length = 0;

    const style = harness.container.querySelector<HTMLSelectElement>('.viz-style')!;
    style.value = 'centroids';
    style.dispatchEvent(new Event('change'));
    await flush();

    const minConf = harness.container.querySelector<HTMLInputElement>('.viz-min-confidence')!;
    minConf.value = '0.6';
    minConf.dispatchEvent(new Event('change'));
    await flush();

    const firstLabel = harness.container.querySelector<HTMLInputElement>(
      '.viz-labels input[type=checkbox]',
    )!;
    firstLabel.checked = false;
    firstLabel.dispatchEvent(new Event('change'));
    await flush();

    const overlayRequests = harness.mock.requests('GET', /\/overlay$/);
    expect(overlayRequests.length).toBe(3);
    expect(harness.mock.requests('POST', /\/panoramas$/).length).toBe(0);
    expect(harness.mock.requests('GET', /\/image$/).length).toBe(0);
    expect(img.src).toBe(mosaicSrcBefore);

    const specs = overlayRequests.map((r) => r.query.toString());
    expect(new Set(specs).size).toBe(3);
    expect(overlayRequests[0].query.get('style')).toBe('centroids');
    expect(overlayRequests[1].query.get('min_conf')).toBe('0.6');
    expect(overlayRequests[2].query.get('labels')).toBeTruthy();
  });

  it('overlay spec changes never clear the current panorama id', async () => {
    harness = await bootApp();
    await buildPanorama(harness);
    const before = harness.app.store.get().panoramaId;
    harness.app.store.update({ overlay: { style: 'arrows', minConfidence: 0.2, labels: null } });
    expect(harness.app.store.get().panoramaId).toBe(before);
  });

  it('frame highlight is drawn client-side from report quads, no requests', async () => {
    harness = await bootApp();
    await buildPanorama(harness);
    harness.mock.log.length = 0;

    const included = harness.app.panorama.includedFrameIds();
    const target = included[Math.floor(included.length / 2)];
    harness.app.panorama.drawHighlight(target);

    const quad = harness.container.querySelector<SVGPolygonElement>('.highlight-quad');
    expect(quad).toBeTruthy();
    expect(quad!.dataset.frameId).toBe(String(target));
    expect(quad!.getAttribute('points')!.split(' ').length).toBe(4);
    expect(harness.mock.log.length).toBe(0);
    expect(harness.app.store.get().highlightedFrame).toBe(target);
  });

  it('populates the distance view once a panorama exists', async () => {
    harness = await bootApp();
    expect(harness.container.querySelector('.distance-empty')).toBeTruthy();
    await buildPanorama(harness);
    const lines = harness.container.querySelectorAll('.distance-line');
    expect(lines.length).toBeGreaterThan(0);
    expect(harness.mock.requests('GET', /\/distance$/).length).toBe(1);
  });

  it('lists excluded frames with their reasons from the report', async () => {
    harness = await bootApp();
    await buildPanorama(harness);
    const report = harness.mock.requests('GET', /\/report$/);
    expect(report.length).toBe(1);
    const items = harness.container.querySelectorAll<HTMLElement>('.excluded-frame');
    for (const item of items) {
      expect(item.textContent).toMatch(/frame \d+: \w+/);
    }
  });
});
