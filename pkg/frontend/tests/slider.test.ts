import { afterEach, describe, expect, it } from 'vitest';

import type { POIEvent } from '../src/api.js';
import { bootApp, teardown, type Harness } from './helpers.js';

let harness: Harness;

afterEach(() => teardown(harness));

describe('annotated range slider', () => {
  it('renders one tick per event, classed by kind', async () => {
    harness = await bootApp();
    const events = harness.mock.events as POIEvent[];
    const ticks = harness.container.querySelectorAll<HTMLElement>('.tick');
    expect(ticks.length).toBe(events.length);

    const byKind = (kind: string) =>
      harness.container.querySelectorAll(`.tick[data-kind="${kind}"]`).length;
    expect(byKind('NewLabel')).toBe(events.filter((e) => e.kind === 'NewLabel').length);
    expect(byKind('DuplicateLabel')).toBe(events.filter((e) => e.kind === 'DuplicateLabel').length);
    expect(byKind('MissingLabel')).toBe(events.filter((e) => e.kind === 'MissingLabel').length);

    expect(harness.container.querySelectorAll('.tick-new').length).toBe(byKind('NewLabel'));
    expect(harness.container.querySelectorAll('.tick-duplicate').length).toBe(byKind('DuplicateLabel'));
    expect(harness.container.querySelectorAll('.tick-missing').length).toBe(byKind('MissingLabel'));
  });

  it('positions ticks proportionally along the frame axis', async () => {
    harness = await bootApp({
      events: [{ kind: 'NewLabel', frame_id: 12, label: 'mug', detail: 'first predicted appearance' }],
    });
    const tick = harness.container.querySelector<HTMLElement>('.tick')!;
    const frameCount = harness.app.store.get().frameIds.length;
    const expected = (100 * 12) / (frameCount - 1);
    expect(parseFloat(tick.style.left)).toBeCloseTo(expected, 5);
  });

  it('reveals the event detail on hover', async () => {
    harness = await bootApp();
    const events = harness.mock.events as POIEvent[];
    const duplicate = events.find((e) => e.kind === 'DuplicateLabel')!;
    const tick = harness.container.querySelector<HTMLElement>(
      `.tick[data-kind="DuplicateLabel"][data-frame-id="${duplicate.frame_id}"]`,
    )!;
    const tooltip = harness.container.querySelector<HTMLElement>('.tick-tooltip')!;
    expect(tooltip.hidden).toBe(true);

    tick.dispatchEvent(new Event('mouseenter'));
    expect(tooltip.hidden).toBe(false);
    expect(tooltip.textContent).toContain(duplicate.detail);
    expect(tooltip.textContent).toContain(duplicate.label);

    tick.dispatchEvent(new Event('mouseleave'));
    expect(tooltip.hidden).toBe(true);
  });

  it('renders a plain slider when there are no events', async () => {
    harness = await bootApp({ events: [] });
    expect(harness.container.querySelectorAll('.tick').length).toBe(0);
    expect(harness.container.querySelector('.range-low')).toBeTruthy();
    expect(harness.container.querySelector('.range-high')).toBeTruthy();
  });
});
