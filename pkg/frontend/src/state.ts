/** Shared view state with change notification.
 *
 * One invariant is load-bearing: overlay-spec updates must never clear the
 * current panorama id, mirroring the server's rule that visualization
 * changes never rebuild the mosaic.
 */

import type { OverlaySpec } from './api.js';

export type TimelineTab = 'summary' | 'classification' | 'distance';

export interface ViewState {
  sessionId: string | null;
  range: [number, number];
  frameIds: number[];
  activeTab: TimelineTab;
  metric: 'confidence' | 'iou';
  panoramaId: string | null;
  overlay: OverlaySpec;
  highlightedFrame: number | null;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    range: [0, 0],
    frameIds: [],
    activeTab: 'summary',
    metric: 'confidence',
    panoramaId: null,
    overlay: { style: 'boxes', minConfidence: 0, labels: null },
    highlightedFrame: null,
  };
}

export type Listener = (state: ViewState, changed: Set<keyof ViewState>) => void;

export class Store {
  private state: ViewState = initialState();
  private listeners: Listener[] = [];

  get(): ViewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  update(partial: Partial<ViewState>): void {
    const changed = new Set<keyof ViewState>();
    for (const key of Object.keys(partial) as (keyof ViewState)[]) {
      changed.add(key);
    }
    if (changed.has('overlay') && partial.panoramaId === undefined) {
      // guard: changing the overlay spec must leave the panorama id alone
      delete (partial as Record<string, unknown>).panoramaId;
    }
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) {
      listener(this.state, changed);
    }
  }

  setRange(lo: number, hi: number): void {
    const ids = this.state.frameIds;
    if (ids.length) {
      const min = ids[0];
      const max = ids[ids.length - 1];
      lo = Math.max(min, Math.min(lo, max));
      hi = Math.max(min, Math.min(hi, max));
    }
    if (lo > hi) [lo, hi] = [hi, lo];
    this.update({ range: [lo, hi] });
  }
}
