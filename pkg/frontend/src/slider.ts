/** Annotated range slider: dual-handle frame selection with event ticks.
 *
 * Ticks mark points of interest (green = new label, orange = duplicates,
 * red = label gone missing); hovering a tick reveals its detail text.
 */

import type { POIEvent } from './api.js';

const TICK_CLASS: Record<string, string> = {
  NewLabel: 'tick-new',
  DuplicateLabel: 'tick-duplicate',
  MissingLabel: 'tick-missing',
};

export class AnnotatedRangeSlider {
  readonly root: HTMLElement;
  private readonly lowInput: HTMLInputElement;
  private readonly highInput: HTMLInputElement;
  private readonly tickLane: HTMLElement;
  private readonly tooltip: HTMLElement;
  private readonly label: HTMLElement;
  private frameIds: number[] = [];
  onRange: (lo: number, hi: number) => void = () => undefined;

  constructor(doc: Document = document) {
    this.root = doc.createElement('div');
    this.root.className = 'range-slider';

    this.tickLane = doc.createElement('div');
    this.tickLane.className = 'tick-lane';

    this.tooltip = doc.createElement('div');
    this.tooltip.className = 'tick-tooltip';
    this.tooltip.hidden = true;

    this.lowInput = doc.createElement('input');
    this.highInput = doc.createElement('input');
    for (const [input, name] of [
      [this.lowInput, 'range-low'],
      [this.highInput, 'range-high'],
    ] as const) {
      input.type = 'range';
      input.className = name;
      input.addEventListener('input', () => this.handleDrag());
    }

    this.label = doc.createElement('span');
    this.label.className = 'range-label';

    this.root.append(this.tickLane, this.tooltip, this.lowInput, this.highInput, this.label);
  }

  setFrames(frameIds: number[]): void {
    this.frameIds = frameIds;
    const min = String(frameIds[0] ?? 0);
    const max = String(frameIds[frameIds.length - 1] ?? 0);
    for (const input of [this.lowInput, this.highInput]) {
      input.min = min;
      input.max = max;
    }
    this.lowInput.value = min;
    this.highInput.value = max;
    this.updateLabel();
  }

  range(): [number, number] {
    return [Number(this.lowInput.value), Number(this.highInput.value)];
  }

  setRange(lo: number, hi: number): void {
    this.lowInput.value = String(Math.min(lo, hi));
    this.highInput.value = String(Math.max(lo, hi));
    this.updateLabel();
  }

  renderTicks(events: POIEvent[]): void {
    this.tickLane.textContent = '';
    const first = this.frameIds[0] ?? 0;
    const last = this.frameIds[this.frameIds.length - 1] ?? 1;
    const span = Math.max(last - first, 1);
    for (const event of events) {
      const tick = this.tickLane.ownerDocument.createElement('span');
      tick.className = `tick ${TICK_CLASS[event.kind] ?? 'tick-unknown'}`;
      tick.style.left = `${(100 * (event.frame_id - first)) / span}%`;
      tick.dataset.kind = event.kind;
      tick.dataset.frameId = String(event.frame_id);
      tick.dataset.label = event.label;
      tick.dataset.detail = event.detail;
      tick.addEventListener('mouseenter', () => {
        this.tooltip.textContent = `${event.label} @ frame ${event.frame_id}: ${event.detail}`;
        this.tooltip.hidden = false;
      });
      tick.addEventListener('mouseleave', () => {
        this.tooltip.hidden = true;
      });
      this.tickLane.append(tick);
    }
  }

  private handleDrag(): void {
    let [lo, hi] = [Number(this.lowInput.value), Number(this.highInput.value)];
    if (lo > hi) {
      [lo, hi] = [hi, lo];
      this.lowInput.value = String(lo);
      this.highInput.value = String(hi);
    }
    this.updateLabel();
    this.onRange(lo, hi);
  }

  /** Linked-view hook: pull the nearest handle to the clicked frame. */
  moveNearestHandle(frameId: number): void {
    const [lo, hi] = this.range();
    if (Math.abs(frameId - lo) <= Math.abs(frameId - hi)) {
      this.lowInput.value = String(Math.min(frameId, hi));
    } else {
      this.highInput.value = String(Math.max(frameId, lo));
    }
    this.handleDrag();
  }

  private updateLabel(): void {
    const [lo, hi] = this.range();
    this.label.textContent = `frames ${lo}–${hi}`;
  }
}
