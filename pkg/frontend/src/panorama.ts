/** Panorama panel: construction form, job polling, layered mosaic and
 * overlay images, and the visualization menu.
 *
 * The mosaic and the detection overlay are separate stacked images;
 * every visualization-menu change re-requests only the overlay. The
 * frame-outline highlight is drawn client-side from the placement
 * report's quads, so it costs no request at all.
 */

import { ApiClient, OverlayStyle, PanoramaParams, PanoramaReport } from './api.js';
import type { Store } from './state.js';

const POLL_START_MS = 500;
const POLL_BACKOFF = 1.5;
const POLL_MAX_MS = 5000;

type Sleep = (ms: number) => Promise<void>;

const realSleep: Sleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export class PanoramaPanel {
  readonly root: HTMLElement;
  readonly form: {
    stride: HTMLInputElement;
    base: HTMLInputElement;
    detector: HTMLSelectElement;
    loweRatio: HTMLInputElement;
    ransacThresh: HTMLInputElement;
    alpha: HTMLInputElement;
    stretchFilter: HTMLInputElement;
    flipFilter: HTMLInputElement;
    seed: HTMLInputElement;
    generate: HTMLButtonElement;
  };
  readonly viz: {
    style: HTMLSelectElement;
    minConfidence: HTMLInputElement;
    labelBoxes: HTMLElement;
    highlight: HTMLInputElement;
  };
  private readonly status: HTMLElement;
  private readonly panoramaImg: HTMLImageElement;
  private readonly overlayImg: HTMLImageElement;
  private readonly highlightSvg: SVGSVGElement;
  private readonly excludedList: HTMLElement;
  private report: PanoramaReport | null = null;
  private readonly sleep: Sleep;
  onBuilt: (panoramaId: string) => void = () => undefined;

  constructor(
    private readonly api: ApiClient,
    private readonly store: Store,
    options: { sleep?: Sleep } = {},
    doc: Document = document,
  ) {
    this.sleep = options.sleep ?? realSleep;
    this.root = doc.createElement('section');
    this.root.className = 'panorama-panel';

    const form = doc.createElement('form');
    form.className = 'construction-menu';
    const input = (name: string, value: string, type = 'number'): HTMLInputElement => {
      const el = doc.createElement('input');
      el.type = type;
      el.name = name;
      el.value = value;
      el.className = `param-${name}`;
      form.append(label(doc, name), el);
      return el;
    };
    const label = (d: Document, text: string): HTMLLabelElement => {
      const el = d.createElement('label');
      el.textContent = text;
      return el;
    };

    const detector = doc.createElement('select');
    detector.className = 'param-detector';
    for (const kind of ['orb', 'brisk', 'kaze', 'akaze']) {
      const option = doc.createElement('option');
      option.value = kind;
      option.textContent = kind.toUpperCase();
      detector.append(option);
    }
    form.append(label(doc, 'detector'), detector);

    this.form = {
      detector,
      stride: input('stride', '1'),
      base: input('base', '', 'text'),
      loweRatio: input('lowe-ratio', '0.75'),
      ransacThresh: input('ransac-thresh', '3.0'),
      alpha: input('alpha', '1.0'),
      stretchFilter: input('filter-stretch', '', 'checkbox'),
      flipFilter: input('filter-flips', '', 'checkbox'),
      seed: input('seed', '0'),
      generate: doc.createElement('button'),
    };
    this.form.stretchFilter.checked = true;
    this.form.flipFilter.checked = true;
    this.form.generate.type = 'submit';
    this.form.generate.className = 'generate';
    this.form.generate.textContent = 'Generate panorama';
    form.append(this.form.generate);
    form.addEventListener('submit', (event) => {
      event.preventDefault();
      void this.generate();
    });

    this.status = doc.createElement('p');
    this.status.className = 'build-status';

    const stage = doc.createElement('div');
    stage.className = 'panorama-stage';
    this.panoramaImg = doc.createElement('img');
    this.panoramaImg.className = 'panorama-image';
    this.overlayImg = doc.createElement('img');
    this.overlayImg.className = 'overlay-image';
    this.highlightSvg = doc.createElementNS('http://www.w3.org/2000/svg', 'svg');
    this.highlightSvg.classList.add('highlight-layer');
    stage.append(this.panoramaImg, this.overlayImg, this.highlightSvg);

    const viz = doc.createElement('div');
    viz.className = 'visualization-menu';
    const style = doc.createElement('select');
    style.className = 'viz-style';
    for (const name of ['boxes', 'centroids', 'arrows']) {
      const option = doc.createElement('option');
      option.value = name;
      option.textContent = name;
      style.append(option);
    }
    const minConfidence = doc.createElement('input');
    minConfidence.type = 'range';
    minConfidence.min = '0';
    minConfidence.max = '1';
    minConfidence.step = '0.05';
    minConfidence.value = '0';
    minConfidence.className = 'viz-min-confidence';
    const labelBoxes = doc.createElement('div');
    labelBoxes.className = 'viz-labels';
    const highlight = doc.createElement('input');
    highlight.type = 'range';
    highlight.className = 'viz-highlight';
    viz.append(label(doc, 'style'), style, label(doc, 'min confidence'), minConfidence,
               labelBoxes, label(doc, 'highlight frame'), highlight);
    this.viz = { style, minConfidence, labelBoxes, highlight };

    style.addEventListener('change', () => void this.applyOverlaySpec());
    minConfidence.addEventListener('change', () => void this.applyOverlaySpec());
    highlight.addEventListener('input', () => this.drawHighlight(Number(highlight.value)));

    this.excludedList = doc.createElement('ul');
    this.excludedList.className = 'excluded-frames';

    this.root.append(form, this.status, stage, viz, this.excludedList);
  }

  setVocabulary(labels: string[]): void {
    const doc = this.root.ownerDocument;
    this.viz.labelBoxes.textContent = '';
    for (const name of labels) {
      const wrap = doc.createElement('label');
      wrap.className = 'viz-label-option';
      const box = doc.createElement('input');
      box.type = 'checkbox';
      box.checked = true;
      box.value = name;
      box.addEventListener('change', () => void this.applyOverlaySpec());
      wrap.append(box, doc.createTextNode(name));
      this.viz.labelBoxes.append(wrap);
    }
  }

  private collectParams(): PanoramaParams {
    const [lo, hi] = this.store.get().range;
    const baseRaw = this.form.base.value.trim();
    return {
      frame_range: [lo, hi],
      base_frame_id: baseRaw === '' ? null : Number(baseRaw),
      detector_kind: this.form.detector.value,
      lowe_ratio: Number(this.form.loweRatio.value),
      ransac_thresh: Number(this.form.ransacThresh.value),
      alpha: Number(this.form.alpha.value),
      stretch_filter: this.form.stretchFilter.checked,
      flip_filter: this.form.flipFilter.checked,
      seed: Number(this.form.seed.value),
      sample_stride: Number(this.form.stride.value),
    };
  }

  async generate(): Promise<void> {
    const sessionId = this.store.get().sessionId;
    if (!sessionId) return;
    this.status.textContent = 'submitting…';
    try {
      const { job_id } = await this.api.submitPanorama(sessionId, this.collectParams());
      let delay = POLL_START_MS;
      for (;;) {
        const job = await this.api.job(job_id);
        if (job.state === 'done' && job.result) {
          await this.loadPanorama(job.result);
          return;
        }
        if (job.state === 'failed') {
          this.status.textContent = `build failed: ${job.error ?? 'unknown reason'}`;
          return;
        }
        this.status.textContent = `build ${job.state}…`;
        await this.sleep(delay);
        delay = Math.min(delay * POLL_BACKOFF, POLL_MAX_MS);
      }
    } catch (error) {
      this.status.textContent = `build failed: ${(error as Error).message}`;
    }
  }

  private async loadPanorama(panoramaId: string): Promise<void> {
    this.store.update({ panoramaId });
    this.report = await this.api.report(panoramaId);
    this.panoramaImg.src = this.api.panoramaImageUrl(panoramaId);
    this.renderExclusions();
    const included = this.includedFrameIds();
    if (included.length) {
      this.viz.highlight.min = String(Math.min(...included));
      this.viz.highlight.max = String(Math.max(...included));
    }
    this.status.textContent = `panorama ${panoramaId} ready`;
    await this.applyOverlaySpec();
    this.onBuilt(panoramaId);
  }

  includedFrameIds(): number[] {
    return (this.report?.placements ?? [])
      .filter((p) => p.status === 'included')
      .map((p) => p.frame_id);
  }

  /** Re-request the overlay only; the mosaic image is never reloaded. */
  async applyOverlaySpec(): Promise<void> {
    const panoramaId = this.store.get().panoramaId;
    if (!panoramaId) return;
    const checked = Array.from(
      this.viz.labelBoxes.querySelectorAll<HTMLInputElement>('input[type=checkbox]'),
    );
    const selected = checked.filter((b) => b.checked).map((b) => b.value);
    const labels = checked.length && selected.length !== checked.length ? selected : null;
    const spec = {
      style: this.viz.style.value as OverlayStyle,
      minConfidence: Number(this.viz.minConfidence.value),
      labels,
    };
    this.store.update({ overlay: spec });
    const blob = await this.api.fetchOverlay(panoramaId, spec);
    if (typeof URL !== 'undefined' && typeof URL.createObjectURL === 'function') {
      try {
        this.overlayImg.src = URL.createObjectURL(blob);
      } catch {
        this.overlayImg.dataset.bytes = String(blob.size);
      }
    } else {
      this.overlayImg.dataset.bytes = String(blob.size);
    }
  }

  /** Client-side frame outline from the placement report (no request). */
  drawHighlight(frameId: number): void {
    this.store.update({ highlightedFrame: frameId });
    const doc = this.root.ownerDocument;
    this.highlightSvg.textContent = '';
    const placement = this.report?.placements.find((p) => p.frame_id === frameId);
    if (!placement || !placement.quad) return;
    if (this.report) {
      this.highlightSvg.setAttribute(
        'viewBox',
        `0 0 ${this.report.canvas.width} ${this.report.canvas.height}`,
      );
    }
    const polygon = doc.createElementNS('http://www.w3.org/2000/svg', 'polygon');
    polygon.classList.add('highlight-quad');
    polygon.dataset.frameId = String(frameId);
    polygon.setAttribute('points', placement.quad.map(([x, y]) => `${x},${y}`).join(' '));
    polygon.setAttribute('fill', 'none');
    this.highlightSvg.append(polygon);
  }

  private renderExclusions(): void {
    const doc = this.root.ownerDocument;
    this.excludedList.textContent = '';
    for (const placement of this.report?.placements ?? []) {
      if (placement.status !== 'excluded') continue;
      const item = doc.createElement('li');
      item.className = 'excluded-frame';
      item.dataset.frameId = String(placement.frame_id);
      item.textContent = `frame ${placement.frame_id}: ${placement.reason ?? 'excluded'}`;
      this.excludedList.append(item);
    }
  }
}
