/** Timeline view: summary-matrix heatmap, classification bars, distance
 * chart, with a metric toggle and selection bars linked to the slider.
 *
 * Rendered as plain DOM / SVG so the charts stay inspectable in tests and
 * dev tools; at debugging scale (tens of frames) that is also plenty fast.
 */

import type {
  ClassificationRow,
  DistanceSeries,
  SummaryMatrix,
} from './api.js';
import type { TimelineTab } from './state.js';

const CLASS_COLORS: Record<string, string> = {
  tp: '#2e9e4f',
  tn: '#9dd3a8',
  fp: '#d6452c',
  fn: '#e8a12f',
};

export class TimelineView {
  readonly root: HTMLElement;
  private readonly tabs: Record<TimelineTab, HTMLButtonElement>;
  private readonly panels: Record<TimelineTab, HTMLElement>;
  private readonly metricButtons: { confidence: HTMLButtonElement; iou: HTMLButtonElement };
  private readonly selectionBars: { lo: HTMLElement; hi: HTMLElement };
  private matrices: { confidence?: SummaryMatrix; iou?: SummaryMatrix } = {};
  private frameIds: number[] = [];
  private activeMetric: 'confidence' | 'iou' = 'confidence';
  onSelectFrame: (frameId: number) => void = () => undefined;
  onTabChange: (tab: TimelineTab) => void = () => undefined;

  constructor(doc: Document = document) {
    this.root = doc.createElement('section');
    this.root.className = 'timeline-view';

    const tabBar = doc.createElement('nav');
    tabBar.className = 'timeline-tabs';
    this.tabs = {
      summary: doc.createElement('button'),
      classification: doc.createElement('button'),
      distance: doc.createElement('button'),
    };
    this.tabs.summary.textContent = 'Summary Matrix';
    this.tabs.classification.textContent = 'Detection Classification';
    this.tabs.distance.textContent = 'Distance';
    for (const [name, button] of Object.entries(this.tabs) as [TimelineTab, HTMLButtonElement][]) {
      button.className = `tab tab-${name}`;
      button.addEventListener('click', () => this.showTab(name));
      tabBar.append(button);
    }

    this.metricButtons = {
      confidence: doc.createElement('button'),
      iou: doc.createElement('button'),
    };
    this.metricButtons.confidence.textContent = 'confidence';
    this.metricButtons.iou.textContent = 'IoU';
    for (const metric of ['confidence', 'iou'] as const) {
      const button = this.metricButtons[metric];
      button.className = `metric-toggle metric-${metric}`;
      button.addEventListener('click', () => this.setMetric(metric));
    }

    this.panels = {
      summary: doc.createElement('div'),
      classification: doc.createElement('div'),
      distance: doc.createElement('div'),
    };
    this.panels.summary.className = 'panel panel-summary';
    this.panels.classification.className = 'panel panel-classification';
    this.panels.distance.className = 'panel panel-distance';

    const body = doc.createElement('div');
    body.className = 'timeline-body';
    body.append(this.panels.summary, this.panels.classification, this.panels.distance);

    this.selectionBars = { lo: doc.createElement('div'), hi: doc.createElement('div') };
    this.selectionBars.lo.className = 'selection-bar selection-lo';
    this.selectionBars.hi.className = 'selection-bar selection-hi';
    body.append(this.selectionBars.lo, this.selectionBars.hi);

    this.root.append(tabBar, this.metricButtons.confidence, this.metricButtons.iou, body);
    this.showTab('summary');
  }

  showTab(tab: TimelineTab): void {
    for (const [name, panel] of Object.entries(this.panels) as [TimelineTab, HTMLElement][]) {
      panel.hidden = name !== tab;
      this.tabs[name].classList.toggle('active', name === tab);
    }
    this.onTabChange(tab);
  }

  setSummary(confidence: SummaryMatrix, iou: SummaryMatrix): void {
    this.matrices = { confidence, iou };
    this.frameIds = confidence.frame_ids;
    this.renderHeatmap();
  }

  setMetric(metric: 'confidence' | 'iou'): void {
    this.activeMetric = metric;
    this.renderHeatmap();
  }

  metric(): 'confidence' | 'iou' {
    return this.activeMetric;
  }

  private renderHeatmap(): void {
    const matrix = this.matrices[this.activeMetric];
    const panel = this.panels.summary;
    panel.textContent = '';
    if (!matrix) return;
    const doc = panel.ownerDocument;
    this.metricButtons.confidence.classList.toggle('active', this.activeMetric === 'confidence');
    this.metricButtons.iou.classList.toggle('active', this.activeMetric === 'iou');
    for (let row = 0; row < matrix.labels.length; row++) {
      const rowEl = doc.createElement('div');
      rowEl.className = 'heatmap-row';
      const tag = doc.createElement('span');
      tag.className = 'heatmap-label';
      tag.textContent = matrix.labels[row];
      rowEl.append(tag);
      for (let col = 0; col < matrix.frame_ids.length; col++) {
        const value = matrix.values[row][col];
        const cell = doc.createElement('span');
        cell.className = 'heatmap-cell';
        cell.dataset.label = matrix.labels[row];
        cell.dataset.frameId = String(matrix.frame_ids[col]);
        cell.dataset.value = value === null ? '' : value.toFixed(4);
        const intensity = value === null ? 0 : value;
        cell.style.backgroundColor = `rgba(30, 90, 190, ${intensity.toFixed(4)})`;
        cell.addEventListener('click', () => this.onSelectFrame(matrix.frame_ids[col]));
        rowEl.append(cell);
      }
      panel.append(rowEl);
    }
  }

  setClassification(rows: ClassificationRow[]): void {
    const panel = this.panels.classification;
    panel.textContent = '';
    const doc = panel.ownerDocument;
    const peak = Math.max(1, ...rows.map((r) => r.tp + r.fp + r.fn + r.tn));
    for (const row of rows) {
      const column = doc.createElement('div');
      column.className = 'class-column';
      column.dataset.frameId = String(row.frame_id);
      for (const part of ['tp', 'fp', 'fn', 'tn'] as const) {
        const segment = doc.createElement('div');
        segment.className = `class-segment class-${part}`;
        segment.dataset.count = String(row[part]);
        segment.style.height = `${(100 * row[part]) / peak}%`;
        segment.style.backgroundColor = CLASS_COLORS[part];
        segment.title = `${part.toUpperCase()}: ${row[part]}`;
        column.append(segment);
      }
      column.addEventListener('click', () => this.onSelectFrame(row.frame_id));
      panel.append(column);
    }
  }

  setDistance(series: DistanceSeries[]): void {
    const panel = this.panels.distance;
    panel.textContent = '';
    const doc = panel.ownerDocument;
    if (!series.length) {
      const empty = doc.createElement('p');
      empty.className = 'distance-empty';
      empty.textContent = 'Generate a panorama to populate the distance view.';
      panel.append(empty);
      return;
    }
    const svg = doc.createElementNS('http://www.w3.org/2000/svg', 'svg');
    svg.setAttribute('viewBox', '0 0 600 160');
    svg.classList.add('distance-chart');
    const maxDistance = Math.max(1e-9, ...series.flatMap((s) => s.steps.map((st) => st.distance)));
    const first = this.frameIds[0] ?? 0;
    const span = Math.max((this.frameIds[this.frameIds.length - 1] ?? 1) - first, 1);
    for (const entry of series) {
      const line = doc.createElementNS('http://www.w3.org/2000/svg', 'polyline');
      line.classList.add('distance-line');
      line.dataset.label = entry.label;
      const points = entry.steps
        .map((step) => {
          const x = (600 * (step.to_frame_id - first)) / span;
          const y = 160 - (150 * step.distance) / maxDistance;
          return `${x.toFixed(1)},${y.toFixed(1)}`;
        })
        .join(' ');
      line.setAttribute('points', points);
      line.setAttribute('fill', 'none');
      svg.append(line);
    }
    panel.append(svg);
  }

  /** Vertical bars marking the slider selection, linked across views. */
  setSelection(lo: number, hi: number): void {
    const first = this.frameIds[0] ?? 0;
    const span = Math.max((this.frameIds[this.frameIds.length - 1] ?? 1) - first, 1);
    this.selectionBars.lo.style.left = `${(100 * (lo - first)) / span}%`;
    this.selectionBars.hi.style.left = `${(100 * (hi - first)) / span}%`;
    this.selectionBars.lo.dataset.frameId = String(lo);
    this.selectionBars.hi.dataset.frameId = String(hi);
  }

  selection(): [number, number] {
    return [
      Number(this.selectionBars.lo.dataset.frameId ?? 0),
      Number(this.selectionBars.hi.dataset.frameId ?? 0),
    ];
  }
}
