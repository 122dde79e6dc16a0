/** Application wiring: open a session, then keep the annotated slider,
 * timeline views, and panorama panel linked through the shared store. */

import { ApiClient } from './api.js';
import { PanoramaPanel } from './panorama.js';
import { AnnotatedRangeSlider } from './slider.js';
import { Store } from './state.js';
import { TimelineView } from './timeline.js';

export interface App {
  store: Store;
  slider: AnnotatedRangeSlider;
  timeline: TimelineView;
  panorama: PanoramaPanel;
  openSession(root: string): Promise<void>;
}

export function createApp(
  container: HTMLElement,
  api: ApiClient = new ApiClient(),
  options: { sleep?: (ms: number) => Promise<void>; missingThreshold?: number } = {},
): App {
  const doc = container.ownerDocument;
  const store = new Store();
  const slider = new AnnotatedRangeSlider(doc);
  const timeline = new TimelineView(doc);
  const panorama = new PanoramaPanel(api, store, { sleep: options.sleep }, doc);
  const missingThreshold = options.missingThreshold ?? 15;

  const sessionForm = doc.createElement('form');
  sessionForm.className = 'session-form';
  const rootInput = doc.createElement('input');
  rootInput.type = 'text';
  rootInput.className = 'session-root';
  rootInput.placeholder = 'session directory on the server';
  const openButton = doc.createElement('button');
  openButton.type = 'submit';
  openButton.textContent = 'Open session';
  sessionForm.append(rootInput, openButton);
  sessionForm.addEventListener('submit', (event) => {
    event.preventDefault();
    void app.openSession(rootInput.value);
  });

  container.append(sessionForm, slider.root, timeline.root, panorama.root);

  // slider drag -> store -> timeline selection bars (linked views)
  slider.onRange = (lo, hi) => store.setRange(lo, hi);
  store.subscribe((state, changed) => {
    if (changed.has('range')) {
      timeline.setSelection(state.range[0], state.range[1]);
      slider.setRange(state.range[0], state.range[1]);
    }
  });
  // clicking a timeline column pulls the nearest slider handle to it
  timeline.onSelectFrame = (frameId) => slider.moveNearestHandle(frameId);

  panorama.onBuilt = (panoramaId) => {
    void api.distance(panoramaId).then((doc_) => timeline.setDistance(doc_.series));
  };

  const app: App = {
    store,
    slider,
    timeline,
    panorama,
    async openSession(root: string): Promise<void> {
      const opened = await api.openSession(root);
      const meta = await api.meta(opened.session_id);
      store.update({ sessionId: opened.session_id, frameIds: meta.frame_ids });
      slider.setFrames(meta.frame_ids);
      panorama.setVocabulary(meta.vocabulary);

      const [events, confidence, iou, classification] = await Promise.all([
        api.events(opened.session_id, missingThreshold),
        api.summary(opened.session_id, 'confidence'),
        api.summary(opened.session_id, 'iou'),
        api.classification(opened.session_id),
      ]);
      slider.renderTicks(events);
      timeline.setSummary(confidence, iou);
      timeline.setClassification(classification);
      timeline.setDistance([]);
      store.setRange(meta.frame_ids[0], meta.frame_ids[meta.frame_ids.length - 1]);
    },
  };
  return app;
}

declare global {
  interface Window {
    panovisApp?: App;
  }
}

if (typeof document !== 'undefined' && document.getElementById('panovis-root')) {
  const container = document.getElementById('panovis-root') as HTMLElement;
  window.panovisApp = createApp(container);
}
