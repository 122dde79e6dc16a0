/** Typed client for the panovis HTTP API. */

export interface SessionMeta {
  session_id: string;
  frames: number;
  frame_ids: number[];
  width: number;
  height: number;
  time_range: [number, number];
  predictions: number;
  ground_truth: number;
  vocabulary: string[];
}

export type EventKind = 'NewLabel' | 'DuplicateLabel' | 'MissingLabel';

export interface POIEvent {
  kind: EventKind;
  frame_id: number;
  label: string;
  detail: string;
}

export interface SummaryMatrix {
  metric: 'confidence' | 'iou';
  labels: string[];
  frame_ids: number[];
  values: (number | null)[][];
}

export interface ClassificationRow {
  frame_id: number;
  tp: number;
  fp: number;
  fn: number;
  tn: number;
}

export interface DistanceStep {
  from_frame_id: number;
  to_frame_id: number;
  distance: number;
  chain_id: number;
}

export interface DistanceSeries {
  label: string;
  steps: DistanceStep[];
}

export interface DistanceDoc {
  panorama_id: string | null;
  series: DistanceSeries[];
}

export interface PanoramaParams {
  frame_range: [number, number];
  base_frame_id?: number | null;
  detector_kind?: string;
  lowe_ratio?: number;
  ransac_thresh?: number;
  alpha?: number;
  stretch_filter?: boolean;
  flip_filter?: boolean;
  seed?: number;
  sample_stride?: number;
}

export interface JobStatus {
  job_id: string;
  session_id: string;
  state: 'queued' | 'running' | 'done' | 'failed';
  result: string | null;
  error: string | null;
}

export interface PlacementEntry {
  frame_id: number;
  status: 'included' | 'excluded';
  reason: string | null;
  homography: number[] | null;
  quad: [number, number][] | null;
}

export interface PanoramaReport {
  canvas: { width: number; height: number };
  offset: [number, number];
  base_frame_id: number;
  frame_size: [number, number];
  placements: PlacementEntry[];
  filter: {
    kept: number[];
    removed: { frame_id: number; reason: string }[];
    base_guard_applied: boolean;
  };
}

export type OverlayStyle = 'boxes' | 'centroids' | 'arrows';

export interface OverlaySpec {
  style: OverlayStyle;
  minConfidence: number;
  labels: string[] | null;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { error?: { message?: string } };
      detail = body.error?.message ?? detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private readonly base: string = '') {}

  private url(path: string, query?: Record<string, string | number | undefined>): string {
    let full = this.base + path;
    if (query) {
      const params = new URLSearchParams();
      for (const [key, value] of Object.entries(query)) {
        if (value !== undefined) params.set(key, String(value));
      }
      const qs = params.toString();
      if (qs) full += `?${qs}`;
    }
    return full;
  }

  async openSession(root: string): Promise<{ session_id: string; frames: number }> {
    const response = await fetch(this.url('/sessions'), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ root }),
    });
    return asJson(response);
  }

  async meta(sessionId: string): Promise<SessionMeta> {
    return asJson(await fetch(this.url(`/sessions/${sessionId}/meta`)));
  }

  async events(sessionId: string, missing: number): Promise<POIEvent[]> {
    return asJson(await fetch(this.url(`/sessions/${sessionId}/events`, { missing })));
  }

  async summary(sessionId: string, metric: 'confidence' | 'iou'): Promise<SummaryMatrix> {
    return asJson(await fetch(this.url(`/sessions/${sessionId}/timeline/summary`, { metric })));
  }

  async classification(sessionId: string): Promise<ClassificationRow[]> {
    return asJson(await fetch(this.url(`/sessions/${sessionId}/timeline/classification`)));
  }

  async submitPanorama(sessionId: string, params: PanoramaParams): Promise<{ job_id: string }> {
    const response = await fetch(this.url(`/sessions/${sessionId}/panoramas`), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(params),
    });
    return asJson(response);
  }

  async job(jobId: string): Promise<JobStatus> {
    return asJson(await fetch(this.url(`/jobs/${jobId}`)));
  }

  async report(panoramaId: string): Promise<PanoramaReport> {
    return asJson(await fetch(this.url(`/panoramas/${panoramaId}/report`)));
  }

  async distance(panoramaId: string): Promise<DistanceDoc> {
    return asJson(await fetch(this.url(`/panoramas/${panoramaId}/distance`)));
  }

  panoramaImageUrl(panoramaId: string): string {
    return this.url(`/panoramas/${panoramaId}/image`);
  }

  /** Fetch the overlay raster; requests are visible to the network layer
   * (unlike bare <img> swaps), which the tests rely on. */
  async fetchOverlay(panoramaId: string, spec: OverlaySpec): Promise<Blob> {
    const query: Record<string, string | number | undefined> = {
      style: spec.style,
      min_conf: spec.minConfidence,
    };
    if (spec.labels !== null) query.labels = spec.labels.join(',');
    const response = await fetch(this.url(`/panoramas/${panoramaId}/overlay`, query));
    if (!response.ok) throw new ApiError(response.status, 'overlay request failed');
    return await response.blob();
  }
}
