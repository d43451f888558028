/**
 * Typed client for the splatselect session API.
 *
 * Every engine interaction goes through these documented endpoints; the UI
 * never touches files or engine state directly. The fetch implementation is
 * injectable so tests can run against a mock or a live server.
 */

import type { CameraJson } from "./camera.js";

export type SelectMode = "N" | "A" | "S" | "I";

export interface SessionInfo {
  session_id: string;
  gaussian_count: number;
  sh_degree: number;
}

export interface SelectionStats {
  count: number;
}

export interface MaskStats {
  mask_pixels: number;
  occlusion_free: boolean;
}

export interface AutosegResult extends SelectionStats {
  job_id: string;
  elapsed: number;
}

export interface JobInfo {
  frames: number;
  provider: string;
  injections: Record<string, number>;
  losses: number[];
}

export interface SessionState {
  session_id: string;
  gaussian_count: number;
  selection_count: number;
  mask_pixels: number;
  jobs: string[];
  undo_depth: number;
  redo_depth: number;
}

export interface AutosegOptions {
  view_source?: string;
  m?: number;
  presegment?: boolean;
  provider?: string;
  mode?: SelectMode;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await response.json()) as T;
  }

  createSession(scenePath: string): Promise<SessionInfo> {
    return this.postJson("/sessions", { scene_path: scenePath });
  }

  sessionState(sid: string): Promise<SessionState> {
    return this.request(`/sessions/${sid}`).then((r) => r.json());
  }

  /** Render the view as a PNG blob; channels pick base + overlays. */
  async render(sid: string, camera: CameraJson, channels: string[]): Promise<Blob> {
    const response = await this.request(`/sessions/${sid}/render`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ camera, channels }),
    });
    return response.blob();
  }

  paint(
    sid: string,
    camera: CameraJson,
    stroke: Array<[number, number]>,
    radius: number,
    value: boolean,
    mode: SelectMode,
    occlusionFree?: boolean,
  ): Promise<MaskStats> {
    return this.postJson(`/sessions/${sid}/mask/paint`, {
      camera,
      stroke,
      radius,
      value,
      mode,
      occlusion_free: occlusionFree ?? null,
    });
  }

  box(
    sid: string,
    camera: CameraJson,
    rect: [number, number, number, number],
    mode: SelectMode,
    occlusionFree?: boolean,
  ): Promise<MaskStats> {
    return this.postJson(`/sessions/${sid}/mask/box`, {
      camera,
      rect,
      mode,
      occlusion_free: occlusionFree ?? null,
    });
  }

  /** Upload a full binary mask (8-bit grayscale PNG). */
  async uploadMask(
    sid: string,
    camera: CameraJson,
    png: Blob | ArrayBuffer,
    mode: SelectMode,
    occlusionFree: boolean,
  ): Promise<MaskStats> {
    const params = new URLSearchParams({
      mode,
      occlusion_free: String(occlusionFree),
      camera: JSON.stringify(camera),
    });
    const response = await this.request(`/sessions/${sid}/mask?${params}`, {
      method: "PUT",
      headers: { "content-type": "image/png" },
      body: png instanceof Blob ? png : new Blob([png]),
    });
    return response.json();
  }

  project(
    sid: string,
    kind: "frustum" | "depth",
    mode: SelectMode,
    tauD?: number,
  ): Promise<SelectionStats> {
    return this.postJson(`/sessions/${sid}/project`, {
      kind,
      mode,
      tau_d: tauD ?? null,
    });
  }

  autosegment(sid: string, options: AutosegOptions): Promise<AutosegResult> {
    return this.postJson(`/sessions/${sid}/autoseg`, { ...options, stream: false });
  }

  /**
   * Streaming variant: per-view loss entries arrive through onProgress and
   * the final line resolves the returned promise.
   */
  async autosegmentStreaming(
    sid: string,
    options: AutosegOptions,
    onProgress: (view: number, loss: number) => void,
  ): Promise<AutosegResult> {
    const response = await this.request(`/sessions/${sid}/autoseg`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ...options, stream: true }),
    });
    const reader = response.body?.getReader();
    if (!reader) throw new ApiError(0, "response has no body stream");
    const decoder = new TextDecoder();
    let buffered = "";
    let last: unknown = null;
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffered += decoder.decode(value, { stream: true });
      let nl;
      while ((nl = buffered.indexOf("\n")) >= 0) {
        const line = buffered.slice(0, nl).trim();
        buffered = buffered.slice(nl + 1);
        if (!line) continue;
        const entry = JSON.parse(line);
        if (typeof entry.view === "number") onProgress(entry.view, entry.loss);
        else last = entry;
      }
    }
    const final = last as AutosegResult & { error?: string };
    if (!final) throw new ApiError(0, "stream ended without a result");
    if (final.error) throw new ApiError(422, final.error);
    return final;
  }

  jobInfo(sid: string, jobId: string): Promise<JobInfo> {
    return this.request(`/sessions/${sid}/jobs/${jobId}`).then((r) => r.json());
  }

  /** Tracked frame k as a PNG blob (mask overlay baked in server side). */
  async jobFrame(sid: string, jobId: string, k: number): Promise<Blob> {
    const response = await this.request(`/sessions/${sid}/jobs/${jobId}/frames/${k}`);
    return response.blob();
  }

  correct(
    sid: string,
    jobId: string,
    position: number,
    maskPngBase64: string,
  ): Promise<AutosegResult> {
    return this.postJson(`/sessions/${sid}/jobs/${jobId}/corrections`, {
      position,
      mask_png_base64: maskPngBase64,
    });
  }

  combineSelection(
    sid: string,
    mode: SelectMode,
    source: { job_id: string } | { gsel_base64: string },
  ): Promise<SelectionStats> {
    const body =
      "job_id" in source
        ? { mode, source: "job", job_id: source.job_id }
        : { mode, source: "upload", gsel_base64: source.gsel_base64 };
    return this.postJson(`/sessions/${sid}/selection/combine`, body);
  }

  orient(sid: string, mapping: string): Promise<SelectionStats> {
    return this.postJson(`/sessions/${sid}/orient`, { mapping });
  }

  exportSelection(sid: string, path: string, invert: boolean): Promise<{ written: number }> {
    return this.postJson(`/sessions/${sid}/export`, { path, invert });
  }

  undo(sid: string): Promise<SelectionStats> {
    return this.postJson(`/sessions/${sid}/undo`, {});
  }

  redo(sid: string): Promise<SelectionStats> {
    return this.postJson(`/sessions/${sid}/redo`, {});
  }
}
