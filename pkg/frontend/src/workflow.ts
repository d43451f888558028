/**
 * The human-in-the-loop workflow, independent of the DOM.
 *
 * Wraps the API client with the interaction sequence the viewer drives:
 * open a scene, shape the 2D mask, project it, run tracked segmentation,
 * browse the job's frames, correct a view, combine, orient, export, undo.
 * The browser shell (viewer.ts) forwards events here; the scripted workflow
 * test drives this class directly against a live service.
 */

import { ApiClient, AutosegOptions, AutosegResult, JobInfo, SelectMode } from "./api.js";
import { CameraJson, cameraFromOrbit, panOrbit, zoomOrbit } from "./camera.js";
import { ViewerState, initialViewerState } from "./state.js";

export class SessionWorkflow {
  state: ViewerState = initialViewerState();

  constructor(private api: ApiClient) {}

  private get sid(): string {
    if (!this.state.sessionId) throw new Error("no session open");
    return this.state.sessionId;
  }

  camera(): CameraJson {
    return cameraFromOrbit(this.state.orbit, this.state.intrinsics);
  }

  async open(scenePath: string): Promise<number> {
    const info = await this.api.createSession(scenePath);
    this.state.sessionId = info.session_id;
    this.state.selectionCount = 0;
    this.state.maskPixels = 0;
    return info.gaussian_count;
  }

  orbitBy(dAzimuth: number, dElevation: number): void {
    this.state.orbit = panOrbit(this.state.orbit, dAzimuth, dElevation);
  }

  zoomBy(factor: number): void {
    this.state.orbit = zoomOrbit(this.state.orbit, factor);
  }

  async renderViewport(): Promise<Blob> {
    const channels = ["rgb"];
    if (this.state.overlays.selection3d) channels.push("selection_overlay");
    return this.api.render(this.sid, this.camera(), channels);
  }

  async paintStroke(
    points: Array<[number, number]>,
    mode: SelectMode,
    erase = false,
  ): Promise<number> {
    const stats = await this.api.paint(
      this.sid,
      this.camera(),
      points,
      this.state.brushRadius,
      !erase,
      mode,
      this.state.occlusionFree,
    );
    this.state.maskPixels = stats.mask_pixels;
    return stats.mask_pixels;
  }

  async boxSelect(rect: [number, number, number, number], mode: SelectMode): Promise<number> {
    const stats = await this.api.box(this.sid, this.camera(), rect, mode, this.state.occlusionFree);
    this.state.maskPixels = stats.mask_pixels;
    return stats.mask_pixels;
  }

  async uploadMask(png: Blob | ArrayBuffer, mode: SelectMode): Promise<number> {
    const stats = await this.api.uploadMask(
      this.sid, this.camera(), png, mode, this.state.occlusionFree,
    );
    this.state.maskPixels = stats.mask_pixels;
    return stats.mask_pixels;
  }

  async project(kind: "frustum" | "depth", mode: SelectMode, tauD?: number): Promise<number> {
    const stats = await this.api.project(this.sid, kind, mode, tauD);
    this.state.selectionCount = stats.count;
    return stats.count;
  }

  async runAutoseg(
    options: AutosegOptions,
    onProgress?: (view: number, loss: number) => void,
  ): Promise<AutosegResult> {
    const result = onProgress
      ? await this.api.autosegmentStreaming(this.sid, options, onProgress)
      : await this.api.autosegment(this.sid, options);
    this.state.selectionCount = result.count;
    this.state.activeJob = result.job_id;
    this.state.frameIndex = 0;
    return result;
  }

  async jobInfo(): Promise<JobInfo> {
    if (!this.state.activeJob) throw new Error("no job to browse");
    return this.api.jobInfo(this.sid, this.state.activeJob);
  }

  /** Page through tracked frames; wraps at both ends. */
  async browseFrame(step: number): Promise<Blob> {
    if (!this.state.activeJob) throw new Error("no job to browse");
    const info = await this.api.jobInfo(this.sid, this.state.activeJob);
    this.state.frameIndex = (this.state.frameIndex + step + info.frames) % info.frames;
    return this.api.jobFrame(this.sid, this.state.activeJob, this.state.frameIndex);
  }

  async correctFrame(position: number, maskPngBase64: string): Promise<number> {
    if (!this.state.activeJob) throw new Error("no job to correct");
    const result = await this.api.correct(this.sid, this.state.activeJob, position, maskPngBase64);
    this.state.selectionCount = result.count;
    return result.count;
  }

  async combineFromJob(mode: SelectMode): Promise<number> {
    if (!this.state.activeJob) throw new Error("no job to combine from");
    const stats = await this.api.combineSelection(this.sid, mode, { job_id: this.state.activeJob });
    this.state.selectionCount = stats.count;
    return stats.count;
  }

  async orient(mapping: string): Promise<void> {
    await this.api.orient(this.sid, mapping);
  }

  async exportTo(path: string, invert = false): Promise<number> {
    const { written } = await this.api.exportSelection(this.sid, path, invert);
    return written;
  }

  async undo(): Promise<number> {
    const stats = await this.api.undo(this.sid);
    this.state.selectionCount = stats.count;
    return stats.count;
  }

  async redo(): Promise<number> {
    const stats = await this.api.redo(this.sid);
    this.state.selectionCount = stats.count;
    return stats.count;
  }
}
