/**
 * Browser shell: wires pointer/keyboard events to the session workflow and
 * keeps the viewport in sync with the service render endpoint.
 *
 * All engine state lives server side; this layer only batches inputs,
 * previews the in-progress mask locally, and displays returned PNGs. Camera
 * moves re-request renders (debounced); stale responses are dropped by
 * sequence number.
 */

import { ApiClient, ApiError, SelectMode } from "./api.js";
import { Point, StrokeBatcher, polygonToBitmap } from "./masktools.js";
import {
  MASK_2D_COLOR,
  Modifiers,
  RequestSequencer,
  TRACKED_MASK_COLOR,
  Tool,
  modeFromModifiers,
} from "./state.js";
import { SessionWorkflow } from "./workflow.js";

const RENDER_DEBOUNCE_MS = 60;
const STROKE_BATCH = 12;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export class Viewer {
  private workflow: SessionWorkflow;
  private sequencer = new RequestSequencer();
  private renderTimer: number | null = null;
  private modifiers: Modifiers = { shift: false, alt: false, ctrl: false };
  private dragging = false;
  private strokeBatcher: StrokeBatcher | null = null;
  private boxStart: Point | null = null;
  private polygon: Point[] = [];
  private maskPreview: HTMLCanvasElement;
  private correcting = false;

  private viewport = el<HTMLCanvasElement>("viewport");
  private frameView = el<HTMLCanvasElement>("frame-view");
  private notices = el<HTMLDivElement>("notices");
  private status = el<HTMLDivElement>("status");

  constructor(api: ApiClient) {
    this.workflow = new SessionWorkflow(api);
    this.maskPreview = document.createElement("canvas");
    this.bindToolbar();
    this.bindViewport();
    this.bindKeyboard();
  }

  private get mode(): SelectMode {
    return modeFromModifiers(this.modifiers);
  }

  private get tool(): Tool {
    return (el<HTMLSelectElement>("tool").value as Tool) ?? "none";
  }

  // ---- wiring ----------------------------------------------------------

  private bindToolbar(): void {
    el<HTMLButtonElement>("open").onclick = () => void this.openScene();
    el<HTMLButtonElement>("project-frustum").onclick = () =>
      void this.guard(async () => {
        await this.workflow.project("frustum", this.mode);
        this.requestRender();
      });
    el<HTMLButtonElement>("project-depth").onclick = () =>
      void this.guard(async () => {
        const tau = Number(el<HTMLInputElement>("tau-d").value) || 0.01;
        await this.workflow.project("depth", this.mode, tau);
        this.requestRender();
      });
    el<HTMLButtonElement>("autoseg").onclick = () => void this.runAutoseg();
    el<HTMLButtonElement>("undo").onclick = () =>
      void this.guard(async () => {
        await this.workflow.undo();
        this.requestRender();
      });
    el<HTMLButtonElement>("redo").onclick = () =>
      void this.guard(async () => {
        await this.workflow.redo();
        this.requestRender();
      });
    el<HTMLButtonElement>("orient").onclick = () =>
      void this.guard(async () => {
        await this.workflow.orient(el<HTMLInputElement>("orient-map").value || "pc3=z");
        this.requestRender();
      });
    el<HTMLButtonElement>("export").onclick = () =>
      void this.guard(async () => {
        const written = await this.workflow.exportTo(
          el<HTMLInputElement>("export-path").value,
          el<HTMLInputElement>("export-invert").checked,
        );
        this.notify(`exported ${written} gaussians`);
      });
    el<HTMLInputElement>("brush-radius").oninput = (event) => {
      this.workflow.state.brushRadius = Number((event.target as HTMLInputElement).value);
    };
    el<HTMLInputElement>("occlusion-free").onchange = (event) => {
      this.workflow.state.occlusionFree = (event.target as HTMLInputElement).checked;
    };
    el<HTMLInputElement>("overlay-selection").onchange = (event) => {
      this.workflow.state.overlays.selection3d = (event.target as HTMLInputElement).checked;
      this.requestRender();
    };
    el<HTMLButtonElement>("frame-prev").onclick = () => void this.stepFrame(-1);
    el<HTMLButtonElement>("frame-next").onclick = () => void this.stepFrame(+1);
    el<HTMLButtonElement>("frame-correct").onclick = () => this.beginCorrection();
  }

  private bindViewport(): void {
    this.viewport.addEventListener("pointerdown", (event) => this.onPointerDown(event));
    this.viewport.addEventListener("pointermove", (event) => this.onPointerMove(event));
    this.viewport.addEventListener("pointerup", (event) => void this.onPointerUp(event));
    this.viewport.addEventListener("wheel", (event) => {
      event.preventDefault();
      this.workflow.zoomBy(event.deltaY > 0 ? 1.1 : 1 / 1.1);
      this.requestRender();
    });
    this.viewport.addEventListener("dblclick", () => void this.closePolygon());
  }

  private bindKeyboard(): void {
    const sync = (event: KeyboardEvent) => {
      this.modifiers = { shift: event.shiftKey, alt: event.altKey, ctrl: event.ctrlKey };
      el<HTMLSpanElement>("mode-indicator").textContent = this.mode;
    };
    window.addEventListener("keydown", sync);
    window.addEventListener("keyup", sync);
  }

  // ---- session ---------------------------------------------------------

  private async openScene(): Promise<void> {
    await this.guard(async () => {
      const path = el<HTMLInputElement>("scene-path").value;
      const count = await this.workflow.open(path);
      this.notify(`loaded scene with ${count} gaussians`);
      this.resizePreview();
      this.requestRender();
    });
  }

  private resizePreview(): void {
    const { width, height } = this.workflow.state.intrinsics;
    this.viewport.width = width;
    this.viewport.height = height;
    this.maskPreview.width = width;
    this.maskPreview.height = height;
  }

  // ---- rendering -------------------------------------------------------

  /** Debounced: rapid camera motion collapses into one in-flight request. */
  requestRender(): void {
    if (this.renderTimer !== null) window.clearTimeout(this.renderTimer);
    this.renderTimer = window.setTimeout(() => void this.renderNow(), RENDER_DEBOUNCE_MS);
  }

  private async renderNow(): Promise<void> {
    if (!this.workflow.state.sessionId) return;
    const seq = this.sequencer.issue();
    try {
      const blob = await this.workflow.renderViewport();
      if (!this.sequencer.accept(seq)) return; // a newer render already landed
      const bitmap = await createImageBitmap(blob);
      const ctx = this.viewport.getContext("2d")!;
      ctx.drawImage(bitmap, 0, 0);
      if (this.workflow.state.overlays.mask2d) {
        ctx.drawImage(this.maskPreview, 0, 0);
      }
      this.updateStatus();
    } catch (error) {
      this.notify(String(error));
    }
  }

  private updateStatus(): void {
    const s = this.workflow.state;
    this.status.textContent =
      `selection: ${s.selectionCount} gaussians | mask: ${s.maskPixels} px | mode: ${this.mode}`;
  }

  // ---- painting --------------------------------------------------------

  private canvasPoint(event: PointerEvent): Point {
    const rect = this.viewport.getBoundingClientRect();
    return [
      ((event.clientX - rect.left) / rect.width) * this.viewport.width,
      ((event.clientY - rect.top) / rect.height) * this.viewport.height,
    ];
  }

  private onPointerDown(event: PointerEvent): void {
    const point = this.canvasPoint(event);
    this.dragging = true;
    if (this.tool === "brush" || this.tool === "eraser") {
      const erase = this.tool === "eraser";
      const mode = this.mode;
      this.strokeBatcher = new StrokeBatcher(STROKE_BATCH, (points) => {
        void this.guard(async () => {
          await this.workflow.paintStroke(points, erase ? "S" : mode, erase);
        });
      });
      this.strokeBatcher.addPoint(point[0], point[1]);
      this.previewDot(point);
    } else if (this.tool === "box") {
      this.boxStart = point;
    } else if (this.tool === "polygon") {
      this.polygon.push(point);
      this.previewDot(point);
    } else {
      // orbit
      this.viewport.setPointerCapture(event.pointerId);
    }
  }

  private onPointerMove(event: PointerEvent): void {
    if (!this.dragging) return;
    const point = this.canvasPoint(event);
    if (this.strokeBatcher) {
      this.strokeBatcher.addPoint(point[0], point[1]);
      this.previewDot(point);
    } else if (this.tool === "none") {
      this.workflow.orbitBy(event.movementX * 0.008, event.movementY * 0.008);
      this.requestRender();
    }
  }

  private async onPointerUp(event: PointerEvent): Promise<void> {
    this.dragging = false;
    if (this.strokeBatcher) {
      this.strokeBatcher.end();
      this.strokeBatcher = null;
      this.requestRender();
    } else if (this.tool === "box" && this.boxStart) {
      const endPoint = this.canvasPoint(event);
      const rect: [number, number, number, number] = [
        this.boxStart[0], this.boxStart[1], endPoint[0], endPoint[1],
      ];
      this.boxStart = null;
      await this.guard(async () => {
        await this.workflow.boxSelect(rect, this.mode);
        this.previewBox(rect);
        this.requestRender();
      });
    }
  }

  /** Double-click closes the polygon, rasterizes it and uploads the mask. */
  private async closePolygon(): Promise<void> {
    if (this.tool !== "polygon" || this.polygon.length < 3) return;
    const points = this.polygon;
    this.polygon = [];
    const { width, height } = this.workflow.state.intrinsics;
    const bits = polygonToBitmap(points, width, height);
    const png = await bitmapToPngBlob(bits, width, height);
    await this.guard(async () => {
      await this.workflow.uploadMask(png, this.mode);
      this.requestRender();
    });
  }

  private previewDot(point: Point): void {
    const ctx = this.maskPreview.getContext("2d")!;
    ctx.fillStyle = MASK_2D_COLOR;
    ctx.beginPath();
    ctx.arc(point[0], point[1], this.workflow.state.brushRadius, 0, Math.PI * 2);
    ctx.fill();
  }

  private previewBox(rect: [number, number, number, number]): void {
    const ctx = this.maskPreview.getContext("2d")!;
    ctx.fillStyle = MASK_2D_COLOR;
    ctx.fillRect(rect[0], rect[1], rect[2] - rect[0], rect[3] - rect[1]);
  }

  // ---- automatic segmentation and corrections ---------------------------

  private async runAutoseg(): Promise<void> {
    await this.guard(async () => {
      const m = Number(el<HTMLInputElement>("view-count").value) || 50;
      const presegment = el<HTMLInputElement>("presegment").checked;
      const provider = el<HTMLInputElement>("provider").value || "geometric";
      const progress = el<HTMLSpanElement>("autoseg-progress");
      const result = await this.workflow.runAutoseg(
        { m, presegment, provider, mode: this.mode },
        (view, loss) => {
          progress.textContent = `view ${view}: loss ${loss.toFixed(1)}`;
        },
      );
      progress.textContent = "";
      this.notify(
        `segmented ${result.count} gaussians in ${result.elapsed.toFixed(2)}s (job ${result.job_id})`,
      );
      await this.showFrame();
      this.requestRender();
    });
  }

  private async stepFrame(step: number): Promise<void> {
    await this.guard(async () => {
      const blob = await this.workflow.browseFrame(step);
      await this.drawFrame(blob);
    });
  }

  private async showFrame(): Promise<void> {
    if (!this.workflow.state.activeJob) return;
    const blob = await this.workflow.browseFrame(0);
    await this.drawFrame(blob);
  }

  private async drawFrame(blob: Blob): Promise<void> {
    const bitmap = await createImageBitmap(blob);
    this.frameView.width = bitmap.width;
    this.frameView.height = bitmap.height;
    this.frameView.getContext("2d")!.drawImage(bitmap, 0, 0);
    el<HTMLSpanElement>("frame-label").textContent =
      `view ${this.workflow.state.frameIndex}`;
  }

  /** "Correct this view": paint on the frame canvas, then post the mask. */
  private beginCorrection(): void {
    if (!this.workflow.state.activeJob) {
      this.notify("run auto-segmentation first");
      return;
    }
    if (this.correcting) return;
    this.correcting = true;
    const ctx = this.frameView.getContext("2d")!;
    const mask = document.createElement("canvas");
    mask.width = this.frameView.width;
    mask.height = this.frameView.height;
    const maskCtx = mask.getContext("2d")!;

    const draw = (event: PointerEvent) => {
      const rect = this.frameView.getBoundingClientRect();
      const x = ((event.clientX - rect.left) / rect.width) * mask.width;
      const y = ((event.clientY - rect.top) / rect.height) * mask.height;
      for (const target of [ctx, maskCtx]) {
        target.fillStyle = target === ctx ? TRACKED_MASK_COLOR : "#fff";
        target.beginPath();
        target.arc(x, y, this.workflow.state.brushRadius, 0, Math.PI * 2);
        target.fill();
      }
    };
    const finish = async () => {
      this.frameView.removeEventListener("pointermove", draw);
      this.frameView.removeEventListener("pointerup", listenerUp);
      this.correcting = false;
      const dataUrl = mask.toDataURL("image/png");
      const base64 = dataUrl.slice(dataUrl.indexOf(",") + 1);
      await this.guard(async () => {
        const count = await this.workflow.correctFrame(this.workflow.state.frameIndex, base64);
        this.notify(`correction applied; ${count} selected`);
        await this.showFrame();
        this.requestRender();
      });
    };
    const listenerUp = () => void finish();
    this.frameView.addEventListener("pointermove", draw);
    this.frameView.addEventListener("pointerup", listenerUp, { once: true });
  }

  // ---- errors ------------------------------------------------------------

  private async guard(action: () => Promise<void>): Promise<void> {
    try {
      await action();
      this.updateStatus();
    } catch (error) {
      const message = error instanceof ApiError ? `${error.status}: ${error.message}` : String(error);
      this.notify(message);
    }
  }

  private notify(message: string): void {
    const note = document.createElement("div");
    note.className = "notice";
    note.textContent = message;
    const dismiss = document.createElement("button");
    dismiss.textContent = "x";
    dismiss.onclick = () => note.remove();
    note.appendChild(dismiss);
    this.notices.appendChild(note);
  }
}

/** Encode a 0/1 bitmap as a grayscale PNG via an offscreen canvas. */
async function bitmapToPngBlob(bits: Uint8Array, width: number, height: number): Promise<Blob> {
  const canvas = document.createElement("canvas");
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d")!;
  const image = ctx.createImageData(width, height);
  for (let i = 0; i < bits.length; i++) {
    const v = bits[i] ? 255 : 0;
    image.data[i * 4] = v;
    image.data[i * 4 + 1] = v;
    image.data[i * 4 + 2] = v;
    image.data[i * 4 + 3] = 255;
  }
  ctx.putImageData(image, 0, 0);
  return new Promise((resolve, reject) => {
    canvas.toBlob((blob) => (blob ? resolve(blob) : reject(new Error("PNG encode failed"))), "image/png");
  });
}
