/**
 * Viewer state: tools, selection modes bound to modifier keys, overlays.
 *
 * Mode mapping follows the desktop-editor convention: plain input replaces
 * (N), Shift adds (A), Alt subtracts (S), Ctrl+Shift intersects (I). The 2D
 * mask and the 3D selection render in visually distinct hues so the two
 * kinds of selection are never confused.
 */

import type { SelectMode } from "./api.js";
import type { Intrinsics, OrbitState } from "./camera.js";

export type Tool = "brush" | "eraser" | "box" | "polygon" | "none";

export interface Modifiers {
  shift: boolean;
  alt: boolean;
  ctrl: boolean;
}

export function modeFromModifiers(mods: Modifiers): SelectMode {
  if (mods.ctrl && mods.shift) return "I";
  if (mods.shift) return "A";
  if (mods.alt) return "S";
  return "N";
}

export interface OverlayToggles {
  mask2d: boolean;
  selection3d: boolean;
  trackedMasks: boolean;
}

// Distinct hues: amber for the image-space mask, orange-red tint comes from
// the server for the 3D selection overlay, green for tracked masks.
export const MASK_2D_COLOR = "rgba(250, 204, 21, 0.45)";
export const SELECTION_3D_COLOR = "rgba(255, 115, 13, 0.65)";
export const TRACKED_MASK_COLOR = "rgba(38, 230, 102, 0.5)";

export interface ViewerState {
  sessionId: string | null;
  orbit: OrbitState;
  intrinsics: Intrinsics;
  tool: Tool;
  brushRadius: number;
  occlusionFree: boolean;
  overlays: OverlayToggles;
  selectionCount: number;
  maskPixels: number;
  activeJob: string | null;
  frameIndex: number;
}

export function initialViewerState(): ViewerState {
  return {
    sessionId: null,
    orbit: {
      target: [0, 0, 0],
      azimuth: 0,
      elevation: 0.2,
      distance: 4,
      up: [0, 1, 0],
    },
    intrinsics: {
      fx: 512, fy: 512, cx: 256, cy: 256,
      width: 512, height: 512, near: 0.05, far: 100,
    },
    tool: "none",
    brushRadius: 8,
    occlusionFree: true,
    overlays: { mask2d: true, selection3d: true, trackedMasks: true },
    selectionCount: 0,
    maskPixels: 0,
    activeJob: null,
    frameIndex: 0,
  };
}

/**
 * Drops stale responses: a render result is applied only if no newer request
 * has already been applied. At most one in-flight request matters per
 * viewport, so older arrivals are discarded by sequence number.
 */
export class RequestSequencer {
  private issued = 0;
  private applied = 0;

  issue(): number {
    return ++this.issued;
  }

  /** True when the response for `seq` should be applied. */
  accept(seq: number): boolean {
    if (seq <= this.applied) return false;
    this.applied = seq;
    return true;
  }

  get pending(): boolean {
    return this.issued > this.applied;
  }
}
