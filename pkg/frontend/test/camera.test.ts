import { describe, expect, it } from "vitest";

import {
  Intrinsics,
  OrbitState,
  cameraFromOrbit,
  lookAtMatrix,
  orbitPosition,
  panOrbit,
  zoomOrbit,
} from "../src/camera.js";

const intr: Intrinsics = {
  fx: 64, fy: 64, cx: 32, cy: 32, width: 64, height: 64, near: 0.05, far: 50,
};

const orbit: OrbitState = {
  target: [0.5, -0.2, 1.0],
  azimuth: 0.7,
  elevation: 0.3,
  distance: 3.5,
  up: [0, 1, 0],
};

function matMulPoint(m: number[], p: [number, number, number]): [number, number, number] {
  return [
    m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3],
    m[4] * p[0] + m[5] * p[1] + m[6] * p[2] + m[7],
    m[8] * p[0] + m[9] * p[1] + m[10] * p[2] + m[11],
  ];
}

describe("orbit camera", () => {
  it("keeps the camera at the requested distance", () => {
    const pos = orbitPosition(orbit);
    const d = Math.hypot(
      pos[0] - orbit.target[0], pos[1] - orbit.target[1], pos[2] - orbit.target[2],
    );
    expect(d).toBeCloseTo(orbit.distance, 10);
  });

  it("produces an orthonormal world-to-camera with det +1", () => {
    const m = cameraFromOrbit(orbit, intr).world_to_camera;
    const rows = [
      [m[0], m[1], m[2]],
      [m[4], m[5], m[6]],
      [m[8], m[9], m[10]],
    ];
    for (let i = 0; i < 3; i++) {
      for (let j = 0; j < 3; j++) {
        const d = rows[i][0] * rows[j][0] + rows[i][1] * rows[j][1] + rows[i][2] * rows[j][2];
        expect(d).toBeCloseTo(i === j ? 1 : 0, 10);
      }
    }
    const det =
      rows[0][0] * (rows[1][1] * rows[2][2] - rows[1][2] * rows[2][1]) -
      rows[0][1] * (rows[1][0] * rows[2][2] - rows[1][2] * rows[2][0]) +
      rows[0][2] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0]);
    expect(det).toBeCloseTo(1, 10);
  });

  it("maps the camera position to the origin", () => {
    const pos = orbitPosition(orbit);
    const m = cameraFromOrbit(orbit, intr).world_to_camera;
    const mapped = matMulPoint(m, pos);
    expect(Math.hypot(...mapped)).toBeLessThan(1e-10);
  });

  it("sends the principal ray through the target", () => {
    const m = cameraFromOrbit(orbit, intr).world_to_camera;
    const mapped = matMulPoint(m, orbit.target);
    // the target must land on the +z axis in camera space
    expect(Math.abs(mapped[0])).toBeLessThan(1e-10);
    expect(Math.abs(mapped[1])).toBeLessThan(1e-10);
    expect(mapped[2]).toBeCloseTo(orbit.distance, 10);
  });

  it("serializes 16 row-major floats plus intrinsics", () => {
    const cam = cameraFromOrbit(orbit, intr);
    expect(cam.world_to_camera).toHaveLength(16);
    expect(cam.world_to_camera.slice(12)).toEqual([0, 0, 0, 1]);
    expect(cam.width).toBe(64);
    expect(cam.near).toBeCloseTo(0.05);
  });

  it("clamps elevation short of the poles", () => {
    const high = panOrbit(orbit, 0, 10);
    expect(high.elevation).toBeLessThan(Math.PI / 2);
    expect(() => cameraFromOrbit(high, intr)).not.toThrow();
  });

  it("zoom keeps a positive distance", () => {
    let o = orbit;
    for (let i = 0; i < 100; i++) o = zoomOrbit(o, 0.5);
    expect(o.distance).toBeGreaterThan(0);
  });

  it("rejects a degenerate look-at", () => {
    expect(() => lookAtMatrix([0, 0, 0], [0, 0, 0], [0, 1, 0])).toThrow();
  });
});
