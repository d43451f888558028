/**
 * Orbit camera and its wire format.
 *
 * The service expects a world-to-camera matrix whose rows are the camera
 * axes in world coordinates with x right, y down (image down), z forward,
 * and translation -R * position. Pixels follow u = fx * x/z + cx.
 */

export interface CameraJson {
  world_to_camera: number[]; // 16 floats, row-major
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
  near?: number;
  far?: number;
}

export interface OrbitState {
  target: [number, number, number];
  azimuth: number;   // radians around the up axis
  elevation: number; // radians above the orbit plane
  distance: number;
  up: [number, number, number];
}

export interface Intrinsics {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
  near: number;
  far: number;
}

type Vec3 = [number, number, number];

const sub = (a: Vec3, b: Vec3): Vec3 => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
const add = (a: Vec3, b: Vec3): Vec3 => [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
const scale = (a: Vec3, s: number): Vec3 => [a[0] * s, a[1] * s, a[2] * s];
const dot = (a: Vec3, b: Vec3): number => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
const cross = (a: Vec3, b: Vec3): Vec3 => [
  a[1] * b[2] - a[2] * b[1],
  a[2] * b[0] - a[0] * b[2],
  a[0] * b[1] - a[1] * b[0],
];
const norm = (a: Vec3): number => Math.sqrt(dot(a, a));

function normalize(a: Vec3): Vec3 {
  const n = norm(a);
  if (n < 1e-12) throw new Error("cannot normalize a zero vector");
  return scale(a, 1 / n);
}

/** Basis of the orbit frame: e1/e2 span the plane orthogonal to up. */
function orbitBasis(up: Vec3): { e1: Vec3; e2: Vec3; u: Vec3 } {
  const u = normalize(up);
  const seed: Vec3 = Math.abs(u[0]) < 0.9 ? [1, 0, 0] : [0, 0, 1];
  const e1 = normalize(sub(seed, scale(u, dot(seed, u))));
  const e2 = cross(u, e1);
  return { e1, e2, u };
}

export function orbitPosition(orbit: OrbitState): Vec3 {
  const { e1, e2, u } = orbitBasis(orbit.up as Vec3);
  const horizontal = orbit.distance * Math.cos(orbit.elevation);
  return add(
    orbit.target as Vec3,
    add(
      scale(u, orbit.distance * Math.sin(orbit.elevation)),
      add(
        scale(e1, horizontal * Math.cos(orbit.azimuth)),
        scale(e2, horizontal * Math.sin(orbit.azimuth)),
      ),
    ),
  );
}

/** World-to-camera look-at with the engine's y-down, z-forward rows. */
export function lookAtMatrix(position: Vec3, target: Vec3, up: Vec3): number[] {
  const z = normalize(sub(target, position));
  const upN = normalize(up);
  const yRaw = scale(sub(upN, scale(z, dot(upN, z))), -1);
  const y = normalize(yRaw);
  const x = cross(y, z);
  const r = [x, y, z];
  const t: Vec3 = [-dot(x, position), -dot(y, position), -dot(z, position)];
  return [
    r[0][0], r[0][1], r[0][2], t[0],
    r[1][0], r[1][1], r[1][2], t[1],
    r[2][0], r[2][1], r[2][2], t[2],
    0, 0, 0, 1,
  ];
}

export function cameraFromOrbit(orbit: OrbitState, intr: Intrinsics): CameraJson {
  const position = orbitPosition(orbit);
  return {
    world_to_camera: lookAtMatrix(position, orbit.target as Vec3, orbit.up as Vec3),
    fx: intr.fx,
    fy: intr.fy,
    cx: intr.cx,
    cy: intr.cy,
    width: intr.width,
    height: intr.height,
    near: intr.near,
    far: intr.far,
  };
}

/** Clamp elevation short of the poles so the look-at stays well defined. */
export function panOrbit(orbit: OrbitState, dAzimuth: number, dElevation: number): OrbitState {
  const limit = Math.PI / 2 - 0.05;
  return {
    ...orbit,
    azimuth: orbit.azimuth + dAzimuth,
    elevation: Math.max(-limit, Math.min(limit, orbit.elevation + dElevation)),
  };
}

export function zoomOrbit(orbit: OrbitState, factor: number): OrbitState {
  return { ...orbit, distance: Math.max(1e-3, orbit.distance * factor) };
}
