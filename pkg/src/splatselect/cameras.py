"""Pinhole cameras and their JSON serialization.

Convention: world-to-camera maps world points into a frame with x right,
y down, z forward (the usual splat-scene convention). A point is imaged at
``u = fx * x/z + cx``; pixel (px, py) covers [px, px+1) x [py, py+1), so a
projected point lands in pixel (floor(u), floor(v)) and pixel centers sit
at half-integer coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

_ORTHO_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Camera:
    """One pinhole view: intrinsics, pose and image size."""

    world_to_camera: NDArray[np.float64]  # 4x4 rigid transform
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.01
    far: float = 1e4

    def __post_init__(self):
        w2c = np.asarray(self.world_to_camera, dtype=np.float64)
        if w2c.shape != (4, 4):
            raise ValueError(f"world_to_camera must be 4x4, got {w2c.shape}")
        object.__setattr__(self, "world_to_camera", w2c)
        R = w2c[:3, :3]
        if not np.allclose(R @ R.T, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("world_to_camera rotation is not orthonormal")
        if not np.isclose(np.linalg.det(R), 1.0, atol=_ORTHO_TOL):
            raise ValueError("world_to_camera rotation must have det +1")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.near < self.far):
            raise ValueError("need 0 < near < far")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    @property
    def rotation(self) -> NDArray[np.float64]:
        """World-to-camera rotation (rows are the camera axes in world)."""
        return self.world_to_camera[:3, :3]

    @property
    def translation(self) -> NDArray[np.float64]:
        return self.world_to_camera[:3, 3]

    @property
    def position(self) -> NDArray[np.float64]:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def up_world(self) -> NDArray[np.float64]:
        """Image-up direction in world coordinates (camera y points down)."""
        return -self.rotation[1]

    @property
    def forward_world(self) -> NDArray[np.float64]:
        return self.rotation[2]

    def same_view(self, other: "Camera") -> bool:
        """True if both cameras share pose, intrinsics and resolution."""
        return (
            np.array_equal(self.world_to_camera, other.world_to_camera)
            and (self.fx, self.fy, self.cx, self.cy) == (other.fx, other.fy, other.cx, other.cy)
            and (self.width, self.height) == (other.width, other.height)
        )

    def with_pose(self, world_to_camera: NDArray[np.float64]) -> "Camera":
        return replace(self, world_to_camera=np.asarray(world_to_camera, dtype=np.float64))

    @classmethod
    def look_at(
        cls,
        position,
        target,
        up,
        *,
        fx: float,
        fy: float,
        cx: float,
        cy: float,
        width: int,
        height: int,
        near: float = 0.01,
        far: float = 1e4,
    ) -> "Camera":
        """Camera at ``position`` whose principal ray passes through ``target``."""
        position = np.asarray(position, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        up = np.asarray(up, dtype=np.float64)
        z = target - position
        norm = np.linalg.norm(z)
        if norm < 1e-12:
            raise ValueError("look_at target coincides with camera position")
        z = z / norm
        y = -(up - np.dot(up, z) * z)
        ynorm = np.linalg.norm(y)
        if ynorm < 1e-9:
            raise ValueError("up direction is parallel to the viewing direction")
        y = y / ynorm
        x = np.cross(y, z)
        w2c = np.eye(4)
        w2c[:3, :3] = np.stack([x, y, z])
        w2c[:3, 3] = -w2c[:3, :3] @ position
        return cls(w2c, fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height, near=near, far=far)

    def to_json(self) -> dict:
        return {
            "world_to_camera": [float(v) for v in self.world_to_camera.reshape(-1)],
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "near": self.near,
            "far": self.far,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Camera":
        w2c = np.asarray(doc["world_to_camera"], dtype=np.float64).reshape(4, 4)
        return cls(
            w2c,
            fx=float(doc["fx"]),
            fy=float(doc["fy"]),
            cx=float(doc["cx"]),
            cy=float(doc["cy"]),
            width=int(doc["width"]),
            height=int(doc["height"]),
            near=float(doc.get("near", 0.01)),
            far=float(doc.get("far", 1e4)),
        )


def save_cameras(path, cameras: list[Camera]) -> None:
    doc = {"cameras": [c.to_json() for c in cameras]}
    Path(path).write_text(json.dumps(doc, indent=2))


def load_cameras(path) -> list[Camera]:
    """Load cameras from a JSON file ({"cameras": [...]}, a bare list, or one
    camera object) or from a directory of per-camera JSON files."""
    p = Path(path)
    if p.is_dir():
        cams = []
        for child in sorted(p.glob("*.json")):
            cams.extend(load_cameras(child))
        return cams
    doc = json.loads(p.read_text())
    if isinstance(doc, list):
        return [Camera.from_json(d) for d in doc]
    if "cameras" in doc:
        return [Camera.from_json(d) for d in doc["cameras"]]
    return [Camera.from_json(doc)]


def load_camera(path) -> Camera:
    cams = load_cameras(path)
    if len(cams) != 1:
        raise ValueError(f"expected exactly one camera in {path}, found {len(cams)}")
    return cams[0]
