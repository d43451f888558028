"""Dense view generation for mask tracking and similarity-based ordering.

Turnaround sequences circle the centroid of the first-hit points lifted from
the user's mask, at the user camera's distance and up direction. An
annotated view is matched to the dense view with the highest Jaccard overlap
of per-Gaussian visibility sets.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .cameras import Camera
from .errors import NoHitsError
from .rasterize import forward, visibility
from .scene import GaussianScene
from .selection import Mask2D

DEFAULT_VIEW_COUNT = 50


class ViewSource(Enum):
    TRAINING_SUBSET = "training_subset"
    TURNAROUND = "turnaround"


@dataclass
class ViewSequence:
    """An ordered list of same-resolution cameras used for tracking."""

    cameras: list[Camera]
    source: ViewSource

    def __post_init__(self):
        if self.cameras:
            w, h = self.cameras[0].width, self.cameras[0].height
            if any(c.width != w or c.height != h for c in self.cameras):
                raise ValueError("all cameras in a sequence must share resolution")

    @property
    def m(self) -> int:
        return len(self.cameras)

    def __len__(self) -> int:
        return len(self.cameras)

    def __getitem__(self, i: int) -> Camera:
        return self.cameras[i]


def lift_mask_points(scene: GaussianScene, mask: Mask2D) -> NDArray[np.float64]:
    """Lift masked pixels that hit a Gaussian to world points via rendered depth."""
    cam = mask.camera
    out = forward(scene, cam)
    hit = mask.bits & (out.first_hit >= 0)
    if not hit.any():
        raise NoHitsError("no first hits under mask")
    ys, xs = np.nonzero(hit)
    z = out.depth[ys, xs]
    u = (xs + 0.5 - cam.cx) / cam.fx
    v = (ys + 0.5 - cam.cy) / cam.fy
    pcam = np.stack([u * z, v * z, z], axis=1)
    return (pcam - cam.translation) @ cam.rotation


def turnaround_views(
    scene: GaussianScene, user_cam: Camera, user_mask: Mask2D, m: int = DEFAULT_VIEW_COUNT
) -> ViewSequence:
    """Full-circle trajectory around the lifted mask centroid.

    Cameras sit on the circle of radius ``|user position - centroid|`` in the
    plane through the centroid orthogonal to the user camera's up axis, look
    at the centroid with the user's up direction, and start at the user
    camera's azimuth. Intrinsics and resolution are copied from the user view.
    """
    if m < 3:
        raise ValueError("turnaround needs at least 3 views")
    if not user_mask.bits.any():
        raise ValueError("user mask is empty")
    points = lift_mask_points(scene, user_mask)
    center = points.mean(axis=0)

    up = user_cam.up_world
    up = up / np.linalg.norm(up)
    radial = user_cam.position - center
    radius = np.linalg.norm(radial)
    in_plane = radial - np.dot(radial, up) * up
    plane_norm = np.linalg.norm(in_plane)
    if plane_norm < 1e-9 * max(radius, 1e-12):
        raise ValueError("user view looks along its own up axis; cannot place a turnaround circle")
    e1 = in_plane / plane_norm
    e2 = np.cross(up, e1)

    cams = []
    for i in range(m):
        theta = 2.0 * np.pi * i / m
        pos = center + radius * (np.cos(theta) * e1 + np.sin(theta) * e2)
        cams.append(
            Camera.look_at(
                pos, center, up,
                fx=user_cam.fx, fy=user_cam.fy, cx=user_cam.cx, cy=user_cam.cy,
                width=user_cam.width, height=user_cam.height,
                near=user_cam.near, far=user_cam.far,
            )
        )
    return ViewSequence(cams, ViewSource.TURNAROUND)


def jaccard(a: NDArray[np.bool_], b: NDArray[np.bool_]) -> float:
    """Jaccard index of two boolean masks; 0 when both are empty."""
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def best_matching_view(scene: GaussianScene, annotated: Camera, candidates: ViewSequence) -> int:
    """Index of the dense view most similar to the annotated one.

    Similarity is the Jaccard index of per-Gaussian visibility sets; ties
    break to the lowest index.
    """
    if len(candidates) == 0:
        raise ValueError("candidate sequence is empty")
    viz_a = visibility(scene, annotated)
    scores = np.array([jaccard(viz_a, visibility(scene, c)) for c in candidates.cameras])
    return int(np.argmax(scores))


def shift_sequence(seq: ViewSequence, start: int) -> ViewSequence:
    """Cyclic rotation so element ``start`` comes first."""
    if not 0 <= start < len(seq):
        raise ValueError(f"start {start} out of range for sequence of {len(seq)}")
    return ViewSequence(seq.cameras[start:] + seq.cameras[:start], seq.source)


def subsample_training_views(all_cameras: list[Camera], m: int) -> ViewSequence:
    """Uniform-stride subsample of the training cameras, order preserved."""
    if m > len(all_cameras):
        warnings.warn(f"requested {m} views but only {len(all_cameras)} available; using all")
        return ViewSequence(list(all_cameras), ViewSource.TRAINING_SUBSET)
    if m < 1:
        raise ValueError("need at least one view")
    idx = (np.arange(m) * len(all_cameras)) // m
    return ViewSequence([all_cameras[int(i)] for i in idx], ViewSource.TRAINING_SUBSET)
