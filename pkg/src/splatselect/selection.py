"""2D masks, 3D selections, their boolean algebra, and 2D-to-3D projection.

The same four combine modes apply to image masks and per-Gaussian
selections: N replaces, A unions, S subtracts, I intersects.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from PIL import Image

from .cameras import Camera
from .errors import SceneIOError
from .rasterize import forward
from .scene import GaussianScene


class SelectMode(Enum):
    """Photoshop-style selection modes: new, add, subtract, intersect."""

    N = "N"
    A = "A"
    S = "S"
    I = "I"

    @classmethod
    def parse(cls, value) -> "SelectMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown selection mode {value!r} (expected N, A, S or I)") from None


def _combine_bits(current: NDArray[np.bool_], incoming: NDArray[np.bool_], mode: SelectMode):
    if mode is SelectMode.N:
        return incoming.copy()
    if mode is SelectMode.A:
        return current | incoming
    if mode is SelectMode.S:
        return current & ~incoming
    return current & incoming


@dataclass
class Mask2D:
    """A binary image mask bound to the camera it was drawn in."""

    camera: Camera
    bits: NDArray[np.bool_]
    occlusion_free: bool = False

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.camera.height, self.camera.width):
            raise ValueError(
                f"mask shape {self.bits.shape} does not match camera "
                f"({self.camera.height}, {self.camera.width})"
            )

    @classmethod
    def empty(cls, camera: Camera, occlusion_free: bool = False) -> "Mask2D":
        return cls(camera, np.zeros((camera.height, camera.width), bool), occlusion_free)

    @classmethod
    def full(cls, camera: Camera, occlusion_free: bool = False) -> "Mask2D":
        return cls(camera, np.ones((camera.height, camera.width), bool), occlusion_free)

    def popcount(self) -> int:
        return int(self.bits.sum())


@dataclass
class Selection3D:
    """One bit per Gaussian, indexed like the scene."""

    bits: NDArray[np.bool_]

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool).reshape(-1)

    @classmethod
    def empty(cls, count: int) -> "Selection3D":
        return cls(np.zeros(count, bool))

    @classmethod
    def full(cls, count: int) -> "Selection3D":
        return cls(np.ones(count, bool))

    @classmethod
    def from_indices(cls, count: int, indices) -> "Selection3D":
        bits = np.zeros(count, bool)
        bits[np.asarray(indices, dtype=np.int64)] = True
        return cls(bits)

    def __len__(self) -> int:
        return self.bits.shape[0]

    def popcount(self) -> int:
        return int(self.bits.sum())

    def indices(self) -> NDArray[np.int64]:
        return np.nonzero(self.bits)[0]

    def invert(self) -> "Selection3D":
        return Selection3D(~self.bits)


def combine_mask2d(current: Mask2D, incoming: Mask2D, mode) -> Mask2D:
    mode = SelectMode.parse(mode)
    if not current.camera.same_view(incoming.camera):
        raise ValueError("masks belong to different views")
    return Mask2D(
        incoming.camera,
        _combine_bits(current.bits, incoming.bits, mode),
        occlusion_free=incoming.occlusion_free if mode is SelectMode.N else current.occlusion_free,
    )


def combine_selection3d(current: Selection3D, incoming: Selection3D, mode) -> Selection3D:
    mode = SelectMode.parse(mode)
    if len(current) != len(incoming):
        raise ValueError(f"selection lengths differ: {len(current)} vs {len(incoming)}")
    return Selection3D(_combine_bits(current.bits, incoming.bits, mode))


# ---- manual 2D tools -------------------------------------------------------

def paint_mask(mask: Mask2D, stroke, radius: float = 0.0, value: bool = True) -> Mask2D:
    """Paint (or erase) a brush stroke of disks joined by capsule fills.

    Stroke points are (x, y) or (x, y, radius) in pixel coordinates; a pixel
    is touched when its integer coordinate lies within the radius of the
    stroke path. Out-of-bounds geometry is clipped.
    """
    h, w = mask.bits.shape
    bits = mask.bits.copy()
    pts = [(float(p[0]), float(p[1]), float(p[2]) if len(p) > 2 else float(radius)) for p in stroke]
    if not pts:
        return replace(mask, bits=bits)
    segments = list(zip(pts[:-1], pts[1:])) if len(pts) > 1 else [(pts[0], pts[0])]
    for (x0, y0, r0), (x1, y1, r1) in segments:
        r = max(r0, r1)
        lo_x = max(0, int(np.floor(min(x0, x1) - r)))
        hi_x = min(w - 1, int(np.ceil(max(x0, x1) + r)))
        lo_y = max(0, int(np.floor(min(y0, y1) - r)))
        hi_y = min(h - 1, int(np.ceil(max(y0, y1) + r)))
        if lo_x > hi_x or lo_y > hi_y:
            continue
        xs = np.arange(lo_x, hi_x + 1, dtype=np.float64)
        ys = np.arange(lo_y, hi_y + 1, dtype=np.float64)
        px, py = np.meshgrid(xs, ys)
        vx, vy = x1 - x0, y1 - y0
        seg_len2 = vx * vx + vy * vy
        if seg_len2 > 0:
            t = np.clip(((px - x0) * vx + (py - y0) * vy) / seg_len2, 0.0, 1.0)
        else:
            t = 0.0
        dist2 = (px - (x0 + t * vx)) ** 2 + (py - (y0 + t * vy)) ** 2
        hit = dist2 <= r * r
        bits[lo_y:hi_y + 1, lo_x:hi_x + 1][hit] = value
    return replace(mask, bits=bits)


def box_mask(camera: Camera, rect) -> Mask2D:
    """Filled axis-aligned rectangle; rect = (x0, y0, x1, y1), half-open."""
    x0, y0, x1, y1 = rect
    if x0 > x1:
        x0, x1 = x1, x0
    if y0 > y1:
        y0, y1 = y1, y0
    x0 = max(0, int(np.floor(x0)))
    y0 = max(0, int(np.floor(y0)))
    x1 = min(camera.width, int(np.ceil(x1)))
    y1 = min(camera.height, int(np.ceil(y1)))
    bits = np.zeros((camera.height, camera.width), bool)
    if x1 > x0 and y1 > y0:
        bits[y0:y1, x0:x1] = True
    return Mask2D(camera, bits)


# ---- 2D -> 3D projections --------------------------------------------------

def _projected_pixels(scene: GaussianScene, cam: Camera):
    """Per-Gaussian camera z and integer pixel of the projected mean."""
    pcam = scene.means.astype(np.float64) @ cam.rotation.T + cam.translation
    z = pcam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = np.floor(cam.fx * pcam[:, 0] / z + cam.cx).astype(np.int64)
        py = np.floor(cam.fy * pcam[:, 1] / z + cam.cy).astype(np.int64)
    return z, px, py


def frustum_project(scene: GaussianScene, mask: Mask2D) -> Selection3D:
    """Select every Gaussian whose mean falls in the sweep of the mask
    through the camera frustum. No occlusion test: all depths qualify."""
    cam = mask.camera
    z, px, py = _projected_pixels(scene, cam)
    ok = (z > cam.near) & (z < cam.far) \
        & (px >= 0) & (px < cam.width) & (py >= 0) & (py < cam.height)
    bits = np.zeros(scene.count, bool)
    ok_idx = np.nonzero(ok)[0]
    bits[ok_idx] = mask.bits[py[ok_idx], px[ok_idx]]
    return Selection3D(bits)


def depth_project(
    scene: GaussianScene,
    mask: Mask2D,
    tau_d: float = 0.01,
    absolute: bool = False,
    depth_image: NDArray | None = None,
) -> Selection3D:
    """Frustum projection restricted to the rendered surface layer.

    A Gaussian survives when its camera z is within ``tau_d`` (a fraction of
    the rendered depth at its pixel, or scene units when ``absolute``) of
    that depth. ``depth_image`` lets callers reuse a render.
    """
    if tau_d <= 0:
        raise ValueError("tau_d must be positive")
    cam = mask.camera
    base = frustum_project(scene, mask)
    if depth_image is None:
        depth_image = forward(scene, cam).depth
    z, px, py = _projected_pixels(scene, cam)
    bits = base.bits.copy()
    idx = base.indices()
    d = depth_image[py[idx], px[idx]]
    tol = tau_d if absolute else tau_d * d
    bits[idx] = np.abs(z[idx] - d) <= tol
    return Selection3D(bits)


# ---- file formats ----------------------------------------------------------

def save_mask(mask: Mask2D, path) -> None:
    """8-bit grayscale: 0 = off, 255 = on."""
    Image.fromarray(np.where(mask.bits, 255, 0).astype(np.uint8), mode="L").save(path)


def load_mask(path, camera: Camera, occlusion_free: bool = False) -> Mask2D:
    """Read an 8-bit grayscale mask; values >= 128 count as on."""
    img = Image.open(path).convert("L")
    bits = np.asarray(img, dtype=np.uint8) >= 128
    return Mask2D(camera, bits, occlusion_free)


_GSEL_MAGIC = b"GSEL"
_GSEL_VERSION = 1


def save_selection(sel: Selection3D, path) -> None:
    """Sidecar format: magic "GSEL", version u32, count u64, packed bitset
    (LSB-first within each byte)."""
    packed = np.packbits(sel.bits, bitorder="little")
    with open(path, "wb") as f:
        f.write(_GSEL_MAGIC)
        f.write(struct.pack("<IQ", _GSEL_VERSION, len(sel)))
        f.write(packed.tobytes())


def decode_selection(raw: bytes) -> Selection3D:
    if raw[:4] != _GSEL_MAGIC:
        raise SceneIOError("not a selection sidecar (bad magic)", offset=0)
    if len(raw) < 16:
        raise SceneIOError("truncated selection header", offset=len(raw))
    version, count = struct.unpack("<IQ", raw[4:16])
    if version != _GSEL_VERSION:
        raise SceneIOError(f"unsupported selection version {version}")
    need = (count + 7) // 8
    if len(raw) < 16 + need:
        raise SceneIOError("truncated selection bitset", offset=len(raw))
    packed = np.frombuffer(raw[16:16 + need], dtype=np.uint8)
    bits = np.unpackbits(packed, count=count, bitorder="little").astype(bool)
    return Selection3D(bits)


def load_selection(path) -> Selection3D:
    return decode_selection(Path(path).read_bytes())


def export_selection(scene: GaussianScene, sel: Selection3D, path, invert: bool = False) -> int:
    """Write the selected (or unselected) Gaussians as a standalone scene.

    Rows are copied verbatim, so the k-th exported Gaussian is the k-th set
    bit of the selection. Returns the number of rows written; an empty
    selection produces a header-only file.
    """
    from . import scene as scene_io

    if len(sel) != scene.count:
        raise ValueError(f"selection length {len(sel)} does not match scene count {scene.count}")
    bits = ~sel.bits if invert else sel.bits
    if not bits.any():
        import warnings

        warnings.warn("exporting an empty selection: writing header-only scene file")
    return scene_io.save_scene(scene.subset(bits), path)
