"""Gaussian splat scenes: binary point-list I/O, activation views, transforms.

Scenes store raw (pre-activation) parameters so that exports are
byte-identical to the source rows: files hold float32, which converts to the
in-memory float64 and back without loss. Activations (sigmoid opacity,
exp scale, quaternion normalization) are applied on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy.special import expit

from .errors import SceneFormatError, SceneIOError

# Attribute groups of the standard splat point-list schema.
_POSITION = ("x", "y", "z")
_DC = ("f_dc_0", "f_dc_1", "f_dc_2")
_SCALES = ("scale_0", "scale_1", "scale_2")
_ROTS = ("rot_0", "rot_1", "rot_2", "rot_3")
_REQUIRED = _POSITION + _DC + ("opacity",) + _SCALES + _ROTS

# f_rest property counts for SH degrees 0..3 (3 * (B - 1) with B = (deg+1)^2).
_REST_COUNTS = {0: 1, 9: 4, 24: 9, 45: 16}


@dataclass(eq=False)
class GaussianScene:
    """A set of n Gaussians with factored covariance and SH color.

    ``rotations`` are raw (w, x, y, z) quaternions, normalized lazily;
    ``sh_coeffs`` is (n, 3, B) channel-major with the DC term first.
    Scenes are treated as immutable after construction: every transform
    returns a new value, so a scene is safe to render from concurrently.
    """

    means: NDArray[np.float64]          # (n, 3)
    rotations: NDArray[np.float64]      # (n, 4) quaternion (w, x, y, z)
    log_scales: NDArray[np.float64]     # (n, 3)
    opacity_logits: NDArray[np.float64]  # (n,)
    sh_coeffs: NDArray[np.float64]      # (n, 3, B), B in {1, 4, 9, 16}
    extras: dict[str, NDArray[np.float64]] = field(default_factory=dict)
    attribute_order: tuple[str, ...] = ()
    color_rotation_approx: bool = False

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.log_scales = np.asarray(self.log_scales, dtype=np.float64)
        self.opacity_logits = np.asarray(self.opacity_logits, dtype=np.float64)
        self.sh_coeffs = np.asarray(self.sh_coeffs, dtype=np.float64)
        self.extras = {k: np.asarray(v, dtype=np.float64) for k, v in self.extras.items()}
        n = self.means.shape[0]
        if self.means.shape != (n, 3):
            raise ValueError("means must be (n, 3)")
        if self.rotations.shape != (n, 4):
            raise ValueError("rotations must be (n, 4)")
        if self.log_scales.shape != (n, 3):
            raise ValueError("log_scales must be (n, 3)")
        if self.opacity_logits.shape != (n,):
            raise ValueError("opacity_logits must be (n,)")
        if self.sh_coeffs.ndim != 3 or self.sh_coeffs.shape[:2] != (n, 3):
            raise ValueError("sh_coeffs must be (n, 3, B)")
        if self.sh_coeffs.shape[2] not in (1, 4, 9, 16):
            raise ValueError(f"unsupported SH basis size {self.sh_coeffs.shape[2]}")
        for name, arr in self.extras.items():
            if arr.shape != (n,):
                raise ValueError(f"extra attribute {name!r} must be (n,)")
        if not self.attribute_order:
            self.attribute_order = _default_attribute_order(self.sh_coeffs.shape[2], self.extras)

    @property
    def count(self) -> int:
        return self.means.shape[0]

    @property
    def sh_basis(self) -> int:
        return self.sh_coeffs.shape[2]

    @property
    def sh_degree(self) -> int:
        return int(np.sqrt(self.sh_basis)) - 1

    # ---- activated views -------------------------------------------------

    def unit_rotations(self) -> NDArray[np.float64]:
        q = self.rotations.astype(np.float64)
        norm = np.linalg.norm(q, axis=1, keepdims=True)
        return q / np.where(norm > 0, norm, 1.0)

    def scales(self) -> NDArray[np.float64]:
        return np.exp(self.log_scales.astype(np.float64))

    def opacities(self) -> NDArray[np.float64]:
        return expit(self.opacity_logits.astype(np.float64))

    def rotation_matrices(self) -> NDArray[np.float64]:
        return quat_to_rotmat(self.unit_rotations())

    def covariances(self) -> NDArray[np.float64]:
        """Activated world-space covariances R diag(s^2) R^T, shape (n, 3, 3)."""
        R = self.rotation_matrices()
        RS = R * self.scales()[:, None, :]
        return RS @ RS.transpose(0, 2, 1)

    # ---- structure -------------------------------------------------------

    def subset(self, selector) -> "GaussianScene":
        """New scene holding the selected rows (boolean mask or index array)."""
        selector = np.asarray(selector)
        return GaussianScene(
            means=self.means[selector].copy(),
            rotations=self.rotations[selector].copy(),
            log_scales=self.log_scales[selector].copy(),
            opacity_logits=self.opacity_logits[selector].copy(),
            sh_coeffs=self.sh_coeffs[selector].copy(),
            extras={k: v[selector].copy() for k, v in self.extras.items()},
            attribute_order=self.attribute_order,
            color_rotation_approx=self.color_rotation_approx,
        )

    @classmethod
    def create(
        cls,
        means,
        *,
        rotations=None,
        log_scales=-4.0,
        opacity_logits=6.0,
        colors=None,
        sh_coeffs=None,
    ) -> "GaussianScene":
        """Build a synthetic scene from plain arrays.

        ``colors`` (n, 3) RGB in [0, 1] becomes the DC band; scalars for
        ``log_scales``/``opacity_logits`` broadcast over all Gaussians.
        """
        means = np.asarray(means, dtype=np.float64).reshape(-1, 3)
        n = means.shape[0]
        if rotations is None:
            rotations = np.zeros((n, 4))
            rotations[:, 0] = 1.0
        else:
            rotations = np.asarray(rotations, dtype=np.float64).reshape(n, 4)
        log_scales = np.broadcast_to(
            np.asarray(log_scales, dtype=np.float64), (n, 3)
        ).copy() if np.ndim(log_scales) < 2 else np.asarray(log_scales, dtype=np.float64).reshape(n, 3)
        opacity_logits = np.broadcast_to(
            np.asarray(opacity_logits, dtype=np.float64), (n,)
        ).copy()
        if sh_coeffs is not None:
            sh = np.asarray(sh_coeffs, dtype=np.float64)
        else:
            if colors is None:
                colors = np.full((n, 3), 0.5)
            colors = np.asarray(colors, dtype=np.float64)
            if colors.ndim == 1:
                colors = np.broadcast_to(colors, (n, 3))
            sh = np.zeros((n, 3, 1))
            sh[:, :, 0] = (colors - 0.5) / SH_C0
        return cls(means, rotations, log_scales, opacity_logits, sh)


def _default_attribute_order(basis: int, extras: dict) -> tuple[str, ...]:
    rest = [f"f_rest_{i}" for i in range(3 * (basis - 1))]
    return tuple(list(_POSITION) + list(extras) + list(_DC) + rest + ["opacity"] + list(_SCALES) + list(_ROTS))


# ---- quaternions ----------------------------------------------------------

def quat_to_rotmat(q: NDArray) -> NDArray[np.float64]:
    """(.., 4) quaternions (w, x, y, z) -> (.., 3, 3) rotation matrices."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def rotmat_to_quat(R: NDArray) -> NDArray[np.float64]:
    """3x3 rotation matrix -> quaternion (w, x, y, z)."""
    R = np.asarray(R, dtype=np.float64)
    trace = np.trace(R)
    if trace > 0:
        s = 0.5 / np.sqrt(trace + 1.0)
        w = 0.25 / s
        x = (R[2, 1] - R[1, 2]) * s
        y = (R[0, 2] - R[2, 0]) * s
        z = (R[1, 0] - R[0, 1]) * s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    return np.array([w, x, y, z])


def quat_multiply(a: NDArray, b: NDArray) -> NDArray[np.float64]:
    """Hamilton product a * b for (w, x, y, z) quaternions; broadcasts."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


# SH constants (real spherical harmonics, bands 0..3).
SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)


# ---- file I/O --------------------------------------------------------------

def load_scene(path) -> GaussianScene:
    """Load a binary little-endian point-list scene file.

    The SH degree is inferred from the number of f_rest_* properties.
    Unknown float properties (normals etc.) are preserved for export.
    """
    path = Path(path)
    raw = path.read_bytes()
    names, header_len, count = _parse_header(raw, path)

    for required in _REQUIRED:
        if required not in names:
            raise SceneFormatError(f"missing required attribute {required!r}", attribute=required)

    rest_count = sum(1 for n in names if n.startswith("f_rest_"))
    if rest_count not in _REST_COUNTS:
        raise SceneFormatError(
            f"unsupported f_rest attribute count {rest_count} (expected 0, 9, 24 or 45)",
            attribute="f_rest",
        )
    basis = _REST_COUNTS[rest_count]

    dtype = np.dtype([(n, "<f4") for n in names])
    need = count * dtype.itemsize
    body = raw[header_len:]
    if len(body) < need:
        raise SceneIOError(
            f"truncated scene file: expected {need} data bytes, got {len(body)}",
            offset=header_len + len(body),
        )
    rows = np.frombuffer(body[:need], dtype=dtype)

    def cols(group):
        if not count:
            return np.zeros((0, len(group)))
        return np.stack([rows[g] for g in group], axis=1).astype(np.float64)

    sh = np.zeros((count, 3, basis))
    for c in range(3):
        sh[:, c, 0] = rows[_DC[c]]
        for j in range(basis - 1):
            sh[:, c, 1 + j] = rows[f"f_rest_{c * (basis - 1) + j}"]

    handled = set(_REQUIRED) | {f"f_rest_{i}" for i in range(rest_count)}
    extras = {n: rows[n].astype(np.float64) for n in names if n not in handled}

    return GaussianScene(
        means=cols(_POSITION),
        rotations=cols(_ROTS),
        log_scales=cols(_SCALES),
        opacity_logits=rows["opacity"].astype(np.float64) if count else np.zeros(0),
        sh_coeffs=sh,
        extras=extras,
        attribute_order=tuple(names),
    )


def _parse_header(raw: bytes, path) -> tuple[list[str], int, int]:
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise SceneFormatError(f"{path} is not a point-list scene file")
    header_len = end + len(b"end_header\n")
    lines = raw[:end].decode("ascii", errors="replace").splitlines()
    count = None
    names: list[str] = []
    in_vertex = False
    for line in lines:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] != "binary_little_endian":
                raise SceneFormatError(f"unsupported format {parts[1]!r} (need binary_little_endian)")
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            if parts[1] != "float":
                raise SceneFormatError(f"non-float vertex property {parts[-1]!r}", attribute=parts[-1])
            names.append(parts[2])
    if count is None:
        raise SceneFormatError("no vertex element in header")
    return names, header_len, count


def save_scene(scene: GaussianScene, path) -> int:
    """Write the scene in its stored attribute order; returns rows written.

    Because raw parameters are stored exactly as read, a load/save round
    trip reproduces the source rows byte for byte.
    """
    names = scene.attribute_order
    basis = scene.sh_basis
    dtype = np.dtype([(n, "<f4") for n in names])
    rows = np.zeros(scene.count, dtype=dtype)
    for i, axis in enumerate(_POSITION):
        rows[axis] = scene.means[:, i]
    for c in range(3):
        rows[_DC[c]] = scene.sh_coeffs[:, c, 0]
        for j in range(basis - 1):
            rows[f"f_rest_{c * (basis - 1) + j}"] = scene.sh_coeffs[:, c, 1 + j]
    rows["opacity"] = scene.opacity_logits
    for i, name in enumerate(_SCALES):
        rows[name] = scene.log_scales[:, i]
    for i, name in enumerate(_ROTS):
        rows[name] = scene.rotations[:, i]
    for name, values in scene.extras.items():
        rows[name] = values

    header = ["ply", "format binary_little_endian 1.0", f"element vertex {scene.count}"]
    header += [f"property float {n}" for n in names]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(rows.tobytes())
    return scene.count


# ---- rigid transforms ------------------------------------------------------

def apply_rigid_transform(scene: GaussianScene, rotation, translation) -> GaussianScene:
    """Rigidly move a scene: means, orientations and degree-1 SH.

    SH bands >= 2 are carried over unrotated and the result is flagged
    ``color_rotation_approx`` (exact rotation needs Wigner-D matrices).
    """
    R = np.asarray(rotation, dtype=np.float64)
    t = np.asarray(translation, dtype=np.float64).reshape(3)
    if R.shape != (3, 3) or not np.allclose(R @ R.T, np.eye(3), atol=1e-6) \
            or not np.isclose(np.linalg.det(R), 1.0, atol=1e-6):
        raise ValueError("rotation must be orthonormal with det +1")

    means = scene.means @ R.T + t
    q_r = rotmat_to_quat(R)
    rotations = quat_multiply(q_r, scene.rotations)

    sh = scene.sh_coeffs.copy()
    if scene.sh_basis >= 4:
        # Band 1 transforms like a direction: map coefficients to the
        # equivalent linear form g . d, rotate g, map back.
        g = np.stack([-sh[:, :, 3], -sh[:, :, 1], sh[:, :, 2]], axis=-1)
        g = g @ R.T
        sh[:, :, 1] = -g[..., 1]
        sh[:, :, 2] = g[..., 2]
        sh[:, :, 3] = -g[..., 0]

    return GaussianScene(
        means=means,
        rotations=rotations,
        log_scales=scene.log_scales.copy(),
        opacity_logits=scene.opacity_logits.copy(),
        sh_coeffs=sh,
        extras={k: v.copy() for k, v in scene.extras.items()},
        attribute_order=scene.attribute_order,
        color_rotation_approx=scene.color_rotation_approx or scene.sh_basis > 4,
    )
