"""Software splatting kernels: RGBA render, depth, features (+ gradient),
per-Gaussian visibility and per-pixel first-hit ids.

Forward pass: project each Gaussian, dilate the 2D covariance by 0.3 px,
evaluate per-pixel alpha capped at 0.99 (contributions below 1/255 are
skipped), and composite front to back in global camera-z order. Work is
vectorized over pixel tiles; the compositing order per pixel is always the
global sorted order, so results are schedule-independent.

The feature kernel reuses the compositing weights of the RGBA pass, so it is
linear in the feature vectors and its L2-loss gradient is a weighted sum of
residuals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .cameras import Camera
from .scene import GaussianScene, SH_C0, SH_C1, SH_C2, SH_C3, quat_to_rotmat

ALPHA_CUTOFF = 1.0 / 255.0
ALPHA_CAP = 0.99
COV_DILATION = 0.3
VIS_THRESHOLD = 1.0 / 255.0
FIRST_HIT_ALPHA = 0.5
_TILE = 16

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False


@dataclass
class ContribWeights:
    """Per-pixel compositing weights in sparse COO layout.

    ``pixel`` holds flat row-major pixel indices; entries appear in global
    compositing order within each pixel.
    """

    pixel: NDArray[np.int64]
    gaussian: NDArray[np.int32]
    weight: NDArray[np.float64]
    shape: tuple[int, int]
    scene_count: int

    def feature_image(self, features: NDArray) -> NDArray[np.float64]:
        """Alpha-composited feature render: pixel = sum_i w_i F_i, (H, W, d)."""
        F = np.asarray(features, dtype=np.float64)
        if F.ndim == 1:
            F = F[:, None]
        if F.shape[0] != self.scene_count:
            raise ValueError(f"features must have {self.scene_count} rows, got {F.shape[0]}")
        h, w = self.shape
        out = np.zeros((h * w, F.shape[1]))
        vals = F[self.gaussian]
        for j in range(F.shape[1]):
            out[:, j] = np.bincount(self.pixel, weights=self.weight * vals[:, j], minlength=h * w)
        return out.reshape(h, w, F.shape[1])

    def feature_grad(self, residual: NDArray) -> NDArray[np.float64]:
        """Gradient of 0.5 * ||img - target||^2 w.r.t. the features, (n, d)."""
        res = np.asarray(residual, dtype=np.float64)
        if res.ndim == 2:
            res = res[:, :, None]
        if res.shape[:2] != self.shape:
            raise ValueError(f"residual must be {self.shape}, got {res.shape[:2]}")
        flat = res.reshape(-1, res.shape[2])
        grad = np.zeros((self.scene_count, res.shape[2]))
        picked = flat[self.pixel]
        for j in range(res.shape[2]):
            grad[:, j] = np.bincount(
                self.gaussian, weights=self.weight * picked[:, j], minlength=self.scene_count
            )
        return grad


@dataclass
class RenderOutputs:
    """Everything one forward pass produces."""

    rgba: NDArray[np.float64]        # (H, W, 4) in [0, 1]
    depth: NDArray[np.float64]       # (H, W), 0 where nothing rendered
    first_hit: NDArray[np.int32]     # (H, W), Gaussian index or -1
    contrib_weights: ContribWeights
    max_weight: NDArray[np.float64]  # (n,) peak compositing weight per Gaussian


def eval_sh_colors(scene: GaussianScene, directions: NDArray) -> NDArray[np.float64]:
    """View-dependent RGB from SH coefficients, shifted +0.5, clamped [0, 1]."""
    sh = scene.sh_coeffs.astype(np.float64)
    basis = scene.sh_basis
    out = SH_C0 * sh[:, :, 0]
    if basis > 1:
        d = np.asarray(directions, dtype=np.float64)
        d = d / np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-12)
        x, y, z = d[:, 0:1], d[:, 1:2], d[:, 2:3]
        out = out - SH_C1 * y * sh[:, :, 1] + SH_C1 * z * sh[:, :, 2] - SH_C1 * x * sh[:, :, 3]
    if basis > 4:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        out = (
            out
            + SH_C2[0] * xy * sh[:, :, 4]
            + SH_C2[1] * yz * sh[:, :, 5]
            + SH_C2[2] * (2.0 * zz - xx - yy) * sh[:, :, 6]
            + SH_C2[3] * xz * sh[:, :, 7]
            + SH_C2[4] * (xx - yy) * sh[:, :, 8]
        )
    if basis > 9:
        out = (
            out
            + SH_C3[0] * y * (3.0 * xx - yy) * sh[:, :, 9]
            + SH_C3[1] * xy * z * sh[:, :, 10]
            + SH_C3[2] * y * (4.0 * zz - xx - yy) * sh[:, :, 11]
            + SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * sh[:, :, 12]
            + SH_C3[4] * x * (4.0 * zz - xx - yy) * sh[:, :, 13]
            + SH_C3[5] * z * (xx - yy) * sh[:, :, 14]
            + SH_C3[6] * x * (xx - 3.0 * yy) * sh[:, :, 15]
        )
    return np.clip(out + 0.5, 0.0, 1.0)


def _project(scene: GaussianScene, cam: Camera):
    """Cull, project and prepare per-Gaussian splat parameters.

    Returns arrays sorted by increasing camera z: global index, projected
    center, inverse 2D covariance entries, opacity, camera z and the
    conservative pixel bounding box that contains every alpha >= 1/255.
    """
    n = scene.count
    if n == 0:
        return None
    W = cam.rotation
    t = cam.translation
    pcam = scene.means.astype(np.float64) @ W.T + t
    z = pcam[:, 2]
    opac = scene.opacities()
    keep = (z >= cam.near) & (z <= cam.far) & (opac >= ALPHA_CUTOFF)
    if not keep.any():
        return None
    idx = np.nonzero(keep)[0]
    pcam = pcam[idx]
    z = z[idx]
    opac = opac[idx]

    u = cam.fx * pcam[:, 0] / z + cam.cx
    v = cam.fy * pcam[:, 1] / z + cam.cy

    # 2D covariance: J W Sigma W^T J^T + dilation. Build the camera-frame
    # factor A = W R diag(s) so Sigma_cam = A A^T.
    Rm = quat_to_rotmat(scene.unit_rotations()[idx])
    A = (W[None] @ Rm) * scene.scales()[idx][:, None, :]
    cov_cam = A @ A.transpose(0, 2, 1)
    J = np.zeros((len(idx), 2, 3))
    J[:, 0, 0] = cam.fx / z
    J[:, 0, 2] = -cam.fx * pcam[:, 0] / (z * z)
    J[:, 1, 1] = cam.fy / z
    J[:, 1, 2] = -cam.fy * pcam[:, 1] / (z * z)
    cov2 = J @ cov_cam @ J.transpose(0, 2, 1)
    a = cov2[:, 0, 0] + COV_DILATION
    b = cov2[:, 0, 1]
    c = cov2[:, 1, 1] + COV_DILATION
    det = a * c - b * b
    ia = c / det
    ib = -b / det
    ic = a / det

    # Mahalanobis level set where alpha drops to the cutoff; its bounding
    # box half-extents are sqrt(q * var) per axis.
    qmax = 2.0 * np.log(opac / ALPHA_CUTOFF)
    rx = np.sqrt(qmax * a)
    ry = np.sqrt(qmax * c)
    x0 = np.maximum(0, np.floor(u - rx - 0.5)).astype(np.int64)
    x1 = np.minimum(cam.width - 1, np.ceil(u + rx - 0.5)).astype(np.int64)
    y0 = np.maximum(0, np.floor(v - ry - 0.5)).astype(np.int64)
    y1 = np.minimum(cam.height - 1, np.ceil(v + ry - 0.5)).astype(np.int64)
    on = (x0 <= x1) & (y0 <= y1) & (u + rx >= 0) & (u - rx <= cam.width) \
        & (v + ry >= 0) & (v - ry <= cam.height)
    if not on.any():
        return None

    order = np.argsort(z[on], kind="stable")
    sel = np.nonzero(on)[0][order]
    return (idx[sel], u[sel], v[sel], ia[sel], ib[sel], ic[sel], opac[sel], z[sel],
            x0[sel], x1[sel], y0[sel], y1[sel])


def _composite_tiles(h, w, gids, u, v, ia, ib, ic, opac, z, bx0, bx1, by0, by1, colors):
    """Vectorized compositing over pixel tiles (numpy fallback path)."""
    acc_rgb = np.zeros((h, w, 3))
    acc_a = np.zeros((h, w))
    acc_wz = np.zeros((h, w))
    best_w = np.zeros((h, w))
    best_i = np.full((h, w), -1, np.int32)
    first_hit = np.full((h, w), -1, np.int32)
    gmax = np.zeros(gids.size)
    px_parts: list[np.ndarray] = []
    gi_parts: list[np.ndarray] = []
    wt_parts: list[np.ndarray] = []

    for ty in range(0, h, _TILE):
        for tx in range(0, w, _TILE):
            ty1 = min(ty + _TILE, h)
            tx1 = min(tx + _TILE, w)
            cand = np.nonzero((bx0 < tx1) & (bx1 >= tx) & (by0 < ty1) & (by1 >= ty))[0]
            if cand.size == 0:
                continue
            th, tw = ty1 - ty, tx1 - tx
            xs = np.arange(tx, tx1) + 0.5
            ys = np.arange(ty, ty1) + 0.5
            dx = xs[None, :] - u[cand, None]          # (k, tw)
            dy = ys[None, :] - v[cand, None]          # (k, th)
            q = (
                ia[cand, None, None] * (dx * dx)[:, None, :]
                + ic[cand, None, None] * (dy * dy)[:, :, None]
                + (2.0 * ib[cand])[:, None, None] * dy[:, :, None] * dx[:, None, :]
            )
            alpha = opac[cand, None, None] * np.exp(-0.5 * q)
            np.minimum(alpha, ALPHA_CAP, out=alpha)
            alpha[alpha < ALPHA_CUTOFF] = 0.0
            alpha = alpha.reshape(cand.size, th * tw)

            trans = np.cumprod(1.0 - alpha, axis=0)
            weights = alpha.copy()
            weights[1:] *= trans[:-1]

            acc_a[ty:ty1, tx:tx1] = weights.sum(axis=0).reshape(th, tw)
            acc_wz[ty:ty1, tx:tx1] = (weights * z[cand, None]).sum(axis=0).reshape(th, tw)
            acc_rgb[ty:ty1, tx:tx1] = np.einsum(
                "kp,kc->pc", weights, colors[gids[cand]]
            ).reshape(th, tw, 3)

            tile_gids = gids[cand].astype(np.int32)

            # First hit: earliest Gaussian pushing accumulated alpha past the
            # threshold, else the heaviest contributor.
            acc = np.cumsum(weights, axis=0)
            crossed = acc > FIRST_HIT_ALPHA
            any_cross = crossed.any(axis=0)
            fh_tile = np.full(th * tw, -1, np.int32)
            fh_tile[any_cross] = tile_gids[np.argmax(crossed[:, any_cross], axis=0)]
            first_hit[ty:ty1, tx:tx1] = fh_tile.reshape(th, tw)

            wmax = weights.max(axis=0)
            hit_any = wmax > 0
            bi_tile = np.full(th * tw, -1, np.int32)
            bi_tile[hit_any] = tile_gids[np.argmax(weights[:, hit_any], axis=0)]
            best_w[ty:ty1, tx:tx1] = wmax.reshape(th, tw)
            best_i[ty:ty1, tx:tx1] = bi_tile.reshape(th, tw)

            np.maximum.at(gmax, cand, weights.max(axis=1))

            gk, pk = np.nonzero(alpha > 0)
            local = pk + (ty * w + tx) + (pk // tw) * (w - tw)
            px_parts.append(local)
            gi_parts.append(tile_gids[gk])
            wt_parts.append(weights[gk, pk])

    if px_parts:
        pixel = np.concatenate(px_parts)
        gaussian = np.concatenate(gi_parts)
        weight = np.concatenate(wt_parts)
    else:
        pixel = np.zeros(0, np.int64)
        gaussian = np.zeros(0, np.int32)
        weight = np.zeros(0)
    return acc_rgb, acc_a, acc_wz, first_hit, best_w, best_i, gmax, pixel, gaussian, weight


if _HAVE_NUMBA:

    @_njit(cache=True)
    def _composite_loop(h, w, gids, u, v, ia, ib, ic, opac, z, bx0, bx1, by0, by1,
                        colors, cap, cutoff, hit_alpha):  # pragma: no cover - jitted
        k_total = u.size
        acc_rgb = np.zeros((h, w, 3))
        acc_a = np.zeros((h, w))
        acc_wz = np.zeros((h, w))
        trans = np.ones((h, w))
        best_w = np.zeros((h, w))
        best_i = np.full((h, w), -1, np.int32)
        first_hit = np.full((h, w), -1, np.int32)
        gmax = np.zeros(k_total)

        bound = 0
        for k in range(k_total):
            bound += (bx1[k] - bx0[k] + 1) * (by1[k] - by0[k] + 1)
        out_px = np.empty(bound, np.int64)
        out_gi = np.empty(bound, np.int32)
        out_w = np.empty(bound, np.float64)
        cnt = 0

        for k in range(k_total):
            gid = gids[k]
            zk = z[k]
            c0, c1, c2 = colors[gid, 0], colors[gid, 1], colors[gid, 2]
            for py in range(by0[k], by1[k] + 1):
                dy = py + 0.5 - v[k]
                for px in range(bx0[k], bx1[k] + 1):
                    dx = px + 0.5 - u[k]
                    q = ia[k] * dx * dx + 2.0 * ib[k] * dx * dy + ic[k] * dy * dy
                    a = opac[k] * np.exp(-0.5 * q)
                    if a > cap:
                        a = cap
                    if a < cutoff:
                        continue
                    t = trans[py, px]
                    wgt = a * t
                    out_px[cnt] = py * w + px
                    out_gi[cnt] = gid
                    out_w[cnt] = wgt
                    cnt += 1
                    acc_a[py, px] += wgt
                    acc_wz[py, px] += wgt * zk
                    acc_rgb[py, px, 0] += wgt * c0
                    acc_rgb[py, px, 1] += wgt * c1
                    acc_rgb[py, px, 2] += wgt * c2
                    if first_hit[py, px] < 0 and acc_a[py, px] > hit_alpha:
                        first_hit[py, px] = gid
                    if wgt > best_w[py, px]:
                        best_w[py, px] = wgt
                        best_i[py, px] = gid
                    if wgt > gmax[k]:
                        gmax[k] = wgt
                    trans[py, px] = t * (1.0 - a)
        return (acc_rgb, acc_a, acc_wz, first_hit, best_w, best_i, gmax,
                out_px[:cnt], out_gi[:cnt], out_w[:cnt])


def forward(scene: GaussianScene, cam: Camera, colors: NDArray | None = None) -> RenderOutputs:
    """Full forward pass. ``colors`` overrides SH evaluation when given."""
    h, w = cam.height, cam.width
    empty = ContribWeights(
        pixel=np.zeros(0, np.int64), gaussian=np.zeros(0, np.int32),
        weight=np.zeros(0), shape=(h, w), scene_count=scene.count,
    )
    rgba = np.zeros((h, w, 4))
    depth = np.zeros((h, w))
    first_hit = np.full((h, w), -1, np.int32)
    max_weight = np.zeros(scene.count)

    proj = _project(scene, cam)
    if proj is None:
        return RenderOutputs(rgba, depth, first_hit, empty, max_weight)
    gids, u, v, ia, ib, ic, opac, z, bx0, bx1, by0, by1 = proj

    if colors is None:
        colors = eval_sh_colors(scene, scene.means.astype(np.float64) - cam.position)
    colors = np.ascontiguousarray(colors, dtype=np.float64)

    if _HAVE_NUMBA:
        (acc_rgb, acc_a, acc_wz, first_hit, best_w, best_i, gmax,
         pixel, gaussian, weight) = _composite_loop(
            h, w, gids.astype(np.int32), u, v, ia, ib, ic, opac, z,
            bx0, bx1, by0, by1, colors, ALPHA_CAP, ALPHA_CUTOFF, FIRST_HIT_ALPHA,
        )
    else:
        (acc_rgb, acc_a, acc_wz, first_hit, best_w, best_i, gmax,
         pixel, gaussian, weight) = _composite_tiles(
            h, w, gids, u, v, ia, ib, ic, opac, z, bx0, bx1, by0, by1, colors
        )

    fallback = (first_hit < 0) & (best_w > 0)
    first_hit[fallback] = best_i[fallback]

    np.maximum.at(max_weight, gids, gmax)

    rendered = acc_a > 0
    depth[rendered] = acc_wz[rendered] / acc_a[rendered]
    rgba[:, :, :3] = acc_rgb
    rgba[:, :, 3] = acc_a

    if pixel.size:
        contribs = ContribWeights(
            pixel=pixel, gaussian=gaussian, weight=weight,
            shape=(h, w), scene_count=scene.count,
        )
    else:
        contribs = empty
    return RenderOutputs(rgba, depth, first_hit, contribs, max_weight)


def render(scene: GaussianScene, cam: Camera) -> RenderOutputs:
    """RGBA + depth + first-hit render of a scene from one camera."""
    return forward(scene, cam)


def render_features(scene: GaussianScene, cam: Camera, features: NDArray) -> NDArray[np.float64]:
    """Composite arbitrary per-Gaussian feature vectors, (H, W, d).

    Uses the same weights as render(); not normalized, so empty pixels are 0
    and features of all ones reproduce the alpha channel.
    """
    F = np.asarray(features, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] != scene.count:
        raise ValueError(f"features must have {scene.count} rows, got {F.shape[0]}")
    return forward(scene, cam).contrib_weights.feature_image(F)


def render_features_grad(
    scene: GaussianScene, cam: Camera, features: NDArray, residual: NDArray
) -> NDArray[np.float64]:
    """Exact gradient of L = 0.5 * ||features_render - target||^2 w.r.t. F.

    ``residual`` is the rendered image minus the target. Geometry and
    opacities are held fixed; the render is linear in F, so the gradient per
    Gaussian is the weight-weighted sum of residuals over pixels.
    """
    F = np.asarray(features, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] != scene.count:
        raise ValueError(f"features must have {scene.count} rows, got {F.shape[0]}")
    res = np.asarray(residual, dtype=np.float64)
    if res.ndim == 2:
        res = res[:, :, None]
    if res.shape != (cam.height, cam.width, F.shape[1]):
        raise ValueError(
            f"residual shape {res.shape} does not match ({cam.height}, {cam.width}, {F.shape[1]})"
        )
    return forward(scene, cam).contrib_weights.feature_grad(res)


def visibility(scene: GaussianScene, cam: Camera, threshold: float = VIS_THRESHOLD) -> NDArray[np.bool_]:
    """Per-Gaussian mask: visible iff its peak compositing weight >= threshold."""
    return forward(scene, cam).max_weight >= threshold


def dump_channel(image: NDArray, path) -> None:
    """Debug helper: write any float channel or RGB(A) image as an 8-bit PNG."""
    from PIL import Image

    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        lo, hi = float(arr.min()), float(arr.max())
        arr = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
    data = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path)
