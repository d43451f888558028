"""Independent naive reference implementations used as test oracles.

The splat reference below works one pixel at a time with a full per-pixel
sort and plain scalar math: no tiling, no bounding boxes, no shared code
with the production rasterizer. It follows the same documented conventions
(pixel centers at half-integers, +0.3 px covariance dilation, 0.99 alpha
cap, 1/255 contribution cutoff, SH colors shifted +0.5 and clamped).
"""

import numpy as np

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def quat_matrix(q):
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def sh_color(coeffs, direction):
    """Degree <= 1 SH evaluation for one Gaussian; coeffs is (3, B)."""
    c = SH_C0 * coeffs[:, 0]
    if coeffs.shape[1] >= 4:
        d = direction / np.linalg.norm(direction)
        c = c - SH_C1 * d[1] * coeffs[:, 1] + SH_C1 * d[2] * coeffs[:, 2] - SH_C1 * d[0] * coeffs[:, 3]
    return np.clip(c + 0.5, 0.0, 1.0)


def naive_forward(scene, cam, features=None):
    """Per-pixel full-sort splatting.

    Returns dict with rgba, depth, first_hit, feature image (when features
    given) and per-Gaussian weight maps (n, H, W).
    """
    h, w = cam.height, cam.width
    n = scene.count
    W2C = np.asarray(cam.world_to_camera, dtype=np.float64)
    R, t = W2C[:3, :3], W2C[:3, 3]
    cam_center = -R.T @ t

    splats = []
    for i in range(n):
        mu = scene.means[i].astype(np.float64)
        p = R @ mu + t
        if p[2] < cam.near or p[2] > cam.far:
            continue
        op = sigmoid(float(scene.opacity_logits[i]))
        Rm = quat_matrix(scene.rotations[i])
        S = np.diag(np.exp(scene.log_scales[i].astype(np.float64)))
        sigma = Rm @ S @ S @ Rm.T
        J = np.array([
            [cam.fx / p[2], 0.0, -cam.fx * p[0] / p[2] ** 2],
            [0.0, cam.fy / p[2], -cam.fy * p[1] / p[2] ** 2],
        ])
        cov2 = J @ R @ sigma @ R.T @ J.T + 0.3 * np.eye(2)
        inv = np.linalg.inv(cov2)
        u = cam.fx * p[0] / p[2] + cam.cx
        v = cam.fy * p[1] / p[2] + cam.cy
        color = sh_color(scene.sh_coeffs[i].astype(np.float64), mu - cam_center)
        splats.append((i, p[2], u, v, inv, op, color))

    splats.sort(key=lambda s: s[1])

    rgba = np.zeros((h, w, 4))
    depth = np.zeros((h, w))
    first_hit = np.full((h, w), -1, dtype=np.int64)
    weight_maps = np.zeros((n, h, w))
    if features is not None:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features[:, None]
        feat = np.zeros((h, w, features.shape[1]))
    else:
        feat = None

    for py in range(h):
        for px in range(w):
            cx, cy = px + 0.5, py + 0.5
            transmittance = 1.0
            total_w = 0.0
            total_wz = 0.0
            best_w, best_i = 0.0, -1
            hit = -1
            for (i, z, u, v, inv, op, color) in splats:
                dx, dy = cx - u, cy - v
                q = inv[0, 0] * dx * dx + 2 * inv[0, 1] * dx * dy + inv[1, 1] * dy * dy
                alpha = min(0.99, op * np.exp(-0.5 * q))
                if alpha < 1.0 / 255.0:
                    continue
                wgt = alpha * transmittance
                weight_maps[i, py, px] = wgt
                rgba[py, px, :3] += wgt * color
                total_w += wgt
                total_wz += wgt * z
                if feat is not None:
                    feat[py, px] += wgt * features[i]
                if hit < 0 and total_w > 0.5:
                    hit = i
                if wgt > best_w:
                    best_w, best_i = wgt, i
                transmittance *= 1.0 - alpha
            rgba[py, px, 3] = total_w
            if total_w > 0:
                depth[py, px] = total_wz / total_w
            first_hit[py, px] = hit if hit >= 0 else (best_i if best_w > 0 else -1)

    return {"rgba": rgba, "depth": depth, "first_hit": first_hit,
            "features": feat, "weights": weight_maps}


def naive_visibility(scene, cam, threshold=1.0 / 255.0):
    return naive_forward(scene, cam)["weights"].reshape(scene.count, -1).max(axis=1) >= threshold


def counting_metrics(pred, gt):
    """Brute-force IoU/accuracy by explicit element counting."""
    pred = np.asarray(pred, dtype=bool).reshape(-1)
    gt = np.asarray(gt, dtype=bool).reshape(-1)
    tp = fp = fn = tn = 0
    for a, b in zip(pred, gt):
        if a and b:
            tp += 1
        elif a and not b:
            fp += 1
        elif not a and b:
            fn += 1
        else:
            tn += 1
    iou = 1.0 if (tp + fp + fn) == 0 else tp / (tp + fp + fn)
    return iou, (tp + tn) / len(pred)
