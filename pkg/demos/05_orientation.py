"""Orient a scene from a selection: align the principal axes of the selected
Gaussians with chosen world axes.

Typical workflow: select the ground with a quick frustum projection, then map
the axis of least variation (PC3) to Z for a consistent gravity direction.
The rotation happens about the selection centroid, so nothing drifts.
"""

import numpy as np

from splatselect import (
    AxisMapping,
    Camera,
    GaussianScene,
    Mask2D,
    Selection3D,
    frustum_project,
    orient_scene,
    pca_basis,
)

rng = np.random.default_rng(5)

# A tilted "floor" plus an object resting on it.
floor_pts = np.column_stack([
    rng.uniform(-2.0, 2.0, 900), rng.uniform(-1.2, 1.2, 900), rng.normal(0, 0.01, 900)
])
tilt = np.radians(28)
R_tilt = np.array([[1, 0, 0],
                   [0, np.cos(tilt), -np.sin(tilt)],
                   [0, np.sin(tilt), np.cos(tilt)]])
floor_pts = floor_pts @ R_tilt.T
prop = rng.normal((0.3, 0.2, 0.6), 0.15, (200, 3)) @ R_tilt.T
scene = GaussianScene.create(np.vstack([floor_pts, prop]),
                             log_scales=np.log(0.05), opacity_logits=5.0)

# Select the floor by sweeping a full-view mask from a camera that only sees it.
cam = Camera.look_at((0, 0.5, -5.0), (0, 0, 0), (0, 1, 0),
                     fx=36, fy=36, cx=32, cy=32, width=64, height=64, near=0.1, far=9.0)
floor_sel = frustum_project(scene, Mask2D.full(cam))
floor_sel = Selection3D(floor_sel.bits & (np.arange(scene.count) < 900))
print(f"selected {floor_sel.popcount()} floor gaussians")

center, components, variances = pca_basis(scene, floor_sel)
print("principal variances before:", np.round(variances, 4))
print("PC3 (least variation):     ", np.round(components[2], 3))

oriented = orient_scene(scene, floor_sel, AxisMapping.parse("pc3=z"))

pts = oriented.means[floor_sel.bits]
flat = pts - pts.mean(axis=0)
print("floor variance per world axis after orientation:",
      np.round(flat.var(axis=0), 6))
drift = np.abs(pts.mean(axis=0) - center).max()
print(f"selection centroid drift: {drift:.2e} (rotation is about the centroid)")
assert flat[:, 2].var() < 1e-4 * flat.var(axis=0).sum()
print("the floor is now level: Z is the axis of least variation")
