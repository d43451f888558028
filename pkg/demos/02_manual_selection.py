"""Manual selection: brush and box masks, frustum vs depth projection, and
the N/A/S/I combine modes.

The frustum mode sweeps a 2D mask through space and takes everything in its
path; the depth mode keeps only the rendered surface layer. Intersecting
frustum projections from two views carves out an object without any model.
"""

from pathlib import Path

import numpy as np

from splatselect import (
    Camera,
    GaussianScene,
    Mask2D,
    box_mask,
    combine_selection3d,
    depth_project,
    export_selection,
    frustum_project,
    paint_mask,
)

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# Two parallel walls of splats; the camera looks straight at them.
rng = np.random.default_rng(2)


def wall(z, n=400):
    return np.column_stack([
        rng.uniform(-0.5, 0.5, n), rng.uniform(-0.5, 0.5, n), np.full(n, z)
    ])


scene = GaussianScene.create(
    np.vstack([wall(1.0), wall(2.0)]), log_scales=np.log(0.05), opacity_logits=8.0
)
cam = Camera.look_at((0, 0, 0), (0, 0, 1), (0, 1, 0),
                     fx=96, fy=96, cx=48, cy=48, width=96, height=96, near=0.05, far=30)

# Paint a brush stroke across the middle of the view.
mask = paint_mask(Mask2D.empty(cam), [(20, 48), (76, 48)], radius=9)
print(f"brush mask covers {mask.popcount()} pixels")

swept = frustum_project(scene, mask)
surface = depth_project(scene, mask, tau_d=0.1)
front = swept.bits[:400].sum(), surface.bits[:400].sum()
back = swept.bits[400:].sum(), surface.bits[400:].sum()
print(f"frustum projection:  front wall {front[0]:4d}   back wall {back[0]:4d}")
print(f"depth projection:    front wall {front[1]:4d}   back wall {back[1]:4d}")
assert back[1] == 0, "depth projection must reject the occluded wall"

# Combine modes behave like any image editor's selection tools.
left = frustum_project(scene, box_mask(cam, (0, 0, 48, 96)))
bottom = frustum_project(scene, box_mask(cam, (0, 48, 96, 96)))
union = combine_selection3d(left, bottom, "A")
corner = combine_selection3d(left, bottom, "I")
left_only = combine_selection3d(left, bottom, "S")
print(f"left {left.popcount()}, bottom {bottom.popcount()}, union {union.popcount()}, "
      f"intersection {corner.popcount()}, left-minus-bottom {left_only.popcount()}")

# Export the surface-layer selection as a standalone scene file.
n = export_selection(scene, surface, out_dir / "front_stroke.ply")
print(f"exported {n} gaussians to {out_dir / 'front_stroke.ply'}")
