"""Headless twin of the browser workflow, driven straight through the engine.

Reads a JSON spec (scene, camera, stroke, autoseg settings, correction) and
performs the same steps the UI performs over HTTP: paint -> frustum project
-> auto segment -> correct one view -> export. Prints the selection counts
after each step so the scripted browser test can compare.
"""

import json
import sys

from splatselect import (
    Camera,
    Mask2D,
    ReferenceMask,
    Selection3D,
    combine_selection3d,
    export_selection,
    frustum_project,
    load_scene,
    paint_mask,
    rerun_after_correction,
    run_auto_segmentation,
)
from splatselect.providers import mask_from_png_bytes

spec = json.loads(open(sys.argv[1]).read())
scene = load_scene(spec["scene"])
cam = Camera.from_json(spec["camera"])

mask = paint_mask(
    Mask2D.empty(cam), [tuple(p) for p in spec["stroke"]], spec["radius"], True
)
mask.occlusion_free = True

selection = combine_selection3d(
    Selection3D.empty(scene.count), frustum_project(scene, mask), "N"
)
counts = {"project": selection.popcount()}

run = run_auto_segmentation(
    scene, [ReferenceMask(mask)], m=spec["m"],
    presegment=spec["presegment"],
)
counts["autoseg"] = run.result.selection.popcount()

png = open(spec["correction_png"], "rb").read()
position = spec["correction_position"]
correction_cam = run.job.sequence.cameras[position]
correction = ReferenceMask(mask_from_png_bytes(png, correction_cam))
run = rerun_after_correction(run, correction)
counts["correction"] = run.result.selection.popcount()

counts["exported"] = export_selection(scene, run.result.selection, spec["export_path"])
print(json.dumps(counts))
