"""Benchmark harness: sweep pipeline configurations over labeled scenes.

Builds a tiny synthetic benchmark (scenes + input masks + 3D ground truth on
disk), then compares view counts and pre-segmentation on/off. The oracle
provider stands in for a perfect mask tracker, so the numbers isolate the
geometry and aggregation stages.
"""

import json
from pathlib import Path

import numpy as np

from splatselect import Camera, GaussianScene, Selection3D, save_cameras, save_scene
from splatselect.evalkit import run_benchmark
from splatselect.providers import silhouette_mask
from splatselect.selection import save_mask, save_selection

out_dir = Path(__file__).parent / "output" / "benchmark"
out_dir.mkdir(parents=True, exist_ok=True)

scenes = []
for i, seed in enumerate((21, 22, 23)):
    rng = np.random.default_rng(seed)
    target = rng.normal((0, 0, 0), 0.25, (350, 3))
    clutter = rng.normal((0.4, 1.5, 0.2), 0.28, (300, 3))
    scene = GaussianScene.create(np.vstack([target, clutter]),
                                 log_scales=np.log(0.045), opacity_logits=4.0)
    gt = Selection3D(np.arange(scene.count) < 350)
    cam = Camera.look_at((3.0, 0.4, 0.4), (0, 0, 0), (0, 1, 0),
                         fx=40, fy=40, cx=24, cy=24, width=48, height=48,
                         near=0.05, far=40)
    mask = silhouette_mask(scene, gt, cam, closing=False)
    mask.occlusion_free = True

    save_scene(scene, out_dir / f"scene{i}.ply")
    save_selection(gt, out_dir / f"gt{i}.gsel")
    save_mask(mask, out_dir / f"mask{i}.png")
    save_cameras(out_dir / f"cam{i}.json", [cam])
    scenes.append({
        "id": f"scene{i}",
        "scene": f"scene{i}.ply",
        "inputs": [{"mask": f"mask{i}.png", "camera": f"cam{i}.json", "occlusion_free": True}],
        "gt3d": f"gt{i}.gsel",
    })

manifest = {
    "_base": str(out_dir),
    "scenes": scenes,
    "configs": [
        {"m": 10, "provider": "oracle", "presegment": True},
        {"m": 20, "provider": "oracle", "presegment": True},
        {"m": 50, "provider": "oracle", "presegment": True},
        {"m": 20, "provider": "oracle", "presegment": False},
        {"m": 20, "provider": "geometric", "presegment": True},
    ],
}
(out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))

records, table = run_benchmark(manifest, out_dir / "results.jsonl")
print(table)
print(f"\n{len(records)} records -> {out_dir / 'results.jsonl'}")
