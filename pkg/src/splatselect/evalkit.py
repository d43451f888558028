"""Segmentation metrics and a desk-scale benchmark harness.

Metrics follow the usual convention: foreground IoU = TP / (TP + FP + FN)
and pixel accuracy = (TP + TN) / total, both for image masks and for
per-Gaussian selections. The harness runs the automatic pipeline over a
manifest of scenes and configs and reports per-scene records plus a mean
row; publication-grade absolute numbers need external neural providers, so
the built-in suites validate trends and oracle-provider absolutes.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .autoseg import ReferenceMask, run_auto_segmentation
from .cameras import Camera, load_camera, load_cameras
from .providers import DirectoryProvider, GeometricProvider, ReplayProvider, silhouette_mask
from .scene import GaussianScene, load_scene
from .selection import Mask2D, Selection3D, load_mask, load_selection


@dataclass
class EvalRecord:
    """Metrics for one (scene, config) run."""

    scene_id: str
    iou: float
    acc: float
    elapsed: float
    config: dict = field(default_factory=dict)


def mask_metrics(pred: Mask2D, gt: Mask2D) -> tuple[float, float]:
    """(foreground IoU, pixel accuracy). IoU is 1.0 when both masks are empty."""
    if pred.bits.shape != gt.bits.shape:
        raise ValueError(f"mask resolutions differ: {pred.bits.shape} vs {gt.bits.shape}")
    return _binary_metrics(pred.bits, gt.bits)


def selection3d_metrics(pred: Selection3D, gt: Selection3D) -> tuple[float, float]:
    """Set IoU and accuracy over Gaussian indices."""
    if len(pred) != len(gt):
        raise ValueError(f"selection lengths differ: {len(pred)} vs {len(gt)}")
    return _binary_metrics(pred.bits, gt.bits)


def _binary_metrics(pred: np.ndarray, gt: np.ndarray) -> tuple[float, float]:
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    tn = pred.size - tp - fp - fn
    denom = tp + fp + fn
    iou = 1.0 if denom == 0 else tp / denom
    acc = (tp + tn) / pred.size if pred.size else 1.0
    return iou, acc


def selection_to_mask(scene: GaussianScene, sel: Selection3D, cam: Camera) -> Mask2D:
    """Occlusion-aware binary silhouette of a selection under the full scene.

    Unselected Gaussians still absorb compositing weight, matching how a
    ground-truth annotator sees the scene.
    """
    return silhouette_mask(scene, sel, cam, closing=False)


class OracleProvider:
    """Perfect tracker for benchmarks: emits ground-truth silhouettes of the
    frames it is shown (i.e. over the provider's working scene)."""

    def __init__(self, scene: GaussianScene, gt: Selection3D):
        if len(gt) != scene.count:
            raise ValueError("ground-truth selection length does not match scene")
        self.scene = scene
        self.gt = gt
        self.provider_id = "oracle"

    def predict(self, job, start: int = 0):
        return [
            silhouette_mask(self.scene, self.gt, cam, closing=False)
            for cam in job.sequence.cameras[start:]
        ]


def make_provider_factory(spec: str, gt3d: Selection3D | None = None):
    """Resolve a provider spec string into a factory usable by the pipeline.

    Specs: "geometric", "oracle" (needs 3D ground truth), "replay:DIR",
    "cmd:SHELL_COMMAND", "jobdir:DIR".
    """
    if spec == "geometric":
        return lambda working, indices, preseg: GeometricProvider(working, preseg)
    if spec == "oracle":
        if gt3d is None:
            raise ValueError("oracle provider needs 3D ground truth")

        def factory(working, indices, preseg):
            gt = gt3d if indices is None else Selection3D(gt3d.bits[indices])
            return OracleProvider(working, gt)

        return factory
    if spec.startswith("replay:"):
        return lambda working, indices, preseg: ReplayProvider(spec.split(":", 1)[1])
    if spec.startswith("cmd:"):
        return lambda working, indices, preseg: DirectoryProvider(command=spec.split(":", 1)[1])
    if spec.startswith("jobdir:"):
        return lambda working, indices, preseg: DirectoryProvider(workdir=spec.split(":", 1)[1])
    raise ValueError(f"unknown provider spec {spec!r}")


def run_benchmark(manifest, out_path=None) -> tuple[list[EvalRecord], str]:
    """Run every config over every scene in the manifest.

    ``manifest`` is a dict or a path to a JSON file:
      {"scenes": [{"scene": path, "inputs": [{"mask", "camera",
        "occlusion_free"}], "gt2d": [{"mask", "camera"}]?, "gt3d": path?}],
       "configs": [{"m", "view_source", "presegment", "provider"}]}
    Scenes without any ground truth are skipped with a notice. Returns the
    records and a plain-text summary table; records also go to ``out_path``
    as JSON lines when given.
    """
    if not isinstance(manifest, dict):
        manifest = json.loads(Path(manifest).read_text())
    base = Path(manifest.get("_base", "."))

    records: list[EvalRecord] = []
    notices: list[str] = []
    for entry in manifest.get("scenes", []):
        scene_path = base / entry["scene"]
        scene_id = entry.get("id", Path(entry["scene"]).stem)
        gt3d = load_selection(base / entry["gt3d"]) if entry.get("gt3d") else None
        gt2d = entry.get("gt2d") or []
        if gt3d is None and not gt2d:
            notices.append(f"skipping {scene_id}: no ground truth")
            continue
        scene = load_scene(scene_path)
        user_masks = []
        for inp in entry["inputs"]:
            cam = load_camera(base / inp["camera"])
            mask = load_mask(base / inp["mask"], cam, occlusion_free=inp.get("occlusion_free", False))
            user_masks.append(ReferenceMask(mask))

        for cfg in manifest.get("configs", []):
            records.append(
                _run_case(scene, scene_id, user_masks, cfg, gt3d, gt2d, base)
            )

    table = format_table(records, notices)
    if out_path is not None:
        with open(out_path, "w") as f:
            for rec in records:
                f.write(json.dumps(asdict(rec)) + "\n")
    return records, table


def _run_case(scene, scene_id, user_masks, cfg, gt3d, gt2d, base) -> EvalRecord:
    provider_spec = cfg.get("provider", "geometric")
    factory = make_provider_factory(provider_spec, gt3d)
    view_source = cfg.get("view_source", "turnaround")
    training_cameras = None
    if isinstance(view_source, str) and view_source.startswith("training:"):
        training_cameras = load_cameras(base / view_source.split(":", 1)[1])
        view_source = "training_subset"

    t0 = time.perf_counter()
    run = run_auto_segmentation(
        scene,
        user_masks,
        view_source=view_source,
        m=int(cfg.get("m", 50)),
        provider=factory,
        presegment=bool(cfg.get("presegment", True)),
        training_cameras=training_cameras,
    )
    elapsed = time.perf_counter() - t0

    if gt3d is not None:
        iou, acc = selection3d_metrics(run.result.selection, gt3d)
        gt_kind = "3d"
    else:
        ious, accs = [], []
        for g in gt2d:
            cam = load_camera(base / g["camera"])
            gt_mask = load_mask(base / g["mask"], cam)
            pred = selection_to_mask(scene, run.result.selection, cam)
            i, a = mask_metrics(pred, gt_mask)
            ious.append(i)
            accs.append(a)
        iou, acc = float(np.mean(ious)), float(np.mean(accs))
        gt_kind = "2d"

    snapshot = {
        "m": int(cfg.get("m", 50)),
        "view_source": cfg.get("view_source", "turnaround"),
        "presegment": bool(cfg.get("presegment", True)),
        "provider": provider_spec,
        "gt": gt_kind,
    }
    return EvalRecord(scene_id=scene_id, iou=iou, acc=acc, elapsed=elapsed, config=snapshot)


def format_table(records: list[EvalRecord], notices: list[str] | None = None) -> str:
    """Align records into a plain-text table with a mean row."""
    lines = []
    header = f"{'scene':<20} {'m':>4} {'views':<14} {'preseg':<6} {'provider':<10} {'iou':>7} {'acc':>7} {'sec':>7}"
    lines.append(header)
    lines.append("-" * len(header))
    for r in records:
        c = r.config
        lines.append(
            f"{r.scene_id:<20} {c.get('m', '-'):>4} {str(c.get('view_source', '-')):<14} "
            f"{str(c.get('presegment', '-')):<6} {str(c.get('provider', '-')):<10} "
            f"{r.iou:>7.3f} {r.acc:>7.3f} {r.elapsed:>7.2f}"
        )
    if records:
        lines.append("-" * len(header))
        lines.append(
            f"{'mean':<20} {'':>4} {'':<14} {'':<6} {'':<10} "
            f"{np.mean([r.iou for r in records]):>7.3f} "
            f"{np.mean([r.acc for r in records]):>7.3f} "
            f"{np.mean([r.elapsed for r in records]):>7.2f}"
        )
    for notice in notices or []:
        lines.append(f"# {notice}")
    return "\n".join(lines)
