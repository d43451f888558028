"""Mask providers: components that emit one binary mask per tracking frame.

The engine treats mask tracking as a black box behind this interface. The
built-in geometric provider is a deterministic stand-in for neural video
trackers; external trackers integrate through a filesystem job-directory
protocol (manifest + frame PNGs in, mask PNGs + done marker out).
"""

from __future__ import annotations

import json
import shlex
import subprocess
import time
from pathlib import Path
from typing import TYPE_CHECKING, Protocol, runtime_checkable

import numpy as np
from PIL import Image
from scipy import ndimage

from .cameras import Camera
from .errors import ProviderError
from .rasterize import forward
from .scene import GaussianScene
from .selection import Mask2D, Selection3D

if TYPE_CHECKING:
    from .autoseg import TrackJob

SILHOUETTE_THRESHOLD = 0.5


@runtime_checkable
class MaskProvider(Protocol):
    """Anything that can fill a track job with per-frame masks."""

    provider_id: str

    def predict(self, job: "TrackJob", start: int = 0) -> list[Mask2D]:
        """Masks for sequence positions start..m-1, in order."""
        ...


def _close(bits: np.ndarray) -> np.ndarray:
    return ndimage.binary_closing(bits, structure=np.ones((3, 3), bool))


def silhouette_mask(scene: GaussianScene, sel: Selection3D, cam: Camera,
                    closing: bool = True) -> Mask2D:
    """Alpha-weighted silhouette of the selected Gaussians from one view."""
    indicator = sel.bits.astype(np.float64)
    img = forward(scene, cam).contrib_weights.feature_image(indicator[:, None])[:, :, 0]
    bits = img > SILHOUETTE_THRESHOLD
    if closing:
        bits = _close(bits)
    return Mask2D(cam, bits)


def select_under_mask(scene: GaussianScene, mask: Mask2D) -> Selection3D:
    """Gaussians contributing visibly inside the mask (tracker memory update)."""
    out = forward(scene, mask.camera)
    cw = out.contrib_weights
    flat = mask.bits.reshape(-1)
    inside = flat[cw.pixel] & (cw.weight >= 1.0 / 255.0)
    bits = np.zeros(scene.count, bool)
    bits[cw.gaussian[inside]] = True
    return Selection3D(bits)


class GeometricProvider:
    """Deterministic geometric mask tracker.

    With a pre-segment, each frame's mask is the silhouette of the
    pre-segmented Gaussians (3x3 closing applied once); correction
    injections switch the tracked estimate to the Gaussians visible under
    the corrected mask. Without a pre-segment, the estimate starts from the
    Gaussians visible under the latest injected reference mask and each
    frame gets that estimate's silhouette.
    """

    def __init__(self, scene: GaussianScene, preseg: Selection3D | None = None):
        if preseg is not None and preseg.popcount() == 0:
            raise ValueError("pre-segment selection is empty")
        self.scene = scene
        self.preseg = preseg
        self.provider_id = "geometric"

    def predict(self, job: "TrackJob", start: int = 0) -> list[Mask2D]:
        estimate = self.preseg
        track_injections = self.preseg is None  # preseg mode only follows corrections
        if estimate is None:
            positions = sorted(job.injections)
            if not positions:
                raise ProviderError("geometric provider without pre-segment needs reference masks")
            estimate = select_under_mask(self.scene, job.injections[positions[0]][-1].reference.mask)
            if estimate.popcount() == 0:
                raise ProviderError("reference mask covers no rendered geometry")
        masks: list[Mask2D] = []
        for pos, cam in enumerate(job.sequence.cameras):
            for inj in job.injections.get(pos, ()):
                if inj.correction or track_injections:
                    updated = select_under_mask(self.scene, inj.reference.mask)
                    if updated.popcount():
                        estimate = updated
            if pos < start:
                continue
            masks.append(silhouette_mask(self.scene, estimate, cam))
        return masks


# ---- job-directory protocol -------------------------------------------------

def _rgba_to_png_bytes(rgba: np.ndarray) -> bytes:
    import io

    data = np.clip(np.round(np.asarray(rgba) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()


def mask_to_png_bytes(mask: Mask2D) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(np.where(mask.bits, 255, 0).astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png_bytes(data: bytes, camera: Camera, occlusion_free: bool = False) -> Mask2D:
    import io

    img = Image.open(io.BytesIO(data)).convert("L")
    return Mask2D(camera, np.asarray(img, dtype=np.uint8) >= 128, occlusion_free)


def write_job_directory(job: "TrackJob", root) -> Path:
    """Materialize a track job for an external provider.

    Layout: manifest.json, frames/NNN.png (RGBA renders), refs/i_frame.png +
    refs/i_mask.png per injection. The provider writes masks/NNN.png
    (grayscale, >=128 = foreground) and done.json {status, message?}.
    """
    root = Path(root)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    (root / "refs").mkdir(exist_ok=True)
    (root / "masks").mkdir(exist_ok=True)

    frames = []
    for i, rgba in enumerate(job.frames):
        name = f"frames/{i:03d}.png"
        (root / name).write_bytes(_rgba_to_png_bytes(rgba))
        frames.append(name)

    injections = []
    k = 0
    for pos in sorted(job.injections):
        for inj in job.injections[pos]:
            frame_name = f"refs/{k}_frame.png"
            mask_name = f"refs/{k}_mask.png"
            (root / frame_name).write_bytes(_rgba_to_png_bytes(inj.reference.resolved_render()))
            (root / mask_name).write_bytes(mask_to_png_bytes(inj.reference.mask))
            injections.append({"position": pos, "frame": frame_name, "mask": mask_name})
            k += 1

    manifest = {"version": 1, "frame_count": len(job.frames), "frames": frames,
                "injections": injections}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return root


def read_job_masks(root, cameras: list[Camera]) -> list[Mask2D]:
    root = Path(root)
    masks = []
    for i, cam in enumerate(cameras):
        path = root / "masks" / f"{i:03d}.png"
        if not path.exists():
            raise ProviderError(f"provider did not write {path.name}")
        img = Image.open(path).convert("L")
        masks.append(Mask2D(cam, np.asarray(img, dtype=np.uint8) >= 128))
    return masks


class DirectoryProvider:
    """Runs an external provider through the job-directory protocol.

    ``command`` (a shell string) is invoked with the job directory appended
    as its final argument; when omitted, some other process is expected to
    watch ``workdir``. Either way the provider must write masks/NNN.png and
    done.json before the timeout.
    """

    def __init__(self, command: str | None = None, workdir=None, timeout: float = 120.0,
                 provider_id: str = "directory", poll: float = 0.05):
        self.command = command
        self.workdir = workdir
        self.timeout = timeout
        self.provider_id = provider_id
        self.poll = poll

    def predict(self, job: "TrackJob", start: int = 0) -> list[Mask2D]:
        import tempfile

        root = Path(self.workdir) if self.workdir else Path(tempfile.mkdtemp(prefix="maskjob-"))
        write_job_directory(job, root)
        done = root / "done.json"
        if done.exists():
            done.unlink()
        if self.command:
            proc = subprocess.run(
                shlex.split(self.command) + [str(root)],
                capture_output=True, text=True, timeout=self.timeout,
            )
            if proc.returncode != 0:
                raise ProviderError(
                    f"provider command failed with exit code {proc.returncode}",
                    diagnostics=proc.stderr[-2000:],
                )
        deadline = time.monotonic() + self.timeout
        while not done.exists():
            if time.monotonic() > deadline:
                raise ProviderError(f"provider timed out after {self.timeout}s waiting for done.json")
            time.sleep(self.poll)
        status = json.loads(done.read_text())
        if status.get("status") != "ok":
            raise ProviderError("provider reported failure", diagnostics=status.get("message"))
        masks = read_job_masks(root, job.sequence.cameras)
        return masks[start:]


class ReplayProvider:
    """Replays masks previously written to a job directory (masks/NNN.png)."""

    def __init__(self, root, provider_id: str = "replay"):
        self.root = Path(root)
        self.provider_id = provider_id

    def predict(self, job: "TrackJob", start: int = 0) -> list[Mask2D]:
        return read_job_masks(self.root, job.sequence.cameras)[start:]
