"""Automatic tracked segmentation: dense views, provider-tracked masks,
reference-mask injection, and differentiable aggregation to a 3D selection.

The pipeline: optionally pre-segment the scene from occlusion-free masks,
sample dense views, shift them so the best-matching view leads, render the
frames, let a mask provider track the object through them, then optimize a
one-channel per-Gaussian feature against all masks with an L2 image loss and
threshold it at 0.5.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from .cameras import Camera
from .errors import ProviderError
from .providers import GeometricProvider, MaskProvider
from .rasterize import forward
from .scene import GaussianScene
from .selection import Mask2D, Selection3D, SelectMode, combine_selection3d, frustum_project
from .views import (
    ViewSequence,
    ViewSource,
    best_matching_view,
    shift_sequence,
    subsample_training_views,
    turnaround_views,
)


@dataclass
class ReferenceMask:
    """A user mask together with the render of its view (cached for providers)."""

    mask: Mask2D
    render: NDArray[np.float64] | None = None

    def __post_init__(self):
        if self.render is not None:
            h, w = self.mask.bits.shape
            if self.render.shape[:2] != (h, w):
                raise ValueError("reference render resolution does not match its mask")

    def resolved_render(self) -> NDArray[np.float64]:
        if self.render is None:
            raise ValueError("reference render not populated")
        return self.render


@dataclass
class Injection:
    """A reference mask scheduled right before one sequence position."""

    reference: ReferenceMask
    correction: bool = False


@dataclass
class TrackJob:
    """State of one tracking run over a shifted dense-view sequence.

    ``scene`` is the scene the frames were rendered from (the pre-segmented
    working scene when pre-segmentation is on).
    """

    scene: GaussianScene
    sequence: ViewSequence
    frames: list[NDArray[np.float64]]
    injections: dict[int, list[Injection]]
    tracked: list[Mask2D | None]
    provider_id: str = ""

    def __post_init__(self):
        if not self.injections:
            raise ValueError("a track job needs at least one injected reference mask")
        for pos in self.injections:
            if not 0 <= pos < len(self.sequence):
                raise ValueError(f"injection position {pos} outside sequence of {len(self.sequence)}")

    def reference_masks(self) -> list[ReferenceMask]:
        """All injected references in position order (original + corrections)."""
        refs = []
        for pos in sorted(self.injections):
            refs.extend(inj.reference for inj in self.injections[pos])
        return refs

    def first_untracked(self) -> int | None:
        for i, m in enumerate(self.tracked):
            if m is None:
                return i
        return None


@dataclass
class AggregationConfig:
    """Optimizer settings for the mask-to-3D aggregation.

    One pass of projected Adam: the feature is a soft membership, so each
    step is clipped back into [lo, hi]. Without the projection a single
    sign-magnitude pass overshoots far past the {0, 1} targets and poisons
    the residuals of later views.
    """

    step: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init: float = 0.5
    threshold: float = 0.5
    clamp: tuple[float, float] | None = (0.0, 1.0)


@dataclass
class AggregationResult:
    """Optimized per-Gaussian channel, its thresholded selection and timing."""

    M: NDArray[np.float64]
    selection: Selection3D
    loss_trace: list[float]
    elapsed: float


def pre_segment(scene: GaussianScene, user_masks: list[ReferenceMask]) -> Selection3D | None:
    """Intersection of frustum projections of the occlusion-free masks.

    Returns None when no mask carries the flag, in which case the pipeline
    proceeds on the full scene.
    """
    flagged = [rm for rm in user_masks if rm.mask.occlusion_free]
    if not flagged:
        return None
    sel = frustum_project(scene, flagged[0].mask)
    for rm in flagged[1:]:
        sel = combine_selection3d(sel, frustum_project(scene, rm.mask), SelectMode.I)
    return sel


def build_track_job(
    scene: GaussianScene, user_masks: list[ReferenceMask], seq: ViewSequence
) -> TrackJob:
    """Shift the sequence to start at the view best matching the first user
    mask, render every frame, and schedule one injection per user mask at its
    best-matching position within the shifted order. Masks mapping to the
    same position inject in user order."""
    if not user_masks:
        raise ValueError("need at least one user mask")
    for rm in user_masks:
        cam = rm.mask.camera
        if (cam.width, cam.height) != (seq.cameras[0].width, seq.cameras[0].height):
            raise ValueError("user masks must share resolution with the view sequence")

    start = best_matching_view(scene, user_masks[0].mask.camera, seq)
    shifted = shift_sequence(seq, start)
    frames = [forward(scene, cam).rgba for cam in shifted.cameras]

    injections: dict[int, list[Injection]] = {}
    for rm in user_masks:
        if rm.render is None:
            rm = replace(rm, render=forward(scene, rm.mask.camera).rgba)
        pos = best_matching_view(scene, rm.mask.camera, shifted)
        injections.setdefault(pos, []).append(Injection(rm))

    return TrackJob(
        scene=scene,
        sequence=shifted,
        frames=frames,
        injections=injections,
        tracked=[None] * len(shifted),
    )


def run_provider(job: TrackJob, provider: MaskProvider, start: int = 0) -> TrackJob:
    """Fill the job's tracked masks from ``start`` on; partial results are
    discarded on provider failure."""
    if not 0 <= start <= len(job.sequence):
        raise ValueError(f"start {start} out of range")
    masks = provider.predict(job, start)
    expected = len(job.sequence) - start
    if len(masks) != expected:
        raise ProviderError(
            f"provider {provider.provider_id!r} returned {len(masks)} masks, expected {expected}"
        )
    for mask, cam in zip(masks, job.sequence.cameras[start:]):
        if mask.bits.shape != (cam.height, cam.width):
            raise ProviderError(f"provider {provider.provider_id!r} returned a wrong-size mask")
    tracked = list(job.tracked[:start]) + list(masks)
    return replace(job, tracked=tracked, provider_id=provider.provider_id)


def add_correction(job: TrackJob, new_mask: ReferenceMask) -> TrackJob:
    """Inject a correction at its best-matching position and invalidate the
    tracked masks from that position onward (earlier masks are retained)."""
    if new_mask.render is None:
        new_mask = replace(new_mask, render=forward(job.scene, new_mask.mask.camera).rgba)
    pos = best_matching_view(job.scene, new_mask.mask.camera, job.sequence)
    injections = {p: list(v) for p, v in job.injections.items()}
    injections.setdefault(pos, []).append(Injection(new_mask, correction=True))
    tracked = [m if i < pos else None for i, m in enumerate(job.tracked)]
    return replace(job, injections=injections, tracked=tracked)


def remove_correction(job: TrackJob, position: int) -> TrackJob:
    """Drop the most recent correction at ``position``, restoring the prior
    injection schedule; downstream tracked masks are invalidated."""
    injections = {p: list(v) for p, v in job.injections.items()}
    entries = injections.get(position, [])
    for i in range(len(entries) - 1, -1, -1):
        if entries[i].correction:
            del entries[i]
            break
    else:
        raise ValueError(f"no correction at position {position}")
    if not entries:
        del injections[position]
    tracked = [m if i < position else None for i, m in enumerate(job.tracked)]
    return replace(job, injections=injections, tracked=tracked)


def aggregate(
    scene: GaussianScene,
    views: list[Camera],
    masks: list[Mask2D],
    user_masks: list[ReferenceMask],
    restrict: Selection3D | None = None,
    config: AggregationConfig | None = None,
    on_view=None,
) -> AggregationResult:
    """Optimize a one-channel per-Gaussian feature against the masks.

    A single loop over the tracked views followed by the user views; each
    view contributes one Adam step on the feature under the L2 loss between
    its mask and the feature render. Gaussians outside ``restrict`` stay at
    zero and are never selected.
    """
    if len(views) != len(masks):
        raise ValueError("views and masks must align")
    pairs = [(cam, m.bits) for cam, m in zip(views, masks)]
    pairs += [(rm.mask.camera, rm.mask.bits) for rm in user_masks]
    if not pairs:
        raise ValueError("aggregation needs at least one view")
    cfg = config or AggregationConfig()

    t0 = time.perf_counter()
    if restrict is not None:
        if len(restrict) != scene.count:
            raise ValueError("restrict length does not match scene count")
        indices = restrict.indices()
        sub = scene.subset(indices)
    else:
        indices = None
        sub = scene

    M = np.full(sub.count, cfg.init)
    m1 = np.zeros(sub.count)
    m2 = np.zeros(sub.count)
    losses: list[float] = []
    for step, (cam, target_bits) in enumerate(pairs, start=1):
        out = forward(sub, cam)
        img = out.contrib_weights.feature_image(M[:, None])[:, :, 0]
        residual = img - target_bits.astype(np.float64)
        losses.append(float(0.5 * np.sum(residual * residual)))
        grad = out.contrib_weights.feature_grad(residual[:, :, None])[:, 0]
        m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad
        m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad * grad
        m1_hat = m1 / (1.0 - cfg.beta1 ** step)
        m2_hat = m2 / (1.0 - cfg.beta2 ** step)
        M = M - cfg.step * m1_hat / (np.sqrt(m2_hat) + cfg.eps)
        if cfg.clamp is not None:
            np.clip(M, cfg.clamp[0], cfg.clamp[1], out=M)
        if on_view is not None:
            on_view(step - 1, losses[-1])

    if indices is not None:
        M_full = np.zeros(scene.count)
        M_full[indices] = M
    else:
        M_full = M
    elapsed = time.perf_counter() - t0
    return AggregationResult(
        M=M_full,
        selection=Selection3D(M_full > cfg.threshold),
        loss_trace=losses,
        elapsed=elapsed,
    )


@dataclass
class AutoSegRun:
    """Everything a segmentation run produced, for browsing and correction."""

    scene: GaussianScene
    result: AggregationResult
    job: TrackJob
    working_indices: NDArray[np.int64] | None
    preseg: Selection3D | None
    user_masks: list[ReferenceMask]
    provider: MaskProvider
    config: AggregationConfig

    @property
    def working_scene(self) -> GaussianScene:
        return self.job.scene


def run_auto_segmentation(
    scene: GaussianScene,
    user_masks: list[ReferenceMask],
    view_source: str | ViewSource = ViewSource.TURNAROUND,
    m: int = 50,
    provider=None,
    presegment: bool = True,
    training_cameras: list[Camera] | None = None,
    config: AggregationConfig | None = None,
    on_view=None,
) -> AutoSegRun:
    """End-to-end tracked segmentation; see ``segment_auto`` for the result-
    only wrapper. ``provider`` may be a MaskProvider instance or a factory
    called as factory(working_scene, working_indices, preseg_in_working)."""
    if not user_masks:
        raise ValueError("need at least one user mask")
    t0 = time.perf_counter()

    preseg = pre_segment(scene, user_masks) if presegment else None
    if preseg is not None and preseg.popcount() == 0:
        preseg = None
    if preseg is not None:
        indices = preseg.indices()
        working = scene.subset(indices)
        preseg_working = Selection3D.full(working.count)
    else:
        indices = None
        working = scene
        preseg_working = None

    source = ViewSource(view_source) if not isinstance(view_source, ViewSource) else view_source
    if source is ViewSource.TURNAROUND:
        seq = turnaround_views(working, user_masks[0].mask.camera, user_masks[0].mask, m)
    else:
        if not training_cameras:
            raise ValueError("training view source needs training cameras")
        seq = subsample_training_views(training_cameras, m)

    refs = []
    for rm in user_masks:
        if rm.render is None:
            rm = replace(rm, render=forward(working, rm.mask.camera).rgba)
        refs.append(rm)

    job = build_track_job(working, refs, seq)

    if provider is None:
        provider = GeometricProvider(working, preseg_working)
    elif callable(provider) and not isinstance(provider, MaskProvider):
        provider = provider(working, indices, preseg_working)

    job = run_provider(job, provider)

    cfg = config or AggregationConfig()
    result = aggregate(
        scene,
        list(job.sequence.cameras),
        list(job.tracked),
        refs,
        restrict=preseg,
        config=cfg,
        on_view=on_view,
    )
    result.elapsed = time.perf_counter() - t0
    return AutoSegRun(
        scene=scene,
        result=result,
        job=job,
        working_indices=indices,
        preseg=preseg,
        user_masks=refs,
        provider=provider,
        config=cfg,
    )


def segment_auto(
    scene: GaussianScene,
    user_masks: list[ReferenceMask],
    view_source: str | ViewSource = ViewSource.TURNAROUND,
    m: int = 50,
    provider=None,
    presegment: bool = True,
    training_cameras: list[Camera] | None = None,
    config: AggregationConfig | None = None,
) -> AggregationResult:
    """Compose pre-segmentation, dense views, tracking and aggregation."""
    return run_auto_segmentation(
        scene, user_masks, view_source, m, provider, presegment, training_cameras, config
    ).result


def rerun_after_correction(run: AutoSegRun, correction: ReferenceMask) -> AutoSegRun:
    """Apply one correction to a finished run: inject it, re-track the
    invalidated tail, and re-aggregate with the correction as a user view."""
    t0 = time.perf_counter()
    if correction.render is None:
        correction = replace(
            correction, render=forward(run.working_scene, correction.mask.camera).rgba
        )
    job = add_correction(run.job, correction)
    start = job.first_untracked()
    job = run_provider(job, run.provider, start=0 if start is None else start)
    user_masks = run.user_masks + [correction]
    result = aggregate(
        run.scene,
        list(job.sequence.cameras),
        list(job.tracked),
        user_masks,
        restrict=run.preseg,
        config=run.config,
    )
    result.elapsed = time.perf_counter() - t0
    return AutoSegRun(
        scene=run.scene,
        result=result,
        job=job,
        working_indices=run.working_indices,
        preseg=run.preseg,
        user_masks=user_masks,
        provider=run.provider,
        config=run.config,
    )
