"""The automatic tracked-segmentation pipeline and its correction loop."""

import numpy as np
import pytest

from splatselect import (
    GaussianScene,
    GeometricProvider,
    Mask2D,
    ProviderError,
    ReferenceMask,
    ReplayProvider,
    Selection3D,
    add_correction,
    aggregate,
    build_track_job,
    forward,
    frustum_project,
    pre_segment,
    remove_correction,
    rerun_after_correction,
    run_auto_segmentation,
    run_provider,
    segment_auto,
    turnaround_views,
)
from splatselect.evalkit import OracleProvider, selection3d_metrics
from splatselect.providers import (
    mask_to_png_bytes,
    silhouette_mask,
    write_job_directory,
)
from splatselect.views import ViewSequence, ViewSource

from conftest import cluster, make_camera, merge_scenes


@pytest.fixture
def object_scene(rng):
    return cluster(rng, (0.0, 0.0, 0.0), 220, radius=0.25, opacity=4.0)


@pytest.fixture
def user_cam():
    return make_camera((3.0, 0.4, 0.3), (0.0, 0.0, 0.0), size=64, focal=72)


@pytest.fixture
def two_cluster(rng):
    """Target cluster A at the origin, decoy B off to the side."""
    a = cluster(rng, (0.0, 0.0, 0.0), 180, radius=0.25, opacity=4.0, color=(0.9, 0.2, 0.2))
    b = cluster(rng, (1.4, 0.0, 0.2), 180, radius=0.25, opacity=4.0, color=(0.2, 0.9, 0.2))
    scene = merge_scenes(a, b)
    gt = Selection3D(np.arange(scene.count) < 180)
    return scene, gt


@pytest.fixture
def stacked_pair(rng):
    """Target A at the origin, decoy B above A's turnaround orbit plane, so
    the two never overlap in image space from the dense views."""
    a = cluster(rng, (0.0, 0.0, 0.0), 180, radius=0.25, opacity=4.0, color=(0.9, 0.2, 0.2))
    b = cluster(rng, (0.0, 1.2, 0.2), 180, radius=0.25, opacity=4.0, color=(0.2, 0.9, 0.2))
    scene = merge_scenes(a, b)
    gt = Selection3D(np.arange(scene.count) < 180)
    return scene, gt


def ring_cameras(center, radius=3.0, count=8, y=0.3, size=64, focal=48):
    center = np.asarray(center, dtype=float)
    return [
        make_camera(center + (radius * np.cos(t), y, radius * np.sin(t)), center,
                    size=size, focal=focal)
        for t in np.linspace(0, 2 * np.pi, count, endpoint=False)
    ]


def silhouette_ref(scene, sel, cam, occlusion_free=False):
    mask = silhouette_mask(scene, sel, cam, closing=False)
    mask.occlusion_free = occlusion_free
    return ReferenceMask(mask)


class TestPreSegment:
    def test_no_flagged_masks_gives_none(self, object_scene, user_cam):
        ref = ReferenceMask(Mask2D.full(user_cam, occlusion_free=False))
        assert pre_segment(object_scene, [ref]) is None

    def test_full_mask_selects_frustum(self, object_scene, user_cam):
        ref = ReferenceMask(Mask2D.full(user_cam, occlusion_free=True))
        sel = pre_segment(object_scene, [ref])
        expected = frustum_project(object_scene, ref.mask)
        assert np.array_equal(sel.bits, expected.bits)

    def test_orthogonal_masks_intersect(self, two_cluster):
        scene, gt = two_cluster
        front = make_camera((0.0, 0.0, -3.5), (0.0, 0.0, 0.0), size=64, focal=72)
        side = make_camera((3.0, 0.0, 0.2), (0.0, 0.0, 0.2), size=64, focal=72)
        m_front = silhouette_mask(scene, gt, front, closing=False)
        m_front.occlusion_free = True
        m_side = Mask2D.full(side, occlusion_free=True)
        sel = pre_segment(scene, [ReferenceMask(m_front), ReferenceMask(m_side)])
        # the decoy sits outside the front-view silhouette sweep
        assert sel.bits[:180].sum() > 150
        assert sel.bits[180:].sum() < 10


class TestBuildTrackJob:
    def test_shifts_to_best_match_and_injects_at_zero(self, object_scene, user_cam):
        mask = Mask2D.full(user_cam)
        seq = turnaround_views(object_scene, user_cam, mask, m=8)
        # annotate directly from dense view 3: shifted order must start there
        cam3 = seq.cameras[3]
        ref = ReferenceMask(Mask2D.full(cam3))
        job = build_track_job(object_scene, [ref], seq)
        assert job.sequence.cameras[0].same_view(cam3)
        assert list(job.injections) == [0]
        assert not job.injections[0][0].correction
        assert len(job.frames) == 8
        assert job.frames[0].shape == (64, 64, 4)

    def test_two_masks_two_injections(self, object_scene, user_cam):
        mask = Mask2D.full(user_cam)
        seq = turnaround_views(object_scene, user_cam, mask, m=8)
        refs = [ReferenceMask(Mask2D.full(seq.cameras[2])),
                ReferenceMask(Mask2D.full(seq.cameras[5]))]
        job = build_track_job(object_scene, refs, seq)
        assert sorted(job.injections) == [0, 3]  # shifted by 2

    def test_single_view_sequence(self, object_scene, user_cam):
        seq = ViewSequence([user_cam], ViewSource.TRAINING_SUBSET)
        job = build_track_job(object_scene, [ReferenceMask(Mask2D.full(user_cam))], seq)
        assert len(job.sequence) == 1
        assert list(job.injections) == [0]

    def test_same_position_keeps_user_order(self, object_scene, user_cam):
        seq = ViewSequence([user_cam], ViewSource.TRAINING_SUBSET)
        a = ReferenceMask(Mask2D.full(user_cam))
        b = ReferenceMask(Mask2D.empty(user_cam))
        job = build_track_job(object_scene, [a, b], seq)
        assert job.injections[0][0].reference.mask.bits.all()
        assert not job.injections[0][1].reference.mask.bits.any()


class TestProviders:
    def test_geometric_preseg_masks_are_silhouettes(self, object_scene, user_cam):
        mask = Mask2D.full(user_cam)
        seq = turnaround_views(object_scene, user_cam, mask, m=6)
        job = build_track_job(object_scene, [ReferenceMask(mask)], seq)
        preseg = Selection3D.full(object_scene.count)
        job = run_provider(job, GeometricProvider(object_scene, preseg))
        assert job.provider_id == "geometric"
        for cam, tracked in zip(job.sequence.cameras, job.tracked):
            expected = silhouette_mask(object_scene, preseg, cam)
            assert np.array_equal(tracked.bits, expected.bits)

    def test_geometric_empty_preseg_rejected(self, object_scene):
        with pytest.raises(ValueError):
            GeometricProvider(object_scene, Selection3D.empty(object_scene.count))

    def test_wrong_mask_count_is_provider_error(self, object_scene, user_cam):
        mask = Mask2D.full(user_cam)
        seq = turnaround_views(object_scene, user_cam, mask, m=5)
        job = build_track_job(object_scene, [ReferenceMask(mask)], seq)

        class ShortProvider:
            provider_id = "short"

            def predict(self, job, start=0):
                return [Mask2D.empty(c) for c in job.sequence.cameras[start:-1]]

        with pytest.raises(ProviderError, match="expected"):
            run_provider(job, ShortProvider())
        assert all(m is None for m in job.tracked)  # partial results discarded

    def test_occluder_outside_preseg_absent_from_masks(self, two_cluster):
        scene, gt = two_cluster
        cam = make_camera((0.7, 0.2, -3.0), (0.7, 0.0, 0.0), size=64, focal=72)
        seq = ViewSequence([cam], ViewSource.TRAINING_SUBSET)
        job = build_track_job(scene, [ReferenceMask(Mask2D.full(cam))], seq)
        job = run_provider(job, GeometricProvider(scene, gt))
        decoy_sil = silhouette_mask(scene, gt.invert(), cam, closing=False)
        only_decoy = decoy_sil.bits & ~silhouette_mask(scene, gt, cam, closing=False).bits
        assert not (job.tracked[0].bits & only_decoy).any()

    def test_job_directory_replay_roundtrip(self, tmp_path, object_scene, user_cam):
        mask = Mask2D.full(user_cam)
        seq = turnaround_views(object_scene, user_cam, mask, m=4)
        job = build_track_job(object_scene, [ReferenceMask(mask)], seq)
        job = run_provider(job, GeometricProvider(object_scene, Selection3D.full(object_scene.count)))

        root = write_job_directory(job, tmp_path / "job")
        import json

        manifest = json.loads((root / "manifest.json").read_text())
        assert manifest["version"] == 1
        assert manifest["frame_count"] == 4
        assert manifest["frames"][0] == "frames/000.png"
        assert manifest["injections"][0]["position"] == 0
        assert (root / "refs" / "0_mask.png").exists()

        for i, tracked in enumerate(job.tracked):
            (root / "masks" / f"{i:03d}.png").write_bytes(mask_to_png_bytes(tracked))
        replayed = ReplayProvider(root)
        job2 = run_provider(job, replayed)
        for a, b in zip(job.tracked, job2.tracked):
            assert np.array_equal(a.bits, b.bits)


class TestAggregate:
    def test_single_covered_gaussian_selected(self, front_camera):
        scene = GaussianScene.create([[0.0, 0.0, 2.0]], log_scales=np.log(0.12), opacity_logits=8.0)
        sil = silhouette_mask(scene, Selection3D.full(1), front_camera, closing=False)
        res = aggregate(scene, [front_camera], [sil], [])
        # independent check: the 1-variable least-squares optimum is above 0.5
        weights = forward(scene, front_camera).contrib_weights.feature_image(np.ones(1))[:, :, 0]
        optimum = (weights * sil.bits).sum() / (weights * weights).sum()
        assert optimum > 0.5
        assert res.M[0] > 0.5
        assert res.selection.bits[0]
        assert len(res.loss_trace) == 1

    def test_empty_masks_deselect(self, front_camera):
        scene = GaussianScene.create([[0.0, 0.0, 2.0]], log_scales=np.log(0.12), opacity_logits=8.0)
        res = aggregate(scene, [front_camera], [Mask2D.empty(front_camera)], [])
        assert res.M[0] < 0.5
        assert not res.selection.bits.any()

    def test_two_clusters_full_iou(self, stacked_pair):
        scene, gt = stacked_pair
        cams = ring_cameras((0.0, 0.0, 0.0), count=8)
        masks = [silhouette_mask(scene, gt, c, closing=False) for c in cams]
        res = aggregate(scene, cams, masks, [])
        iou, _ = selection3d_metrics(res.selection, gt)
        assert iou == 1.0

    def test_selection_is_thresholded_m(self, two_cluster):
        scene, gt = two_cluster
        cam = make_camera((3.0, 0.4, 0.3), (0, 0, 0), size=64, focal=72)
        res = aggregate(scene, [cam], [silhouette_mask(scene, gt, cam, closing=False)], [])
        assert np.array_equal(res.selection.bits, res.M > 0.5)

    def test_restriction_soundness(self, two_cluster, rng):
        scene, gt = two_cluster
        cam = make_camera((3.0, 0.4, 0.3), (0, 0, 0), size=64, focal=72)
        restrict = Selection3D(rng.random(scene.count) > 0.4)
        res = aggregate(scene, [cam], [Mask2D.full(cam)], [], restrict=restrict)
        assert not (res.selection.bits & ~restrict.bits).any()
        assert (res.M[~restrict.bits] == 0).all()

    def test_duplication_stability(self, stacked_pair):
        scene, gt = stacked_pair
        seq = ring_cameras((0.0, 0.0, 0.0), count=6)
        masks = [silhouette_mask(scene, gt, c, closing=False) for c in seq]
        single = aggregate(scene, seq, masks, [])
        doubled = aggregate(scene, seq + seq, masks + masks, [])
        decisive = (single.M < 0.45) | (single.M > 0.55)
        assert np.array_equal(
            single.selection.bits[decisive], doubled.selection.bits[decisive]
        )

    def test_empty_view_list_rejected(self, two_cluster):
        scene, _ = two_cluster
        with pytest.raises(ValueError):
            aggregate(scene, [], [], [])


class TestSegmentAuto:
    def test_three_cluster_oracle(self, three_cluster_scene):
        scene, labels = three_cluster_scene
        gt = Selection3D(labels == 0)
        user_cam = make_camera((3.2, 1.6, 0.8), (0.0, 0.0, 0.0), size=64, focal=80)
        user_mask = silhouette_mask(scene, gt, user_cam, closing=False)
        user_mask.occlusion_free = True

        run = run_auto_segmentation(
            scene,
            [ReferenceMask(user_mask)],
            m=16,
            provider=lambda working, idx, preseg: OracleProvider(
                working, Selection3D(gt.bits[idx]) if idx is not None else gt
            ),
            presegment=True,
        )
        iou, acc = selection3d_metrics(run.result.selection, gt)
        assert iou >= 0.95
        assert run.preseg is not None
        assert len(run.job.tracked) == 16
        assert run.result.elapsed < 5.0

    def test_preseg_off_close_to_on(self, three_cluster_scene):
        scene, labels = three_cluster_scene
        gt = Selection3D(labels == 0)
        user_cam = make_camera((3.2, 1.6, 0.8), (0.0, 0.0, 0.0), size=64, focal=80)
        user_mask = silhouette_mask(scene, gt, user_cam, closing=False)
        user_mask.occlusion_free = True
        factory = lambda working, idx, preseg: OracleProvider(
            working, Selection3D(gt.bits[idx]) if idx is not None else gt
        )

        on = segment_auto(scene, [ReferenceMask(user_mask)], m=12, provider=factory, presegment=True)
        off = segment_auto(scene, [ReferenceMask(user_mask)], m=12, provider=factory, presegment=False)
        iou_on, _ = selection3d_metrics(on.selection, gt)
        iou_off, _ = selection3d_metrics(off.selection, gt)
        assert abs(iou_on - iou_off) <= 0.05

    def test_mask_covering_nothing_errors(self, object_scene, user_cam):
        sky = Mask2D.empty(user_cam)
        sky.bits[0, 0] = True
        from splatselect import NoHitsError

        with pytest.raises(NoHitsError):
            segment_auto(object_scene, [ReferenceMask(sky)], m=8)

    def test_no_user_masks_rejected(self, object_scene):
        with pytest.raises(ValueError):
            segment_auto(object_scene, [])


class TestCorrections:
    def _corrupted_run(self, stacked_pair):
        """Fallback geometric run whose initial reference mask covers the
        decoy instead of the target."""
        scene, gt = stacked_pair
        user_cam = make_camera((0.0, 0.6, -3.6), (0.0, 0.6, 0.0), size=64, focal=48)
        wrong = silhouette_mask(scene, gt.invert(), user_cam, closing=False)
        run = run_auto_segmentation(
            scene, [ReferenceMask(wrong)], m=12, presegment=False
        )
        return scene, gt, run

    def test_correction_improves_iou(self, stacked_pair):
        scene, gt, run = self._corrupted_run(stacked_pair)
        iou_before, _ = selection3d_metrics(run.result.selection, gt)

        # worst-scoring azimuth: tracked mask farthest from the true silhouette
        from splatselect.evalkit import mask_metrics

        scores = [
            mask_metrics(tracked, silhouette_mask(scene, gt, cam, closing=False))[0]
            for cam, tracked in zip(run.job.sequence.cameras, run.job.tracked)
        ]
        worst = int(np.argmin(scores))
        true_mask = silhouette_mask(scene, gt, run.job.sequence.cameras[worst], closing=False)
        corrected = rerun_after_correction(run, ReferenceMask(true_mask))
        iou_after, _ = selection3d_metrics(corrected.result.selection, gt)
        assert iou_after >= iou_before + 0.1

    def test_correction_flips_downstream_masks(self, stacked_pair):
        scene, gt, run = self._corrupted_run(stacked_pair)
        pos = 6
        cam = run.job.sequence.cameras[pos]
        true_mask = silhouette_mask(scene, gt, cam, closing=False)
        corrected = rerun_after_correction(run, ReferenceMask(true_mask))

        from splatselect.evalkit import mask_metrics

        job = corrected.job
        injected_at = min(p for p, inj in job.injections.items() if any(i.correction for i in inj))
        for k in range(injected_at, len(job.sequence)):
            target_sil = silhouette_mask(scene, gt, job.sequence.cameras[k], closing=False)
            decoy_sil = silhouette_mask(scene, gt.invert(), job.sequence.cameras[k], closing=False)
            iou_target = mask_metrics(job.tracked[k], target_sil)[0]
            iou_decoy = mask_metrics(job.tracked[k], decoy_sil)[0]
            assert iou_target > iou_decoy

    def test_retained_masks_upstream(self, stacked_pair):
        scene, gt, run = self._corrupted_run(stacked_pair)
        pos = 6
        cam = run.job.sequence.cameras[pos]
        before = [m.bits.copy() for m in run.job.tracked]
        job = add_correction(run.job, ReferenceMask(
            silhouette_mask(scene, gt, cam, closing=False),
            render=forward(scene, cam).rgba,
        ))
        injected_at = min(p for p, inj in job.injections.items() if any(i.correction for i in inj))
        for k in range(injected_at):
            assert np.array_equal(job.tracked[k].bits, before[k])
        for k in range(injected_at, len(job.sequence)):
            assert job.tracked[k] is None

    def test_add_then_remove_restores_schedule(self, stacked_pair):
        scene, gt, run = self._corrupted_run(stacked_pair)
        cam = run.job.sequence.cameras[4]
        correction = ReferenceMask(
            silhouette_mask(scene, gt, cam, closing=False), render=forward(scene, cam).rgba
        )
        job2 = add_correction(run.job, correction)
        injected_at = min(p for p, inj in job2.injections.items() if any(i.correction for i in inj))
        job3 = remove_correction(job2, injected_at)
        assert sorted(job3.injections) == sorted(run.job.injections)
        for p in job3.injections:
            assert [i.reference for i in job3.injections[p]] == [
                i.reference for i in run.job.injections[p]
            ]

    def test_correction_at_position_zero_full_rerun(self, stacked_pair):
        scene, gt, run = self._corrupted_run(stacked_pair)
        cam0 = run.job.sequence.cameras[0]
        job = add_correction(run.job, ReferenceMask(
            silhouette_mask(scene, gt, cam0, closing=False), render=forward(scene, cam0).rgba
        ))
        if job.first_untracked() == 0:
            assert all(m is None for m in job.tracked)
