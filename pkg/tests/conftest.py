"""Shared synthetic scenes and cameras."""

import numpy as np
import pytest

from splatselect import Camera, GaussianScene


def make_camera(position, target=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0), size=32,
                focal=None, near=0.05, far=50.0):
    focal = focal if focal is not None else size
    return Camera.look_at(
        position, target, up,
        fx=focal, fy=focal, cx=size / 2, cy=size / 2,
        width=size, height=size, near=near, far=far,
    )


def random_scene(rng, n=8, sh_degree=0, spread=0.6, z_center=2.5):
    """Small random scene in front of a camera at the origin looking +z."""
    means = np.column_stack([
        rng.uniform(-spread, spread, n),
        rng.uniform(-spread, spread, n),
        rng.uniform(z_center - 0.8, z_center + 0.8, n),
    ])
    quats = rng.normal(size=(n, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    log_scales = rng.uniform(np.log(0.03), np.log(0.25), (n, 3))
    logits = rng.uniform(-1.0, 6.0, n)
    basis = (sh_degree + 1) ** 2
    sh = rng.uniform(-0.6, 0.6, (n, 3, basis))
    return GaussianScene.create(
        means, rotations=quats, log_scales=log_scales,
        opacity_logits=logits, sh_coeffs=sh,
    )


def cluster(rng, center, n, radius=0.25, opacity=6.0, scale=0.05, color=(0.8, 0.3, 0.2)):
    """Gaussian blob of n small near-opaque splats around a center."""
    means = np.asarray(center, dtype=np.float64) + rng.normal(0.0, radius, (n, 3))
    return GaussianScene.create(
        means, log_scales=np.log(scale), opacity_logits=opacity, colors=np.asarray(color),
    )


def merge_scenes(*scenes):
    return GaussianScene(
        means=np.concatenate([s.means for s in scenes]),
        rotations=np.concatenate([s.rotations for s in scenes]),
        log_scales=np.concatenate([s.log_scales for s in scenes]),
        opacity_logits=np.concatenate([s.opacity_logits for s in scenes]),
        sh_coeffs=np.concatenate([s.sh_coeffs for s in scenes]),
    )


def plane_scene(z, half=0.4, grid=9, opacity=8.0, scale=0.06, color=(0.5, 0.5, 0.9)):
    """Near-opaque plane of Gaussians at constant camera-frame depth z."""
    axis = np.linspace(-half, half, grid)
    xs, ys = np.meshgrid(axis, axis)
    means = np.column_stack([xs.ravel(), ys.ravel(), np.full(xs.size, float(z))])
    return GaussianScene.create(
        means, log_scales=np.log(scale), opacity_logits=opacity, colors=np.asarray(color),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def front_camera():
    """Camera at the origin looking down +z, 32x32."""
    return make_camera((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), size=32, near=0.05, far=50.0)


@pytest.fixture
def two_plane_scene():
    return merge_scenes(plane_scene(1.0), plane_scene(2.0, color=(0.9, 0.4, 0.2)))


@pytest.fixture
def three_cluster_scene(rng):
    """Three well-separated clusters; the first is the segmentation target.

    The decoys sit off the turnaround orbit plane of the target so their
    silhouettes never overlap the target's from the dense views.
    """
    a = cluster(rng, (0.0, 0.0, 0.0), 1200, radius=0.3, opacity=4.0, color=(0.9, 0.2, 0.2))
    b = cluster(rng, (0.9, 1.8, 0.2), 1000, radius=0.3, opacity=4.0, color=(0.2, 0.9, 0.2))
    c = cluster(rng, (-0.8, -1.9, -0.3), 1000, radius=0.3, opacity=4.0, color=(0.2, 0.2, 0.9))
    scene = merge_scenes(a, b, c)
    labels = np.zeros(scene.count, dtype=int)
    labels[1200:2200] = 1
    labels[2200:] = 2
    return scene, labels
