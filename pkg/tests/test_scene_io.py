"""Scene file round-trips, SH inference, rigid transforms."""

import struct

import numpy as np
import pytest

from splatselect import (
    GaussianScene,
    Selection3D,
    SceneFormatError,
    SceneIOError,
    apply_rigid_transform,
    export_selection,
    load_scene,
    load_selection,
    render,
    save_scene,
    save_selection,
)
from splatselect.scene import quat_to_rotmat, rotmat_to_quat, quat_multiply

from conftest import make_camera, random_scene


def write_minimal_file(path, count=1, rest=0, drop=None, truncate=None):
    names = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(rest)]
    names += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    if drop:
        names.remove(drop)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {count}"]
    header += [f"property float {n}" for n in names]
    header.append("end_header")
    rows = np.zeros(count, dtype=np.dtype([(n, "<f4") for n in names]))
    if "rot_0" in names:
        rows["rot_0"] = 1.0
    body = rows.tobytes()
    if truncate is not None:
        body = body[:truncate]
    path.write_bytes(("\n".join(header) + "\n").encode() + body)


def test_load_single_vertex(tmp_path):
    f = tmp_path / "one.ply"
    write_minimal_file(f, count=1)
    scene = load_scene(f)
    assert scene.count == 1
    assert scene.sh_degree == 0
    q = scene.unit_rotations()[0]
    assert np.allclose(q, [1, 0, 0, 0])
    assert abs(np.linalg.norm(q) - 1) < 1e-6


def test_sh_degree_inference(tmp_path):
    # degree-3 SH carries (16 - 1) * 3 = 45 rest coefficients
    assert (16 - 1) * 3 == 45
    f = tmp_path / "deg3.ply"
    write_minimal_file(f, count=2, rest=45)
    scene = load_scene(f)
    assert scene.sh_degree == 3
    assert scene.sh_basis == 16


def test_missing_attribute_names_it(tmp_path):
    f = tmp_path / "broken.ply"
    write_minimal_file(f, drop="opacity")
    with pytest.raises(SceneFormatError, match="opacity") as err:
        load_scene(f)
    assert err.value.attribute == "opacity"


def test_truncated_file_reports_offset(tmp_path):
    f = tmp_path / "short.ply"
    write_minimal_file(f, count=4, truncate=10)
    with pytest.raises(SceneIOError, match="truncated") as err:
        load_scene(f)
    assert err.value.offset is not None


def test_roundtrip_bytes_identical(tmp_path, rng):
    f1 = tmp_path / "a.ply"
    f2 = tmp_path / "b.ply"
    scene = random_scene(rng, n=15, sh_degree=1)
    save_scene(scene, f1)
    save_scene(load_scene(f1), f2)
    assert f1.read_bytes() == f2.read_bytes()


def test_roundtrip_preserves_extras(tmp_path):
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
             "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    header = ["ply", "format binary_little_endian 1.0", "element vertex 3"]
    header += [f"property float {n}" for n in names] + ["end_header"]
    rows = np.zeros(3, dtype=np.dtype([(n, "<f4") for n in names]))
    rows["rot_0"] = 1.0
    rows["nx"] = [0.25, 0.5, 0.75]
    f = tmp_path / "norm.ply"
    f.write_bytes(("\n".join(header) + "\n").encode() + rows.tobytes())
    scene = load_scene(f)
    assert "nx" in scene.extras
    out = tmp_path / "norm2.ply"
    save_scene(scene, out)
    assert out.read_bytes() == f.read_bytes()


def test_export_selection_rows(tmp_path, rng):
    src = tmp_path / "src.ply"
    save_scene(random_scene(rng, n=3), src)
    scene = load_scene(src)  # ground values in file precision
    out = tmp_path / "picked.ply"
    n = export_selection(scene, Selection3D.from_indices(3, [1]), out)
    assert n == 1
    picked = load_scene(out)
    assert picked.count == 1
    assert np.array_equal(picked.means[0], scene.means[1])
    assert np.array_equal(picked.sh_coeffs[0], scene.sh_coeffs[1])

    inv = tmp_path / "rest.ply"
    n = export_selection(scene, Selection3D.from_indices(3, [1]), inv, invert=True)
    assert n == 2
    rest = load_scene(inv)
    assert np.array_equal(rest.means, scene.means[[0, 2]])


def test_export_empty_selection_warns(tmp_path, rng):
    scene = random_scene(rng, n=2)
    out = tmp_path / "empty.ply"
    with pytest.warns(UserWarning, match="empty selection"):
        n = export_selection(scene, Selection3D.empty(2), out)
    assert n == 0
    assert load_scene(out).count == 0


def test_selection_sidecar_roundtrip(tmp_path, rng):
    bits = rng.random(301) > 0.5
    path = tmp_path / "sel.gsel"
    save_selection(Selection3D(bits), path)
    raw = path.read_bytes()
    assert raw[:4] == b"GSEL"
    version, count = struct.unpack("<IQ", raw[4:16])
    assert (version, count) == (1, 301)
    # LSB-first packing: bit i of byte k is element 8k + i
    assert bool(raw[16] & 1) == bool(bits[0])
    assert bool(raw[16] & 2) == bool(bits[1])
    loaded = load_selection(path)
    assert np.array_equal(loaded.bits, bits)


def test_rigid_identity_is_noop(rng):
    scene = random_scene(rng, n=5, sh_degree=1)
    moved = apply_rigid_transform(scene, np.eye(3), np.zeros(3))
    assert np.allclose(moved.means, scene.means)
    assert np.allclose(moved.sh_coeffs, scene.sh_coeffs, atol=1e-6)


def test_rigid_rotates_mean():
    scene = GaussianScene.create([[1.0, 0.0, 0.0]])
    Rz = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    moved = apply_rigid_transform(scene, Rz, np.zeros(3))
    assert np.allclose(moved.means[0], [0.0, 1.0, 0.0], atol=1e-6)


def test_rigid_rejects_non_orthonormal():
    scene = GaussianScene.create([[0.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        apply_rigid_transform(scene, np.eye(3) * 2.0, np.zeros(3))


def test_rigid_covariance_equivariance(rng):
    scene = random_scene(rng, n=20)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0, np.pi)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    R = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)
    moved = apply_rigid_transform(scene, R, rng.normal(size=3))
    expected = R @ scene.covariances() @ R.T
    assert np.abs(moved.covariances() - expected).max() < 1e-5


def test_rigid_silhouette_equivariance(rng):
    # Render a transformed scene from a transformed camera: silhouettes match.
    scene = random_scene(rng, n=6, sh_degree=0)
    cam = make_camera((0.3, -0.2, 0.0), (0.0, 0.0, 2.5), size=64)
    theta = 0.7
    R = np.array([
        [np.cos(theta), 0, np.sin(theta)],
        [0, 1, 0],
        [-np.sin(theta), 0, np.cos(theta)],
    ])
    t = np.array([0.5, -1.0, 2.0])
    moved = apply_rigid_transform(scene, R, t)

    # New world-to-camera composing the inverse rigid motion with the old camera.
    m = np.eye(4)
    m[:3, :3] = R
    m[:3, 3] = t
    cam2 = cam.with_pose(cam.world_to_camera @ np.linalg.inv(m))

    img1 = render(scene, cam).rgba
    img2 = render(moved, cam2).rgba
    assert np.abs(img1 - img2).max() < 1e-5


def test_rigid_flags_high_order_sh(rng):
    scene = random_scene(rng, n=3, sh_degree=2)
    moved = apply_rigid_transform(scene, np.eye(3), np.ones(3))
    assert moved.color_rotation_approx
    low = random_scene(rng, n=3, sh_degree=1)
    assert not apply_rigid_transform(low, np.eye(3), np.ones(3)).color_rotation_approx


def test_quaternion_helpers_roundtrip(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    R = quat_to_rotmat(q)
    q2 = rotmat_to_quat(R)
    assert np.allclose(q, q2) or np.allclose(q, -q2)
    a, b = rng.normal(size=4), rng.normal(size=4)
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    assert np.allclose(quat_to_rotmat(quat_multiply(a, b)), quat_to_rotmat(a) @ quat_to_rotmat(b))
