import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from sphere8.errors import DegenerateConfigurationError, DomainError
from sphere8.geometry import (
    CorrespondenceSet, ImageSize, RelativePose, algebraic_error, bearing_to_pixel, essential_from_pose,
    pixel_to_bearing, project_essential, rotation_error, skew, translation_error, triangulate_depths, unit, vec_row,
)
from conftest import random_pose, random_rotation

SIZE = ImageSize(1024, 512)


@pytest.mark.parametrize("uv, q", [
    ((512, 256), (0, 0, 1)),
    ((768, 256), (1, 0, 0)),
    ((0, 0), (0, -1, 0)),
])
def test_pixel_to_bearing_axes(uv, q):
    assert np.allclose(pixel_to_bearing(np.array(uv, float), SIZE), q, atol=1e-15)


def test_pixel_to_bearing_unit_on_grid():
    for size in (ImageSize(2, 2), ImageSize(1024, 512), ImageSize(37, 91)):
        u, v = np.meshgrid(np.linspace(0, size.width, 100, endpoint=False),
                           np.linspace(0, size.height, 100, endpoint=False))
        q = pixel_to_bearing(np.stack([u, v], -1), size)
        assert np.abs(np.linalg.norm(q, axis=-1) - 1).max() < 1e-12


@pytest.mark.parametrize("uv", [(-1, 0), (1024, 10), (5, 512), (np.nan, 3)])
def test_pixel_out_of_bounds(uv):
    with pytest.raises(DomainError):
        pixel_to_bearing(np.array(uv, float), SIZE)


def test_image_size_minimum():
    with pytest.raises(DomainError):
        ImageSize(1, 10)


@pytest.mark.parametrize("q, uv", [((0, 0, 1), (512, 256)), ((1, 0, 0), (768, 256))])
def test_bearing_to_pixel_axes(q, uv):
    assert np.allclose(bearing_to_pixel(np.array(q, float), SIZE), uv, atol=1e-12)


def test_bearing_pixel_round_trip(rng):
    q = unit(rng.normal(size=(1000, 3)))
    back = pixel_to_bearing(bearing_to_pixel(q, SIZE), SIZE)
    assert np.abs(back - q).max() < 1e-9


def test_pole_maps_to_centre_column():
    assert np.allclose(bearing_to_pixel(np.array([0.0, -1.0, 0.0]), SIZE), (512, 0))
    assert np.allclose(bearing_to_pixel(np.array([0.0, 1.0, 0.0]), SIZE), (512, 512))


def test_skew_examples(rng):
    assert np.array_equal(skew([1, 0, 0]), [[0, 0, 0], [0, 0, -1], [0, 1, 0]])
    assert np.array_equal(skew([0, 0, 0]), np.zeros((3, 3)))
    for t in rng.normal(size=(100, 3)):
        assert np.abs(skew(t) @ t).max() < 1e-15


@given(st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6))
def test_skew_is_cross_product(vals):
    t, v = np.array(vals[:3]), np.array(vals[3:])
    M = skew(t)
    assert np.array_equal(M + M.T, np.zeros((3, 3)))
    assert np.allclose(M @ v, np.cross(t, v), atol=1e-9)


def test_essential_from_identity_forward():
    E = essential_from_pose(RelativePose(np.eye(3), [0, 0, 1]))
    assert np.allclose(E, [[0, -1, 0], [1, 0, 0], [0, 0, 0]], atol=1e-15)


def test_essential_annihilates_exact_pairs(rng):
    for _ in range(1000):
        pose = random_pose(rng)
        X = rng.normal(size=3) * 5
        q1 = unit(X)
        q2 = unit(pose.R @ X + pose.t)
        E = essential_from_pose(pose)
        assert abs(q2 @ E @ q1) < 1e-12


def test_essential_singular_values(rng):
    for _ in range(50):
        s = np.linalg.svd(essential_from_pose(random_pose(rng)), compute_uv=False)
        assert np.allclose(s, [1, 1, 0], atol=1e-12)


def test_algebraic_error_matches_kron(rng):
    for _ in range(200):
        E = rng.normal(size=(3, 3))
        q1, q2 = unit(rng.normal(size=3)), unit(rng.normal(size=3))
        assert abs(algebraic_error(q1, q2, E) - vec_row(E) @ np.kron(q2, q1)) < 1e-14


def test_triangulate_worked_example():
    pose = RelativePose(np.eye(3), [-1, 0, 0])
    X = np.array([0.0, 0.0, 2.0])
    lam1, lam2 = triangulate_depths(unit(X), unit(X + pose.t), pose)
    assert lam1 == pytest.approx(2.0, abs=1e-12)
    assert lam2 == pytest.approx(math.sqrt(5), abs=1e-12)


def test_triangulate_round_trip(rng):
    for _ in range(1000):
        pose = random_pose(rng)
        scale = rng.uniform(0.1, 3)
        X = unit(rng.normal(size=3)) * rng.uniform(1, 10)
        X2 = pose.R @ X + scale * pose.t
        lam1, lam2 = triangulate_depths(unit(X), unit(X2), pose, t_scale=scale)
        assert abs(lam1 / np.linalg.norm(X) - 1) < 1e-9
        assert abs(lam2 / np.linalg.norm(X2) - 1) < 1e-9


def test_triangulate_parallel_rays_flagged():
    pose = RelativePose(np.eye(3), [1, 0, 0])
    with pytest.raises(DegenerateConfigurationError):
        triangulate_depths(np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), pose)
    q2 = np.array([[1.0, 0, 0], unit([1.0, 0, 2.0])])
    _, _, ok = triangulate_depths(np.array([[1.0, 0, 0], [0, 0, 1.0]]), q2, pose, return_mask=True)
    assert ok.tolist() == [False, True]


def test_error_metric_examples(rng):
    R = random_rotation(rng)
    t = unit(rng.normal(size=3))
    assert rotation_error(R, R) == pytest.approx(0, abs=1e-7)
    assert translation_error(t, t) == pytest.approx(0, abs=1e-7)
    Rz = Rotation.from_euler("z", np.pi / 2).as_matrix()
    assert rotation_error(R, R @ Rz) == pytest.approx(0.5, abs=1e-12)
    assert translation_error(t, -t) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_rotation_error_symmetric(seed):
    rng = np.random.default_rng(seed)
    A, B = random_rotation(rng), random_rotation(rng)
    e = rotation_error(A, B)
    assert 0 <= e <= 1
    assert e == pytest.approx(rotation_error(B, A), abs=1e-12)
    angle = Rotation.from_matrix(A.T @ B).magnitude()
    assert e == pytest.approx(angle / np.pi, abs=1e-7)


def test_pose_invariants():
    with pytest.raises(DomainError):
        RelativePose(np.diag([1.0, 1.0, -1.0]), [0, 0, 1])
    with pytest.raises(DomainError):
        RelativePose(np.eye(3), [0, 0, 0])
    p = RelativePose(np.eye(3), [0, 0, 3])
    assert np.linalg.norm(p.t) == pytest.approx(1, abs=1e-15)


def test_correspondence_shapes():
    with pytest.raises(ValueError):
        CorrespondenceSet(np.zeros((3, 3)), np.zeros((4, 3)))


def test_project_essential_idempotent(rng):
    for _ in range(50):
        once = project_essential(rng.normal(size=(3, 3)))
        assert np.abs(project_essential(once) - once).max() < 1e-15 * 10
