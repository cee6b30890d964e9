import numpy as np
import pytest
from hypothesis import given, strategies as st

from sphere8.errors import AmbiguousPoseError, DegenerateConfigurationError, SizeError
from sphere8.geometry import CorrespondenceSet, RelativePose, essential_from_pose, pose_errors, unit, vec_row
from sphere8.solver8pt import (
    build_observation_matrix, cheirality_support, combined_transform, eight_point, hartley_combined,
    hartley_isotropic, hartley_non_isotropic, isotropic_transform, non_isotropic_transform, pose_candidates,
    preconditioned_eight_point, recover_pose, solve_dlt,
)
from conftest import exact_scene, random_rotation

SOLVERS = [eight_point, hartley_isotropic, hartley_non_isotropic, hartley_combined]


def sign_gap(A, B):
    A = A / np.linalg.norm(A)
    B = B / np.linalg.norm(B)
    return min(np.linalg.norm(A - B), np.linalg.norm(A + B))


def test_observation_rows_basis():
    q = np.eye(3)
    corrs = CorrespondenceSet(np.tile(q[2], (8, 1)), np.tile(q[2], (8, 1)))
    assert np.array_equal(build_observation_matrix(corrs)[0], [0, 0, 0, 0, 0, 0, 0, 0, 1])
    corrs = CorrespondenceSet(np.tile(q[0], (8, 1)), np.tile(q[1], (8, 1)))
    row = build_observation_matrix(corrs)[0]
    assert row[3] == 1 and np.count_nonzero(row) == 1


def test_observation_row_identity(rng):
    q1 = unit(rng.normal(size=(1000, 3)))
    q2 = unit(rng.normal(size=(1000, 3)))
    A = build_observation_matrix(CorrespondenceSet(q1, q2))
    for i in range(1000):
        M = rng.normal(size=(3, 3))
        assert abs(A[i] @ vec_row(M) - q2[i] @ M @ q1[i]) < 1e-14
    assert np.abs(np.linalg.norm(A, axis=1) - 1).max() < 1e-12


def test_too_few_rows():
    with pytest.raises(SizeError):
        build_observation_matrix(CorrespondenceSet(np.eye(3)[:1].repeat(7, 0), np.eye(3)[:1].repeat(7, 0)))


def test_minimal_sample_recovers_e():
    for seed in range(20):
        pose, corrs, _, _ = exact_scene(seed, n=8)
        sol = solve_dlt(build_observation_matrix(corrs))
        assert sign_gap(sol.E, essential_from_pose(pose)) < 1e-6
        assert np.all(np.diff(sol.sigma) <= 0) and np.all(sol.sigma >= 0)


@pytest.mark.parametrize("solver", SOLVERS)
def test_noise_free_exact(solver):
    for seed in range(10):
        pose, corrs, _, _ = exact_scene(seed, n=200)
        E, est = solver(corrs)
        assert max(pose_errors(pose, est)) < 1e-8
        assert np.abs(build_observation_matrix(corrs) @ vec_row(essential_from_pose(pose))).max() < 1e-12


def test_zero_baseline_is_degenerate(rng):
    q = unit(rng.normal(size=(20, 3)))
    with pytest.raises(DegenerateConfigurationError):
        eight_point(CorrespondenceSet(q, q))


def test_recover_pose_forward_example(rng):
    pose = RelativePose(np.eye(3), [0, 0, 1])
    X = unit(rng.normal(size=(20, 3))) * rng.uniform(2, 5, (20, 1))
    corrs = CorrespondenceSet(unit(X), unit(X + pose.t))
    est = recover_pose(essential_from_pose(pose), corrs)
    assert max(pose_errors(pose, est)) < 1e-9


def test_recover_pose_survives_flipped_minority():
    pose, corrs, _, _ = exact_scene(5, n=60)
    base = recover_pose(essential_from_pose(pose), corrs)
    q1, q2 = corrs.q1.copy(), corrs.q2.copy()
    q1[:15] *= -1  # these pairs now triangulate behind both cameras
    q2[:15] *= -1
    flipped = recover_pose(essential_from_pose(pose), CorrespondenceSet(q1, q2))
    assert np.allclose(base.R, flipped.R) and np.allclose(base.t, flipped.t)


def test_candidate_selection_noise_free():
    for seed in range(1000):
        pose, corrs, _, _ = exact_scene(seed, n=12)
        cands = pose_candidates(essential_from_pose(pose))
        assert len(cands) == 4
        support = [cheirality_support(corrs.q1, corrs.q2, R, t)[0] for R, t in cands]
        assert sorted(support)[-1] == 12 and sorted(support)[-2] < 12
        assert max(pose_errors(pose, recover_pose(essential_from_pose(pose), corrs))) < 1e-8


def test_ambiguous_tie_raises():
    pose, corrs, _, _ = exact_scene(2, n=40)
    q1, q2 = corrs.q1.copy(), corrs.q2.copy()
    q1[:20] *= -1
    q2[:20] *= -1
    with pytest.raises(AmbiguousPoseError):
        recover_pose(essential_from_pose(pose), CorrespondenceSet(q1, q2))


def test_eight_point_deterministic(noisy_trial):
    a = eight_point(noisy_trial.corrs)
    b = eight_point(noisy_trial.corrs)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1].R, b[1].R)


@given(st.integers(0, 10**6))
def test_global_rotation_conjugates_pose(seed):
    pose, corrs, _, _ = exact_scene(seed, n=30)
    G = random_rotation(np.random.default_rng(seed + 1))
    _, est = eight_point(CorrespondenceSet(corrs.q1 @ G.T, corrs.q2 @ G.T))
    assert np.allclose(est.R, G @ pose.R @ G.T, atol=1e-9)
    assert np.allclose(est.t, G @ pose.t, atol=1e-9)


def test_identity_preconditioning_equals_plain(noisy_trial):
    E0, p0 = eight_point(noisy_trial.corrs)
    E1, p1 = preconditioned_eight_point(noisy_trial.corrs, np.eye(3), np.eye(3))
    assert sign_gap(E0, E1) < 1e-12
    assert np.allclose(p0.R, p1.R, atol=1e-12)


def test_isotropic_transform_normalises(rng):
    q = unit(rng.normal(size=(100, 3)))
    T = isotropic_transform(q)
    xy = (np.column_stack([q[:, :2], np.ones(100)]) @ T.T)[:, :2]
    assert np.abs(xy.mean(0)).max() < 1e-12
    assert np.sqrt(np.mean(np.sum(xy**2, 1))) == pytest.approx(np.sqrt(2), abs=1e-12)
    T = non_isotropic_transform(q)
    xy = (np.column_stack([q[:, :2], np.ones(100)]) @ T.T)[:, :2]
    assert np.allclose(xy.std(0), 1, atol=1e-12)
    assert combined_transform(q).shape == (3, 3)


def test_coincident_points_degenerate():
    q = np.tile(unit([1.0, 2.0, 3.0]), (10, 1))
    with pytest.raises(DegenerateConfigurationError):
        isotropic_transform(q)
    with pytest.raises(DegenerateConfigurationError):
        non_isotropic_transform(q)


def test_projection_idempotent(rng):
    for _ in range(20):
        A = rng.normal(size=(30, 9))
        E = solve_dlt(A).E
        assert np.abs(solve_dlt(A).E - E).max() == 0
        U, s, Vt = np.linalg.svd(E)
        assert np.allclose(s, [1, 1, 0], atol=1e-12)
