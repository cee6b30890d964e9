import numpy as np
import pytest
from hypothesis import given, strategies as st

from sphere8.errors import DegenerateConfigurationError, DomainError
from sphere8.geometry import CorrespondenceSet, RelativePose, pose_errors, unit
from sphere8.normalization import (
    NormalizationParams, build_n, denormalize, gram_frob_sq, motion_parallax, normalize_bearings,
    normalized_eight_point, perturbation_bound_check, sigma8, sigma8_bound, stability_report,
)
from sphere8.optim import opt_sk
from sphere8.solver8pt import build_observation_matrix, eight_point, kron_rows
from sphere8.synth import NoiseModel, SceneConfig, make_trial
from conftest import exact_scene

GRID = np.linspace(0.5, 5.0, 5)


def test_build_n_examples():
    assert np.array_equal(build_n(NormalizationParams(1, 1)), np.eye(3))
    assert np.array_equal(build_n(NormalizationParams(2, 1)), np.diag([2.0, 2.0, 1.0]))
    assert np.array_equal(build_n((1, 2)), np.diag([1.0, 1.0, 2.0]))


@pytest.mark.parametrize("S, K", [(0, 1), (1, -1), (np.inf, 1), (np.nan, 1)])
def test_params_positive(S, K):
    with pytest.raises(DomainError):
        NormalizationParams(S, K)


def test_normalize_bearings(rng):
    q = unit(rng.normal(size=(100, 3)))
    corrs = CorrespondenceSet(q, q[::-1])
    same = normalize_bearings(corrs, np.eye(3))
    assert np.array_equal(same.q1, corrs.q1)
    out = normalize_bearings(CorrespondenceSet([[0, 0, 1.0]], [[0, 0, 1.0]]), np.diag([2.0, 2.0, 3.0]))
    assert np.array_equal(out.q1, [[0, 0, 3.0]])
    for S, K in [(0.5, 3.0), (4.0, 0.25)]:
        norms = np.linalg.norm(normalize_bearings(corrs, build_n((S, K))).q1, axis=1)
        assert norms.min() >= min(S, K) - 1e-12 and norms.max() <= max(S, K) + 1e-12


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.integers(0, 1000))
def test_denormalisation_identity(S, K, seed):
    N = build_n((S, K))
    Eh = np.random.default_rng(seed).normal(size=(3, 3))
    Ni = np.linalg.inv(N)
    assert np.allclose(Ni.T @ denormalize(Eh, N) @ Ni, Eh, atol=1e-12 * max(1, np.abs(Eh).max()))


def test_identity_collapses_to_plain(noisy_trial):
    E, _, _ = normalized_eight_point(noisy_trial.corrs, NormalizationParams(1, 1))
    E0, _ = eight_point(noisy_trial.corrs)
    assert min(np.abs(E - E0).max(), np.abs(E + E0).max()) < 1e-12


def test_exact_over_grid():
    for seed in range(10):
        pose, corrs, _, _ = exact_scene(seed, n=40)
        for S in GRID:
            for K in GRID:
                _, est, report = normalized_eight_point(corrs, NormalizationParams(S, K))
                assert max(pose_errors(pose, est)) < 1e-8
                assert report.sigma8 >= 0


@pytest.mark.xfail(reason="sigma_8 at the optimal (S, K) beats the plain sigma_8 on only ~40% of "
                          "20%-outlier scenes; the ordering depends on the (S, K) scale gauge", strict=False)
def test_optimal_sk_raises_sigma8():
    for i in range(20):
        trial = make_trial(i, SceneConfig(200), NoiseModel(kappa=500.0, outlier_ratio=0.2), seed=4)
        res = opt_sk(trial.corrs)
        _, _, rep = normalized_eight_point(trial.corrs, NormalizationParams(res.S, res.K))
        assert rep.sigma8 > sigma8(build_observation_matrix(trial.corrs))


def test_sigma8_examples(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(9, 9)))
    assert sigma8(Q) == pytest.approx(1.0, abs=1e-12)
    B = rng.normal(size=(20, 7)) @ rng.normal(size=(7, 9))
    assert sigma8(B) < 1e-12
    A = kron_rows(unit(rng.normal(size=(200, 3))), unit(rng.normal(size=(200, 3))))
    eig = np.sqrt(np.sort(np.linalg.eigvalsh(A.T @ A))[::-1])
    assert sigma8(A) == pytest.approx(eig[7], abs=1e-10)


def test_bound_orthonormal_rows(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(9, 9)))
    A = Q[:8]
    assert gram_frob_sq(A) == pytest.approx(8.0, abs=1e-12)
    direct = np.sqrt(8 / 8 - np.sqrt(max(8 * 8.0 - 64, 0) / 7) / 8)
    assert sigma8_bound(A) == pytest.approx(direct, abs=1e-12)
    assert sigma8_bound(A) >= sigma8(A) - 1e-12


def test_bound_duplicate_rows():
    row = np.kron(unit([1.0, 2, 3]), unit([3.0, -1, 2]))
    A = np.tile(row, (20, 1))
    assert gram_frob_sq(A) == pytest.approx(400.0, rel=1e-12)
    # the formula gives sqrt(n/8 - n/8) = 0 here
    assert sigma8_bound(A) == pytest.approx(0.0, abs=1e-6)
    assert sigma8(A) <= sigma8_bound(A) + 1e-12


def test_bound_needs_unit_rows(rng):
    with pytest.raises(DomainError):
        sigma8_bound(2.0 * kron_rows(unit(rng.normal(size=(20, 3))), unit(rng.normal(size=(20, 3)))))
    A = kron_rows(unit(rng.normal(size=(20, 3))) * 2, unit(rng.normal(size=(20, 3))))
    assert stability_report(A).sigma8_bound is None


def epipolar_matrix(n, seed, kappa=None):
    trial = make_trial(0, SceneConfig(n_points=n), NoiseModel(kappa=kappa), seed=seed)
    return build_observation_matrix(trial.corrs)


@given(st.integers(8, 200), st.integers(0, 10**6))
def test_bound_holds_on_epipolar_data(n, seed):
    A = epipolar_matrix(n, seed)
    assert sigma8(A) <= sigma8_bound(A) + 1e-12


def test_bound_hypothesis_fails_on_isotropic_rows(rng):
    # a generic unit-row A has a near-isotropic Gram spectrum, so 8 g < n^2
    A = kron_rows(unit(rng.normal(size=(500, 3))), unit(rng.normal(size=(500, 3))))
    assert 8 * gram_frob_sq(A) < 500**2
    with pytest.raises(DomainError):
        sigma8_bound(A)


def test_perturbation_bound():
    trial = make_trial(1, SceneConfig(200), NoiseModel(), seed=2)
    A = build_observation_matrix(trial.corrs)
    E, _ = eight_point(trial.corrs)
    assert perturbation_bound_check(A, A, E, E) == (0.0, 0.0)
    deltas = []
    for kappa in (10000.0, 500.0):
        noisy = make_trial(1, SceneConfig(200), NoiseModel(kappa=kappa), seed=2)
        En, _ = eight_point(noisy.corrs)
        deltas.append(perturbation_bound_check(A, build_observation_matrix(noisy.corrs), E, En)[0])
    assert deltas[0] < deltas[1]
    dirty = make_trial(1, SceneConfig(200), NoiseModel(outlier_ratio=0.2), seed=2)
    _, bound = perturbation_bound_check(A, build_observation_matrix(dirty.corrs), E, eight_point(dirty.corrs)[0])
    assert 0 < bound < np.inf
    with pytest.raises(DegenerateConfigurationError):
        perturbation_bound_check(np.zeros((9, 9)), np.zeros((9, 9)), E, E)


def test_parallax_isoceles():
    # baseline of length 1 along x, landmark on the bisector at distance 0.5
    pose = RelativePose(np.eye(3), [-1.0, 0, 0])
    X = np.array([[0.5, 0.0, 0.5]])
    corrs = CorrespondenceSet(unit(X), unit(X + pose.t))
    assert motion_parallax(corrs, pose)[0] == pytest.approx(np.pi / 2, abs=1e-12)


def test_parallax_far_landmark():
    pose = RelativePose(np.eye(3), [-1.0, 0, 0])
    X = np.array([[0.3, 0.2, 1e6]])
    corrs = CorrespondenceSet(unit(X), unit(X + pose.t))
    assert motion_parallax(corrs, pose)[0] < 1e-5


def test_parallax_changes_under_deformation():
    trial = make_trial(0, SceneConfig(200), NoiseModel(), seed=9)
    plain = motion_parallax(trial.corrs, trial.pose)
    wide = motion_parallax(trial.corrs, trial.pose, NormalizationParams(2.0, 1.0))
    assert np.all(np.isfinite(plain))
    assert not np.allclose(np.sort(plain), np.sort(wide))


def test_parallax_degenerate_is_nan():
    pose = RelativePose(np.eye(3), [1.0, 0, 0])
    corrs = CorrespondenceSet([[1.0, 0, 0], [0, 0, 1.0]], [[1.0, 0, 0], unit([1.0, 0, 2.0])])
    alpha = motion_parallax(corrs, pose)
    assert np.isnan(alpha[0]) and np.isfinite(alpha[1])
