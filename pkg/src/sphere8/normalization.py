"""Ovoid normalisation ``N = diag(S, S, K)`` of bearing vectors and DLT stability diagnostics."""
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfigurationError, DomainError
from .geometry import CorrespondenceSet, project_essential, triangulate_depths, unit
from .solver8pt import kron_rows, recover_pose, singular_values, solve_dlt


@dataclass(frozen=True)
class NormalizationParams:
    S: float = 1.0
    K: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.S) and np.isfinite(self.K)) or self.S <= 0 or self.K <= 0:
            raise DomainError(f"S and K must be positive, got S={self.S}, K={self.K}")

    @property
    def is_identity(self):
        return self.S == 1.0 and self.K == 1.0


@dataclass(frozen=True)
class StabilityReport:
    sigma8: float
    gram_frob_sq: float
    sigma8_bound: float = None  # None when A does not have unit rows
    parallax: np.ndarray = field(default=None, repr=False)


def build_n(params):
    if not isinstance(params, NormalizationParams):
        params = NormalizationParams(*params)
    return np.diag([params.S, params.S, params.K])


def normalize_bearings(corrs, N):
    """Left-multiply every bearing by ``N``. The result lies on an ovoid, not the unit sphere."""
    N = np.asarray(N, dtype=float)
    return CorrespondenceSet(corrs.q1 @ N.T, corrs.q2 @ N.T)


def denormalize(E_hat, N):
    return N.T @ E_hat @ N


def gram_frob_sq(A):
    """``||A A^T||_F^2`` computed through the 9x9 Gram matrix."""
    G = A.T @ A
    return float(np.sum(G * G))


def sigma8(A):
    return float(singular_values(np.asarray(A, dtype=float))[0][7])


def has_unit_rows(A, tol=1e-9):
    return bool(np.all(np.abs(np.linalg.norm(A, axis=1) - 1.0) <= tol))


def sigma8_bound(A, gram=None):
    """Upper bound on sigma_8 for observation matrices whose rows are unit vectors.

    The hypothesis ``8 ||A A^T||_F^2 >= n^2`` holds whenever A has a null
    vector (epipolar data); uniformly random bearing pairs usually violate it.

    ``sqrt(n/8 - sqrt((8 ||A A^T||_F^2 - n^2) / 7) / 8)``. Raises DomainError
    when the rows are not unit-norm or ``8 ||A A^T||_F^2 < n^2``.
    """
    A = np.asarray(A, dtype=float)
    if not has_unit_rows(A):
        raise DomainError("sigma_8 bound requires unit-norm rows")
    n = A.shape[0]
    g = gram_frob_sq(A) if gram is None else gram
    spread = 8.0 * g - n * n
    if spread < -1e-9 * n * n:
        raise DomainError("8 ||A A^T||_F^2 < n^2: bound hypothesis violated")
    # at the boundary the sqrt turns roundoff in g into a visible undershoot;
    # snapping to 0 can only raise the bound
    if spread < 1e-12 * n * n:
        spread = 0.0
    return float(np.sqrt(max(n / 8.0 - np.sqrt(spread / 7.0) / 8.0, 0.0)))


def stability_report(A, sigma=None, parallax=None):
    s8 = float(sigma[7]) if sigma is not None else sigma8(A)
    g = gram_frob_sq(A)
    bound = None
    if has_unit_rows(A):
        try:
            bound = sigma8_bound(A, gram=g)
        except DomainError:
            bound = None
    return StabilityReport(sigma8=s8, gram_frob_sq=g, sigma8_bound=bound, parallax=parallax)


def normalized_essential(corrs, params):
    """Denormalised, rank-2 projected ``E`` for one ``(S, K)`` plus the normalised-domain DLT solution."""
    n = np.array([params.S, params.S, params.K])
    A = kron_rows(corrs.q1 * n, corrs.q2 * n)
    sol = solve_dlt(A, canonical=False)
    E = project_essential(n[:, None] * sol.E * n[None, :])
    return E, sol, A


def normalized_eight_point(corrs, params=NormalizationParams(), diagnostics=True):
    """Eight-point algorithm in the ``N(S, K)`` domain.

    Returns ``(E, pose, report)``; ``E = N^T E_hat N`` and the pose is voted on
    the original unit bearings. ``report`` describes the normalised-domain
    observation matrix, or is None when ``diagnostics`` is False.
    """
    if not isinstance(params, NormalizationParams):
        params = NormalizationParams(*params)
    corrs.require(8)
    E, sol, A = normalized_essential(corrs, params)
    pose = recover_pose(E, corrs)
    report = stability_report(A, sigma=sol.sigma) if diagnostics else None
    return E, pose, report


def perturbation_bound_check(A_clean, A_noisy, E_true, E_est):
    """Observed essential-matrix error next to ``||A_noisy - A_clean||_2 / sigma_8(A_clean)``."""
    A_clean = np.asarray(A_clean, dtype=float)
    A_noisy = np.asarray(A_noisy, dtype=float)
    if A_clean.shape != A_noisy.shape:
        raise DomainError("observation matrices differ in shape")
    s8 = sigma8(A_clean)
    if s8 < 1e-12:
        raise DegenerateConfigurationError("sigma_8 of the clean observation matrix vanishes")
    e_true = np.asarray(E_true, dtype=float).reshape(9)
    e_est = np.asarray(E_est, dtype=float).reshape(9)
    e_true = e_true / np.linalg.norm(e_true)
    e_est = e_est / np.linalg.norm(e_est)
    delta = min(np.linalg.norm(e_est - e_true), np.linalg.norm(e_est + e_true))
    bound = np.linalg.norm(A_noisy - A_clean, 2) / s8
    return float(delta), float(bound)


def vertex_angles(q1, q2, pose, t_scale=1.0):
    """Angle at each triangulated landmark subtended by the two camera centres (NaN where degenerate)."""
    lam1, lam2, ok = triangulate_depths(q1, q2, pose, t_scale=t_scale, return_mask=True)
    X = lam1[:, None] * q1
    c2 = -pose.R.T @ (t_scale * pose.t)
    a = -X
    b = c2 - X
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        # atan2 form stays accurate for tiny angles
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        alpha = np.arctan2(cross, np.sum(a * b, axis=1))
    ok = ok & (na > 0) & (nb > 0)
    return np.where(ok, alpha, np.nan)


def motion_parallax(corrs, pose, params=None):
    """Per-correspondence motion parallax in radians (NaN marks a failed triangulation).

    With ``params``, bearings are first deformed by ``N(S, K)`` and
    re-unitised, then the same construction is applied with the same pose.
    """
    q1, q2 = corrs.q1, corrs.q2
    if params is not None:
        N = build_n(params)
        q1 = unit(q1 @ N.T)
        q2 = unit(q2 @ N.T)
    return vertex_angles(q1, q2, pose)
