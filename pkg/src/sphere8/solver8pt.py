"""Linear eight-point solver on bearing vectors and its planar-preconditioned baselines."""
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousPoseError, DegenerateConfigurationError
from .geometry import (
    RelativePose,
    project_essential,
    project_rank2,
    triangulate_depths,
)

# sigma_8 below this means the null space of A is not one-dimensional
DEGENERATE_SIGMA8 = 1e-12
# minimum cheirality support (fraction) before a tie is treated as ambiguous
MIN_SUPPORT = 0.6

_W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class DltSolution:
    E: np.ndarray
    sigma: np.ndarray  # all 9 singular values of A, descending
    vt: np.ndarray = None  # right singular vectors (rows), kept for diagnostics

    @property
    def sigma8(self):
        return float(self.sigma[7])


def build_observation_matrix(corrs):
    """Stack ``kron(q2_i, q1_i)`` so that ``A @ vec_row(E) = q2^T E q1`` row by row."""
    corrs.require(8)
    return kron_rows(corrs.q1, corrs.q2)


def kron_rows(q1, q2):
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    return np.einsum("ni,nj->nij", q2, q1).reshape(-1, 9)


def singular_values(A):
    """All nine singular values of ``A`` (zero-padded when ``n < 9``) and ``V^T``."""
    try:
        _, s, vt = np.linalg.svd(A, full_matrices=A.shape[0] < 9)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConfigurationError(f"SVD of the observation matrix failed: {exc}") from None
    if len(s) < 9:
        s = np.concatenate([s, np.zeros(9 - len(s))])
    return s, vt


def solve_dlt(A, canonical=True):
    """Right singular vector of the smallest singular value, reshaped and rank-2 projected.

    With ``canonical`` the singular values become (1, 1, 0). Pass False in a
    preconditioned domain, where the exact solution is rank 2 but its two
    non-zero singular values differ; only the smallest one is zeroed then
    (scaled to unit Frobenius norm).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] != 9 or A.shape[0] < 8:
        raise DegenerateConfigurationError(f"observation matrix must be n x 9 with n >= 8, got {A.shape}")
    s, vt = singular_values(A)
    if not np.isfinite(s).all() or s[7] < DEGENERATE_SIGMA8:
        raise DegenerateConfigurationError(f"sigma_8 = {s[7]:.3g}: the essential matrix is not determined")
    M = vt[8].reshape(3, 3)
    if canonical:
        E = project_essential(M)
    else:
        E = project_rank2(M)
        E /= np.linalg.norm(E)
    return DltSolution(E=E, sigma=s, vt=vt)


def pose_candidates(E):
    """The four ``(R, t)`` decompositions of ``E``."""
    U, _, Vt = np.linalg.svd(E)
    if np.linalg.det(U) < 0:
        U[:, 2] *= -1.0
    if np.linalg.det(Vt) < 0:
        Vt[2, :] *= -1.0
    t = U[:, 2]
    R1 = U @ _W @ Vt
    R2 = U @ _W.T @ Vt
    return [(R1, t), (R1, -t), (R2, t), (R2, -t)]


def cheirality_support(q1, q2, R, t):
    """Number of rays triangulating in front of both cameras, plus summed ray gap."""
    pose = RelativePose(R, t)
    lam1, lam2, ok = triangulate_depths(q1, q2, pose, return_mask=True)
    front = ok & (lam1 > 0) & (lam2 > 0)
    gap = np.linalg.norm(lam1[ok, None] * (q1[ok] @ R.T) + t - lam2[ok, None] * q2[ok], axis=1)
    return int(np.count_nonzero(front)), float(np.sum(gap))


def recover_pose(E, corrs):
    """Select the cheirality-consistent pose among the four decompositions of ``E``.

    Candidates are ranked by the number of correspondences with positive
    depth in both views. Ties go to the smaller summed ray gap, then to
    candidate order. A tie at the top with less than 60% support raises
    AmbiguousPoseError.
    """
    q1, q2 = corrs.q1, corrs.q2
    if len(q1) < 1:
        raise DegenerateConfigurationError("no correspondences to vote on")
    scored = []
    for k, (R, t) in enumerate(pose_candidates(E)):
        count, gap = cheirality_support(q1, q2, R, t)
        scored.append((-count, gap, k, R, t))
    scored.sort(key=lambda s: (s[0], s[1], s[2]))
    best, runner = scored[0], scored[1]
    if best[0] == runner[0] and -best[0] < MIN_SUPPORT * len(q1):
        raise AmbiguousPoseError(
            f"candidates tie with {-best[0]} of {len(q1)} points in front of both cameras")
    return RelativePose(best[3], best[4])


def eight_point(corrs):
    """Plain eight-point algorithm; returns ``(E, pose)``."""
    sol = solve_dlt(build_observation_matrix(corrs))
    return sol.E, recover_pose(sol.E, corrs)


# --- planar preconditioning baselines ---------------------------------------

def _planar(q):
    return q[:, :2]


def isotropic_transform(q):
    """Translate the (x, y) centroid to 0 and scale its RMS radius to sqrt(2)."""
    xy = _planar(q)
    c = xy.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((xy - c) ** 2, axis=1)))
    if not rms > 1e-12:
        raise DegenerateConfigurationError("all points coincide; isotropic scale undefined")
    s = np.sqrt(2.0) / rms
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def non_isotropic_transform(q):
    """Per-axis centring and scaling to unit variance of x and y."""
    xy = _planar(q)
    c = xy.mean(axis=0)
    sd = xy.std(axis=0)
    if not np.all(sd > 1e-12):
        raise DegenerateConfigurationError("zero spread along an axis; non-isotropic scale undefined")
    sx, sy = 1.0 / sd
    return np.array([[sx, 0.0, -sx * c[0]], [0.0, sy, -sy * c[1]], [0.0, 0.0, 1.0]])


def combined_transform(q):
    T_iso = isotropic_transform(q)
    # planar image of the points under the isotropic map, z kept as the homogeneous 1
    xy = _planar(q) @ T_iso[:2, :2].T + T_iso[:2, 2]
    T_non = non_isotropic_transform(np.column_stack([xy, np.ones(len(xy))]))
    return T_non @ T_iso


def preconditioned_eight_point(corrs, T1, T2):
    """DLT on ``T q`` for each frame, then ``E = T2^T E_hat T1``."""
    corrs.require(8)
    A = kron_rows(corrs.q1 @ T1.T, corrs.q2 @ T2.T)
    sol = solve_dlt(A, canonical=False)
    E = project_essential(T2.T @ sol.E @ T1)
    return E, recover_pose(E, corrs)


def _hartley(corrs, make):
    corrs.require(8)
    return preconditioned_eight_point(corrs, make(corrs.q1), make(corrs.q2))


def hartley_isotropic(corrs):
    return _hartley(corrs, isotropic_transform)


def hartley_non_isotropic(corrs):
    return _hartley(corrs, non_isotropic_transform)


def hartley_combined(corrs):
    return _hartley(corrs, combined_transform)
