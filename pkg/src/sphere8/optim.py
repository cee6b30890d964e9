"""Non-linear refinement: the (S, K) search and the Gold Standard Method with robust weights."""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import DegenerateConfigurationError
from .geometry import RelativePose, skew
from .lie import se3_exp, se3_log
from .lm import LmConfig, LmResult, fd_jacobian, levenberg_marquardt
from .normalization import NormalizationParams, normalized_essential
from .solver8pt import DEGENERATE_SIGMA8, kron_rows, recover_pose

# The L1 objective is only piecewise smooth. Once a step gains less than
# 0.01 % LM merely creeps along kinks, so the (S, K) search stops there.
SK_CONFIG = LmConfig(fd_step=1e-6, relative_cost_tolerance=1e-4, cost_tolerance=1e-10)
GSM_CONFIG = LmConfig(fd_step=1e-7)

SIGMA_FLOOR = 1e-12
DEFAULT_NU = 5.0
MIN_TRANSLATION = 1e-8
MAX_LOG_SK = 20.0


def projected_residual(q1, q2, E, return_flags=False):
    """``|q2^T E q1| / (||q2|| ||E q1||)``: the sine of the angle between q2 and the epipolar plane.

    Rows where ``||E q1|| < 1e-15`` get residual 0; ``return_flags`` exposes them.
    """
    q1 = np.atleast_2d(np.asarray(q1, dtype=float))
    q2 = np.atleast_2d(np.asarray(q2, dtype=float))
    Eq1 = q1 @ np.asarray(E, dtype=float).T
    norm_eq1 = np.sqrt(np.einsum("ij,ij->i", Eq1, Eq1))
    den = np.sqrt(np.einsum("ij,ij->i", q2, q2)) * norm_eq1
    flags = norm_eq1 < 1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        eps = np.where(flags, 0.0, np.abs(np.einsum("ij,ij->i", q2, Eq1)) / den)
    eps = np.minimum(eps, 1.0)
    if return_flags:
        return eps, flags
    return eps


def residuals(corrs, E):
    return projected_residual(corrs.q1, corrs.q2, E)


# --- (S, K) optimisation ---------------------------------------------------

@dataclass
class OptSkResult:
    S: float
    K: float
    E: np.ndarray
    pose: RelativePose
    objective: float  # sum of projected residuals at (S, K)
    residuals: np.ndarray
    converged: bool
    lm: LmResult


def sk_essential(corrs, S, K):
    return normalized_essential(corrs, NormalizationParams(S, K))[0]


def sk_objective(corrs, S, K):
    """``sum_i eps_i(S, K)``, the quantity opt_sk minimises."""
    return float(np.sum(residuals(corrs, sk_essential(corrs, S, K))))


def _sk_model(corrs):
    """Fast ``E(p)`` and ``p = (log S, log K) -> [sqrt(eps_i)..., log S + log K]``.

    Same estimate as :func:`sk_essential`, but the normalised observation
    matrix is never formed: its Gram matrix is ``D G0 D`` with ``G0 = A^T A``
    of the unit bearings and ``D = diag(n kron n)``, and the null vector
    comes from a 9x9 symmetric eigensolve. LAPACK is called directly because
    the numpy wrappers cost more than the 3x3 and 9x9 factorisations.
    """
    q1, q2 = corrs.q1, corrs.q2
    A = kron_rows(q1, q2)
    G0 = A.T @ A
    diag0 = np.diag(G0).copy()
    # q2^T E q1 = A vec(E) and ||E q1||^2 = B vec(E^T E): two matvecs per evaluation
    B = kron_rows(q1, q1)
    q2_sq = np.einsum("ij,ij->i", q2, q2)
    m = len(q1)
    floor = DEGENERATE_SIGMA8**2
    rel = 64 * np.finfo(float).eps
    last = {}

    def essential(p):
        a, b = float(p[0]), float(p[1])
        if last.get("key") == (a, b):
            return last["E"]
        if abs(a) > MAX_LOG_SK or abs(b) > MAX_LOG_SK:
            raise DegenerateConfigurationError("normalisation parameters out of range")
        s, k = np.exp(a), np.exp(b)
        n = np.array([s, s, k])
        d = (n[:, None] * n).ravel()
        d2 = d * d
        G = d[:, None] * G0 * d
        w, V, _, _, info = lapack.dsyevr(G, range="I", il=1, iu=2)
        # sigma_8^2 cannot be resolved below the Gram matrix rounding level
        if info != 0 or w[1] <= floor + rel * (d2 @ diag0):
            raise DegenerateConfigurationError("sigma_8 vanishes in the normalised domain")
        # rank 2 in the normalised domain, then (1, 1, 0) after denormalising
        U, sv, Vt, info = lapack.dgesdd(V[:, 0].reshape(3, 3))
        M = (U[:, :2] * sv[:2]) @ Vt[:2]
        U, _, Vt, info2 = lapack.dgesdd(n[:, None] * M * n)
        if info or info2:
            raise DegenerateConfigurationError("SVD did not converge")
        E = U[:, :2] @ Vt[:2]
        last["key"], last["E"] = (a, b), E
        return E

    def fun(p):
        E = essential(p)
        out = np.empty(m + 1)
        num = A @ E.ravel()
        den2 = q2_sq * (B @ (E.T @ E).ravel())
        np.divide(num * num, np.maximum(den2, 1e-300), out=out[:m])
        # sqrt(eps) = (eps^2)^(1/4)
        np.sqrt(np.sqrt(np.minimum(out[:m], 1.0, out=out[:m]), out=out[:m]), out=out[:m])
        out[m] = p[0] + p[1]
        return out

    return essential, fun


def opt_sk(corrs, config=SK_CONFIG):
    """Search ``(S, K)`` minimising the summed projected residual of the denormalised solution.

    Residuals are always measured on the original unit bearings. The
    parameters are optimised as ``(log S, log K)`` from ``(1, 1)``; LM works
    on ``sqrt(eps_i)`` so its squared norm equals the L1 objective.

    ``E`` depends on ``K / S`` only, so one extra residual ``log S + log K``
    fixes the scale gauge. It vanishes at every minimiser of the data term
    and keeps finite-difference noise from drifting both parameters to
    infinity. The same invariance means one forward difference along
    ``log K`` gives the whole Jacobian.
    """
    corrs.require(8)
    essential, fun = _sk_model(corrs)
    along_k = np.array([0.0, 1.0])

    def jac(p, r):
        col = fd_jacobian(lambda z: fun(p + z[0] * along_k), np.zeros(1), r, config.fd_step)[:, 0]
        J = np.column_stack([-col, col])
        J[-1] = 1.0
        return J, 1

    lm = levenberg_marquardt(fun, np.zeros(2), config, jac=jac)
    S, K = (float(v) for v in np.exp(lm.x))
    E = essential(lm.x)
    eps = residuals(corrs, E)
    return OptSkResult(S=S, K=K, E=E, pose=recover_pose(E, corrs), objective=float(np.sum(eps)),
                       residuals=eps, converged=lm.converged, lm=lm)


# --- Gold Standard Method ---------------------------------------------------

def apply_twist(pose, xi):
    """Left-perturb ``pose`` by the SE(3) twist ``xi``; the translation keeps its length."""
    dR, dt = se3_exp(xi)
    R = dR @ pose.R
    t = dR @ pose.t + dt
    return R, t


def twist_between(pose_a, pose_b):
    return se3_log(pose_b.R @ pose_a.R.T, pose_b.t - pose_b.R @ pose_a.R.T @ pose_a.t)


def _twist_residuals(corrs, pose_init, xi):
    """Projected residuals and translation length of ``pose_init`` perturbed by ``xi``."""
    R, t = apply_twist(pose_init, xi)
    length = float(np.linalg.norm(t))
    if length < MIN_TRANSLATION:
        raise DegenerateConfigurationError("translation collapsed")
    return residuals(corrs, skew(t) @ R), length


def _gsm_residual_fn(corrs, pose_init, sqrt_w):
    """``xi -> [sqrt(w_i) eps_i..., ||t|| - 1]``.

    The residuals ignore the length of ``t``, so the last entry pins it to 1.
    Without it the flat direction lets ``t`` drift by orders of magnitude
    and lose its direction. It is zero at every renormalised optimum.
    """
    def fun(xi):
        eps, length = _twist_residuals(corrs, pose_init, xi)
        return np.append(eps if sqrt_w is None else sqrt_w * eps, length - 1.0)
    return fun


def _check_weights(w, n):
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    total = float(np.sum(w))
    if total <= 0:
        raise ValueError("at least one weight must be positive")
    # unit mean keeps the data term commensurate with the gauge residual;
    # rescaling all weights does not move the minimiser
    if np.all(w == w[0]):
        return np.ones(n)
    return w * (n / total)


def _weighted_gsm(corrs, pose_init, w, config):
    corrs.require(8)
    sqrt_w = None if w is None else np.sqrt(_check_weights(w, len(corrs)))
    lm = levenberg_marquardt(_gsm_residual_fn(corrs, pose_init, sqrt_w), np.zeros(6), config)
    R, t = apply_twist(pose_init, lm.x)
    return RelativePose(R, t), lm


def gsm(corrs, pose_init, config=GSM_CONFIG, return_info=False):
    """Refine a pose over 6 DoF by least squares on the projected residuals."""
    pose, lm = _weighted_gsm(corrs, pose_init, None, config)
    return (pose, lm) if return_info else pose


def weighted_gsm(corrs, pose_init, w, config=GSM_CONFIG, return_info=False):
    """GSM with constant per-correspondence weights ``w`` on the squared residuals."""
    pose, lm = _weighted_gsm(corrs, pose_init, w, config)
    return (pose, lm) if return_info else pose


# --- robust weights ----------------------------------------------------------

def _spread(res):
    res = np.asarray(res, dtype=float)
    if res.size < 2:
        raise ValueError("at least two residuals are needed to estimate a spread")
    return res, max(float(np.std(res, ddof=1)), SIGMA_FLOOR)


def gaussian_weights(res):
    """Normal pdf of each residual under the sample mean and standard deviation of ``res``."""
    res, sigma = _spread(res)
    mu = float(np.mean(res))
    w = np.exp(-0.5 * ((res - mu) / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))
    return np.maximum(w, np.finfo(float).tiny)


def tdist_weights(res, nu=DEFAULT_NU):
    """Student-t IRLS weights ``(nu + 1) / (nu + (eps / sigma)^2)``."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    res, sigma = _spread(res)
    return (nu + 1.0) / (nu + (res / sigma) ** 2)


WEIGHT_FUNCTIONS = {"gaussian": gaussian_weights, "tdist": tdist_weights}


def _weight_fn(name, nu):
    if callable(name):
        return name
    if name == "tdist":
        return lambda r: tdist_weights(r, nu)
    if name == "gaussian":
        return gaussian_weights
    raise ValueError(f"unknown weight function {name!r}; expected 'gaussian' or 'tdist'")


@dataclass
class IrlsResult:
    pose: RelativePose
    iterations: int
    converged: bool
    weights: np.ndarray
    lm: LmResult


def irls_gsm(corrs, pose_init, weight_fn="gaussian", config=GSM_CONFIG, nu=DEFAULT_NU,
             return_info=False):
    """Iteratively re-weighted GSM.

    Identical to :func:`weighted_gsm` except that the weights are recomputed
    from the current residuals at the start of every LM iteration.
    """
    corrs.require(8)
    fn = _weight_fn(weight_fn, nu)
    state = {}

    def refresh(xi):
        eps, _ = _twist_residuals(corrs, pose_init, xi)
        state["w"] = _check_weights(fn(eps), len(corrs))
        state["sqrt_w"] = np.sqrt(state["w"])

    def fun(xi):
        eps, length = _twist_residuals(corrs, pose_init, xi)
        return np.append(state["sqrt_w"] * eps, length - 1.0)

    refresh(np.zeros(6))
    lm = levenberg_marquardt(fun, np.zeros(6), config, refresh=refresh)
    R, t = apply_twist(pose_init, lm.x)
    pose = RelativePose(R, t)
    if return_info:
        return IrlsResult(pose=pose, iterations=lm.iterations, converged=lm.converged,
                          weights=state["w"], lm=lm)
    return pose
