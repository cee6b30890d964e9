"""RANSAC over minimal eight-point samples, gated by the projected residual."""
from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigError, DegenerateConfigurationError
from .geometry import essential_from_pose
from .optim import residuals
from .pipelines import parse_method, run_method
from .rng import make_rng
from .solver8pt import kron_rows, solve_dlt

FINAL_ESTIMATORS = ("8pa", "opt-sk", "gsm", "wgsm-xi", "wgsm-sk")


@dataclass(frozen=True)
class RansacConfig:
    threshold: float
    confidence: float = 0.9
    max_iterations: int = 5000
    min_iterations: int = 1
    sample_size: int = 8
    seed: int = 0
    adaptive: bool = True  # False runs exactly max_iterations hypotheses

    def __post_init__(self):
        if not (self.threshold > 0 and math.isfinite(self.threshold)):
            raise ConfigError("threshold must be positive")
        if not 0 < self.confidence < 1:
            raise ConfigError("confidence must lie in (0, 1)")
        if self.sample_size != 8:
            raise ConfigError("the minimal sample is 8 correspondences")
        if not self.max_iterations >= self.min_iterations >= 1:
            raise ConfigError("need max_iterations >= min_iterations >= 1")


@dataclass
class RansacResult:
    E: np.ndarray
    pose: object
    inlier_mask: np.ndarray
    iterations_run: int  # hypotheses scored (degenerate samples excluded)
    mean_inlier_residual: float
    success: bool = True
    samples_drawn: int = 0  # including degenerate samples
    best_hypothesis_inliers: int = 0
    converged: bool = True


def adaptive_iterations(inlier_ratio, confidence, sample_size=8, min_iterations=1, max_iterations=None):
    """Hypotheses needed to draw one all-inlier sample with probability ``confidence``.

    ``ceil(log(1 - confidence) / log(1 - inlier_ratio**sample_size))``,
    clamped to ``[min_iterations, max_iterations]``. A count too large to
    represent clamps to ``max_iterations``, or raises OverflowError when no
    maximum is given.
    """
    if not 0 < inlier_ratio <= 1:
        raise ValueError("inlier_ratio must lie in (0, 1]")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    upper = math.inf if max_iterations is None else max_iterations
    p_good = inlier_ratio**sample_size
    if p_good >= 1.0:
        count = 0
    else:
        denom = math.log1p(-p_good)
        count = math.log(1.0 - confidence) / denom if denom < 0 else math.inf
        if count > upper or not math.isfinite(count):
            if max_iterations is None:
                raise OverflowError("iteration count is not representable")
            return int(max_iterations)
        count = math.ceil(count)
    return int(min(max(count, min_iterations), upper))


def _score(eps, threshold):
    mask = eps <= threshold
    count = int(np.count_nonzero(mask))
    mean = float(np.mean(eps[mask])) if count else math.inf
    return count, mean, mask


@dataclass
class RansacSearch:
    """Outcome of the hypothesis loop, before any re-estimation."""

    best_inliers: int
    best_mean_residual: float
    best_index: int
    best_mask: np.ndarray
    iterations_run: int
    samples_drawn: int


def ransac_search(corrs, cfg):
    """Score minimal-sample hypotheses until the adaptive budget or ``max_iterations`` runs out.

    Hypothesis ``i`` draws its 8 distinct indices from its own stream
    ``make_rng(cfg.seed, i, "ransac")``. The best hypothesis has the most
    inliers, then the lowest mean inlier residual, then the lowest index.
    Degenerate samples count toward ``max_iterations`` only.
    """
    corrs.require(8)
    n = len(corrs)
    q1, q2 = corrs.q1, corrs.q2
    best = (0, math.inf, -1, np.zeros(n, dtype=bool))
    budget = cfg.max_iterations
    scored = 0
    drawn = 0
    while drawn < cfg.max_iterations and scored < budget:
        index = drawn
        drawn += 1
        sample = make_rng(cfg.seed, index, "ransac").choice(n, size=cfg.sample_size, replace=False)
        try:
            sol = solve_dlt(kron_rows(q1[sample], q2[sample]))
        except DegenerateConfigurationError:
            continue
        scored += 1
        count, mean, mask = _score(residuals(corrs, sol.E), cfg.threshold)
        if best[2] < 0 or count > best[0] or (count == best[0] and mean < best[1]):
            best = (count, mean, index, mask)
            if cfg.adaptive and count:
                budget = adaptive_iterations(count / n, cfg.confidence, cfg.sample_size,
                                             cfg.min_iterations, cfg.max_iterations)
    return RansacSearch(best_inliers=best[0], best_mean_residual=best[1], best_index=best[2],
                        best_mask=best[3], iterations_run=scored, samples_drawn=drawn)


def ransac_finish(corrs, cfg, search, final_estimator="8pa"):
    """Re-estimate on the best hypothesis's inliers and recompute the mask under the new E."""
    final = str(final_estimator)
    if final not in FINAL_ESTIMATORS:
        raise ConfigError(f"final estimator must be one of {', '.join(FINAL_ESTIMATORS)}, got {final!r}")
    n = len(corrs)
    common = dict(iterations_run=search.iterations_run, samples_drawn=search.samples_drawn,
                  best_hypothesis_inliers=search.best_inliers)
    if search.best_inliers < 8:
        return RansacResult(E=None, pose=None, inlier_mask=np.zeros(n, dtype=bool), mean_inlier_residual=math.nan,
                            success=False, converged=False, **common)
    result = run_method(corrs.subset(search.best_mask), parse_method(final))
    E = essential_from_pose(result.pose)
    count, mean, mask = _score(residuals(corrs, E), cfg.threshold)
    return RansacResult(E=E, pose=result.pose, inlier_mask=mask, mean_inlier_residual=mean if count else math.nan,
                        success=True, converged=result.converged, **common)


def ransac_essential(corrs, cfg, final_estimator="8pa"):
    """RANSAC on ``corrs``: :func:`ransac_search` followed by :func:`ransac_finish`.

    Fewer than 8 inliers for the best hypothesis yields ``success=False``
    with no pose.
    """
    if str(final_estimator) not in FINAL_ESTIMATORS:
        raise ConfigError(f"final estimator must be one of {', '.join(FINAL_ESTIMATORS)}, got {final_estimator!r}")
    return ransac_finish(corrs, cfg, ransac_search(corrs, cfg), final_estimator)
