"""Method tags and the estimator + refiner pipelines they name.

A tag reads ``estimator[+refiner[:weights]]``, e.g. ``8pa``, ``opt-sk``,
``8pa+gsm``, ``opt-sk+wgsm-sk`` or ``opt-sk+wgsm-sk:t``. Refiners alone are
accepted as shorthands and pick their natural estimator:
``gsm`` and ``wgsm-xi`` run after ``8pa``; ``wgsm-sk``, ``irls-gauss`` and
``irls-t`` after ``opt-sk``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .normalization import NormalizationParams, motion_parallax, sigma8
from .optim import gaussian_weights, gsm, irls_gsm, opt_sk, residuals, tdist_weights, weighted_gsm
from .solver8pt import (
    build_observation_matrix,
    combined_transform,
    eight_point,
    isotropic_transform,
    kron_rows,
    non_isotropic_transform,
    preconditioned_eight_point,
)

ESTIMATORS = ("8pa", "isotropic", "non-isotropic", "combined", "opt-sk")
REFINERS = ("none", "gsm", "wgsm-xi", "wgsm-sk", "irls-gauss", "irls-t")
WEIGHTS = ("gauss", "t")

SHORTHANDS = {
    "gsm": ("8pa", "gsm"),
    "wgsm-xi": ("8pa", "wgsm-xi"),
    "wgsm-sk": ("opt-sk", "wgsm-sk"),
    "irls-gauss": ("opt-sk", "irls-gauss"),
    "irls-t": ("opt-sk", "irls-t"),
}

_PRECONDITIONERS = {
    "isotropic": isotropic_transform,
    "non-isotropic": non_isotropic_transform,
    "combined": combined_transform,
}


@dataclass(frozen=True)
class MethodTag:
    estimator: str = "8pa"
    refiner: str = "none"
    weights: str = "gauss"  # distribution behind constant wgsm weights

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}; valid: {', '.join(ESTIMATORS)}")
        if self.refiner not in REFINERS:
            raise ConfigError(f"unknown refiner {self.refiner!r}; valid: {', '.join(REFINERS)}")
        if self.weights not in WEIGHTS:
            raise ConfigError(f"unknown weight distribution {self.weights!r}; valid: {', '.join(WEIGHTS)}")
        if self.refiner == "wgsm-sk" and self.estimator != "opt-sk":
            raise ConfigError("wgsm-sk needs the opt-sk estimator upstream")
        if self.weights != "gauss" and self.refiner not in ("wgsm-xi", "wgsm-sk"):
            raise ConfigError("a weight sub-tag only applies to wgsm-xi and wgsm-sk")

    @property
    def label(self):
        if self.refiner == "none":
            return self.estimator
        sub = "" if self.weights == "gauss" else f":{self.weights}"
        return f"{self.estimator}+{self.refiner}{sub}"

    def __str__(self):
        return self.label


def valid_tags():
    """Human-readable list of accepted spellings, for error messages."""
    return list(ESTIMATORS) + list(SHORTHANDS) + ["<estimator>+<refiner>[:gauss|:t]"]


def parse_method(text):
    if isinstance(text, MethodTag):
        return text
    text = str(text).strip()
    body, _, sub = text.partition(":")
    weights = sub or "gauss"
    if "+" in body:
        estimator, refiner = body.split("+", 1)
    elif body in SHORTHANDS:
        estimator, refiner = SHORTHANDS[body]
    else:
        estimator, refiner = body, "none"
    try:
        return MethodTag(estimator, refiner, weights)
    except ConfigError as exc:
        raise ConfigError(f"bad method tag {text!r}: {exc}. Valid tags: {', '.join(valid_tags())}") from None


@dataclass
class PipelineResult:
    tag: MethodTag
    E: np.ndarray  # estimator output (before refinement)
    pose: object  # final RelativePose
    converged: bool
    sk: tuple = None  # (S*, K*) when the estimator is opt-sk
    transforms: tuple = None  # (T1, T2) for the planar preconditioners
    weights: np.ndarray = None


def _constant_weights(res, dist):
    return gaussian_weights(res) if dist == "gauss" else tdist_weights(res)


def run_estimator(corrs, estimator):
    """``(E, pose, extras)`` for one estimator name."""
    if estimator == "8pa":
        E, pose = eight_point(corrs)
        return E, pose, {"converged": True}
    if estimator == "opt-sk":
        res = opt_sk(corrs)
        return res.E, res.pose, {"converged": res.converged, "sk": (res.S, res.K), "residuals": res.residuals}
    make = _PRECONDITIONERS[estimator]
    T1, T2 = make(corrs.q1), make(corrs.q2)
    E, pose = preconditioned_eight_point(corrs, T1, T2)
    return E, pose, {"converged": True, "transforms": (T1, T2)}


def run_method(corrs, tag):
    """Run the estimator then the refiner named by ``tag`` on ``corrs``."""
    tag = parse_method(tag)
    E, pose, extras = run_estimator(corrs.require(8), tag.estimator)
    converged = extras["converged"]
    weights = None
    if tag.refiner == "gsm":
        pose, lm = gsm(corrs, pose, return_info=True)
        converged = converged and lm.converged
    elif tag.refiner in ("wgsm-xi", "wgsm-sk"):
        # wgsm-sk reuses eps(S*, K*) from opt-sk; wgsm-xi scores the estimator's own E
        res = extras["residuals"] if tag.refiner == "wgsm-sk" else residuals(corrs, E)
        weights = _constant_weights(res, tag.weights)
        pose, lm = weighted_gsm(corrs, pose, weights, return_info=True)
        converged = converged and lm.converged
    elif tag.refiner in ("irls-gauss", "irls-t"):
        info = irls_gsm(corrs, pose, "gaussian" if tag.refiner == "irls-gauss" else "tdist", return_info=True)
        pose, weights = info.pose, info.weights
        converged = converged and info.converged
    return PipelineResult(tag=tag, E=E, pose=pose, converged=converged, sk=extras.get("sk"),
                          transforms=extras.get("transforms"), weights=weights)


def estimator_sigma8(corrs, result):
    """sigma_8 of the observation matrix in the domain the estimator solved in."""
    if result.sk is not None:
        n = np.array([result.sk[0], result.sk[0], result.sk[1]])
        return sigma8(kron_rows(corrs.q1 * n, corrs.q2 * n))
    if result.transforms is not None:
        T1, T2 = result.transforms
        return sigma8(kron_rows(corrs.q1 @ T1.T, corrs.q2 @ T2.T))
    return sigma8(build_observation_matrix(corrs))


def mean_parallax(corrs, result):
    """Mean motion parallax (radians) under the final pose, in the estimator's normalised domain."""
    params = NormalizationParams(*result.sk) if result.sk is not None else None
    alpha = motion_parallax(corrs, result.pose, params)
    alpha = alpha[np.isfinite(alpha)]
    return float(np.mean(alpha)) if alpha.size else float("nan")
