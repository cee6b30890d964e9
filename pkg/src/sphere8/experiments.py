"""Monte-Carlo sweeps, RANSAC studies and wall-clock timing on synthetic scenes.

Every sweep is paired: all methods see the same trial objects, and each
report carries a digest of the trial checksums so pairing can be checked.
Trials run on a bounded thread pool whose size is capped by the
``SPHERE8_THREADS`` environment variable; results are reduced by trial id,
so reports do not depend on the pool size.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import hashlib
import math
import os
import time

import numpy as np

from .errors import ConfigError, Sphere8Error
from .geometry import pose_errors
from .pipelines import estimator_sigma8, mean_parallax, parse_method, run_method
from .robust import RansacConfig, ransac_finish, ransac_search
from .synth import NoiseModel, SceneConfig, make_trial

DEFAULT_TRIALS = 500
DEFAULT_KAPPA = 500.0
THREADS_ENV = "SPHERE8_THREADS"
FAILED_ERROR = 1.0  # error recorded when a method raises on a trial


def worker_count(requested=None):
    """Pool size: ``requested`` (default 1) capped by ``SPHERE8_THREADS`` when set."""
    n = 1 if requested is None else int(requested)
    env = os.environ.get(THREADS_ENV)
    if env is not None and env.strip():
        try:
            cap = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
        if cap < 1:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        n = min(n, cap) if requested is not None else cap
    if n < 1:
        raise ConfigError("worker count must be positive")
    return n


def _map_ordered(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _elapsed(t0):
    dt = time.perf_counter() - t0
    return dt if dt > 0 else time.get_clock_info("perf_counter").resolution


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    method: str
    rot_err: float
    tran_err: float
    wall_time: float  # seconds, estimator + refiner only
    sigma8: float
    mean_parallax: float
    converged: bool
    checksum: str = ""

    def to_dict(self):
        return {
            "trial_id": self.trial_id, "method": self.method, "rot_err": self.rot_err,
            "tran_err": self.tran_err, "wall_time": self.wall_time, "sigma8": _finite_or_none(self.sigma8),
            "mean_parallax": _finite_or_none(self.mean_parallax), "converged": self.converged,
        }


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def run_trial(trial, trial_id, tags, diagnostics=True):
    """One record per method tag on a single trial. Failures are recorded, not raised."""
    records = []
    checksum = trial.checksum()
    for tag in tags:
        t0 = time.perf_counter()
        try:
            result = run_method(trial.corrs, tag)
        except Sphere8Error:
            records.append(TrialRecord(trial_id, tag.label, FAILED_ERROR, FAILED_ERROR, _elapsed(t0),
                                       math.nan, math.nan, False, checksum))
            continue
        wall = _elapsed(t0)
        rot, tran = pose_errors(trial.pose, result.pose)
        s8 = par = math.nan
        if diagnostics:
            s8 = estimator_sigma8(trial.corrs, result)
            par = mean_parallax(trial.corrs, result)
        records.append(TrialRecord(trial_id, tag.label, rot, tran, wall, s8, par, bool(result.converged), checksum))
    return records


@dataclass(frozen=True)
class CellStats:
    q25_rot: float
    q50_rot: float
    q75_rot: float
    q25_tran: float
    q50_tran: float
    q75_tran: float
    mean_time: float  # seconds
    n_trials: int
    n_failed: int

    @classmethod
    def from_records(cls, records):
        rot = np.array([r.rot_err for r in records])
        tran = np.array([r.tran_err for r in records])
        qr = np.quantile(rot, [0.25, 0.5, 0.75])
        qt = np.quantile(tran, [0.25, 0.5, 0.75])
        return cls(*map(float, qr), *map(float, qt),
                   mean_time=float(np.mean([r.wall_time for r in records])),
                   n_trials=len(records), n_failed=sum(not r.converged for r in records))

    def to_dict(self):
        return dict(self.__dict__)


def trials_digest(checksums):
    h = hashlib.sha256()
    for c in checksums:
        h.update(c.encode("ascii"))
    return h.hexdigest()


@dataclass
class SweepReport:
    axis: str
    values: list
    methods: list  # method labels, in request order
    cells: dict  # (axis index, label) -> CellStats
    digests: list  # per axis value, digest of the trial checksums
    paired: bool  # every method saw the same trials at every axis value
    seed: int = 0
    records: list = field(default=None, repr=False)

    def cell(self, value, method):
        return self.cells[(self.values.index(value), parse_method(method).label)]

    def medians(self, method, which="rot"):
        label = parse_method(method).label
        return [getattr(self.cells[(i, label)], f"q50_{which}") for i in range(len(self.values))]

    def to_dict(self):
        return {
            "axis": self.axis,
            "values": list(self.values),
            "seed": self.seed,
            "paired": self.paired,
            "trial_digests": list(self.digests),
            "cells": [
                {"axis_value": self.values[i], "method": label, **self.cells[(i, label)].to_dict()}
                for i in range(len(self.values)) for label in self.methods
            ],
        }


def _parse_tags(methods):
    if isinstance(methods, str):
        methods = [m for m in methods.split(",") if m]
    tags = [parse_method(m) for m in methods]
    if not tags:
        raise ConfigError("at least one method is required")
    labels = [t.label for t in tags]
    if len(set(labels)) != len(labels):
        raise ConfigError("duplicate method tags")
    return tags


def _sweep(axis, values, configs, tags, trials, seed, workers, diagnostics, keep_records):
    if trials < 1:
        raise ConfigError("need at least one trial per sweep point")
    workers = worker_count(workers)
    cells, digests, all_records = {}, [], []
    paired = True
    for i, (scene, noise) in enumerate(configs):
        def one(trial_id, scene=scene, noise=noise):
            return run_trial(make_trial(trial_id, scene, noise, seed), trial_id, tags, diagnostics)

        per_trial = _map_ordered(one, list(range(trials)), workers)
        per_trial.sort(key=lambda recs: recs[0].trial_id)
        flat = [r for recs in per_trial for r in recs]
        for tag in tags:
            mine = [r for r in flat if r.method == tag.label]
            cells[(i, tag.label)] = CellStats.from_records(mine)
            seen = trials_digest(r.checksum for r in mine)
            if tag is tags[0]:
                digests.append(seen)
            paired = paired and seen == digests[-1]
        if keep_records:
            all_records.extend(flat)
    return SweepReport(axis=axis, values=list(values), methods=[t.label for t in tags], cells=cells,
                       digests=digests, paired=paired, seed=seed,
                       records=all_records if keep_records else None)


def sweep_outliers(methods, trials_per_point=DEFAULT_TRIALS, ratios=(0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7),
                   n_points=200, kappa=DEFAULT_KAPPA, seed=0, workers=None, diagnostics=True, keep_records=False):
    """Median errors as the outlier ratio grows, at fixed point count and noise."""
    ratios = [float(r) for r in ratios]
    if any(not 0.0 <= r <= 0.7 for r in ratios):
        raise ConfigError("outlier ratios must lie in [0, 0.7]")
    scene = SceneConfig(n_points=n_points)
    configs = [(scene, NoiseModel(kappa=kappa, outlier_ratio=r)) for r in ratios]
    return _sweep("outlier_ratio", ratios, configs, _parse_tags(methods), trials_per_point, seed, workers,
                  diagnostics, keep_records)


def sweep_noise(methods, trials_per_point=DEFAULT_TRIALS, kappas=(100.0, 200.0, 500.0, 1000.0),
                n_points=200, outlier_ratio=0.0, seed=0, workers=None, diagnostics=True, keep_records=False):
    """Median errors across vMF concentrations, outlier-free by default."""
    kappas = [float(k) for k in kappas]
    if any(not k > 0 for k in kappas):
        raise ConfigError("kappa values must be positive")
    scene = SceneConfig(n_points=n_points)
    configs = [(scene, NoiseModel(kappa=k, outlier_ratio=outlier_ratio)) for k in kappas]
    return _sweep("kappa", kappas, configs, _parse_tags(methods), trials_per_point, seed, workers,
                  diagnostics, keep_records)


def sweep_npoints(methods, trials=DEFAULT_TRIALS, counts=(8, 20, 50, 100, 200), kappa=DEFAULT_KAPPA,
                  outlier_ratio=0.0, seed=0, workers=None, diagnostics=True, keep_records=False):
    """Median errors as the number of correspondences grows."""
    counts = [int(c) for c in counts]
    if any(not 8 <= c <= 1000 for c in counts):
        raise ConfigError("point counts must lie in [8, 1000]")
    configs = [(SceneConfig(n_points=c), NoiseModel(kappa=kappa, outlier_ratio=outlier_ratio)) for c in counts]
    return _sweep("n_points", counts, configs, _parse_tags(methods), trials, seed, workers,
                  diagnostics, keep_records)


# --- RANSAC study ---------------------------------------------------------

@dataclass(frozen=True)
class RansacStudyConfig:
    n_points: int = 400
    kappa: float = DEFAULT_KAPPA
    outlier_ratio: float = 0.5
    trials: int = 200
    confidence: float = 0.9
    max_iterations: int = 5000
    seed: int = 0


@dataclass
class ThresholdSummary:
    threshold: float
    iterations: np.ndarray  # hypotheses scored per trial
    recall: np.ndarray  # share of true inliers in the best hypothesis's consensus set
    precision: np.ndarray
    search_time: np.ndarray  # seconds per trial
    finals: dict  # final estimator -> CellStats
    mean_inlier_residual: dict  # final estimator -> mean over successful trials (NaN if none)
    success_rate: dict  # final estimator -> share of trials with >= 8 consensus points

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "median_iterations": float(np.median(self.iterations)),
            "mean_iterations": float(np.mean(self.iterations)),
            "median_recall": float(np.median(self.recall)),
            "mean_recall": float(np.mean(self.recall)),
            "mean_precision": float(np.mean(self.precision)),
            "mean_search_time": float(np.mean(self.search_time)),
            "finals": {k: {**v.to_dict(), "mean_inlier_residual": _finite_or_none(self.mean_inlier_residual[k]),
                           "success_rate": self.success_rate[k]} for k, v in self.finals.items()},
        }


def _ransac_trial(trial, thresholds, estimators, cfg):
    inliers = ~trial.outlier_labels
    out = []
    for thr in thresholds:
        rc = RansacConfig(threshold=thr, confidence=cfg.confidence, max_iterations=cfg.max_iterations,
                          seed=cfg.seed)
        t0 = time.perf_counter()
        search = ransac_search(trial.corrs, rc)
        search_time = _elapsed(t0)
        found = search.best_mask
        recall = float(np.count_nonzero(found & inliers) / max(np.count_nonzero(inliers), 1))
        precision = float(np.count_nonzero(found & inliers) / max(np.count_nonzero(found), 1))
        finals = {}
        for est in estimators:
            t1 = time.perf_counter()
            try:
                res = ransac_finish(trial.corrs, rc, search, est)
            except Sphere8Error:
                res = None
            wall = search_time + _elapsed(t1)
            if res is None or not res.success:
                finals[est] = (FAILED_ERROR, FAILED_ERROR, wall, math.nan, False)
            else:
                rot, tran = pose_errors(trial.pose, res.pose)
                finals[est] = (rot, tran, wall, res.mean_inlier_residual, True)
        out.append((search.iterations_run, recall, precision, search_time, finals))
    return out


def ransac_study(thresholds, estimators=("8pa", "wgsm-sk"), config=RansacStudyConfig(), workers=None):
    """RANSAC once per threshold and trial, then every final estimator on the consensus set.

    Returns a list of :class:`ThresholdSummary`, one per threshold.
    """
    thresholds = [float(t) for t in thresholds]
    estimators = [str(e) for e in estimators]
    for thr in thresholds:
        RansacConfig(threshold=thr, confidence=config.confidence, max_iterations=config.max_iterations)
    scene = SceneConfig(n_points=config.n_points)
    noise = NoiseModel(kappa=config.kappa, outlier_ratio=config.outlier_ratio)

    def one(trial_id):
        return _ransac_trial(make_trial(trial_id, scene, noise, config.seed), thresholds, estimators, config)

    per_trial = _map_ordered(one, list(range(config.trials)), worker_count(workers))
    summaries = []
    for k, thr in enumerate(thresholds):
        rows = [t[k] for t in per_trial]
        finals, resid, rate = {}, {}, {}
        for est in estimators:
            recs = [TrialRecord(i, est, r[4][est][0], r[4][est][1], r[4][est][2], math.nan, math.nan, r[4][est][4])
                    for i, r in enumerate(rows)]
            finals[est] = CellStats.from_records(recs)
            ok = [r[4][est][3] for r in rows if r[4][est][4]]
            resid[est] = float(np.mean(ok)) if ok else math.nan
            rate[est] = len(ok) / len(rows)
        summaries.append(ThresholdSummary(
            threshold=thr,
            iterations=np.array([r[0] for r in rows]),
            recall=np.array([r[1] for r in rows]),
            precision=np.array([r[2] for r in rows]),
            search_time=np.array([r[3] for r in rows]),
            finals=finals, mean_inlier_residual=resid, success_rate=rate))
    return summaries


# --- timing ---------------------------------------------------------------

@dataclass(frozen=True)
class TimingReport:
    mean: float
    median: float
    p95: float
    samples: np.ndarray = field(repr=False)
    failures: int = 0


def timing_harness(method, trials, warmup=3):
    """Per-call wall time of ``method`` over ``trials``, after ``warmup`` untimed calls.

    ``method`` is a method tag or a callable taking a CorrespondenceSet;
    ``trials`` holds GroundTruthTrial or CorrespondenceSet objects.
    Only the call itself is timed; calls that raise a Sphere8Error are timed too
    and counted in ``failures``.
    """
    if callable(method):
        fn = method
    else:
        tag = parse_method(method)
        fn = lambda corrs: run_method(corrs, tag)  # noqa: E731
    sets = [getattr(t, "corrs", t) for t in trials]
    if not sets:
        raise ConfigError("timing needs at least one trial")
    for i in range(int(warmup)):
        try:
            fn(sets[i % len(sets)])
        except Sphere8Error:
            pass
    samples = np.empty(len(sets))
    failures = 0
    for i, corrs in enumerate(sets):
        t0 = time.perf_counter()
        try:
            fn(corrs)
        except Sphere8Error:
            failures += 1
        samples[i] = time.perf_counter() - t0
    return TimingReport(mean=float(np.mean(samples)), median=float(np.median(samples)),
                        p95=float(np.quantile(samples, 0.95)), samples=samples, failures=failures)
