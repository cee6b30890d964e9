"""Synthetic two-view scenes: random poses, landmarks, vMF bearing noise and outliers."""
from dataclasses import dataclass
import hashlib

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ConfigError
from .geometry import CorrespondenceSet, RelativePose, unit
from .rng import make_rng

EULER_RANGE = np.pi / 4
EULER_SEQ = "xyz"  # extrinsic x, then y, then z
MIN_RAW_TRANSLATION = 0.1


@dataclass(frozen=True)
class SceneConfig:
    n_points: int = 200
    depth_min: float = 1.0
    depth_max: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 8:
            raise ConfigError("a scene needs at least 8 points")
        if not 0 < self.depth_min < self.depth_max:
            raise ConfigError("need 0 < depth_min < depth_max")


@dataclass(frozen=True)
class NoiseModel:
    kappa: float = None  # None disables bearing noise
    outlier_ratio: float = 0.0

    def __post_init__(self):
        if self.kappa is not None and not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if not 0.0 <= self.outlier_ratio < 1.0:
            raise ConfigError("outlier_ratio must lie in [0, 1)")


@dataclass(frozen=True)
class GroundTruthTrial:
    pose: RelativePose
    baseline: float  # length of the scene-scale translation
    landmarks: np.ndarray  # frame-1 coordinates, (n, 3)
    corrs: CorrespondenceSet
    outlier_labels: np.ndarray

    def checksum(self):
        h = hashlib.sha256()
        for a in (self.corrs.q1, self.corrs.q2, self.pose.R, self.pose.t):
            h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return h.hexdigest()


def sample_pose(rng):
    """Random relative pose and its baseline length.

    Translation uniform in ``[-1, 1]^3`` (redrawn below length 0.1), rotation
    from independent Euler angles uniform in ``[-pi/4, pi/4]``. Returns
    ``(pose, baseline)`` where ``pose.t`` is unit length.
    """
    while True:
        t = rng.uniform(-1.0, 1.0, 3)
        length = float(np.linalg.norm(t))
        if length >= MIN_RAW_TRANSLATION:
            break
    angles = rng.uniform(-EULER_RANGE, EULER_RANGE, 3)
    R = Rotation.from_euler(EULER_SEQ, angles).as_matrix()
    return RelativePose(R, t / length), length


def random_unit_vectors(rng, n):
    return unit(rng.standard_normal((n, 3)))


def _orthonormal_complement(mu):
    # any axis not parallel to mu seeds the basis
    seed = np.where(np.abs(mu[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    b1 = unit(np.cross(mu, seed))
    b2 = np.cross(mu, b1)
    return b1, b2


def sample_vmf_cosine(kappa, u):
    """Inverse CDF of ``w = cos(angle)`` for the vMF on S^2, for uniform ``u`` in (0, 1].

    Returns ``(w, 1 - w)``; the second term is computed without cancellation.
    """
    # 1 - w = -log(u + (1 - u) exp(-2 kappa)) / kappa, rearranged for log1p/expm1
    one_minus_w = -np.log1p((1.0 - u) * np.expm1(-2.0 * kappa)) / kappa
    one_minus_w = np.clip(one_minus_w, 0.0, 2.0)
    return 1.0 - one_minus_w, one_minus_w


def vmf_perturb(q, kappa, rng):
    """Draw one vMF sample around each row of ``q`` (shape ``(3,)`` or ``(n, 3)``)."""
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    mu = unit(np.atleast_2d(q))
    n = len(mu)
    u = 1.0 - rng.random(n)
    w, omw = sample_vmf_cosine(kappa, u)
    s = np.sqrt(omw * (1.0 + w))
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    b1, b2 = _orthonormal_complement(mu)
    out = unit(w[:, None] * mu + s[:, None] * (np.cos(phi)[:, None] * b1 + np.sin(phi)[:, None] * b2))
    return out[0] if single else out


def vmf_expected_angle(kappa):
    """High-concentration approximation ``sqrt(pi / (2 kappa))`` of the mean angular deviation (rad)."""
    if not kappa >= 1:
        raise ValueError("approximation requires kappa >= 1")
    return float(np.sqrt(np.pi / (2.0 * kappa)))


def angular_deviation(a, b):
    a = unit(a)
    b = unit(b)
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.sum(a * b, axis=-1))


def sample_landmarks(scene, pose, baseline, rng):
    """Uniform-direction, uniform-depth landmarks in frame 1, redrawn when closer than ``depth_min`` to camera 2."""
    n = scene.n_points
    t = baseline * pose.t
    kept = []
    have = 0
    drawn = 0
    budget = 100 * n
    while have < n:
        if drawn >= budget:
            raise ConfigError("depth range is incompatible with the baseline: landmark budget exhausted")
        m = n - have
        X = random_unit_vectors(rng, m) * rng.uniform(scene.depth_min, scene.depth_max, (m, 1))
        drawn += m
        d2 = np.linalg.norm(X @ pose.R.T + t, axis=1)
        good = X[d2 >= scene.depth_min]
        kept.append(good)
        have += len(good)
    return np.concatenate(kept)[:n]


def generate_trial(scene, pose, noise, rng, baseline=1.0):
    """Project landmarks into both spheres, add vMF noise to both frames, then swap in outliers."""
    X = sample_landmarks(scene, pose, baseline, rng)
    X2 = X @ pose.R.T + baseline * pose.t
    q1 = unit(X)
    q2 = unit(X2)
    if noise.kappa is not None:
        q1 = vmf_perturb(q1, noise.kappa, rng)
        q2 = vmf_perturb(q2, noise.kappa, rng)
    n = len(q1)
    labels = np.zeros(n, dtype=bool)
    m = int(np.floor(noise.outlier_ratio * n + 1e-9))
    if m:
        idx = rng.choice(n, size=m, replace=False)
        q2[idx] = random_unit_vectors(rng, m)
        labels[idx] = True
    return GroundTruthTrial(pose=pose, baseline=baseline, landmarks=X,
                            corrs=CorrespondenceSet(q1, q2), outlier_labels=labels)


def make_trial(trial_id, scene=SceneConfig(), noise=NoiseModel(), seed=None):
    """Fully seeded trial: pose and scene draws use independent named streams.

    ``seed`` defaults to ``scene.seed``.
    """
    seed = scene.seed if seed is None else seed
    pose, baseline = sample_pose(make_rng(seed, trial_id, "pose"))
    return generate_trial(scene, pose, noise, make_rng(seed, trial_id, "scene"), baseline=baseline)
