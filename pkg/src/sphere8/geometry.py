"""Spherical camera model, pose types and two-view error metrics.

Conventions
-----------
* Bearing vectors are stored row-wise, shape ``(n, 3)``.
* A relative pose ``(R, t)`` maps frame-1 coordinates into frame 2:
  ``X2 = R @ X1 + t``. The essential matrix is ``E = [t]x R`` so that
  ``q2^T E q1 = 0`` for every exact correspondence.
* ``vec_row(E)`` is the row-major flattening ``E.reshape(9)``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError, DomainError, SizeError

# Condition number above which two rays are treated as parallel.
TRIANGULATION_MAX_COND = 1e8


@dataclass(frozen=True)
class ImageSize:
    width: int
    height: int

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise DomainError("image size must be integral")
        if self.width < 2 or self.height < 2:
            raise DomainError(f"image size must be at least 2x2, got {self.width}x{self.height}")


@dataclass(frozen=True)
class RelativePose:
    """Rotation and unit translation direction from frame 1 to frame 2."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.array(self.R, dtype=float).reshape(3, 3)
        t = np.array(self.t, dtype=float).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9) or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise DomainError("R is not a proper rotation")
        nt = np.linalg.norm(t)
        if nt < 1e-12:
            raise DomainError("translation must be non-zero")
        R.flags.writeable = False
        t = t / nt
        t.flags.writeable = False
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @property
    def E(self):
        return essential_from_pose(self)


@dataclass(frozen=True)
class CorrespondenceSet:
    """Paired bearing vectors ``q1[i] <-> q2[i]``."""

    q1: np.ndarray
    q2: np.ndarray

    def __post_init__(self):
        q1 = np.array(self.q1, dtype=float).reshape(-1, 3)
        q2 = np.array(self.q2, dtype=float).reshape(-1, 3)
        if q1.shape != q2.shape:
            raise SizeError(f"q1 has {len(q1)} rows but q2 has {len(q2)}")
        q1.flags.writeable = False
        q2.flags.writeable = False
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "q2", q2)

    def __len__(self):
        return len(self.q1)

    def subset(self, index):
        return CorrespondenceSet(self.q1[index], self.q2[index])

    def require(self, n=8):
        if len(self) < n:
            raise SizeError(f"at least {n} correspondences are required, got {len(self)}")
        return self


def unit(v, axis=-1):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=axis, keepdims=True)


# --- spherical projection -------------------------------------------------

def pixel_to_spherical(uv, size):
    uv = np.asarray(uv, dtype=float)
    theta = 2.0 * np.pi * uv[..., 0] / size.width - np.pi
    phi = -np.pi * uv[..., 1] / size.height + np.pi / 2.0
    return theta, phi


def spherical_to_bearing(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(phi) * np.sin(theta), -np.sin(phi), np.cos(phi) * np.cos(theta)], axis=-1)


def pixel_to_bearing(uv, size):
    """Map equirectangular pixel(s) ``(u, v)`` to unit bearing vector(s).

    Accepts a single pixel of shape ``(2,)`` or an array ``(..., 2)``.
    Raises DomainError for pixels outside ``[0, W) x [0, H)``.
    """
    uv = np.asarray(uv, dtype=float)
    u, v = uv[..., 0], uv[..., 1]
    if np.any((u < 0) | (u >= size.width) | (v < 0) | (v >= size.height)) or not np.all(np.isfinite(uv)):
        raise DomainError(f"pixel outside image bounds {size.width}x{size.height}")
    return spherical_to_bearing(*pixel_to_spherical(uv, size))


def bearing_to_pixel(q, size):
    """Inverse of :func:`pixel_to_bearing`.

    Longitude is undefined at the poles; there ``u = width / 2``. The
    meridian ``theta = pi`` wraps to ``u = 0``.
    """
    q = unit(q)
    x, y, z = q[..., 0], q[..., 1], q[..., 2]
    phi = np.arcsin(np.clip(-y, -1.0, 1.0))
    at_pole = np.hypot(x, z) < 1e-12
    theta = np.where(at_pole, 0.0, np.arctan2(x, z))
    u = (theta + np.pi) * size.width / (2.0 * np.pi)
    u = np.where(u >= size.width, u - size.width, u)
    v = (np.pi / 2.0 - phi) * size.height / np.pi
    return np.stack([u, v], axis=-1)


# --- SO(3) / essential matrix --------------------------------------------

def skew(t):
    t = np.asarray(t, dtype=float).reshape(3)
    return np.array([[0.0, -t[2], t[1]], [t[2], 0.0, -t[0]], [-t[1], t[0], 0.0]])


def project_essential(E):
    """Closest canonical essential matrix: singular values forced to (1, 1, 0)."""
    U, _, Vt = np.linalg.svd(np.asarray(E, dtype=float))
    return U[:, :2] @ Vt[:2, :]


def project_rank2(M):
    """Closest rank-2 matrix: smallest singular value zeroed, the others kept."""
    U, s, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    return (U[:, :2] * s[:2]) @ Vt[:2, :]


def essential_from_pose(pose):
    return project_essential(skew(pose.t) @ pose.R)


def vec_row(M):
    return np.asarray(M, dtype=float).reshape(9)


def algebraic_error(q1, q2, E):
    """Signed epipolar residual ``q2^T E q1`` (vectorised over rows)."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    return np.einsum("...i,ij,...j->...", q2, E, q1)


def triangulate_depths(q1, q2, pose, t_scale=1.0, return_mask=False):
    """Depths ``(lam1, lam2)`` solving ``lam2 q2 = lam1 R q1 + t`` in least squares.

    ``t`` is taken as ``t_scale * pose.t`` so depths come out in the same
    units. Vectorised over rows. Rays whose 3x2 system has condition number
    above ``TRIANGULATION_MAX_COND`` are flagged; for scalar input that
    raises DegenerateConfigurationError, for arrays the depths are NaN and
    the optional mask marks them.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    scalar = q1.ndim == 1
    q1 = np.atleast_2d(q1)
    q2 = np.atleast_2d(q2)
    t = t_scale * pose.t
    a = q1 @ pose.R.T
    na = np.sum(a * a, axis=1)
    nb = np.sum(q2 * q2, axis=1)
    ab = np.sum(a * q2, axis=1)
    at = a @ t
    bt = q2 @ t
    # normal equations of [a, -b] [lam1, lam2]^T = -t
    det = na * nb - ab * ab
    # eigenvalues of the 2x2 Gram matrix give cond^2 of the 3x2 system
    tr = na + nb
    disc = np.sqrt(np.maximum(tr * tr / 4.0 - det, 0.0))
    lo = tr / 2.0 - disc
    hi = tr / 2.0 + disc
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (lo > 0) & (hi / np.where(lo > 0, lo, 1.0) < TRIANGULATION_MAX_COND**2)
        lam1 = np.where(ok, (-nb * at + ab * bt) / det, np.nan)
        lam2 = np.where(ok, (na * bt - ab * at) / det, np.nan)
    if scalar:
        if not ok[0]:
            raise DegenerateConfigurationError("rays are parallel; depth is undetermined")
        return float(lam1[0]), float(lam2[0])
    if return_mask:
        return lam1, lam2, ok
    return lam1, lam2


# --- error metrics --------------------------------------------------------

def rotation_error(R_true, R_est):
    """Normalised geodesic rotation distance in ``[0, 1]``.

    ``arccos((tr(R^T R~) - 1) / 2) / pi``, evaluated as ``atan2(sin, cos)``
    so that tiny angles keep full precision instead of the ``sqrt(eps)``
    floor of arccos near 1.
    """
    M = np.asarray(R_true, dtype=float).T @ np.asarray(R_est, dtype=float)
    c = np.clip((np.trace(M) - 1.0) / 2.0, -1.0, 1.0)
    s = 0.5 * np.linalg.norm([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])
    return float(np.arctan2(s, c) / np.pi)


def translation_error(t_true, t_est):
    """Normalised angle between translation directions in ``[0, 1]``, via atan2 like :func:`rotation_error`."""
    a = unit(t_true)
    b = unit(t_est)
    c = np.clip(float(np.dot(a, b)), -1.0, 1.0)
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), c) / np.pi)


def pose_errors(pose_true, pose_est):
    return rotation_error(pose_true.R, pose_est.R), translation_error(pose_true.t, pose_est.t)
