"""Exponential / logarithm maps for SO(3) and SE(3).

A twist ``xi = (omega, nu)`` stacks the rotation tangent first.
"""
import numpy as np

from .geometry import skew


def so3_exp(omega):
    omega = np.asarray(omega, dtype=float).reshape(3)
    theta = np.linalg.norm(omega)
    K = skew(omega)
    if theta < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    return np.eye(3) + np.sin(theta) / theta * K + (1.0 - np.cos(theta)) / theta**2 * K @ K


def so3_log(R):
    R = np.asarray(R, dtype=float)
    c = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(c)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-8:
        return 0.5 * w
    if np.pi - theta < 1e-6:
        # near pi the antisymmetric part vanishes; read the axis off R + I
        M = (R + np.eye(3)) / 2.0
        k = int(np.argmax(np.diag(M)))
        axis = M[:, k] / np.sqrt(M[k, k])
        axis /= np.linalg.norm(axis)
        if np.dot(axis, w) < 0:
            axis = -axis
        return theta * axis
    return theta / (2.0 * np.sin(theta)) * w


def _left_jacobian(omega):
    theta = np.linalg.norm(omega)
    K = skew(omega)
    if theta < 1e-8:
        return np.eye(3) + 0.5 * K + K @ K / 6.0
    return (np.eye(3) + (1.0 - np.cos(theta)) / theta**2 * K
            + (theta - np.sin(theta)) / theta**3 * K @ K)


def se3_exp(xi):
    """Return ``(R, t)`` for the twist ``xi``."""
    xi = np.asarray(xi, dtype=float).reshape(6)
    omega, nu = xi[:3], xi[3:]
    return so3_exp(omega), _left_jacobian(omega) @ nu


def se3_log(R, t):
    omega = so3_log(R)
    nu = np.linalg.solve(_left_jacobian(omega), np.asarray(t, dtype=float).reshape(3))
    return np.concatenate([omega, nu])
