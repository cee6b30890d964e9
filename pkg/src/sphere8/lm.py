"""Levenberg-Marquardt with forward-difference Jacobians.

The residual function may raise any ``Sphere8Error`` (or return non-finite
values); the trial point is then rejected exactly like a cost increase.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import Sphere8Error


@dataclass(frozen=True)
class LmConfig:
    max_iterations: int = 100
    initial_damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    gradient_tolerance: float = 1e-10
    step_tolerance: float = 1e-10
    fd_step: float = 1e-6
    # stop immediately once 0.5 * ||r||^2 falls below this
    cost_tolerance: float = 1e-20
    max_damping: float = 1e16
    # stop after an accepted step that lowers the cost by less than this fraction (0 disables)
    relative_cost_tolerance: float = 0.0

    def __post_init__(self):
        vals = (self.initial_damping, self.damping_up, self.damping_down, self.gradient_tolerance,
                self.step_tolerance, self.fd_step, self.max_damping)
        if (self.max_iterations < 1 or min(vals) <= 0 or self.cost_tolerance < 0
                or self.relative_cost_tolerance < 0):
            raise ValueError("LM settings must be positive and max_iterations >= 1")
        if not self.damping_up > 1.0 > self.damping_down:
            raise ValueError("need damping_up > 1 > damping_down")


@dataclass
class LmResult:
    x: np.ndarray
    cost: float  # 0.5 * ||r(x)||^2
    residuals: np.ndarray
    iterations: int
    evaluations: int
    converged: bool
    reason: str
    history: list = field(default_factory=list)  # cost after every accepted step, starting point first


def _evaluate(fun, x):
    try:
        r = np.asarray(fun(x), dtype=float)
    except Sphere8Error:
        return None
    # a NaN or infinity anywhere makes the squared norm non-finite
    if not math.isfinite(r @ r):
        return None
    return r


def fd_jacobian(fun, x, r0, step):
    """Forward-difference Jacobian of ``fun`` at ``x`` given ``r0 = fun(x)``.

    Raises Sphere8Error if a perturbed evaluation fails.
    """
    J = np.empty((r0.size, x.size))
    for k in range(x.size):
        xk = x.copy()
        xk[k] += step
        rk = _evaluate(fun, xk)
        if rk is None:
            # fall back to a backward difference at a failing edge
            xk[k] = x[k] - step
            rk = _evaluate(fun, xk)
            if rk is None:
                raise Sphere8Error("residual undefined on both sides of the expansion point")
            J[:, k] = (r0 - rk) / step
        else:
            J[:, k] = (rk - r0) / step
    return J


def levenberg_marquardt(fun, x0, config=LmConfig(), refresh=None, jac=None):
    """Minimise ``0.5 * ||fun(x)||^2`` starting at ``x0``.

    Marquardt scaling: the damped system is ``(J^T J + mu diag(J^T J)) dx = -J^T r``.
    Accepted steps never increase the cost.

    ``refresh(x)``, when given, runs at the start of every iteration and may
    change what ``fun`` computes (e.g. re-weighting); the residual is then
    re-evaluated at ``x`` so that each iteration is monotone with respect to
    its own objective.

    ``jac(x, r)`` replaces the generic forward-difference Jacobian when the
    caller can difference more cleverly. It returns ``(J, evaluations_used)``
    and may raise Sphere8Error too.
    """
    x = np.array(x0, dtype=float)
    r = _evaluate(fun, x)
    if r is None:
        raise Sphere8Error("residual undefined at the initial point")
    cost = 0.5 * float(r @ r)
    nfev = 1
    mu = config.initial_damping
    history = [cost]
    reason = "max_iterations"
    converged = False
    it = 0
    while it < config.max_iterations:
        if refresh is not None:
            refresh(x)
            r = _evaluate(fun, x)
            nfev += 1
            if r is None:
                reason = "refresh"
                break
            cost = 0.5 * float(r @ r)
        if cost <= config.cost_tolerance:
            reason, converged = "cost", True
            break
        try:
            if jac is None:
                J = fd_jacobian(fun, x, r, config.fd_step)
                nfev += x.size
            else:
                J, used = jac(x, r)
                nfev += used
        except Sphere8Error:
            reason = "jacobian"
            break
        g = J.T @ r
        if np.abs(g).max() <= config.gradient_tolerance:
            reason, converged = "gradient", True
            break
        H = J.T @ J
        d = H.diagonal().copy()
        d = np.maximum(d, 1e-12 * max(d.max(), 1e-300))
        it += 1
        accepted = False
        while mu <= config.max_damping:
            Hd = H.copy()
            Hd.flat[:: x.size + 1] += mu * d
            try:
                dx = np.linalg.solve(Hd, -g)
            except np.linalg.LinAlgError:
                mu *= config.damping_up
                continue
            x_new = x + dx
            r_new = _evaluate(fun, x_new)
            nfev += 1
            if r_new is not None:
                cost_new = 0.5 * float(r_new @ r_new)
                if cost_new <= cost:
                    accepted = True
                    break
            mu *= config.damping_up
        if not accepted:
            reason, converged = "damping", True
            break
        small_step = math.sqrt(dx @ dx) <= config.step_tolerance * (math.sqrt(x @ x) + config.step_tolerance)
        flat = cost - cost_new <= config.relative_cost_tolerance * cost
        assert cost_new <= cost
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        mu = max(mu * config.damping_down, 1e-15)
        if small_step:
            reason, converged = "step", True
            break
        if flat:
            reason, converged = "relative_cost", True
            break
    return LmResult(x=x, cost=cost, residuals=r, iterations=it, evaluations=nfev,
                    converged=converged, reason=reason, history=history)
