"""Variational problems with a power-law weighted action and their
Euler-Lagrange dynamics.

The action weight is the kernel ``(t - theta)^(alpha - 1)`` with fractional
order ``alpha`` in (0, 1] and observer time ``t`` held strictly beyond the
integration interval, so the kernel stays real, positive, and bounded.  The
stationarity condition for such problems reads, componentwise,

    dL/dq - d/dtheta (dL/dv) = (1 - alpha) / (t - theta) * dL/dv

which collapses to the classical Euler-Lagrange equation at ``alpha = 1``.
:func:`to_explicit_ode` rearranges it into explicit accelerations for
regular Lagrangians (invertible velocity Hessian).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linsolve
from .expressions import (
    EvalPoint,
    Expr,
    Q,
    Theta,
    V,
    evaluate_on_grid,
    max_coordinate_index,
)


class SingularHessianError(ArithmeticError):
    """Velocity Hessian not invertible at some point; the Lagrangian is
    degenerate (for instance linear in a velocity) and outside this tool's
    scope."""

    def __init__(self, theta: float, condition_estimate: float):
        super().__init__(
            f"singular velocity Hessian at theta = {theta!r} "
            f"(condition estimate {condition_estimate:.3e})"
        )
        self.theta = theta
        self.condition_estimate = condition_estimate


@dataclass(frozen=True)
class FractionalParams:
    """Fractional order alpha in (0, 1] and the observer time t."""

    alpha: float
    observer_time: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0,1]")

    def kernel_coefficient(self, theta: float) -> float:
        """The drag coefficient (1 - alpha) / (t - theta)."""
        return (1.0 - self.alpha) / (self.observer_time - theta)


@dataclass(frozen=True)
class BoundaryConditions:
    q_a: tuple
    q_b: tuple

    def __init__(self, q_a: Sequence[float], q_b: Sequence[float]):
        object.__setattr__(self, "q_a", tuple(float(x) for x in q_a))
        object.__setattr__(self, "q_b", tuple(float(x) for x in q_b))
        if len(self.q_a) != len(self.q_b):
            raise ValueError("boundary vectors must have equal length")


@dataclass(frozen=True)
class VariationalProblem:
    """A Lagrangian on an interval together with the kernel parameters.

    Boundary values are optional; initial-value use supplies (q0, v0) to the
    integrator directly.
    """

    n: int
    lagrangian: Expr
    interval: tuple[float, float]
    frac: FractionalParams
    boundary: BoundaryConditions | None = None

    def __post_init__(self):
        a, b = self.interval
        object.__setattr__(self, "interval", (float(a), float(b)))
        if self.n < 1:
            raise ValueError("degree-of-freedom count n must be positive")
        if not self.interval[0] < self.interval[1]:
            raise ValueError("interval must satisfy a < b")
        if max_coordinate_index(self.lagrangian) >= self.n:
            raise ValueError(
                "Lagrangian references a variable index beyond the problem's n"
            )
        if not self.frac.observer_time > self.interval[1]:
            raise ValueError("observer time must exceed b")
        if self.boundary is not None and len(self.boundary.q_a) != self.n:
            raise ValueError("boundary vectors must have length n")

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]


def _momentum_partials(prob: VariationalProblem):
    """Symbolic pieces of d/dtheta(dL/dv): per component j the trees
    (p_j, dp_j/dtheta, dp_j/dq_k, dp_j/dv_k) plus dL/dq_j."""
    L = prob.lagrangian
    n = prob.n
    p = [L.diff(V(j)) for j in range(n)]
    dLdq = [L.diff(Q(j)) for j in range(n)]
    dpdth = [p[j].diff(Theta()) for j in range(n)]
    dpdq = [[p[j].diff(Q(k)) for k in range(n)] for j in range(n)]
    hess = [[p[j].diff(V(k)) for k in range(n)] for j in range(n)]
    return p, dLdq, dpdth, dpdq, hess


def el_residual(prob: VariationalProblem, point: EvalPoint, accel) -> np.ndarray:
    """Pointwise residual of the weighted Euler-Lagrange equation.

    Returns dL/dq - d/dtheta(dL/dv) - (1-alpha)/(t-theta) * dL/dv with the
    total derivative expanded through the chain rule using the supplied
    accelerations.  A zero vector means (point, accel) satisfies the
    equation.
    """
    if point.n != prob.n:
        raise ValueError("point dimension does not match the problem")
    accel = [float(x) for x in accel]
    if len(accel) != prob.n:
        raise ValueError("accel must have length n")
    p, dLdq, dpdth, dpdq, hess = _momentum_partials(prob)
    th, q, v = point.theta, point.q, point.v
    c = prob.frac.kernel_coefficient(th)
    out = np.empty(prob.n)
    for j in range(prob.n):
        total = dpdth[j].evaluate(th, q, v)
        for k in range(prob.n):
            total += dpdq[j][k].evaluate(th, q, v) * v[k]
            total += hess[j][k].evaluate(th, q, v) * accel[k]
        out[j] = (
            dLdq[j].evaluate(th, q, v) - total - c * p[j].evaluate(th, q, v)
        )
    return out


class ExplicitOde:
    """Explicit accelerations for a regular Lagrangian.

    Callable as ``rhs(theta, q, v) -> accel`` (lists or arrays accepted).
    ``on_grid`` evaluates the same right-hand side over a whole batch of
    samples at once.
    """

    def __init__(self, prob: VariationalProblem):
        self.prob = prob
        self.n = prob.n
        self._p, self._dLdq, self._dpdth, self._dpdq, self._hess = (
            _momentum_partials(prob)
        )
        self._alpha = prob.frac.alpha
        self._t = prob.frac.observer_time

    def __call__(self, theta: float, q, v):
        n = self.n
        c = (1.0 - self._alpha) / (self._t - theta)
        if n == 1:
            m00 = self._hess[0][0].evaluate(theta, q, v)
            if m00 == 0.0:
                raise SingularHessianError(theta, float("inf"))
            total = (
                self._dpdth[0].evaluate(theta, q, v)
                + self._dpdq[0][0].evaluate(theta, q, v) * v[0]
            )
            force = (
                self._dLdq[0].evaluate(theta, q, v)
                - total
                - c * self._p[0].evaluate(theta, q, v)
            )
            return [force / m00]
        m = np.empty((n, n))
        rhs = np.empty(n)
        for j in range(n):
            total = self._dpdth[j].evaluate(theta, q, v)
            for k in range(n):
                total += self._dpdq[j][k].evaluate(theta, q, v) * v[k]
                m[j, k] = self._hess[j][k].evaluate(theta, q, v)
            rhs[j] = (
                self._dLdq[j].evaluate(theta, q, v)
                - total
                - c * self._p[j].evaluate(theta, q, v)
            )
        try:
            return linsolve.solve(m, rhs).tolist()
        except linsolve.SingularMatrixError as exc:
            raise SingularHessianError(theta, exc.condition_estimate) from exc

    def on_grid(self, theta, q, v) -> np.ndarray:
        """Accelerations at m samples; theta (m,), q and v (m, n)."""
        theta = np.asarray(theta, dtype=float)
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        m_pts, n = q.shape
        c = (1.0 - self._alpha) / (self._t - theta)
        mats = np.empty((m_pts, n, n))
        rhs = np.empty((m_pts, n))
        for j in range(n):
            total = evaluate_on_grid(self._dpdth[j], theta, q, v)
            for k in range(n):
                total = total + evaluate_on_grid(self._dpdq[j][k], theta, q, v) * v[:, k]
                mats[:, j, k] = evaluate_on_grid(self._hess[j][k], theta, q, v)
            rhs[:, j] = (
                evaluate_on_grid(self._dLdq[j], theta, q, v)
                - total
                - c * evaluate_on_grid(self._p[j], theta, q, v)
            )
        try:
            return np.linalg.solve(mats, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError as exc:
            raise SingularHessianError(float("nan"), float("inf")) from exc


def to_explicit_ode(prob: VariationalProblem) -> ExplicitOde:
    """Rearrange the Euler-Lagrange equation into explicit accelerations.

    Raises :class:`SingularHessianError` on first evaluation at any point
    where the velocity Hessian degenerates; a probe at the interval
    midpoint with zero state catches constant-degenerate Lagrangians
    immediately.
    """
    ode = ExplicitOde(prob)
    mid = 0.5 * (prob.a + prob.b)
    probe_q = [0.0] * prob.n
    probe_v = [0.0] * prob.n
    try:
        ode(mid, probe_q, probe_v)
    except SingularHessianError:
        raise
    except ArithmeticError:
        # Hessian may be state-dependent and merely undefined at the probe;
        # defer judgement to actual use.
        pass
    return ode
