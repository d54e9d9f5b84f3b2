"""Symmetry generators, gauge rates, and conserved-charge candidates.

A generator is a pair (tau(theta, q), xi(theta, q)) describing an
infinitesimal shift of intrinsic time and coordinates.  For any generator,
:func:`gauge_rate_from_reduced_condition` produces the unique gauge rate
that balances the weighted-invariance condition identically, and the
charge

    C = dL/dv . xi + (L - dL/dv . v) tau - Lambda

is then constant along solutions of the weighted Euler-Lagrange equation.
Lambda is the gauge rate accumulated by quadrature from the left endpoint;
the running correction integrals of the specialized energy/momentum
charges use the same base point, so all charges are pinned up to the
additive constant that drift statistics ignore anyway.

Drift of a sampled series is max |C(theta_k) - C(theta_0)|; the relative
form divides by (1 + max |C|) to stay scale-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .euler_lagrange import ExplicitOde, VariationalProblem, to_explicit_ode
from .expressions import (
    Const,
    EvalPoint,
    Expr,
    Q,
    Theta,
    V,
    add,
    depends_on_velocity,
    div,
    evaluate,
    evaluate_on_grid,
    mul,
    sub,
)
from .integrators import Trajectory

# Channel names the specialized charges expect on a trajectory.
LAMBDA_CHANNEL = "Lambda"
ENERGY_CHANNEL = "energy_correction"
MOMENTUM_CHANNEL = "momentum_correction_{dof}"


class ChargePreconditionError(ValueError):
    """A charge was requested for a Lagrangian that does not satisfy its
    structural precondition (explicit theta dependence, q dependence, or a
    velocity-dependent generator)."""


class MissingChannelError(LookupError):
    """The trajectory lacks a required accumulated channel."""


@dataclass(frozen=True)
class SymmetryGenerator:
    """Pair (tau, xi) over (theta, q), with an optional gauge rate over
    (theta, q, v)."""

    tau: Expr
    xi: tuple
    gauge_rate: Expr | None = None

    def __init__(self, tau: Expr, xi: Sequence[Expr], gauge_rate: Expr | None = None):
        xi = tuple(xi)
        if depends_on_velocity(tau) or any(depends_on_velocity(x) for x in xi):
            raise ChargePreconditionError(
                "generators may not depend on velocities: tau and xi are functions of (theta, q)"
            )
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "gauge_rate", gauge_rate)

    @property
    def n(self) -> int:
        return len(self.xi)

    def with_gauge(self, gauge_rate: Expr) -> "SymmetryGenerator":
        return SymmetryGenerator(self.tau, self.xi, gauge_rate)


@dataclass(frozen=True)
class ChargeSeries:
    """Samples of a candidate constant of motion with drift statistics."""

    theta_grid: np.ndarray
    values: np.ndarray
    drift: float
    relative_drift: float

    @classmethod
    def from_values(cls, theta_grid: np.ndarray, values: np.ndarray) -> "ChargeSeries":
        theta_grid = np.asarray(theta_grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if theta_grid.shape != values.shape:
            raise ValueError("theta grid and values must share length")
        d, rd = _drift_stats(values)
        return cls(theta_grid=theta_grid, values=values, drift=d, relative_drift=rd)

    def write_csv(self, path) -> None:
        """Rows ``theta,value`` plus a trailing drift comment line."""
        with open(path, "w", newline="") as fh:
            fh.write("theta,value\n")
            for th, val in zip(self.theta_grid, self.values):
                fh.write(f"{format(th, '.17g')},{format(val, '.17g')}\n")
            fh.write(
                f"# drift={format(self.drift, '.17g')} "
                f"relative_drift={format(self.relative_drift, '.17g')}\n"
            )


def _drift_stats(values: np.ndarray) -> tuple[float, float]:
    d = float(np.max(np.abs(values - values[0])))
    return d, d / (1.0 + float(np.max(np.abs(values))))


def drift(series: ChargeSeries) -> tuple[float, float]:
    """Recompute (drift, relative_drift) from the stored samples."""
    return _drift_stats(np.asarray(series.values, dtype=float))


# --------------------------------------------------------------------------
# Derivatives along the motion


def total_derivative(e: Expr, theta: float, q, v, accel=None) -> float:
    """d/dtheta of e along a motion passing through (theta, q, v, accel).

    Expands to de/dtheta + (de/dq).v + (de/dv).accel; the acceleration is
    only required when e actually references a velocity.
    """
    q = [float(x) for x in q]
    v = [float(x) for x in v]
    n = len(q)
    point = EvalPoint(theta, q, v)
    out = evaluate(e.diff(Theta()), point)
    for k in range(n):
        out += evaluate(e.diff(Q(k)), point) * v[k]
    if depends_on_velocity(e):
        if accel is None:
            raise ValueError("accel is required for a velocity-dependent expression")
        accel = [float(x) for x in accel]
        for k in range(n):
            out += evaluate(e.diff(V(k)), point) * accel[k]
    return out


def _rate_along_motion(e: Expr, n: int) -> Expr:
    """Symbolic d/dtheta of a (theta, q) expression along the motion:
    de/dtheta + sum_k de/dq_k * v_k."""
    out = e.diff(Theta())
    for k in range(n):
        out = add(out, mul(e.diff(Q(k)), V(k)))
    return out


def _kernel_times(prob: VariationalProblem, e: Expr) -> Expr:
    """(1 - alpha) * e / (t - theta); folds away entirely at alpha = 1."""
    t_minus_theta = sub(Const(prob.frac.observer_time), Theta())
    return mul(Const(1.0 - prob.frac.alpha), div(e, t_minus_theta))


# --------------------------------------------------------------------------
# Invariance-condition residuals


def quasi_invariance_residual(
    prob: VariationalProblem, gen: SymmetryGenerator, point: EvalPoint
) -> float:
    """Residual of the full quasi-invariance condition at one point.

    dL/dtheta tau + dL/dq . xi + dL/dv . (xi_dot - v tau_dot)
      + L (tau_dot + (1-alpha)/(t-theta) tau) - gauge_rate

    Zero means the generator is an exact weighted symmetry up to the
    installed gauge rate.  The specialized energy/momentum generators do
    not satisfy this form; they satisfy the reduced condition that
    :func:`gauge_rate_from_reduced_condition` balances instead.
    """
    if gen.gauge_rate is None:
        raise ChargePreconditionError("quasi-invariance residual needs a gauge rate")
    _check_dimensions(prob, gen)
    L = prob.lagrangian
    n = prob.n
    th = point.theta
    tau_dot = total_derivative(gen.tau, th, point.q, point.v)
    out = evaluate(L.diff(Theta()), point) * evaluate(gen.tau, point)
    for j in range(n):
        xi_dot = total_derivative(gen.xi[j], th, point.q, point.v)
        out += evaluate(L.diff(Q(j)), point) * evaluate(gen.xi[j], point)
        out += evaluate(L.diff(V(j)), point) * (xi_dot - point.v[j] * tau_dot)
    c = prob.frac.kernel_coefficient(th)
    out += evaluate(L, point) * (tau_dot + c * evaluate(gen.tau, point))
    out -= evaluate(gen.gauge_rate, point)
    return out


def condition8_residual(
    prob: VariationalProblem, gen: SymmetryGenerator, point: EvalPoint
) -> float:
    """Residual of the auxiliary algebraic condition L tau + dL/dv.(xi - v tau).

    Exposed as a diagnostic only: charge construction relies on the reduced
    condition, which holds by construction for derived gauge rates even
    when this residual is nonzero (it is nonzero for the plain
    time-translation generator already).
    """
    _check_dimensions(prob, gen)
    L = prob.lagrangian
    out = evaluate(L, point) * evaluate(gen.tau, point)
    for j in range(prob.n):
        out += evaluate(L.diff(V(j)), point) * (
            evaluate(gen.xi[j], point) - point.v[j] * evaluate(gen.tau, point)
        )
    return out


def gauge_rate_from_reduced_condition(
    prob: VariationalProblem, gen: SymmetryGenerator
) -> Expr:
    """Derive the gauge rate that balances the reduced invariance condition.

    Returns the symbolic expression

      dL/dtheta tau + dL/dq . xi + dL/dv . (xi_dot - v tau_dot) + L tau_dot
        - (1-alpha)/(t-theta) * dL/dv . (xi - v tau)

    with xi_dot and tau_dot expanded along the motion.  Installing it makes
    the reduced condition an identity in (theta, q, v), which is exactly
    what charge conservation consumes.
    """
    _check_dimensions(prob, gen)
    L = prob.lagrangian
    n = prob.n
    tau_dot = _rate_along_motion(gen.tau, n)
    out = mul(L.diff(Theta()), gen.tau)
    correction = Const(0.0)
    for j in range(n):
        xi_dot = _rate_along_motion(gen.xi[j], n)
        out = add(out, mul(L.diff(Q(j)), gen.xi[j]))
        out = add(out, mul(L.diff(V(j)), sub(xi_dot, mul(V(j), tau_dot))))
        correction = add(
            correction,
            mul(L.diff(V(j)), sub(gen.xi[j], mul(V(j), gen.tau))),
        )
    out = add(out, mul(L, tau_dot))
    out = sub(out, _kernel_times(prob, correction))
    return out


# --------------------------------------------------------------------------
# Charges


def charge_expression(prob: VariationalProblem, gen: SymmetryGenerator) -> Expr:
    """Symbolic charge without the gauge term: dL/dv.xi + (L - dL/dv.v) tau."""
    _check_dimensions(prob, gen)
    L = prob.lagrangian
    n = prob.n
    out = Const(0.0)
    hamiltonian_part = L
    for j in range(n):
        p_j = L.diff(V(j))
        out = add(out, mul(p_j, gen.xi[j]))
        hamiltonian_part = sub(hamiltonian_part, mul(p_j, V(j)))
    return add(out, mul(hamiltonian_part, gen.tau))


def lambda_integrand(gen: SymmetryGenerator) -> Expr:
    if gen.gauge_rate is None:
        raise ChargePreconditionError("generator carries no gauge rate to accumulate")
    return gen.gauge_rate


def energy_correction_integrand(prob: VariationalProblem) -> Expr:
    """dL/dv . v / (t - theta), the running correction of the energy charge."""
    L = prob.lagrangian
    total = Const(0.0)
    for j in range(prob.n):
        total = add(total, mul(L.diff(V(j)), V(j)))
    return div(total, sub(Const(prob.frac.observer_time), Theta()))


def momentum_correction_integrand(prob: VariationalProblem, dof: int) -> Expr:
    """dL/dv_i / (t - theta), the running correction of one momentum charge."""
    _check_dof(prob, dof)
    return div(
        prob.lagrangian.diff(V(dof)),
        sub(Const(prob.frac.observer_time), Theta()),
    )


def standard_integrands(
    prob: VariationalProblem,
    generators: Sequence[SymmetryGenerator] = (),
    energy: bool = False,
    momentum: bool = False,
) -> dict[str, Expr]:
    """Channel map for a solve covering the requested charges.

    Generator gauges land in ``Lambda`` (single generator) or
    ``Lambda_g{i}`` (several).
    """
    out: dict[str, Expr] = {}
    if len(generators) == 1:
        out[LAMBDA_CHANNEL] = lambda_integrand(generators[0])
    else:
        for i, gen in enumerate(generators):
            out[f"Lambda_g{i}"] = lambda_integrand(gen)
    if energy:
        out[ENERGY_CHANNEL] = energy_correction_integrand(prob)
    if momentum:
        for j in range(prob.n):
            out[MOMENTUM_CHANNEL.format(dof=j)] = momentum_correction_integrand(prob, j)
    return out


def noether_charge(
    prob: VariationalProblem,
    gen: SymmetryGenerator,
    traj: Trajectory,
    channel: str = LAMBDA_CHANNEL,
) -> ChargeSeries:
    """Sample the gauge-corrected charge along a trajectory."""
    if channel not in traj.channels:
        raise MissingChannelError(
            f"trajectory lacks the accumulated gauge channel {channel!r}"
        )
    expr = charge_expression(prob, gen)
    values = evaluate_on_grid(expr, traj.theta_grid, traj.q, traj.v)
    values = values - traj.channels[channel]
    return ChargeSeries.from_values(traj.theta_grid, values)


def classical_energy(prob: VariationalProblem, traj: Trajectory) -> ChargeSeries:
    """L - dL/dv . v sampled with no fractional correction (constant only
    at alpha = 1 for autonomous Lagrangians)."""
    expr = _energy_expression(prob)
    values = evaluate_on_grid(expr, traj.theta_grid, traj.q, traj.v)
    return ChargeSeries.from_values(traj.theta_grid, values)


def fractional_energy(
    prob: VariationalProblem, traj: Trajectory, channel: str = ENERGY_CHANNEL
) -> ChargeSeries:
    """Energy-style charge for autonomous Lagrangians.

    Samples L - dL/dv.v - (1-alpha) * integral of dL/dv.v/(t-theta).
    """
    if not _is_identically_zero(prob.lagrangian.diff(Theta()), prob.n):
        raise ChargePreconditionError(
            "energy charge requires an autonomous Lagrangian (no explicit theta)"
        )
    if channel not in traj.channels:
        raise MissingChannelError(
            f"trajectory lacks the energy correction channel {channel!r}"
        )
    expr = _energy_expression(prob)
    values = evaluate_on_grid(expr, traj.theta_grid, traj.q, traj.v)
    values = values - (1.0 - prob.frac.alpha) * traj.channels[channel]
    return ChargeSeries.from_values(traj.theta_grid, values)


def classical_momentum(
    prob: VariationalProblem, traj: Trajectory, dof: int
) -> ChargeSeries:
    """dL/dv_i sampled with no fractional correction."""
    _check_dof(prob, dof)
    expr = prob.lagrangian.diff(V(dof))
    values = evaluate_on_grid(expr, traj.theta_grid, traj.q, traj.v)
    return ChargeSeries.from_values(traj.theta_grid, values)


def fractional_momentum(
    prob: VariationalProblem,
    traj: Trajectory,
    dof: int,
    channel: str | None = None,
) -> ChargeSeries:
    """Momentum-style charge for a coordinate the Lagrangian ignores.

    Samples dL/dv_i + (1-alpha) * integral of dL/dv_i/(t-theta).
    """
    _check_dof(prob, dof)
    if not _is_identically_zero(prob.lagrangian.diff(Q(dof)), prob.n):
        raise ChargePreconditionError(
            f"momentum charge for dof {dof} requires L independent of q{dof}"
        )
    if channel is None:
        channel = MOMENTUM_CHANNEL.format(dof=dof)
    if channel not in traj.channels:
        raise MissingChannelError(
            f"trajectory lacks the momentum correction channel {channel!r}"
        )
    expr = prob.lagrangian.diff(V(dof))
    values = evaluate_on_grid(expr, traj.theta_grid, traj.q, traj.v)
    values = values + (1.0 - prob.frac.alpha) * traj.channels[channel]
    return ChargeSeries.from_values(traj.theta_grid, values)


def pointwise_conservation_residual(
    prob: VariationalProblem,
    gen: SymmetryGenerator,
    traj: Trajectory,
    ode: ExplicitOde | None = None,
) -> np.ndarray:
    """d/dtheta of the charge at every grid point, quadrature-free.

    Uses accelerations from the explicit right-hand side, so the result
    measures the algebraic conservation identity itself rather than
    integration error.  Requires the generator's gauge rate.
    """
    if gen.gauge_rate is None:
        raise ChargePreconditionError("pointwise residual needs a gauge rate")
    if ode is None:
        ode = to_explicit_ode(prob)
    n = prob.n
    grid, q, v = traj.theta_grid, traj.q, traj.v
    accel = ode.on_grid(grid, q, v)
    expr = charge_expression(prob, gen)
    out = evaluate_on_grid(expr.diff(Theta()), grid, q, v)
    for k in range(n):
        out = out + evaluate_on_grid(expr.diff(Q(k)), grid, q, v) * v[:, k]
        out = out + evaluate_on_grid(expr.diff(V(k)), grid, q, v) * accel[:, k]
    out = out - evaluate_on_grid(gen.gauge_rate, grid, q, v)
    return out


# --------------------------------------------------------------------------
# Internals


def _energy_expression(prob: VariationalProblem) -> Expr:
    L = prob.lagrangian
    out = L
    for j in range(prob.n):
        out = sub(out, mul(L.diff(V(j)), V(j)))
    return out


def _check_dimensions(prob: VariationalProblem, gen: SymmetryGenerator) -> None:
    if gen.n != prob.n:
        raise ValueError(
            f"generator has {gen.n} coordinate shifts but the problem has n = {prob.n}"
        )


def _check_dof(prob: VariationalProblem, dof: int) -> None:
    if not 0 <= dof < prob.n:
        raise ValueError(f"dof {dof} out of range for n = {prob.n}")


# Sampling box for deciding that a derivative vanishes identically.
_ZERO_SAMPLES = 24
_ZERO_TOL = 1e-10


def _is_identically_zero(e: Expr, n: int) -> bool:
    if isinstance(e, Const):
        return e.value == 0.0
    rng = np.random.default_rng(20260809)
    worst = 0.0
    scale = 1.0
    for _ in range(_ZERO_SAMPLES):
        theta = float(rng.uniform(-1.0, 2.0))
        q = rng.uniform(-1.5, 1.5, size=n).tolist()
        v = rng.uniform(-1.5, 1.5, size=n).tolist()
        try:
            value = e.evaluate(theta, q, v)
        except ArithmeticError:
            continue
        worst = max(worst, abs(value))
        scale = max(scale, abs(value))
    return worst <= _ZERO_TOL * scale
