"""Symmetries and conserved charges for power-law weighted variational
problems, with a fixed-step solver and drift-based verification."""

from .action import ActionValue, StationarityReport, fractional_action, gamma_fn, stationarity_check
from .charges import (
    ChargePreconditionError,
    ChargeSeries,
    MissingChannelError,
    SymmetryGenerator,
    classical_energy,
    classical_momentum,
    condition8_residual,
    drift,
    energy_correction_integrand,
    fractional_energy,
    fractional_momentum,
    gauge_rate_from_reduced_condition,
    lambda_integrand,
    momentum_correction_integrand,
    noether_charge,
    pointwise_conservation_residual,
    quasi_invariance_residual,
    standard_integrands,
    total_derivative,
)
from .euler_lagrange import (
    BoundaryConditions,
    FractionalParams,
    SingularHessianError,
    VariationalProblem,
    el_residual,
    to_explicit_ode,
)
from .expressions import (
    EvalDomainError,
    EvalPoint,
    Expr,
    ExpressionError,
    ParseError,
    diff,
    evaluate,
    evaluate_on_grid,
    parse,
)
from .integrators import (
    BlowUpError,
    ConvergenceReport,
    ExactSolution,
    ShootingError,
    ShootingReport,
    Trajectory,
    bvp_shoot,
    convergence_order,
    ivp_solve,
)

__version__ = "0.1.0"

__all__ = [
    "ActionValue",
    "BlowUpError",
    "BoundaryConditions",
    "ChargePreconditionError",
    "ChargeSeries",
    "ConvergenceReport",
    "EvalDomainError",
    "EvalPoint",
    "ExactSolution",
    "Expr",
    "ExpressionError",
    "FractionalParams",
    "MissingChannelError",
    "ParseError",
    "ShootingError",
    "ShootingReport",
    "SingularHessianError",
    "StationarityReport",
    "SymmetryGenerator",
    "Trajectory",
    "VariationalProblem",
    "bvp_shoot",
    "classical_energy",
    "classical_momentum",
    "condition8_residual",
    "convergence_order",
    "diff",
    "drift",
    "el_residual",
    "energy_correction_integrand",
    "evaluate",
    "evaluate_on_grid",
    "fractional_action",
    "fractional_energy",
    "fractional_momentum",
    "gamma_fn",
    "gauge_rate_from_reduced_condition",
    "ivp_solve",
    "lambda_integrand",
    "momentum_correction_integrand",
    "noether_charge",
    "parse",
    "pointwise_conservation_residual",
    "quasi_invariance_residual",
    "standard_integrands",
    "stationarity_check",
    "to_explicit_ode",
    "total_derivative",
]
