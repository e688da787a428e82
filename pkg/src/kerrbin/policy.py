"""Numeric tolerances used across the package, kept in one record."""

from dataclasses import dataclass


@dataclass(frozen=True)
class NumericPolicy:
    norm_tol: float = 1e-10
    hermitian_tol: float = 1e-10
    positivity_floor: float = -1e-8
    positivity_fail: float = -1e-6
    trace_tol: float = 1e-8
    real_tol: float = 1e-12
    support_tol: float = 1e-12
    # integrator defaults; drift gates are drift_factor * rel_tol
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    drift_factor: float = 10.0
    step_cap_divisions: int = 20
    # phase search
    theta_grid: int = 256
    theta_width: float = 1e-10
    # a quadratic peak pins its argmax only to ~sqrt(machine eps)
    theta_snap: float = 1e-7
    # reproducibility gates
    convergence_tol: float = 1e-6
    tolerance_halving_tol: float = 1e-7


POLICY = NumericPolicy()
