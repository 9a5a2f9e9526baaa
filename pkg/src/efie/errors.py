"""
Exception hierarchy for the EFIE solver.

CLI exit codes key off these classes: ConfigError → 2, NumericalError → 3.
Mesh problems raise meshes.MeshError (also mapped to 2).
"""

from __future__ import annotations


class EfieError(Exception):
    """Base class of solver errors."""


# ── configuration ──────────────────────────────

class ConfigError(EfieError, ValueError):
    """Invalid configuration or arguments."""


class QuadratureError(ConfigError):
    """Quadrature rule too weak for the requested integral."""


class SizeCapError(ConfigError):
    """Dense operation requested above the configured size cap."""


# ── numerics ───────────────────────────────────

class NumericalError(EfieError, ArithmeticError):
    """A numerical method failed."""


class ConvergenceError(NumericalError):
    """Iteration limit reached before the tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class BreakdownError(NumericalError):
    """Krylov recurrence broke down."""


class NotHPDError(BreakdownError):
    """Nonpositive curvature met in CG: the operator is not Hermitian positive definite."""
