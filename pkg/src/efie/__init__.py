"""
EFIE solver with a refinement-free Calderón multiplicative preconditioner.

discretization   — RWG / nodal / patch bases and their Gram matrices
assembly         — T_A, T_Φ = ΣVΣᵀ and excitations
quasi_helmholtz  — loop/star matrices and matrix-free projectors
preconditioner   — RF-CMP scalings and the Hermitian positive definite system
formulations     — none / loop-star / rfcmp-impl / rfcmp-theory
krylov           — CG, CGS, power iteration, dense condition numbers
postprocess      — far field, bistatic RCS, Mie series
study            — sweeps, solves and RCS runs behind run_efie_study.py
"""

from .assembly import (
    EfieAssembler,
    assemble_efie,
    assemble_T,
    assemble_TA,
    assemble_TPhi,
    assemble_V,
    assemble_W,
    excitation_planewave,
    excitation_voltage_gap,
    spectral_equivalence_bounds,
)
from .config import RunConfig, parse_overrides
from .discretization import (
    gram_dual_lambda_p,
    gram_ff,
    gram_lambda,
    gram_pp,
    laplace_beltrami,
)
from .errors import (
    BreakdownError,
    ConfigError,
    ConvergenceError,
    EfieError,
    NotHPDError,
    NumericalError,
    QuadratureError,
    SizeCapError,
)
from .formulations import FORMULATION_MAP, BaseFormulation, get_formulation
from .krylov import cg_solve, cgs_solve, dense_condition, power_iteration
from .models import (
    DEFAULT_SOLVER,
    EXIT_CODES,
    FORMULATION_LABELS,
    CurrentParts,
    EfieMatrices,
    Excitation,
    FarFieldCut,
    ScalingConstants,
    ScatteringScenario,
    SolveReport,
    SpectrumRow,
    wavenumber,
)
from .postprocess import far_field, l2_relative_error, mie_rcs, rcs_bistatic
from .preconditioner import PreconditionerComponents, RfCmpOperator, build_rfcmp, estimate_scalings
from .quadrature import QuadratureConfig
from .quasi_helmholtz import QuasiHelmholtzProjectors, build_loop_matrix, build_star_matrix

__all__ = [
    "EfieAssembler",
    "assemble_efie",
    "assemble_T",
    "assemble_TA",
    "assemble_TPhi",
    "assemble_V",
    "assemble_W",
    "excitation_planewave",
    "excitation_voltage_gap",
    "spectral_equivalence_bounds",
    "RunConfig",
    "parse_overrides",
    "gram_dual_lambda_p",
    "gram_ff",
    "gram_lambda",
    "gram_pp",
    "laplace_beltrami",
    "EfieError",
    "ConfigError",
    "QuadratureError",
    "SizeCapError",
    "NumericalError",
    "ConvergenceError",
    "BreakdownError",
    "NotHPDError",
    "FORMULATION_MAP",
    "BaseFormulation",
    "get_formulation",
    "cg_solve",
    "cgs_solve",
    "dense_condition",
    "power_iteration",
    "DEFAULT_SOLVER",
    "EXIT_CODES",
    "FORMULATION_LABELS",
    "CurrentParts",
    "EfieMatrices",
    "Excitation",
    "FarFieldCut",
    "ScalingConstants",
    "ScatteringScenario",
    "SolveReport",
    "SpectrumRow",
    "wavenumber",
    "far_field",
    "l2_relative_error",
    "mie_rcs",
    "rcs_bistatic",
    "PreconditionerComponents",
    "RfCmpOperator",
    "build_rfcmp",
    "estimate_scalings",
    "QuadratureConfig",
    "QuasiHelmholtzProjectors",
    "build_loop_matrix",
    "build_star_matrix",
]
