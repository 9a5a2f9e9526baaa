"""
Data models for the EFIE solver and its study harness.

Matrices stay numpy arrays; the records that end up in CSV / JSON reports
expose to_dict() and contain plain Python values only.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.constants import epsilon_0, mu_0

from .errors import ConfigError, NumericalError


# ──────────────────────────────────────────────
# Enum-like mappings (plain strings, no deps)
# ──────────────────────────────────────────────

FORMULATION_LABELS: dict[str, str] = {
    "none":          "EFIE, unpreconditioned",
    "loop-star":     "EFIE, loop-star rescaled (one loop and one star removed)",
    "rfcmp-theory":  "RF-CMP, wavenumber scalings with P_gΣ outer projector",
    "rfcmp-impl":    "RF-CMP, power-iteration scalings with P_Σ outer projector",
}

DEFAULT_SOLVER: dict[str, str] = {
    "none":          "cgs",
    "loop-star":     "cgs",
    "rfcmp-theory":  "cg",
    "rfcmp-impl":    "cg",
}

HERMITIAN_FORMULATIONS = {"rfcmp-theory", "rfcmp-impl"}

EXIT_CODES: dict[str, int] = {
    "ok":        0,
    "config":    2,
    "numerical": 3,
    "io":        4,
}


# ──────────────────────────────────────────────
# Physics
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class ScatteringScenario:
    """Background medium and frequency; time dependence e^{−iωt}."""
    frequency: float                 # Hz
    epsilon: float = epsilon_0
    mu: float = mu_0

    def __post_init__(self):
        if not self.frequency >= 0:
            raise ConfigError(f"frequency must be ≥ 0, got {self.frequency}")
        if self.epsilon <= 0 or self.mu <= 0:
            raise ConfigError("epsilon and mu must be positive")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi * self.frequency * math.sqrt(self.epsilon * self.mu)

    @property
    def impedance(self) -> float:
        return math.sqrt(self.mu / self.epsilon)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wavenumber"] = self.wavenumber
        d["impedance"] = self.impedance
        return d


def wavenumber(frequency: float, epsilon: float = epsilon_0, mu: float = mu_0) -> float:
    return ScatteringScenario(frequency, epsilon, mu).wavenumber


@dataclass(eq=False)
class EfieMatrices:
    """
    Galerkin blocks at one wavenumber.

    V is the patch single-layer matrix [V]_cd = (p_c, G_k p_d); T_Phi equals
    Σ V Σᵀ and is kept explicitly for inspection and the baseline operators.
    """
    T_A: np.ndarray                  # (N, N) complex symmetric
    T_Phi: np.ndarray                # (N, N) complex symmetric
    V: np.ndarray                    # (N_C, N_C) complex symmetric
    k: float                         # assembled wavenumber

    def __post_init__(self):
        for m in (self.T_A, self.T_Phi, self.V):
            m.setflags(write=False)

    @property
    def n_unknowns(self) -> int:
        return self.T_A.shape[0]

    def combined(self) -> np.ndarray:
        """T = ik·T_A + T_Phi/(ik)."""
        if self.k <= 0:
            raise ConfigError("the full EFIE operator needs k > 0; use the static blocks at k = 0")
        ik = 1j * self.k
        return ik * self.T_A + self.T_Phi / ik


@dataclass(eq=False)
class Excitation:
    """
    Right-hand side e = remainder + Σ·gradient.

    `gradient` holds cell coefficients of a part known to lie in range(Σ)
    (the constant-field moment of a plane wave); keeping it separate lets
    the preconditioned system drop it from loop-space products exactly.
    """
    remainder: np.ndarray            # (N,) complex
    gradient: Optional[np.ndarray]   # (N_C,) complex or None
    edge_cells: np.ndarray           # (N, 2) [c⁺, c⁻], to expand Σ·gradient
    label: str = ""

    @property
    def vector(self) -> np.ndarray:
        if self.gradient is None:
            return self.remainder.copy()
        plus, minus = self.edge_cells.T
        return self.remainder + self.gradient[plus] - self.gradient[minus]

    def gradient_or_zeros(self, n_cells: int) -> np.ndarray:
        if self.gradient is None:
            return np.zeros(n_cells, dtype=complex)
        return self.gradient


@dataclass
class CurrentParts:
    """Surface current j (RWG coefficients, η-normalized) split into its two Helmholtz parts."""
    solenoidal: np.ndarray
    nonsolenoidal: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.solenoidal + self.nonsolenoidal


# ──────────────────────────────────────────────
# Solver records
# ──────────────────────────────────────────────

@dataclass
class ScalingConstants:
    """Scalars α, β, γ of the preconditioner."""
    alpha: float
    beta: float
    gamma: float
    mode: str = "norm"               # "norm" (power iteration) or "wavenumber"
    converged: bool = True           # False if a power iteration hit its cap

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise NumericalError(f"scaling {name} must be finite and positive, got {value}")

    @classmethod
    def from_wavenumber(cls, k: float) -> "ScalingConstants":
        return cls(alpha=math.sqrt(k), beta=1.0 / math.sqrt(k), gamma=k, mode="wavenumber")

    def rescaled(self, c: float) -> "ScalingConstants":
        """Joint rescaling (cα, cβ, c²γ); multiplies the system matrix by 1/c⁴."""
        return ScalingConstants(self.alpha * c, self.beta * c, self.gamma * c * c, self.mode, self.converged)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PowerIterationResult:
    value: float
    iterations: int
    converged: bool


@dataclass
class SolveReport:
    """Outcome of one Krylov solve."""
    solver: str
    tolerance: float = 0.0
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0           # seconds
    matvec_count: int = 0
    condition_number: Optional[float] = None

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["final_residual"] = self.final_residual
        return d


@dataclass
class SpectrumRow:
    """One (mesh, frequency, formulation) point of a spectral sweep."""
    mesh: str
    level: int
    n_unknowns: int
    spectral_index: float            # 1/h, m⁻¹
    frequency_hz: float
    formulation: str
    condition_number: float = float("nan")
    wall_time_s: float = 0.0
    status: str = "ok"               # "ok" or "error"
    error: str = ""

    @property
    def key(self) -> str:
        return f"{self.mesh}|{self.level}|{self.frequency_hz:.6e}|{self.formulation}"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FarFieldCut:
    """Bistatic cut at fixed φ."""
    theta: np.ndarray                # radians
    phi: float
    far_field: np.ndarray            # (M, 3) complex transverse radiation vector
    rcs_dbsm: Optional[np.ndarray]   # (M,), None for a reference-only cut
    reference_dbsm: Optional[np.ndarray] = None

    def to_rows(self) -> list[list[float]]:
        deg = np.degrees(self.theta)
        ref = self.reference_dbsm
        out = []
        for i, t in enumerate(deg):
            mom = self.rcs_dbsm[i] if self.rcs_dbsm is not None else float("nan")
            mie = ref[i] if ref is not None else float("nan")
            out.append([float(t), float(mom), float(mie), float(abs(mom - mie))])
        return out
