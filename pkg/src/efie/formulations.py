"""
Formulations compared by the study harness.
Each one turns the assembled blocks into a linear system, a right-hand
side and a recovered RWG current.
"""

from __future__ import annotations

import cmath
import logging
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from .errors import ConfigError
from .krylov import DEFAULT_DENSE_CAP, dense_condition
from .models import DEFAULT_SOLVER, FORMULATION_LABELS, CurrentParts, EfieMatrices, Excitation
from .preconditioner import PreconditionerComponents, RfCmpOperator, build_rfcmp

logger = logging.getLogger(__name__)


class BaseFormulation(ABC):
    """Common surface of a formulation at one wavenumber."""

    name = ""
    hermitian = False

    def __init__(self, blocks: EfieMatrices, components: PreconditionerComponents, **options):
        if not blocks.k > 0:
            raise ConfigError(f"{self.name}: the EFIE system needs k > 0, got {blocks.k}")
        self.blocks = blocks
        self.components = components
        self.options = options

    @property
    def label(self) -> str:
        return FORMULATION_LABELS[self.name]

    @property
    def default_solver(self) -> str:
        return DEFAULT_SOLVER[self.name]

    @abstractmethod
    def operator(self):
        """Dense matrix or LinearOperator of the system."""

    @abstractmethod
    def rhs(self, excitation: Excitation) -> np.ndarray:
        ...

    @abstractmethod
    def current_parts(self, solution: np.ndarray) -> CurrentParts:
        ...

    def current(self, solution: np.ndarray) -> np.ndarray:
        return self.current_parts(solution).total

    def dense_matrix(self) -> np.ndarray:
        op = self.operator()
        return op if isinstance(op, np.ndarray) else np.asarray(op)

    def condition_number(self, cap: int = DEFAULT_DENSE_CAP) -> float:
        return dense_condition(self.dense_matrix(), cap)


class UnpreconditionedFormulation(BaseFormulation):
    """T j = −e."""

    name = "none"

    def operator(self) -> np.ndarray:
        return self.blocks.combined()

    def rhs(self, excitation: Excitation) -> np.ndarray:
        return -excitation.vector

    def current_parts(self, solution: np.ndarray) -> CurrentParts:
        return CurrentParts(solenoidal=np.zeros_like(solution), nonsolenoidal=solution)


class LoopStarFormulation(BaseFormulation):
    """
    Loop-star basis Q = [Λ_r/√(ik), Σ_r·√(ik)] with the last loop and star
    dropped. The blocks are formed from T_A and V directly so that
    ΛᵀT_Φ = 0 holds structurally.
    """

    name = "loop-star"

    def __init__(self, blocks: EfieMatrices, components: PreconditionerComponents, **options):
        super().__init__(blocks, components, **options)
        loop = components.loop.tocsc()
        star = components.star.tocsc()
        self.loop_r = loop[:, :-1]
        self.star_r = star[:, :-1]
        self.scale = cmath.sqrt(1j * blocks.k)
        self._matrix: Optional[np.ndarray] = None

    def operator(self) -> np.ndarray:
        if self._matrix is None:
            k = self.blocks.k
            T_A, V = self.blocks.T_A, self.blocks.V
            L = self.loop_r.toarray()
            S = self.star_r.toarray()
            LS = np.asarray(self.components.star.T @ self.star_r.toarray())   # ΣᵀΣ_r
            T_A_L = T_A @ L
            T_A_S = T_A @ S
            ik = 1j * k
            self._matrix = np.block([
                [L.T @ T_A_L, ik * (L.T @ T_A_S)],
                [ik * (S.T @ T_A_L), -k * k * (S.T @ T_A_S) + LS.T @ V @ LS],
            ])
        return self._matrix

    def rhs(self, excitation: Excitation) -> np.ndarray:
        e = excitation.vector
        return -np.concatenate([
            (self.loop_r.T @ excitation.remainder) / self.scale,
            (self.star_r.T @ e) * self.scale,
        ])

    def current_parts(self, solution: np.ndarray) -> CurrentParts:
        n_loops = self.loop_r.shape[1]
        return CurrentParts(
            solenoidal=self.loop_r @ solution[:n_loops] / self.scale,
            nonsolenoidal=self.star_r @ solution[n_loops:] * self.scale,
        )


class _RfCmpFormulation(BaseFormulation):
    scaling_mode = "norm"
    outer = "sigma"
    hermitian = True

    def __init__(self, blocks: EfieMatrices, components: PreconditionerComponents, **options):
        super().__init__(blocks, components, **options)
        self.system: RfCmpOperator = build_rfcmp(
            blocks,
            components,
            scaling_mode=self.scaling_mode,
            outer=self.outer,
            power_tol=options.get("power_tol", 1e-3),
            power_maxit=options.get("power_maxit", 200),
            seed=options.get("seed", 0),
            scale_factor=options.get("scale_factor"),
        )

    def operator(self):
        return self.system.as_linear_operator()

    def dense_matrix(self) -> np.ndarray:
        return self.system.materialize()

    def rhs(self, excitation: Excitation) -> np.ndarray:
        return self.system.build_rhs(excitation)

    def current_parts(self, solution: np.ndarray) -> CurrentParts:
        return self.system.recover_current_parts(solution)


class RfCmpImplFormulation(_RfCmpFormulation):
    name = "rfcmp-impl"
    scaling_mode = "norm"
    outer = "sigma"


class RfCmpTheoryFormulation(_RfCmpFormulation):
    name = "rfcmp-theory"
    scaling_mode = "wavenumber"
    outer = "g_sigma"


FORMULATION_MAP = {
    "none": UnpreconditionedFormulation,
    "loop-star": LoopStarFormulation,
    "rfcmp-impl": RfCmpImplFormulation,
    "rfcmp-theory": RfCmpTheoryFormulation,
}


def get_formulation(name: str) -> type[BaseFormulation]:
    try:
        return FORMULATION_MAP[name]
    except KeyError:
        raise ConfigError(f"unknown formulation {name!r}; choices: {sorted(FORMULATION_MAP)}") from None
