"""
Refinement-free Calderón preconditioned EFIE system

    P_o† T† P_m T P_o i = −P_o† T† P_m e,        j = P_o i

with
    P_o  = P_ΛH/α + i·P_out/β                      P_out ∈ {P_Σ, P_gΣ}
    P_m  = ΛG_λλ⁻¹Λᵀ/α² + P_ΛH/γ + Σ(ΣᵀΣ)⁺G_pp⁻¹(ΣᵀΣ)⁺Σᵀ/β²
    P_gΣ = Σ(ΣᵀΣ)⁺G_λ̃p⁻¹Σᵀ

The system is applied in split form. A vector is carried as a pair
(a, z) meaning a + Σz with Σᵀa = 0, and T acts on the pair through
T_Φ = ΣVΣᵀ:

    T(a + Σz) = ik·T_A(a + Σz) + Σ·(VΣᵀΣz)/(ik)

The products Σᵀa, ΛᵀΣ and P_ΛHΣ that vanish in exact arithmetic are
never formed, which keeps the operator usable down to k ≈ 1e-33 rad/m.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator

from meshes import TriangleMesh

from .discretization import SparseGramSolver, gram_dual_lambda_p, gram_lambda
from .errors import ConfigError
from .krylov import materialize, power_iteration
from .models import CurrentParts, EfieMatrices, Excitation, ScalingConstants
from .quasi_helmholtz import DEFAULT_LAPLACIAN_TOL, QuasiHelmholtzProjectors

logger = logging.getLogger(__name__)

OUTER_PROJECTORS = {"sigma", "g_sigma"}
SCALING_MODES = {"norm", "wavenumber"}


def _rows(v: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Scale the rows of a vector or column block by v."""
    return v.reshape(-1, *([1] * (x.ndim - 1))) * x


def _mean_free(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=0)


# ──────────────────────────────────────────────
# Mesh-dependent components
# ──────────────────────────────────────────────

@dataclass(eq=False)
class PreconditionerComponents:
    """Everything the preconditioner needs that does not depend on k."""
    mesh: TriangleMesh
    projectors: QuasiHelmholtzProjectors
    gram_lambda: SparseGramSolver    # G_λλ
    gram_dual: SparseGramSolver      # G_λ̃p
    areas: np.ndarray                # G_pp⁻¹ diagonal

    @classmethod
    def from_mesh(
        cls,
        mesh: TriangleMesh,
        laplacian_method: str = "cg",
        laplacian_tol: float = DEFAULT_LAPLACIAN_TOL,
    ) -> "PreconditionerComponents":
        return cls(
            mesh=mesh,
            projectors=QuasiHelmholtzProjectors(mesh, laplacian_method, laplacian_tol),
            gram_lambda=SparseGramSolver(gram_lambda(mesh), "G_λλ"),
            gram_dual=SparseGramSolver(gram_dual_lambda_p(mesh), "G_λ̃p"),
            areas=mesh.areas,
        )

    @property
    def loop(self):
        return self.projectors.loop

    @property
    def star(self):
        return self.projectors.star

    def loop_gram_term(self, x: np.ndarray) -> np.ndarray:
        """ΛG_λλ⁻¹Λᵀx."""
        return self.loop @ self.gram_lambda.solve(self.loop.T @ x)

    def cell_pinv(self, x: np.ndarray) -> np.ndarray:
        return self.projectors.cell_solver.apply(x)

    def middle_star_coefficients(self, w: np.ndarray) -> np.ndarray:
        """(ΣᵀΣ)⁺G_pp⁻¹w; P_mΣ y = Σ·middle_star_coefficients((ΣᵀΣ)⁺Σᵀy) without the 1/β²."""
        return self.cell_pinv(_rows(self.areas, w))


# ──────────────────────────────────────────────
# Scalings
# ──────────────────────────────────────────────

def _hermitian_operator(n: int, apply) -> LinearOperator:
    return LinearOperator((n, n), matvec=apply, matmat=apply, dtype=complex)


def estimate_scalings(
    blocks: EfieMatrices,
    components: PreconditionerComponents,
    mode: str = "norm",
    tol: float = 1e-3,
    maxit: int = 200,
    seed: int = 0,
) -> ScalingConstants:
    """
    α, β, γ from power-iteration norms of the EFIE parts as they enter T
    (ik·T_A and T_Φ/(ik)). The power iterations run on the k-free blocks T_A
    and T_Φ, so the k factors appear explicitly in the formulas below:

        α⁴ = k²·‖P_ΛH T_A† ΛG_λλ⁻¹Λᵀ T_A P_ΛH‖
        β⁴ = ‖P_Σ T_Φ† P_mΣ T_Φ P_Σ‖ / k²
        γ  = k²/α²·‖P_ΛH T_A† P_ΛH T_A P_ΛH‖

    mode="wavenumber" returns α = √k, β = 1/√k, γ = k.
    """
    if mode not in SCALING_MODES:
        raise ConfigError(f"unknown scaling mode {mode!r}; choices: {sorted(SCALING_MODES)}")
    k = blocks.k
    if not k > 0:
        raise ConfigError(f"scalings need k > 0, got {k}")
    if mode == "wavenumber":
        return ScalingConstants.from_wavenumber(k)

    T_A, V = blocks.T_A, blocks.V
    proj = components.projectors
    star = components.star
    n = blocks.n_unknowns

    def T_A_dagger(x):
        return np.conj(T_A @ np.conj(x))

    def loop_composite(x):
        y = T_A @ proj.project_lambda_h(x)
        return proj.project_lambda_h(T_A_dagger(components.loop_gram_term(y)))

    def star_composite(x):
        c = proj.star_coefficients(x)
        lap_c = star.T @ (star @ c)
        t = V @ lap_c                                        # T_Φ P_Σ x = Σ t
        m = components.middle_star_coefficients(_mean_free(t))   # P_mΣ Σt = Σ m
        u = np.conj(V @ np.conj(star.T @ (star @ m)))        # T_Φ† Σm = Σ u
        return star @ _mean_free(u)

    def harmonic_composite(x):
        y = T_A @ proj.project_lambda_h(x)
        return proj.project_lambda_h(T_A_dagger(proj.project_lambda_h(y)))

    results = {}
    for name, apply in (("loop", loop_composite), ("star", star_composite), ("harmonic", harmonic_composite)):
        results[name] = power_iteration(_hermitian_operator(n, apply), tol=tol, maxit=maxit, seed=seed)
        logger.debug("power iteration %s: %.6e after %d steps", name, results[name].value, results[name].iterations)

    alpha = (k * k * results["loop"].value) ** 0.25
    beta = (results["star"].value / (k * k)) ** 0.25
    gamma = k * k / (alpha * alpha) * results["harmonic"].value
    converged = all(r.converged for r in results.values())
    scalings = ScalingConstants(alpha, beta, gamma, mode="norm", converged=converged)
    logger.info("Scalings k=%.3e: alpha=%.4e beta=%.4e gamma=%.4e%s",
                k, alpha, beta, gamma, "" if converged else " (power iteration not converged)")
    return scalings


# ──────────────────────────────────────────────
# Operator
# ──────────────────────────────────────────────

class RfCmpOperator:
    """Hermitian positive definite RF-CMP system at one wavenumber."""

    def __init__(
        self,
        blocks: EfieMatrices,
        components: PreconditionerComponents,
        scalings: ScalingConstants,
        outer: str = "sigma",
    ):
        if outer not in OUTER_PROJECTORS:
            raise ConfigError(f"unknown outer projector {outer!r}; choices: {sorted(OUTER_PROJECTORS)}")
        if not blocks.k > 0:
            raise ConfigError(f"the preconditioned system needs k > 0, got {blocks.k}")
        self.blocks = blocks
        self.components = components
        self.scalings = scalings
        self.outer = outer
        self.k = blocks.k
        self.matvec_count = 0

    @property
    def size(self) -> int:
        return self.blocks.n_unknowns

    # ── projector pieces ───────────────────────

    @property
    def _proj(self) -> QuasiHelmholtzProjectors:
        return self.components.projectors

    def _outer_coefficients(self, x: np.ndarray) -> np.ndarray:
        """Cell coefficients c with P_out x = Σc."""
        if self.outer == "sigma":
            return self._proj.star_coefficients(x)
        return self.components.cell_pinv(self.components.gram_dual.solve(self.components.star.T @ x))

    def _outer_dagger_coefficients(self, a: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Cell coefficients c with P_outᵀ(a + Σz) = Σc."""
        c = self._proj.star_coefficients(a) + _mean_free(z)
        if self.outer == "sigma":
            return c
        return self.components.gram_dual.solve(c)

    def apply_PgSigma(self, x: np.ndarray) -> np.ndarray:
        """P_gΣ x = Σ(ΣᵀΣ)⁺G_λ̃p⁻¹Σᵀx."""
        c = self.components
        return c.star @ c.cell_pinv(c.gram_dual.solve(c.star.T @ x))

    def apply_Pm(self, x: np.ndarray) -> np.ndarray:
        s = self.scalings
        c = self.components
        star_part = c.star @ c.middle_star_coefficients(self._proj.star_coefficients(x))
        return (
            c.loop_gram_term(x) / s.alpha ** 2
            + self._proj.project_lambda_h(x) / s.gamma
            + star_part / s.beta ** 2
        )

    def apply_Po(self, x: np.ndarray) -> np.ndarray:
        s = self.scalings
        return self._proj.project_lambda_h(x) / s.alpha + 1j * (self.components.star @ self._outer_coefficients(x)) / s.beta

    def apply_Po_dagger(self, x: np.ndarray) -> np.ndarray:
        s = self.scalings
        z = np.zeros((self.components.mesh.n_cells,) + np.shape(x)[1:])
        return (
            self._proj.project_lambda_h(x) / s.alpha
            - 1j * (self.components.star @ self._outer_dagger_coefficients(x, z)) / s.beta
        )

    # ── split-form products ────────────────────

    def _apply_T(self, a: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """T(a + Σz) as a pair; a must satisfy Σᵀa = 0."""
        ik = 1j * self.k
        star = self.components.star
        y_a = ik * (self.blocks.T_A @ (a + star @ z))
        y_z = (self.blocks.V @ (star.T @ (star @ z))) / ik
        return y_a, y_z

    def _apply_T_dagger(self, a: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """T†(a + Σz) = conj(T)(a + Σz) as a pair; a must satisfy Σᵀa = 0."""
        star = self.components.star
        v = a + star @ z
        y_a = -1j * self.k * np.conj(self.blocks.T_A @ np.conj(v))
        y_z = np.conj(self.blocks.V @ np.conj(star.T @ (star @ z))) * (1j / self.k)
        return y_a, y_z

    def _apply_Pm_split(self, y_a: np.ndarray, y_z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """P_m(y_a + Σy_z) as a pair; y_a is unrestricted."""
        s = self.scalings
        c = self.components
        lam = c.loop_gram_term(y_a) / s.alpha ** 2 + self._proj.project_lambda_h(y_a) / s.gamma
        w = self._proj.star_coefficients(y_a) + _mean_free(y_z)
        return lam, c.middle_star_coefficients(w) / s.beta ** 2

    def _tail(self, y_a: np.ndarray, y_z: np.ndarray) -> np.ndarray:
        """P_o† T† P_m (y_a + Σy_z)."""
        s = self.scalings
        b, z = self._apply_Pm_split(y_a, y_z)
        a_t, z_t = self._apply_T_dagger(b, z)
        return (
            self._proj.project_lambda_h(a_t) / s.alpha
            - 1j * (self.components.star @ self._outer_dagger_coefficients(a_t, z_t)) / s.beta
        )

    def _apply_Po_split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = self.scalings
        return self._proj.project_lambda_h(x) / s.alpha, 1j * self._outer_coefficients(x) / s.beta

    def apply_system(self, x: np.ndarray) -> np.ndarray:
        """A x = P_o† T† P_m T P_o x."""
        x = np.asarray(x)
        self.matvec_count += 1 if x.ndim == 1 else x.shape[1]
        a, z = self._apply_Po_split(x)
        return self._tail(*self._apply_T(a, z))

    def apply_system_dense(self, x: np.ndarray) -> np.ndarray:
        """Literal composition with the dense T; reference for moderate k only."""
        T = self.blocks.combined()
        y = T @ self.apply_Po(x)
        y = self.apply_Pm(y)
        y = np.conj(T @ np.conj(y))
        return self.apply_Po_dagger(y)

    def build_rhs(self, excitation: Excitation) -> np.ndarray:
        """−P_o† T† P_m e."""
        gradient = excitation.gradient_or_zeros(self.components.mesh.n_cells)
        return -self._tail(excitation.remainder, gradient)

    def recover_current_parts(self, i: np.ndarray) -> CurrentParts:
        s = self.scalings
        return CurrentParts(
            solenoidal=self._proj.project_lambda_h(i) / s.alpha,
            nonsolenoidal=1j * (self.components.star @ self._outer_coefficients(i)) / s.beta,
        )

    def recover_current(self, i: np.ndarray) -> np.ndarray:
        """j = P_o i."""
        return self.recover_current_parts(i).total

    # ── handles ────────────────────────────────

    def as_linear_operator(self) -> LinearOperator:
        n = self.size
        return LinearOperator((n, n), matvec=self.apply_system, matmat=self.apply_system, dtype=complex)

    def materialize(self) -> np.ndarray:
        A = materialize(self.as_linear_operator())
        return 0.5 * (A + A.conj().T)


def hermiticity_defect(op: RfCmpOperator, pairs: int = 20, seed: int = 0) -> float:
    """max |x·Ay − conj(y·Ax)| / (‖x‖‖y‖‖A‖_est) over random complex pairs."""
    rng = np.random.default_rng(seed)
    n = op.size
    X = rng.standard_normal((n, pairs)) + 1j * rng.standard_normal((n, pairs))
    Y = rng.standard_normal((n, pairs)) + 1j * rng.standard_normal((n, pairs))
    AX, AY = op.apply_system(X), op.apply_system(Y)
    norm_est = max(np.linalg.norm(AX, axis=0).max() / np.linalg.norm(X, axis=0).max(), math.ulp(1.0))
    lhs = np.einsum("ij,ij->j", X.conj(), AY)
    rhs = np.conj(np.einsum("ij,ij->j", Y.conj(), AX))
    scale = np.linalg.norm(X, axis=0) * np.linalg.norm(Y, axis=0) * norm_est
    return float(np.max(np.abs(lhs - rhs) / scale))


def rayleigh_quotients(op: RfCmpOperator, samples: int = 20, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = op.size
    X = rng.standard_normal((n, samples)) + 1j * rng.standard_normal((n, samples))
    AX = op.apply_system(X)
    return np.einsum("ij,ij->j", X.conj(), AX).real / np.einsum("ij,ij->j", X.conj(), X).real


def build_rfcmp(
    blocks: EfieMatrices,
    components: PreconditionerComponents,
    scaling_mode: str = "norm",
    outer: str = "sigma",
    power_tol: float = 1e-3,
    power_maxit: int = 200,
    seed: int = 0,
    scale_factor: Optional[float] = None,
) -> RfCmpOperator:
    scalings = estimate_scalings(blocks, components, scaling_mode, power_tol, power_maxit, seed)
    if scale_factor is not None:
        scalings = scalings.rescaled(scale_factor)
    return RfCmpOperator(blocks, components, scalings, outer)
