"""
Loop/star incidence matrices, graph-Laplacian pseudo-inverses and the
quasi-Helmholtz projectors

    P_Σ  = Σ(ΣᵀΣ)⁺Σᵀ        P_ΛH = I − P_Σ
    P_Λ  = Λ(ΛᵀΛ)⁺Λᵀ        P_ΣH = I − P_Λ

applied matrix-free. Global loops are never constructed: on a genus-g
surface the harmonic part simply stays inside P_ΛH.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from meshes import TriangleMesh

from .errors import ConfigError, ConvergenceError
from .krylov import block_cg

logger = logging.getLogger(__name__)

DEFAULT_LAPLACIAN_TOL = 1e-14
LAPLACIAN_METHODS = {"cg", "direct", "dense"}


# ──────────────────────────────────────────────
# Incidence matrices
# ──────────────────────────────────────────────

def build_loop_matrix(mesh: TriangleMesh) -> sp.csr_matrix:
    """Λ[n, v1] = +1, Λ[n, v2] = −1 for edge n = (v1, v2)."""
    n = mesh.n_edges
    rows = np.repeat(np.arange(n), 2)
    cols = mesh.edges.ravel()
    data = np.tile(np.array([1, -1], dtype=np.int8), n)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, mesh.n_vertices), dtype=np.int8)


def build_star_matrix(mesh: TriangleMesh) -> sp.csr_matrix:
    """Σ[n, c⁺] = +1, Σ[n, c⁻] = −1."""
    n = mesh.n_edges
    rows = np.repeat(np.arange(n), 2)
    cols = mesh.edge_cells.ravel()
    data = np.tile(np.array([1, -1], dtype=np.int8), n)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, mesh.n_cells), dtype=np.int8)


@dataclass(eq=False)
class LoopStarMatrices:
    loop: sp.csr_matrix              # Λ, N × N_V, int8
    star: sp.csr_matrix              # Σ, N × N_C, int8

    @classmethod
    def from_mesh(cls, mesh: TriangleMesh) -> "LoopStarMatrices":
        return cls(build_loop_matrix(mesh), build_star_matrix(mesh))

    @property
    def vertex_laplacian(self) -> sp.csr_matrix:
        L = self.loop.astype(float)
        return (L.T @ L).tocsr()

    @property
    def cell_laplacian(self) -> sp.csr_matrix:
        S = self.star.astype(float)
        return (S.T @ S).tocsr()


# ──────────────────────────────────────────────
# Pseudo-inverse of a connected graph Laplacian
# ──────────────────────────────────────────────

def _mean_free(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=0)


@dataclass(eq=False)
class LaplacianPinvSolver:
    """
    y = L⁺x for a connected graph Laplacian L (null space = constants).

    method:
      cg      deflated Jacobi-preconditioned CG, every column at once
      direct  sparse LU of L grounded at node 0, then mean removal
      dense   SVD-based pseudo-inverse (small graphs)
    """
    laplacian: sp.csr_matrix
    method: str = "cg"
    tol: float = DEFAULT_LAPLACIAN_TOL
    maxit: Optional[int] = None
    name: str = ""

    _inv_diag: Optional[np.ndarray] = field(init=False, default=None, repr=False)
    _lu: object = field(init=False, default=None, repr=False)
    _pinv: Optional[np.ndarray] = field(init=False, default=None, repr=False)

    def __post_init__(self):
        if self.method not in LAPLACIAN_METHODS:
            raise ConfigError(f"unknown Laplacian method {self.method!r}; choices: {sorted(LAPLACIAN_METHODS)}")
        self.laplacian = sp.csr_matrix(self.laplacian, dtype=float)
        self._inv_diag = 1.0 / self.laplacian.diagonal()
        if self.method == "direct":
            self._lu = splu(sp.csc_matrix(self.laplacian[1:, 1:]))
        elif self.method == "dense":
            self._pinv = scipy.linalg.pinvh(self.laplacian.toarray())

    @property
    def size(self) -> int:
        return self.laplacian.shape[0]

    def _jacobi(self, r: np.ndarray) -> np.ndarray:
        return r * self._inv_diag.reshape(-1, *([1] * (r.ndim - 1)))

    def _grounded_solve(self, b: np.ndarray) -> np.ndarray:
        y = np.zeros(b.shape, dtype=float)
        y[1:] = self._lu.solve(np.ascontiguousarray(b[1:]))
        return y

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        b = _mean_free(x)
        if self.method == "dense":
            return self._pinv @ b
        if self.method == "direct":
            if np.iscomplexobj(b):
                y = self._grounded_solve(b.real) + 1j * self._grounded_solve(b.imag)
            else:
                y = self._grounded_solve(b.astype(float))
            return _mean_free(y)

        y, iterations, residual = block_cg(
            self.laplacian, b, tol=self.tol, maxit=self.maxit, preconditioner=self._jacobi
        )
        worst = float(np.max(residual)) if np.size(residual) else 0.0
        if worst > self.tol:
            raise ConvergenceError(f"{self.name or 'Laplacian'} pseudo-inverse did not converge in {iterations} iterations", worst)
        return _mean_free(y)


def pinv_apply(solver: LaplacianPinvSolver, x: np.ndarray) -> np.ndarray:
    return solver.apply(x)


# ──────────────────────────────────────────────
# Projectors
# ──────────────────────────────────────────────

class QuasiHelmholtzProjectors:
    """Matrix-free quasi-Helmholtz projectors; inputs may be vectors or column blocks."""

    def __init__(
        self,
        mesh: TriangleMesh,
        method: str = "cg",
        tol: float = DEFAULT_LAPLACIAN_TOL,
        matrices: Optional[LoopStarMatrices] = None,
    ):
        self.mesh = mesh
        self.matrices = matrices or LoopStarMatrices.from_mesh(mesh)
        self.loop = self.matrices.loop.astype(float).tocsr()
        self.star = self.matrices.star.astype(float).tocsr()
        self.vertex_solver = LaplacianPinvSolver(self.matrices.vertex_laplacian, method, tol, name="ΛᵀΛ")
        self.cell_solver = LaplacianPinvSolver(self.matrices.cell_laplacian, method, tol, name="ΣᵀΣ")
        logger.debug("Projectors ready: N=%d N_V=%d N_C=%d method=%s",
                     mesh.n_edges, mesh.n_vertices, mesh.n_cells, method)

    @property
    def size(self) -> int:
        return self.mesh.n_edges

    def star_coefficients(self, x: np.ndarray) -> np.ndarray:
        """(ΣᵀΣ)⁺Σᵀx, so that P_Σx = Σ·star_coefficients(x)."""
        return self.cell_solver.apply(self.star.T @ x)

    def loop_coefficients(self, x: np.ndarray) -> np.ndarray:
        return self.vertex_solver.apply(self.loop.T @ x)

    def project_sigma(self, x: np.ndarray) -> np.ndarray:
        return self.star @ self.star_coefficients(x)

    def project_lambda_h(self, x: np.ndarray) -> np.ndarray:
        return x - self.project_sigma(x)

    def project_lambda(self, x: np.ndarray) -> np.ndarray:
        return self.loop @ self.loop_coefficients(x)

    def project_sigma_h(self, x: np.ndarray) -> np.ndarray:
        return x - self.project_lambda(x)


# ──────────────────────────────────────────────
# Trace estimates
# ──────────────────────────────────────────────

def randomized_trace(op: Callable[[np.ndarray], np.ndarray], n: int, samples: int = 64, seed: int = 0) -> float:
    """Hutchinson estimate with Rademacher sign vectors, applied as one block."""
    rng = np.random.default_rng(seed)
    Z = rng.choice([-1.0, 1.0], size=(n, samples))
    return float(np.einsum("ij,ij->", Z, np.real(op(Z))) / samples)


def dense_trace(op: Callable[[np.ndarray], np.ndarray], n: int) -> float:
    return float(np.trace(np.real(op(np.eye(n)))))
