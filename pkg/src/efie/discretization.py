"""
Primal basis families and their Gram matrices.

  • RWG f_n (edges, unnormalized): (r − r⁺)/(2A⁺) on c⁺, (r⁻ − r)/(2A⁻) on c⁻
  • nodal λ_v (vertices): piecewise linear hat functions
  • patch p_c (cells): 1/A_c on c

The mixed Gram G_λ̃p between dual hat functions and patches is evaluated
from its closed form in the vertex valences; the dual functions themselves
are never built.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from meshes import MeshTopology, TriangleMesh

from .quadrature import QuadratureConfig, rule_for_degree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BasisDescriptor:
    family: str                      # "RWG", "nodal", "patch"
    count: int
    normalization: str


def basis_descriptors(mesh: TriangleMesh) -> dict[str, BasisDescriptor]:
    return {
        "RWG": BasisDescriptor("RWG", mesh.n_edges, "unnormalized; divergence ±1/A on c±"),
        "nodal": BasisDescriptor("nodal", mesh.n_vertices, "λ_v(v) = 1"),
        "patch": BasisDescriptor("patch", mesh.n_cells, "1/A_c on cell c"),
    }


def rwg_divergence(mesh: TriangleMesh) -> np.ndarray:
    """(N, 2) surface divergence of f_n on [c⁺, c⁻]."""
    areas = mesh.areas
    return np.column_stack([1.0 / areas[mesh.edge_cells[:, 0]], -1.0 / areas[mesh.edge_cells[:, 1]]])


def _local_to_sparse(local: np.ndarray, index: np.ndarray, shape: tuple[int, int]) -> sp.csr_matrix:
    """Scatter per-cell 3×3 blocks local[c, i, j] to (index[c, i], index[c, j])."""
    rows = np.broadcast_to(index[:, :, None], local.shape)
    cols = np.broadcast_to(index[:, None, :], local.shape)
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()


def gram_ff(mesh: TriangleMesh, quad: Optional[QuadratureConfig] = None) -> sp.csr_matrix:
    """[G_ff]_mn = ∫ f_m · f_n dS."""
    quad = (quad or QuadratureConfig()).validate()
    rule = rule_for_degree(quad.gram_degree)
    points = rule.map_to(mesh.cell_points)                     # (N_C, Q, 3)
    weights = rule.scaled_weights(mesh.areas)                  # (N_C, Q)
    rel = points[:, :, None, :] - mesh.cell_points[:, None, :, :]
    local = np.einsum("cq,cqid,cqjd->cij", weights, rel, rel)

    edge_index, sign = mesh.rwg_local
    scale = sign / (2.0 * mesh.areas[:, None])
    local *= scale[:, :, None] * scale[:, None, :]
    return _local_to_sparse(local, edge_index, (mesh.n_edges, mesh.n_edges))


def gram_lambda(mesh: TriangleMesh) -> sp.csr_matrix:
    """[G_λλ]_mn = ∫ λ_m λ_n dS (linear mass matrix: A/6 diagonal, A/12 off-diagonal)."""
    local = mesh.areas[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
    return _local_to_sparse(local, mesh.cells, (mesh.n_vertices, mesh.n_vertices))


def gram_pp(mesh: TriangleMesh) -> sp.csr_matrix:
    """[G_pp] = diag(1/A_c)."""
    return sp.diags(1.0 / mesh.areas).tocsr()


def gram_dual_lambda_p(mesh: TriangleMesh, topology: Optional[MeshTopology] = None) -> sp.csr_matrix:
    """
    Mixed Gram [G_λ̃p]_mn = (λ̃_m, p_n) from the closed form in NoC:

        identical     (2/18)(9/2 + Σ_i 1/NoC(VoC(m, i)))
        shared edge   (2/18)(1/2 + 1/NoC(e⁺) + 1/NoC(e⁻))
        shared vertex (2/18)(1/NoC(v))
        otherwise     0

    Every case is (2/18)·(Σ over shared vertices of 1/NoC) plus a constant
    depending on the relation, which is how it is assembled here.
    """
    topo = topology or mesh.topology
    incidence = topo.vertex_cells.astype(float)
    shared = incidence.T @ sp.diags(1.0 / topo.cells_at_vertex) @ incidence
    gram = (2.0 / 18.0) * (
        shared
        + 0.5 * topo.edge_adjacency.astype(float)
        + 4.5 * sp.identity(mesh.n_cells, format="csr")
    )
    return gram.tocsr()


def laplace_beltrami(mesh: TriangleMesh) -> sp.csr_matrix:
    """
    [Δ]_mn = ∫ ∇λ_m · ∇λ_n dS.

    With e_i the edge opposite local vertex i, ∇λ_i = n × e_i / (2A), so the
    local stiffness is e_i·e_j / (4A) (the cotangent formula in edge form).
    """
    p = mesh.cell_points
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    local = np.einsum("cid,cjd->cij", e, e) / (4.0 * mesh.areas[:, None, None])
    return _local_to_sparse(local, mesh.cells, (mesh.n_vertices, mesh.n_vertices))


def mean_moment(mesh: TriangleMesh) -> np.ndarray:
    """G_λλ·1: the vertex moments, each 1/3 of the area of the incident cells."""
    return np.asarray(gram_lambda(mesh) @ np.ones(mesh.n_vertices)).ravel()


def deflected_laplacian(mesh: TriangleMesh) -> np.ndarray:
    """Δ̂ = Δ + (G_λλ1)(G_λλ1)ᵀ, dense symmetric positive definite."""
    g = mean_moment(mesh)
    return laplace_beltrami(mesh).toarray() + np.outer(g, g)


class SparseGramSolver:
    """Sparse LU of a real Gram matrix; solves complex and multi-column data."""

    def __init__(self, matrix: sp.spmatrix, name: str = ""):
        self.name = name
        self.shape = matrix.shape
        self._lu = splu(sp.csc_matrix(matrix, dtype=float))

    def solve(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if np.iscomplexobj(x):
            return self._lu.solve(np.ascontiguousarray(x.real)) + 1j * self._lu.solve(np.ascontiguousarray(x.imag))
        return self._lu.solve(np.ascontiguousarray(x, dtype=float))
