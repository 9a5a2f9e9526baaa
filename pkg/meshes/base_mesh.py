"""
Base triangle-mesh class and the combinatorial topology derived from it.

A TriangleMesh is an oriented, closed, connected 2-manifold triangulation.
Edges are derived deterministically from the cells:

  • edge n = (v1, v2) with v1 < v2, edges sorted lexicographically
  • c⁺ is the cell whose boundary runs v1 → v2, c⁻ the one running v2 → v1
  • r⁺ / r⁻ are the free vertices of c⁺ / c⁻ (opposite edge n)

Every array is made read-only after validation so a mesh can be shared
freely between assembly, projector and post-processing code.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    DegenerateTriangleError,
    MeshError,
    NonManifoldError,
    OrientationError,
    TopologyError,
)


# ──────────────────────────────────────────────
# Constants
# ──────────────────────────────────────────────

STATS_HEADER = "n_vertices,n_edges,n_cells,genus,h_min,h_avg,h_max"

# relative to the squared longest edge
DEGENERATE_AREA_RTOL = 1e-12


# ──────────────────────────────────────────────
# Projection rules attached to curved generators
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class SphereProjection:
    """Push points radially onto a sphere."""
    radius: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        d = points - c
        return c + self.radius * d / np.linalg.norm(d, axis=1, keepdims=True)


@dataclass(frozen=True)
class TorusProjection:
    """Snap points to the nearest point of a z-axis torus."""
    major_radius: float
    minor_radius: float

    def __call__(self, points: np.ndarray) -> np.ndarray:
        x, y, z = points.T
        u = np.arctan2(y, x)
        v = np.arctan2(z, np.hypot(x, y) - self.major_radius)
        ring = self.major_radius + self.minor_radius * np.cos(v)
        return np.column_stack([ring * np.cos(u), ring * np.sin(u), self.minor_radius * np.sin(v)])


# ──────────────────────────────────────────────
# Topology
# ──────────────────────────────────────────────

@dataclass(eq=False)
class MeshTopology:
    """Incidence maps used by the dual Gram formula and the adjacency queries."""
    vertex_cells: sp.csr_matrix        # N_V × N_C, 1 where vertex v belongs to cell c
    cells_at_vertex: np.ndarray        # NoC(v)
    cell_vertices: np.ndarray          # VoC(c, i)
    edge_vertices: np.ndarray          # (N, 2)
    edge_adjacency: sp.csr_matrix      # N_C × N_C, symmetric 0/1 (shared edge)
    vertex_adjacency: sp.csr_matrix    # N_C × N_C, symmetric 0/1 (exactly one shared vertex)

    @classmethod
    def from_mesh(cls, mesh: "TriangleMesh") -> "MeshTopology":
        n_v, n_c = mesh.n_vertices, mesh.n_cells
        rows = mesh.cells.ravel()
        cols = np.repeat(np.arange(n_c), 3)
        vertex_cells = sp.csr_matrix(
            (np.ones(rows.size, dtype=np.int64), (rows, cols)), shape=(n_v, n_c)
        )
        shared = (vertex_cells.T @ vertex_cells).tocoo()
        off = shared.row != shared.col

        plus, minus = mesh.edge_cells.T
        edge_adj = sp.csr_matrix(
            (np.ones(2 * plus.size, dtype=np.int64),
             (np.concatenate([plus, minus]), np.concatenate([minus, plus]))),
            shape=(n_c, n_c),
        )
        one = off & (shared.data == 1)
        vertex_adj = sp.csr_matrix(
            (np.ones(int(one.sum()), dtype=np.int64), (shared.row[one], shared.col[one])),
            shape=(n_c, n_c),
        )
        return cls(
            vertex_cells=vertex_cells,
            cells_at_vertex=np.asarray(vertex_cells.sum(axis=1)).ravel(),
            cell_vertices=mesh.cells,
            edge_vertices=mesh.edges,
            edge_adjacency=edge_adj,
            vertex_adjacency=vertex_adj,
        )

    def noc(self, vertex: int) -> int:
        return int(self.cells_at_vertex[vertex])

    def voc(self, cell: int, i: int) -> int:
        return int(self.cell_vertices[cell, i])

    def relation(self, c: int, d: int) -> str:
        """One of 'identical', 'edge', 'vertex', 'disjoint'."""
        if c == d:
            return "identical"
        if self.edge_adjacency[c, d]:
            return "edge"
        if self.vertex_adjacency[c, d]:
            return "vertex"
        return "disjoint"


# ──────────────────────────────────────────────
# Mesh
# ──────────────────────────────────────────────

@dataclass(eq=False)
class TriangleMesh:
    """Closed oriented triangle mesh with derived edge incidence."""
    vertices: np.ndarray                     # (N_V, 3) meters
    cells: np.ndarray                        # (N_C, 3) counterclockwise w.r.t. the outward normal
    name: str = ""
    projection: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    # derived in __post_init__
    edges: np.ndarray = field(init=False, repr=False)               # (N, 2), v1 < v2
    edge_cells: np.ndarray = field(init=False, repr=False)          # (N, 2) [c⁺, c⁻]
    edge_free_vertices: np.ndarray = field(init=False, repr=False)  # (N, 2) [r⁺, r⁻]
    cell_edges: np.ndarray = field(init=False, repr=False)          # (N_C, 3), local edge j = (cells[c, j], cells[c, j+1])

    def __post_init__(self):
        self.vertices = np.array(self.vertices, dtype=float)
        self.cells = np.array(self.cells, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError(f"vertices must have shape (N_V, 3), got {self.vertices.shape}")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3 or len(self.cells) == 0:
            raise MeshError(f"cells must have shape (N_C, 3) with N_C > 0, got {self.cells.shape}")
        if self.cells.min() < 0 or self.cells.max() >= len(self.vertices):
            raise MeshError("a cell references a vertex index out of range")
        repeated = (
            (self.cells[:, 0] == self.cells[:, 1])
            | (self.cells[:, 1] == self.cells[:, 2])
            | (self.cells[:, 2] == self.cells[:, 0])
        )
        if repeated.any():
            c = int(np.flatnonzero(repeated)[0])
            raise DegenerateTriangleError(f"cell {c} repeats a vertex", cell_index=c)

        self._derive_edges()
        self._check_connectivity()

        for arr in (self.vertices, self.cells, self.edges, self.edge_cells,
                    self.edge_free_vertices, self.cell_edges):
            arr.setflags(write=False)

    def _derive_edges(self):
        n_v = len(self.vertices)
        tail = self.cells.ravel()
        head = np.roll(self.cells, -1, axis=1).ravel()
        lo, hi = np.minimum(tail, head), np.maximum(tail, head)

        keys, inverse, counts = np.unique(lo * n_v + hi, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        bad = np.flatnonzero(counts != 2)
        if bad.size:
            v1, v2 = divmod(int(keys[bad[0]]), n_v)
            raise NonManifoldError(
                f"edge ({v1}, {v2}) is used by {counts[bad[0]]} cells; a closed manifold needs exactly 2",
                edge=(v1, v2),
            )

        forward = tail < head
        n_forward = np.bincount(inverse, weights=forward, minlength=keys.size)
        bad = np.flatnonzero(n_forward != 1)
        if bad.size:
            e = int(bad[0])
            v1, v2 = divmod(int(keys[e]), n_v)
            raise OrientationError(
                f"edge {e} ({v1}, {v2}) is traversed twice in the same direction", edge_index=e
            )

        incidence = np.arange(tail.size)
        cell_of, local = np.divmod(incidence, 3)
        free = self.cells[cell_of, (local + 2) % 3]

        n_edges = keys.size
        edge_cells = np.empty((n_edges, 2), dtype=np.int64)
        free_vertices = np.empty((n_edges, 2), dtype=np.int64)
        edge_cells[inverse[forward], 0] = cell_of[forward]
        edge_cells[inverse[~forward], 1] = cell_of[~forward]
        free_vertices[inverse[forward], 0] = free[forward]
        free_vertices[inverse[~forward], 1] = free[~forward]

        self.edges = np.column_stack(np.divmod(keys, n_v)).astype(np.int64)
        self.edge_cells = edge_cells
        self.edge_free_vertices = free_vertices
        self.cell_edges = inverse.reshape(-1, 3).astype(np.int64)

    def _check_connectivity(self):
        used = np.zeros(len(self.vertices), dtype=bool)
        used[self.cells.ravel()] = True
        if not used.all():
            raise TopologyError(f"{int((~used).sum())} vertices are not referenced by any cell")
        plus, minus = self.edge_cells.T
        graph = sp.coo_matrix((np.ones(plus.size), (plus, minus)), shape=(self.n_cells,) * 2)
        n_comp, _ = connected_components(graph, directed=False)
        if n_comp != 1:
            raise TopologyError(f"surface has {n_comp} connected components; expected 1")

    # ── counts ─────────────────────────────────

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_cells

    def genus(self) -> int:
        chi = self.euler_characteristic
        if chi % 2:
            raise TopologyError(f"odd Euler characteristic {chi}; topology is corrupt")
        return (2 - chi) // 2

    # ── geometry ───────────────────────────────

    @cached_property
    def cell_points(self) -> np.ndarray:
        """(N_C, 3, 3) vertex coordinates per cell."""
        return self.vertices[self.cells]

    @cached_property
    def _cross(self) -> np.ndarray:
        p = self.cell_points
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        areas = 0.5 * np.linalg.norm(self._cross, axis=1)
        floor = DEGENERATE_AREA_RTOL * self.edge_lengths.max() ** 2
        bad = np.flatnonzero(areas <= floor)
        if bad.size:
            c = int(bad[0])
            raise DegenerateTriangleError(f"cell {c} has area {areas[c]:.3e}", cell_index=c)
        return areas

    @cached_property
    def normals(self) -> np.ndarray:
        return self._cross / (2.0 * self.areas[:, None])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.cell_points.mean(axis=1)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]], axis=1)

    @property
    def h(self) -> float:
        """Average edge length."""
        return float(self.edge_lengths.mean())

    @property
    def surface_area(self) -> float:
        return float(self.areas.sum())

    # ── RWG bookkeeping ────────────────────────

    @cached_property
    def rwg_local(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Per-cell view of the RWG functions living on each cell.

        Returns (edge_index, sign), both (N_C, 3): entry (c, i) is the edge
        opposite local vertex i and +1 / −1 if c is its plus / minus cell.
        On cell c that function is sign·(r − p_ci)/(2A_c).
        """
        edge_index = np.roll(self.cell_edges, -1, axis=1)
        sign = np.where(self.edge_cells[edge_index, 0] == np.arange(self.n_cells)[:, None], 1.0, -1.0)
        edge_index.setflags(write=False)
        sign.setflags(write=False)
        return edge_index, sign

    @cached_property
    def topology(self) -> MeshTopology:
        return MeshTopology.from_mesh(self)

    # ── reporting ──────────────────────────────

    def stats(self) -> dict:
        lengths = self.edge_lengths
        return {
            "n_vertices": self.n_vertices,
            "n_edges": self.n_edges,
            "n_cells": self.n_cells,
            "genus": self.genus(),
            "h_min": float(lengths.min()),
            "h_avg": float(lengths.mean()),
            "h_max": float(lengths.max()),
        }

    def stats_row(self) -> str:
        s = self.stats()
        return ",".join(
            f"{s[key]:.12e}" if isinstance(s[key], float) else str(s[key])
            for key in STATS_HEADER.split(",")
        )

    def content_hash(self) -> str:
        h = hashlib.md5()
        h.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.cells, dtype="<i8").tobytes())
        return h.hexdigest()
