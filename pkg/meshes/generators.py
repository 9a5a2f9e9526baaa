"""
Mesh generators: subdivided icosahedron spheres, structured tori, and the
dyadic (1 → 4) refinement shared by both.

Usage:
    from meshes import make_sphere, make_torus, refine_structured
    sphere = make_sphere(1.0, subdivisions=2)      # 320 cells
    torus = make_torus(2.0, 0.5, 16, 8)             # genus 1
    finer = refine_structured(torus)                # projection rule inherited
"""

from __future__ import annotations

import logging

import numpy as np

from .base_mesh import SphereProjection, TorusProjection, TriangleMesh
from .errors import MeshError

logger = logging.getLogger(__name__)

GOLDEN = (1.0 + 5.0 ** 0.5) / 2.0

ICOSAHEDRON_VERTICES = [
    (-1, GOLDEN, 0), (1, GOLDEN, 0), (-1, -GOLDEN, 0), (1, -GOLDEN, 0),
    (0, -1, GOLDEN), (0, 1, GOLDEN), (0, -1, -GOLDEN), (0, 1, -GOLDEN),
    (GOLDEN, 0, -1), (GOLDEN, 0, 1), (-GOLDEN, 0, -1), (-GOLDEN, 0, 1),
]

ICOSAHEDRON_CELLS = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def _orient_outward(vertices: np.ndarray, cells: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Flip cells of a star-shaped polyhedron whose normal points inward."""
    p = vertices[cells]
    normal = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    inward = np.einsum("ij,ij->i", normal, p.mean(axis=1) - center) < 0
    cells = cells.copy()
    cells[inward] = cells[inward][:, [0, 2, 1]]
    return cells


def refine_structured(mesh: TriangleMesh) -> TriangleMesh:
    """Split every cell into four through its edge midpoints."""
    n_v = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    if mesh.projection is not None:
        midpoints = mesh.projection(midpoints)
    vertices = np.vstack([mesh.vertices, midpoints])

    a, b, c = mesh.cells.T
    mid = n_v + mesh.cell_edges          # local edge j joins cells[:, j] and cells[:, j+1]
    m_ab, m_bc, m_ca = mid.T
    cells = np.concatenate([
        np.column_stack([a, m_ab, m_ca]),
        np.column_stack([m_ab, b, m_bc]),
        np.column_stack([m_ca, m_bc, c]),
        np.column_stack([m_ab, m_bc, m_ca]),
    ])
    refined = TriangleMesh(vertices, cells, name=f"{mesh.name}/r", projection=mesh.projection)
    logger.debug("Refined %s: %d → %d cells", mesh.name, mesh.n_cells, refined.n_cells)
    return refined


def make_sphere(radius: float = 1.0, subdivisions: int = 0) -> TriangleMesh:
    """Icosahedron subdivided `subdivisions` times and projected to the sphere."""
    if radius <= 0:
        raise MeshError(f"sphere radius must be positive, got {radius}")
    if subdivisions < 0:
        raise MeshError(f"subdivisions must be ≥ 0, got {subdivisions}")

    projection = SphereProjection(float(radius))
    vertices = projection(np.asarray(ICOSAHEDRON_VERTICES, dtype=float))
    cells = _orient_outward(vertices, np.asarray(ICOSAHEDRON_CELLS), np.zeros(3))
    mesh = TriangleMesh(vertices, cells, name=f"sphere-r{radius:g}", projection=projection)
    for _ in range(subdivisions):
        mesh = refine_structured(mesh)
    mesh.name = f"sphere-r{radius:g}-L{subdivisions}"
    return mesh


def make_torus(
    major_radius: float = 2.0,
    minor_radius: float = 0.5,
    n_major: int = 16,
    n_minor: int = 8,
) -> TriangleMesh:
    """Structured torus around the z axis: each (u, v) grid quad split into two cells."""
    if not 0 < minor_radius < major_radius:
        raise MeshError(
            f"need 0 < minor_radius < major_radius, got {minor_radius}, {major_radius}"
        )
    if n_major < 3 or n_minor < 3:
        raise MeshError(f"n_major and n_minor must be ≥ 3, got {n_major}, {n_minor}")

    u = 2.0 * np.pi * np.arange(n_major) / n_major
    v = 2.0 * np.pi * np.arange(n_minor) / n_minor
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major_radius + minor_radius * np.cos(vv)
    vertices = np.column_stack([
        (ring * np.cos(uu)).ravel(),
        (ring * np.sin(uu)).ravel(),
        (minor_radius * np.sin(vv)).ravel(),
    ])

    i, j = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    i, j = i.ravel(), j.ravel()
    i1, j1 = (i + 1) % n_major, (j + 1) % n_minor
    p00, p10 = i * n_minor + j, i1 * n_minor + j
    p11, p01 = i1 * n_minor + j1, i * n_minor + j1
    # (∂/∂u × ∂/∂v) points outward, so u-then-v traversal is counterclockwise
    cells = np.concatenate([
        np.column_stack([p00, p10, p11]),
        np.column_stack([p00, p11, p01]),
    ])
    return TriangleMesh(
        vertices,
        cells,
        name=f"torus-R{major_radius:g}-r{minor_radius:g}-{n_major}x{n_minor}",
        projection=TorusProjection(float(major_radius), float(minor_radius)),
    )
