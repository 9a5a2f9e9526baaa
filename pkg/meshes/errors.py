"""
Exceptions raised while building, loading or validating triangle meshes.
"""

from __future__ import annotations


class MeshError(ValueError):
    """Base class for every mesh problem (bad input, bad topology, bad geometry)."""


class MeshParseError(MeshError):
    """The mesh file could not be parsed."""


class NonManifoldError(MeshError):
    """An edge is not shared by exactly two cells."""

    def __init__(self, message: str, edge: tuple[int, int] | None = None):
        super().__init__(message)
        self.edge = edge


class OrientationError(MeshError):
    """Two cells traverse a shared edge in the same direction."""

    def __init__(self, message: str, edge_index: int):
        super().__init__(message)
        self.edge_index = edge_index


class TopologyError(MeshError):
    """Topology is inconsistent with a closed connected surface (odd χ, stray vertices, ...)."""


class DegenerateTriangleError(MeshError):
    """A cell has (numerically) zero area."""

    def __init__(self, message: str, cell_index: int):
        super().__init__(message)
        self.cell_index = cell_index
