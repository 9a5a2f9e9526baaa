"""
Closed triangle-surface meshes for the EFIE solver.
Generators, the OFF reader and refinement all return a validated TriangleMesh.
"""

from .base_mesh import (
    STATS_HEADER,
    MeshTopology,
    SphereProjection,
    TorusProjection,
    TriangleMesh,
)
from .errors import (
    DegenerateTriangleError,
    MeshError,
    MeshParseError,
    NonManifoldError,
    OrientationError,
    TopologyError,
)
from .generators import make_sphere, make_torus, refine_structured
from .off_io import load_mesh, write_off

# Mapping from mesh source names to builders
GENERATOR_MAP = {
    "sphere": make_sphere,
    "torus": make_torus,
    "off": load_mesh,
}


def get_generator(name: str):
    """
    Get the mesh builder registered under `name`.
    There is no fallback geometry: an unknown name is an error.
    """
    try:
        return GENERATOR_MAP[name]
    except KeyError:
        raise MeshError(f"unknown mesh source {name!r}; choices: {sorted(GENERATOR_MAP)}") from None


def genus(mesh: TriangleMesh) -> int:
    return mesh.genus()


def mesh_stats_row(mesh: TriangleMesh) -> str:
    return mesh.stats_row()


__all__ = [
    'TriangleMesh',
    'MeshTopology',
    'SphereProjection',
    'TorusProjection',
    'STATS_HEADER',
    'MeshError',
    'MeshParseError',
    'NonManifoldError',
    'OrientationError',
    'TopologyError',
    'DegenerateTriangleError',
    'make_sphere',
    'make_torus',
    'refine_structured',
    'load_mesh',
    'write_off',
    'genus',
    'mesh_stats_row',
    'get_generator',
    'GENERATOR_MAP',
]
