"""Shared meshes and assembled blocks for the test suite."""

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from meshes import make_sphere, make_torus  # noqa: E402
from src.efie.assembly import EfieAssembler  # noqa: E402
from src.efie.preconditioner import PreconditionerComponents  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def sphere0():
    """Icosahedron: 12 vertices, 30 edges, 20 cells."""
    return make_sphere(1.0, 0)


@pytest.fixture(scope="session")
def sphere1():
    """42 vertices, 120 edges, 80 cells."""
    return make_sphere(1.0, 1)


@pytest.fixture(scope="session")
def torus_small():
    """32 vertices, 96 edges, 64 cells, genus 1."""
    return make_torus(2.0, 0.5, 8, 4)


@pytest.fixture(scope="session")
def assembler1(sphere1):
    return EfieAssembler(sphere1)


@pytest.fixture(scope="session")
def static1(assembler1):
    return assembler1.blocks(0.0)


@pytest.fixture(scope="session")
def components1(sphere1):
    return PreconditionerComponents.from_mesh(sphere1, laplacian_method="direct")


@pytest.fixture(scope="session")
def components0(sphere0):
    return PreconditionerComponents.from_mesh(sphere0, laplacian_method="direct")
