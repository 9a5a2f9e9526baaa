"""
ASCII OFF reader / writer.

Accepted layout (comments start with '#', blank lines ignored):

    OFF
    n_vertices n_faces n_edges
    x y z                 (n_vertices lines)
    3 i j k               (n_faces lines, triangles only)

The counts may also follow the OFF keyword on the same line.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .base_mesh import TriangleMesh
from .errors import MeshParseError

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = {"off"}


def _content_lines(text: str) -> list[str]:
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    return lines


def load_mesh(path: str | Path, format: str = "off") -> TriangleMesh:
    """Load an OFF triangle mesh and validate it as a closed oriented manifold."""
    if format.lower() not in SUPPORTED_FORMATS:
        raise MeshParseError(f"unsupported mesh format {format!r}; supported: {sorted(SUPPORTED_FORMATS)}")

    path = Path(path)
    lines = _content_lines(path.read_text(encoding="utf-8"))
    if not lines or not lines[0].upper().startswith("OFF"):
        raise MeshParseError(f"{path}: missing OFF header")

    header = lines[0][3:].split()
    cursor = 1
    if not header:
        if len(lines) < 2:
            raise MeshParseError(f"{path}: missing counts line")
        header = lines[1].split()
        cursor = 2
    try:
        n_vertices, n_faces = int(header[0]), int(header[1])
    except (IndexError, ValueError) as e:
        raise MeshParseError(f"{path}: bad counts line {header!r}") from e

    body = lines[cursor:]
    if len(body) < n_vertices + n_faces:
        raise MeshParseError(
            f"{path}: expected {n_vertices} vertices and {n_faces} faces, found {len(body)} data lines"
        )

    try:
        vertices = np.array([[float(t) for t in line.split()[:3]] for line in body[:n_vertices]])
    except ValueError as e:
        raise MeshParseError(f"{path}: bad vertex line") from e
    if vertices.shape != (n_vertices, 3):
        raise MeshParseError(f"{path}: every vertex line needs 3 coordinates")

    cells = []
    for offset, line in enumerate(body[n_vertices:n_vertices + n_faces]):
        tokens = line.split()
        try:
            count = int(tokens[0])
            indices = [int(t) for t in tokens[1:1 + count]]
        except (IndexError, ValueError) as e:
            raise MeshParseError(f"{path}: bad face line {offset}: {line!r}") from e
        if count != 3 or len(indices) != 3:
            raise MeshParseError(f"{path}: face {offset} has {count} vertices; only triangles are supported")
        cells.append(indices)

    mesh = TriangleMesh(vertices, np.array(cells, dtype=np.int64), name=path.stem)
    logger.info("Loaded %s: N_V=%d N=%d N_C=%d", path.name, mesh.n_vertices, mesh.n_edges, mesh.n_cells)
    return mesh


def write_off(mesh: TriangleMesh, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write("OFF\n")
        f.write(f"{mesh.n_vertices} {mesh.n_cells} {mesh.n_edges}\n")
        for x, y, z in mesh.vertices:
            f.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.cells:
            f.write(f"3 {a} {b} {c}\n")
    return path
