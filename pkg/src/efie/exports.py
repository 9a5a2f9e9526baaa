"""
CSV tables, matrix dumps and current files written by the study harness.

Every CSV starts with a `# schema: <table> v<version>` line, then an
optional `# generated: <UTC time>` line, then the column header. Floats are
written as %.12e so that reruns produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

from meshes import STATS_HEADER, TriangleMesh

from .models import FarFieldCut

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

SPECTRUM_HEADER = [
    "mesh", "level", "n_unknowns", "spectral_index", "frequency_hz",
    "formulation", "condition_number", "status",
]
SOLVE_HEADER = [
    "mesh", "level", "frequency_hz", "formulation", "solver", "n_unknowns",
    "iterations", "converged", "final_residual", "matvec_count",
    "condition_number", "iteration_bound",
]
RCS_HEADER = ["theta_deg", "rcs_dbsm_mom", "rcs_dbsm_mie", "abs_err_db"]
CURRENT_HEADER = ["edge", "real", "imag"]
RESIDUAL_HEADER = ["iteration", "residual"]
MESH_INFO_HEADER = ["mesh", "level", *STATS_HEADER.split(",")]


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12e}"
    return str(value)


def write_csv(
    path: str | Path,
    table: str,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    timestamp: bool = True,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# schema: {table} v{SCHEMA_VERSION}\n")
        if timestamp:
            f.write(f"# generated: {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(format_value(v) for v in row)
            count += 1
    logger.info("Wrote %d rows → %s", count, path)
    return path


def read_csv_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Header and raw rows of a file written by write_csv (comment lines skipped)."""
    with open(path, encoding="utf-8", newline="") as f:
        records = [row for row in csv.reader(line for line in f if not line.startswith("#")) if row]
    if not records:
        return [], []
    return records[0], records[1:]


# ──────────────────────────────────────────────
# Tables
# ──────────────────────────────────────────────

def write_far_field_csv(path: str | Path, cut: FarFieldCut, timestamp: bool = True) -> Path:
    return write_csv(path, "rcs", RCS_HEADER, cut.to_rows(), timestamp)


def write_current(path: str | Path, j: np.ndarray, timestamp: bool = True) -> Path:
    j = np.asarray(j, dtype=complex)
    rows = ([n, float(v.real), float(v.imag)] for n, v in enumerate(j))
    return write_csv(path, "current", CURRENT_HEADER, rows, timestamp)


def read_current(path: str | Path) -> np.ndarray:
    _, rows = read_csv_rows(path)
    return np.array([complex(float(r[1]), float(r[2])) for r in rows])


# ──────────────────────────────────────────────
# Matrix dumps
# ──────────────────────────────────────────────

def write_matrix_market(path: str | Path, matrix, comment: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not sp.issparse(matrix):
        matrix = np.asarray(matrix)
    scipy.io.mmwrite(str(path), matrix, comment=comment)
    # mmwrite appends .mtx when missing
    return path if path.suffix == ".mtx" else path.with_name(path.name + ".mtx")


def write_dense_dump(
    path: str | Path,
    matrix: np.ndarray,
    k: float,
    mesh: Optional[TriangleMesh] = None,
) -> tuple[Path, Path]:
    """Row-major little-endian complex128 bytes plus a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(matrix, dtype="<c16")
    data.tofile(path)
    sidecar = path.with_suffix(path.suffix + ".json")
    meta = {
        "shape": list(data.shape),
        "dtype": "complex128",
        "byte_order": "little",
        "layout": "row-major",
        "k": float(k),
        "mesh": mesh.name if mesh is not None else "",
        "mesh_md5": mesh.content_hash() if mesh is not None else "",
    }
    with open(sidecar, "w", encoding="utf-8") as f:
        json.dump(meta, f, ensure_ascii=False, indent=2)
    logger.info("Dumped %s matrix → %s", "×".join(map(str, data.shape)), path)
    return path, sidecar


def read_dense_dump(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".json"), encoding="utf-8") as f:
        meta = json.load(f)
    data = np.fromfile(path, dtype="<c16").reshape(meta["shape"])
    return data, meta
