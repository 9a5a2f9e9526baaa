"""
Study harness behind run_efie_study.py: mesh info, condition-number sweeps,
scattering solves and RCS comparisons against the Mie series.

Sweep rows are appended to a JSONL checkpoint as soon as they finish, so an
interrupted sweep resumes where it stopped. A failing row is recorded with
status "error" and the sweep continues.
"""

from __future__ import annotations

import json
import logging
import statistics
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from tqdm import tqdm

from meshes import TriangleMesh, load_mesh, make_sphere, make_torus, refine_structured

from .assembly import EfieAssembler, excitation_planewave
from .config import RunConfig
from .errors import ConfigError, EfieError, NumericalError
from .exports import (
    MESH_INFO_HEADER,
    SOLVE_HEADER,
    SPECTRUM_HEADER,
    write_csv,
    write_current,
    write_dense_dump,
    write_far_field_csv,
    write_matrix_market,
)
from .formulations import BaseFormulation, get_formulation
from .krylov import cg_iteration_bound, cg_solve, cgs_solve, write_residual_history
from .models import DEFAULT_SOLVER, CurrentParts, SolveReport, SpectrumRow, wavenumber
from .postprocess import (
    INCIDENT_DIRECTION,
    INCIDENT_POLARIZATION,
    build_far_field_cut,
    cut_angles,
    rcs_error,
)
from .preconditioner import PreconditionerComponents

logger = logging.getLogger(__name__)

SPECTRUM_JSONL = "spectrum_rows.jsonl"
SPECTRUM_CSV = "spectrum.csv"
SPECTRUM_STATS_JSON = "stats_spectrum.json"
MESH_INFO_CSV = "mesh_info.csv"
SOLVE_CSV = "solve_report.csv"
RCS_STATS_JSON = "stats_rcs.json"

# Failures confined to one sweep row
ROW_ERRORS = (EfieError, ArithmeticError, np.linalg.LinAlgError)


# ──────────────────────────────────────────────
# Meshes
# ──────────────────────────────────────────────

def mesh_label(config: RunConfig) -> str:
    if config.mesh == "sphere":
        return f"sphere-r{config.radius:g}"
    if config.mesh == "torus":
        return f"torus-R{config.major_radius:g}-r{config.minor_radius:g}-{config.n_major}x{config.n_minor}"
    return Path(config.mesh_path).stem


def build_mesh(config: RunConfig, level: int) -> TriangleMesh:
    """Base mesh of the configured source refined `level` times."""
    if config.mesh == "sphere":
        mesh = make_sphere(config.radius, level)
    else:
        if config.mesh == "torus":
            mesh = make_torus(config.major_radius, config.minor_radius, config.n_major, config.n_minor)
        else:
            mesh = load_mesh(config.mesh_path)
        for _ in range(level):
            mesh = refine_structured(mesh)
    mesh.name = f"{mesh_label(config)}-L{level}"
    return mesh


@dataclass(eq=False)
class MeshContext:
    """Wavenumber-independent state of one refinement level."""
    level: int
    mesh: TriangleMesh
    assembler: EfieAssembler
    components: PreconditionerComponents

    @classmethod
    def build(cls, config: RunConfig, level: int) -> "MeshContext":
        mesh = build_mesh(config, level)
        logger.info("Mesh %s: N=%d N_V=%d N_C=%d h=%.4f", mesh.name, mesh.n_edges, mesh.n_vertices, mesh.n_cells, mesh.h)
        return cls(
            level=level,
            mesh=mesh,
            assembler=EfieAssembler(mesh, config.quadrature()),
            components=PreconditionerComponents.from_mesh(mesh, config.laplacian_method, config.laplacian_tol),
        )


# ──────────────────────────────────────────────
# Checkpoint
# ──────────────────────────────────────────────

def load_checkpoint(path: str | Path) -> dict[str, dict]:
    """Rows already written to the JSONL checkpoint, by row key."""
    done: dict[str, dict] = {}
    path = Path(path)
    if not path.exists():
        return done
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                continue
            try:
                row = SpectrumRow(**record)
            except TypeError:
                continue
            done[row.key] = record
    return done


def append_result(path: str | Path, record: dict):
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record, ensure_ascii=False) + "\n")


def _write_json(path: Path, data: dict):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2)


# ──────────────────────────────────────────────
# mesh-info
# ──────────────────────────────────────────────

def run_mesh_info(config: RunConfig) -> list[dict]:
    out = config.output_path
    out.mkdir(parents=True, exist_ok=True)
    infos = []
    for level in config.levels:
        mesh = build_mesh(config, level)
        infos.append({"mesh": mesh.name, "level": level, **mesh.stats()})
    header = MESH_INFO_HEADER
    write_csv(out / MESH_INFO_CSV, "mesh_info", header, ([info[h] for h in header] for info in infos), config.timestamp)

    print("\n" + "=" * 60)
    print("📐 MESH INFO")
    print("=" * 60)
    for info in infos:
        print(f"  {info['mesh']:28s} N_V={info['n_vertices']:6d} N={info['n_edges']:6d} "
              f"N_C={info['n_cells']:6d} g={info['genus']}  h={info['h_avg']:.4f}")
    print("=" * 60)
    return infos


# ──────────────────────────────────────────────
# spectrum
# ──────────────────────────────────────────────

def spectrum_keys(config: RunConfig) -> list[str]:
    label = mesh_label(config)
    return [
        f"{label}-L{level}|{level}|{frequency:.6e}|{name}"
        for level in config.levels
        for frequency in config.frequencies
        for name in config.formulations
    ]


def _spectrum_row(mesh: TriangleMesh, level: int, frequency: float, name: str) -> SpectrumRow:
    return SpectrumRow(
        mesh=mesh.name,
        level=level,
        n_unknowns=mesh.n_edges,
        spectral_index=1.0 / mesh.h,
        frequency_hz=frequency,
        formulation=name,
    )


def run_spectrum(config: RunConfig) -> list[SpectrumRow]:
    """Dense condition numbers for every (level, frequency, formulation)."""
    out = config.output_path
    out.mkdir(parents=True, exist_ok=True)
    checkpoint = out / SPECTRUM_JSONL
    if not config.resume and checkpoint.exists():
        checkpoint.unlink()

    done = load_checkpoint(checkpoint)
    keys = spectrum_keys(config)
    rows: dict[str, SpectrumRow] = {key: SpectrumRow(**done[key]) for key in keys if key in done}
    logger.info("Checkpoint: %d done, %d remaining", len(rows), len(keys) - len(rows))

    stats = Counter()
    pbar = tqdm(total=len(keys), initial=len(rows), desc="Spectrum", unit="row")
    label = mesh_label(config)
    for level in config.levels:
        level_keys = [key for key in keys if key.startswith(f"{label}-L{level}|")]
        if all(key in rows for key in level_keys):
            continue
        context = MeshContext.build(config, level)
        mesh = context.mesh

        for frequency in config.frequencies:
            pending = [
                name for name in config.formulations
                if f"{mesh.name}|{level}|{frequency:.6e}|{name}" not in rows
            ]
            if not pending:
                continue
            assembly_error = ""
            blocks = None
            try:
                blocks = context.assembler.blocks(wavenumber(frequency))
            except ROW_ERRORS as e:
                logger.warning("  Assembly failed L%d f=%.3e: %s", level, frequency, e)
                assembly_error = f"assembly: {e}"

            for name in pending:
                pbar.set_postfix_str(f"L{level} f={frequency:.1e} {name}")
                row = _spectrum_row(mesh, level, frequency, name)
                start = time.time()
                try:
                    if blocks is None:
                        raise NumericalError(assembly_error)
                    formulation = get_formulation(name)(blocks, context.components, **config.formulation_options())
                    row.condition_number = formulation.condition_number(config.dense_cap)
                except ROW_ERRORS as e:
                    logger.warning("  %s L%d f=%.3e: %s", name, level, frequency, e)
                    row.status = "error"
                    row.error = str(e)
                row.wall_time_s = time.time() - start
                stats[row.status] += 1
                rows[row.key] = row
                append_result(checkpoint, row.to_dict())
                pbar.update(1)
    pbar.close()

    ordered = [rows[key] for key in keys if key in rows]
    write_csv(
        out / SPECTRUM_CSV,
        "spectrum",
        SPECTRUM_HEADER,
        ([getattr(row, h) for h in SPECTRUM_HEADER] for row in ordered),
        config.timestamp,
    )
    summary = spectrum_stats(ordered)
    _write_json(out / SPECTRUM_STATS_JSON, summary)
    print_spectrum_stats(summary)
    logger.info("SWEEP COMPLETE: %d new rows (%s)", sum(stats.values()), dict(stats))
    return ordered


def spectrum_stats(rows: list[SpectrumRow]) -> dict:
    per_formulation = {}
    for name in dict.fromkeys(row.formulation for row in rows):
        values = [row.condition_number for row in rows if row.formulation == name and row.status == "ok"]
        entry = {"rows": sum(1 for row in rows if row.formulation == name), "ok": len(values)}
        if values:
            median = statistics.median(values)
            entry.update({
                "min": min(values),
                "max": max(values),
                "median": median,
                "max_over_median": max(values) / median,
                "max_over_min": max(values) / min(values),
            })
        per_formulation[name] = entry
    return {
        "total": len(rows),
        "errors": sum(1 for row in rows if row.status == "error"),
        "formulations": per_formulation,
    }


def print_spectrum_stats(summary: dict):
    total = summary["total"]
    print("\n" + "=" * 60)
    print("📊 CONDITION NUMBER SWEEP")
    print("=" * 60)
    print(f"  Total rows:           {total}")
    print(f"  Errors:               {summary['errors']}")
    for name, entry in summary["formulations"].items():
        print(f"\n  {name}:")
        if "median" not in entry:
            print(f"    no successful rows ({entry['rows']} attempted)")
            continue
        print(f"    κ min / median / max: {entry['min']:.3e} / {entry['median']:.3e} / {entry['max']:.3e}")
        print(f"    max/median:           {entry['max_over_median']:.3f}")
    print("=" * 60)


# ──────────────────────────────────────────────
# solve
# ──────────────────────────────────────────────

@dataclass(eq=False)
class SolveOutcome:
    mesh: TriangleMesh
    level: int
    frequency: float
    k: float
    formulation: str
    report: SolveReport
    parts: Optional[CurrentParts] = None
    iteration_bound: Optional[int] = None
    error: str = ""
    system: Optional[BaseFormulation] = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.report.converged and not self.error

    @property
    def tag(self) -> str:
        return f"L{self.level}_f{self.frequency:.3e}_{self.formulation}"

    def row(self) -> list:
        r = self.report
        return [
            self.mesh.name, self.level, self.frequency, self.formulation, r.solver,
            self.mesh.n_edges, r.iterations, self.converged, r.final_residual,
            r.matvec_count, r.condition_number, self.iteration_bound,
        ]


def solve_one(context: MeshContext, frequency: float, config: RunConfig) -> SolveOutcome:
    """Plane-wave solve at one frequency with the configured formulation."""
    mesh = context.mesh
    k = wavenumber(frequency)
    blocks = context.assembler.blocks(k)
    system = get_formulation(config.formulation)(blocks, context.components, **config.formulation_options())
    solver = config.solver or system.default_solver
    if solver == "cg" and not system.hermitian:
        raise ConfigError(f"cg needs a Hermitian positive definite system; {system.name!r} is not")

    excitation = excitation_planewave(
        mesh, INCIDENT_DIRECTION, INCIDENT_POLARIZATION, k, config.amplitude, config.quadrature()
    )
    rhs = system.rhs(excitation)
    solve = cg_solve if solver == "cg" else cgs_solve
    x, report = solve(system.operator(), rhs, tol=config.tol, maxit=config.maxit or None)
    logger.info("%s %s f=%.3e: %d iterations, residual %.3e, %s",
                system.name, solver, frequency, report.iterations, report.final_residual,
                "converged" if report.converged else "NOT converged")

    outcome = SolveOutcome(
        mesh=mesh, level=context.level, frequency=frequency, k=k, formulation=system.name,
        report=report, parts=system.current_parts(x), system=system,
    )
    if config.condition:
        report.condition_number = system.condition_number(config.dense_cap)
        if solver == "cg":
            outcome.iteration_bound = cg_iteration_bound(report.condition_number, config.tol)
            if report.converged and report.iterations > outcome.iteration_bound:
                logger.warning("CG used %d iterations, above the bound %d for κ=%.3e",
                               report.iterations, outcome.iteration_bound, report.condition_number)
    return outcome


def _failed_outcome(context: MeshContext, frequency: float, config: RunConfig, error: Exception) -> SolveOutcome:
    return SolveOutcome(
        mesh=context.mesh, level=context.level, frequency=frequency, k=wavenumber(frequency),
        formulation=config.formulation,
        report=SolveReport(solver=config.solver or DEFAULT_SOLVER[config.formulation], tolerance=config.tol),
        error=f"{type(error).__name__}: {error}",
    )


def run_solve(config: RunConfig) -> list[SolveOutcome]:
    out = config.output_path
    out.mkdir(parents=True, exist_ok=True)
    outcomes = []
    for level in config.levels:
        context = MeshContext.build(config, level)
        for frequency in config.frequencies:
            try:
                outcome = solve_one(context, frequency, config)
            except NumericalError as e:
                logger.warning("  Solve failed L%d f=%.3e: %s", level, frequency, e)
                outcomes.append(_failed_outcome(context, frequency, config, e))
                continue
            outcomes.append(outcome)
            write_current(out / f"current_{outcome.tag}.csv", outcome.parts.total, config.timestamp)
            write_residual_history(outcome.report, out / f"residuals_{outcome.tag}.csv", config.timestamp)
            if config.dump_matrix:
                write_dense_dump(out / f"system_{outcome.tag}.bin", outcome.system.dense_matrix(), outcome.k, context.mesh)
                write_matrix_market(out / f"T_{outcome.tag}.mtx", outcome.system.blocks.combined(),
                                    comment=f"EFIE T, k={outcome.k:.12e}")

    write_csv(out / SOLVE_CSV, "solve_report", SOLVE_HEADER, (o.row() for o in outcomes), config.timestamp)
    print_solve_stats(outcomes)
    return outcomes


def print_solve_stats(outcomes: list[SolveOutcome]):
    print("\n" + "=" * 60)
    print("🧮 SOLVES")
    print("=" * 60)
    for o in outcomes:
        status = "ok" if o.converged else (o.error or "not converged")
        print(f"  {o.tag:40s} it={o.report.iterations:5d} res={o.report.final_residual:.2e}  {status}")
    print("=" * 60)


# ──────────────────────────────────────────────
# rcs
# ──────────────────────────────────────────────

def run_rcs(config: RunConfig, mie_only: bool = False) -> list[dict]:
    """Bistatic RCS cuts for every (level, frequency), with the Mie series for spheres."""
    out = config.output_path
    out.mkdir(parents=True, exist_ok=True)
    theta = cut_angles(config.angle_step)
    radius = config.radius if config.mesh == "sphere" else None
    if mie_only and radius is None:
        raise ConfigError("the Mie reference needs mesh = sphere")

    results = []
    if mie_only:
        for frequency in config.frequencies:
            k = wavenumber(frequency)
            cut = build_far_field_cut(None, None, k, theta, radius=radius)
            path = write_far_field_csv(out / f"rcs_mie_f{frequency:.3e}.csv", cut, config.timestamp)
            results.append({"frequency_hz": frequency, "k": k, "path": str(path)})
    else:
        for level in config.levels:
            context = MeshContext.build(config, level)
            for frequency in config.frequencies:
                outcome = solve_one(context, frequency, config)
                cut = build_far_field_cut(
                    context.mesh, outcome.parts, outcome.k, theta,
                    amplitude=config.amplitude, radius=radius, quad=config.quadrature(),
                )
                path = write_far_field_csv(out / f"rcs_{outcome.tag}.csv", cut, config.timestamp)
                results.append({
                    "mesh": context.mesh.name,
                    "level": level,
                    "frequency_hz": frequency,
                    "k": outcome.k,
                    "formulation": outcome.formulation,
                    "iterations": outcome.report.iterations,
                    "converged": outcome.converged,
                    "error_percent": rcs_error(cut) if radius is not None else None,
                    "path": str(path),
                })

    _write_json(out / RCS_STATS_JSON, {"mie_only": mie_only, "cuts": results})
    print_rcs_stats(results)
    return results


def print_rcs_stats(results: list[dict]):
    print("\n" + "=" * 60)
    print("📡 BISTATIC RCS")
    print("=" * 60)
    for r in results:
        err = r.get("error_percent")
        err_text = f"{err:6.2f}% vs Mie" if err is not None else "reference only" if "mesh" not in r else "no reference"
        print(f"  {r.get('mesh', 'mie'):24s} f={r['frequency_hz']:.3e} Hz  {err_text}")
    print("=" * 60)
