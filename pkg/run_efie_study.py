#!/usr/bin/env python3
"""
EFIE study runner: mesh statistics, condition-number sweeps, scattering
solves and bistatic RCS comparisons against the Mie series.

Actions:
  mesh-info  — vertex/edge/cell counts, genus and edge lengths per level
  spectrum   — dense condition number per (level, frequency, formulation)
  solve      — plane-wave solve, current and residual history per frequency
  rcs        — solve, then E-plane bistatic RCS vs Mie (sphere only)

Usage:
    # Frequency sweep on a level-2 sphere
    python3 run_efie_study.py spectrum --set levels=2 --set frequencies=1e-25,1e-15,1e-5,1,1e3,1e6

    # Refinement sweep at 1 MHz (resumes from the JSONL checkpoint)
    python3 run_efie_study.py spectrum --set levels=1,2,3

    # Torus sweep from a config file, starting over
    python3 run_efie_study.py spectrum --config torus.cfg --no-resume

    # RF-CMP + CG solve, with the dense condition number and CG bound
    python3 run_efie_study.py solve --set formulation=rfcmp-impl --set condition=true

    # RCS at 1 MHz and in the static limit
    python3 run_efie_study.py rcs --set levels=3 --set frequencies=1e6,1e-25

    # Mie reference only
    python3 run_efie_study.py rcs --mie-only --set frequencies=1e6

Exit codes: 0 success, 2 configuration or mesh error, 3 numerical failure
(including a solve that did not converge), 4 I/O error.
"""

import argparse
import logging
import sys
from pathlib import Path

# Ensure project root importable
ROOT = Path(__file__).resolve().parent
sys.path.insert(0, str(ROOT))

from meshes import MeshError
from src.efie.config import RunConfig, parse_overrides
from src.efie.errors import ConfigError, NumericalError
from src.efie.models import EXIT_CODES
from src.efie.study import run_mesh_info, run_rcs, run_solve, run_spectrum

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s %(levelname)s %(message)s",
    datefmt="%H:%M:%S",
)
logger = logging.getLogger(__name__)

ACTIONS = ["mesh-info", "spectrum", "solve", "rcs"]


# ──────────────────────────────────────
# Config
# ──────────────────────────────────────

def build_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = parse_overrides(args.set)
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if args.no_timestamp:
        overrides["timestamp"] = False
    if args.resume is not None:
        overrides["resume"] = args.resume
    return config.with_overrides(overrides).validate()


def run_action(action: str, config: RunConfig, mie_only: bool = False) -> int:
    if action == "mesh-info":
        run_mesh_info(config)
        return EXIT_CODES["ok"]

    if action == "spectrum":
        run_spectrum(config)
        return EXIT_CODES["ok"]

    if action == "solve":
        outcomes = run_solve(config)
        failed = [o for o in outcomes if not o.converged]
    else:
        results = run_rcs(config, mie_only=mie_only)
        failed = [r for r in results if r.get("converged") is False]

    if failed:
        logger.error("%d of the solves did not converge", len(failed))
        return EXIT_CODES["numerical"]
    return EXIT_CODES["ok"]


# ──────────────────────────────────────
# CLI
# ──────────────────────────────────────

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="EFIE / RF-CMP study runner",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python3 run_efie_study.py mesh-info --set mesh=torus --set levels=0,1,2
  python3 run_efie_study.py spectrum --set frequencies=1e-25,1e6 --no-timestamp
  python3 run_efie_study.py solve --set formulation=none --set solver=cgs
  python3 run_efie_study.py rcs --mie-only
        """,
    )
    parser.add_argument("action", choices=ACTIONS,
                        help="mesh-info, spectrum, solve or rcs")
    parser.add_argument("--config", type=str, default=None,
                        help="Flat key = value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="Override one setting (repeatable), e.g. --set levels=1,2,3")
    parser.add_argument("--output-dir", type=str, default=None,
                        help="Directory for CSV / JSON outputs (default: outputs/efie)")
    parser.add_argument("--no-timestamp", action="store_true",
                        help="Omit the generated-at line from CSV headers")
    parser.add_argument("--resume", action=argparse.BooleanOptionalAction, default=None,
                        help="Reuse (or discard with --no-resume) the sweep checkpoint")
    parser.add_argument("--mie-only", action="store_true",
                        help="rcs: write the Mie reference without solving")
    parser.add_argument("--verbose", action="store_true",
                        help="DEBUG logging")

    args = parser.parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        config = build_config(args)
        return run_action(args.action, config, mie_only=args.mie_only)
    except (ConfigError, MeshError) as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CODES["config"]
    except NumericalError as e:
        logger.error("Numerical failure: %s", e)
        return EXIT_CODES["numerical"]
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
