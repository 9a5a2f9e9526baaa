"""
Run configuration for the study harness.

A config file is flat `key = value` text; `#` starts a comment and lists
are comma-separated:

    mesh = sphere
    levels = 1, 2, 3
    frequencies = 1e-25, 1e-5, 1e6
    formulations = none, loop-star, rfcmp-impl

Command-line `--set key=value` overrides are applied on top.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from meshes import GENERATOR_MAP

from .errors import ConfigError
from .formulations import FORMULATION_MAP
from .krylov import DEFAULT_DENSE_CAP, DEFAULT_POWER_MAXIT, DEFAULT_POWER_TOL
from .models import HERMITIAN_FORMULATIONS
from .quadrature import QuadratureConfig
from .quasi_helmholtz import DEFAULT_LAPLACIAN_TOL, LAPLACIAN_METHODS

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-4
DEFAULT_FREQUENCIES = [1e6]
DEFAULT_LEVELS = [2]
DEFAULT_FORMULATIONS = ["none", "loop-star", "rfcmp-impl", "rfcmp-theory"]
DEFAULT_OUTPUT_DIR = "outputs/efie"
SOLVERS = {"", "cg", "cgs"}

TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


def _to_bool(raw: str) -> bool:
    word = raw.strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _split(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


# field annotation → parser for its text form
COERCERS = {
    "str": str.strip,
    "int": int,
    "float": float,
    "bool": _to_bool,
    "list[int]": lambda raw: [int(x) for x in _split(raw)],
    "list[float]": lambda raw: [float(x) for x in _split(raw)],
    "list[str]": _split,
}


@dataclass
class RunConfig:
    # mesh source
    mesh: str = "sphere"
    mesh_path: str = ""
    radius: float = 1.0
    major_radius: float = 2.0
    minor_radius: float = 0.5
    n_major: int = 16
    n_minor: int = 8
    levels: list[int] = field(default_factory=lambda: list(DEFAULT_LEVELS))

    # sweep / solve
    frequencies: list[float] = field(default_factory=lambda: list(DEFAULT_FREQUENCIES))
    formulations: list[str] = field(default_factory=lambda: list(DEFAULT_FORMULATIONS))
    formulation: str = "rfcmp-impl"
    solver: str = ""                 # empty: the formulation's default
    tol: float = DEFAULT_TOL
    maxit: int = 0                   # 0: 10·N
    amplitude: float = 1.0
    condition: bool = False          # dense κ alongside a solve
    angle_step: float = 1.0          # degrees, RCS cut

    # numerics
    laplacian_method: str = "cg"
    laplacian_tol: float = DEFAULT_LAPLACIAN_TOL
    power_tol: float = DEFAULT_POWER_TOL
    power_maxit: int = DEFAULT_POWER_MAXIT
    dense_cap: int = DEFAULT_DENSE_CAP
    seed: int = 0
    outer_degree: int = 5
    inner_degree: int = 5
    near_subdivisions: int = 2
    near_factor: float = 1.5

    # output
    output_dir: str = DEFAULT_OUTPUT_DIR
    timestamp: bool = True
    resume: bool = True
    dump_matrix: bool = False

    # ── construction ───────────────────────────

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        values: dict[str, str] = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
                key, value = line.split("=", 1)
                values[key.strip()] = value.strip()
        logger.debug("Read %d settings from %s", len(values), path)
        return cls().with_overrides(values)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """New config with `overrides` applied; string values are parsed by field type."""
        types = {f.name: f.type for f in dataclasses.fields(self)}
        changes = {}
        for key, value in overrides.items():
            key = key.strip().replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown setting {key!r}")
            if isinstance(value, str):
                try:
                    value = COERCERS[types[key]](value)
                except ValueError as e:
                    raise ConfigError(f"bad value for {key}: {e}") from None
            changes[key] = value
        return dataclasses.replace(self, **changes)

    # ── checks ─────────────────────────────────

    def validate(self) -> "RunConfig":
        if self.mesh not in GENERATOR_MAP:
            raise ConfigError(f"unknown mesh source {self.mesh!r}; choices: {sorted(GENERATOR_MAP)}")
        if self.mesh == "off" and not self.mesh_path:
            raise ConfigError("mesh = off needs mesh_path")
        if not self.levels or any(level < 0 for level in self.levels):
            raise ConfigError(f"levels must be a non-empty list of integers ≥ 0, got {self.levels}")
        if not self.frequencies:
            raise ConfigError("frequency list is empty")
        if any(not f > 0 for f in self.frequencies):
            raise ConfigError(f"frequencies must be > 0, got {self.frequencies}")
        for name in [*self.formulations, self.formulation]:
            if name not in FORMULATION_MAP:
                raise ConfigError(f"unknown formulation {name!r}; choices: {sorted(FORMULATION_MAP)}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; choices: cg, cgs")
        if self.solver == "cg" and self.formulation not in HERMITIAN_FORMULATIONS:
            raise ConfigError(f"cg needs a Hermitian positive definite system; {self.formulation!r} is not")
        if self.laplacian_method not in LAPLACIAN_METHODS:
            raise ConfigError(f"unknown laplacian_method {self.laplacian_method!r}")
        if not 0 < self.tol < 1:
            raise ConfigError(f"tol must lie in (0, 1), got {self.tol}")
        if self.maxit < 0 or self.dense_cap <= 0 or self.power_maxit <= 0:
            raise ConfigError("maxit, dense_cap and power_maxit must be positive")
        if not self.angle_step > 0:
            raise ConfigError(f"angle_step must be positive, got {self.angle_step}")
        self.quadrature().validate()
        return self

    # ── derived settings ───────────────────────

    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(
            outer_degree=self.outer_degree,
            inner_degree=self.inner_degree,
            near_subdivisions=self.near_subdivisions,
            near_factor=self.near_factor,
        )

    def formulation_options(self) -> dict:
        return {"power_tol": self.power_tol, "power_maxit": self.power_maxit, "seed": self.seed}

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_overrides(items: list[str]) -> dict[str, str]:
    """['tol=1e-6', 'levels=1,2'] → {'tol': '1e-6', 'levels': '1,2'}."""
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out
