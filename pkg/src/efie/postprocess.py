"""
Far fields and bistatic radar cross-sections from solved RWG currents, the
PEC-sphere Mie series used as reference, and curve error metrics.

Conventions (time dependence e^{−iωt}, current normalized with η):

    N(r̂)  = ∫ j(r′) e^{−ik r̂·r′} dS′           radiation vector
    N⊥     = N − r̂(r̂·N)                        transverse part
    F      = (ik/4π)·N⊥                          far-field pattern
    σ      = 4π|F|²/|E₀|² = k²|N⊥|²/(4π|E₀|²)

The reference cut is the E-plane (φ = 0) for incidence along +z with
x-polarized field.
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from meshes import TriangleMesh

from .errors import ConfigError
from .models import CurrentParts, FarFieldCut
from .quadrature import QuadratureConfig, rule_for_degree

logger = logging.getLogger(__name__)

INCIDENT_DIRECTION = (0.0, 0.0, 1.0)
INCIDENT_POLARIZATION = (1.0, 0.0, 0.0)
CUT_STEP_DEG = 1.0

# σ below this (m²) is reported at the floor instead of −inf dBsm
DBSM_FLOOR = 1e-300

MIE_MIN_TERMS = 10
RAYLEIGH_LIMIT = 1e-6            # k·a below which the closed form is used
MIE_MAX_SIZE = 1e3               # k·a above which the series is not attempted


# ──────────────────────────────────────────────
# Angles
# ──────────────────────────────────────────────

def cut_angles(step_deg: float = CUT_STEP_DEG) -> np.ndarray:
    """θ from 0° to 180° inclusive, in radians."""
    if not step_deg > 0:
        raise ConfigError(f"angle step must be positive, got {step_deg}")
    return np.radians(np.arange(0.0, 180.0 + step_deg / 2, step_deg))


def cut_directions(theta: np.ndarray, phi: float = 0.0) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.column_stack([
        np.sin(theta) * math.cos(phi),
        np.sin(theta) * math.sin(phi),
        np.cos(theta),
    ])


# ──────────────────────────────────────────────
# Radiation integral
# ──────────────────────────────────────────────

def _cell_currents(mesh: TriangleMesh, coefficients: np.ndarray, points: np.ndarray) -> np.ndarray:
    """RWG expansion evaluated at per-cell points (N_C, Q, 3)."""
    edge_index, sign = mesh.rwg_local
    local = coefficients[edge_index] * sign / (2.0 * mesh.areas[:, None])     # (N_C, 3)
    offset = np.einsum("ci,cid->cd", local, mesh.cell_points)
    return local.sum(axis=1)[:, None, None] * points - offset[:, None, :]


def _radiation(weights, currents, kernel) -> np.ndarray:
    return np.einsum("cq,cqd,cqm->md", weights, currents, kernel)


def transverse(vectors: np.ndarray, directions: np.ndarray) -> np.ndarray:
    radial = np.einsum("md,md->m", vectors, directions)
    return vectors - directions * radial[:, None]


def far_field(
    mesh: TriangleMesh,
    j: np.ndarray,
    k: float,
    directions: np.ndarray,
    solenoidal: Optional[np.ndarray] = None,
    quad: Optional[QuadratureConfig] = None,
) -> np.ndarray:
    """
    Transverse radiation vectors N⊥ (M, 3) of the current j + solenoidal.

    `j` is integrated with e^{−ik r̂·r′}. The optional divergence-free part
    is integrated with e^{−ik r̂·r′} − 1 instead: its mean over a closed
    surface vanishes, and dropping it keeps the O(k) dipole term free of
    cancellation when k is tiny.
    """
    if k < 0:
        raise ConfigError(f"far field needs k >= 0, got {k}")
    j = np.asarray(j)
    if j.shape != (mesh.n_edges,):
        raise ConfigError(f"current has shape {j.shape}, expected ({mesh.n_edges},)")
    directions = np.atleast_2d(np.asarray(directions, dtype=float))

    quad = (quad or QuadratureConfig()).validate()
    rule = rule_for_degree(quad.gram_degree)
    points = rule.map_to(mesh.cell_points)
    weights = rule.scaled_weights(mesh.areas)
    phase = -k * np.einsum("cqd,md->cqm", points, directions)

    N = _radiation(weights, _cell_currents(mesh, j.astype(complex), points), np.exp(1j * phase))
    if solenoidal is not None:
        minus_one = -2.0 * np.sin(phase / 2) ** 2 + 1j * np.sin(phase)
        sol = np.asarray(solenoidal, dtype=complex)
        N = N + _radiation(weights, _cell_currents(mesh, sol, points), minus_one)
    return transverse(N, directions)


def far_field_of_parts(
    mesh: TriangleMesh,
    parts: CurrentParts,
    k: float,
    directions: np.ndarray,
    quad: Optional[QuadratureConfig] = None,
) -> np.ndarray:
    return far_field(mesh, parts.nonsolenoidal, k, directions, solenoidal=parts.solenoidal, quad=quad)


# ──────────────────────────────────────────────
# Radar cross-section
# ──────────────────────────────────────────────

def rcs_linear(radiation: np.ndarray, k: float, amplitude: float = 1.0) -> np.ndarray:
    """σ in m² from transverse radiation vectors."""
    power = np.sum(np.abs(radiation) ** 2, axis=-1)
    return k * k * power / (4.0 * math.pi * abs(amplitude) ** 2)


def to_dbsm(sigma: np.ndarray) -> np.ndarray:
    return 10.0 * np.log10(np.maximum(np.asarray(sigma, dtype=float), DBSM_FLOOR))


def rcs_bistatic(radiation: np.ndarray, k: float, amplitude: float = 1.0) -> np.ndarray:
    """σ(θ) in dBsm."""
    return to_dbsm(rcs_linear(radiation, k, amplitude))


# ──────────────────────────────────────────────
# Mie series (PEC sphere)
# ──────────────────────────────────────────────

def mie_truncation(size: float) -> int:
    return max(MIE_MIN_TERMS, math.ceil(size + 4.0 * size ** (1.0 / 3.0) + 2.0))


def mie_coefficients(size: float, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """
    PEC-sphere coefficients for n = 1..n_max:
    a_n = [x j_n]′/[x h_n]′,  b_n = j_n/h_n.
    """
    n = np.arange(1, n_max + 1)
    jn = spherical_jn(n, size)
    jn_d = spherical_jn(n, size, derivative=True)
    hn = jn + 1j * spherical_yn(n, size)
    hn_d = jn_d + 1j * spherical_yn(n, size, derivative=True)
    a = (jn + size * jn_d) / (hn + size * hn_d)
    b = jn / hn
    return a, b


def angular_functions(mu: np.ndarray, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """π_n(cos θ), τ_n(cos θ) for n = 1..n_max, shape (n_max, M)."""
    mu = np.asarray(mu, dtype=float)
    pi = np.zeros((n_max + 1,) + mu.shape)
    tau = np.zeros_like(pi)
    pi[1] = 1.0
    tau[1] = mu
    for n in range(2, n_max + 1):
        pi[n] = ((2 * n - 1) * mu * pi[n - 1] - n * pi[n - 2]) / (n - 1)
        tau[n] = n * mu * pi[n] - (n + 1) * pi[n - 1]
    return pi[1:], tau[1:]


def rayleigh_rcs(radius: float, k: float, theta: np.ndarray) -> np.ndarray:
    """Small-sphere E-plane limit 4πk⁴a⁶(cos θ − ½)²."""
    return 4.0 * math.pi * k ** 4 * radius ** 6 * (np.cos(theta) - 0.5) ** 2


def mie_rcs(radius: float, k: float, theta: np.ndarray, n_max: Optional[int] = None) -> np.ndarray:
    """E-plane bistatic σ(θ) in m² of a PEC sphere."""
    theta = np.asarray(theta, dtype=float)
    size = k * radius
    if not (radius > 0 and k >= 0):
        raise ConfigError(f"Mie series needs radius > 0 and k >= 0, got radius={radius}, k={k}")
    if size > MIE_MAX_SIZE:
        raise ConfigError(f"k·a = {size:.3e} exceeds the supported range ({MIE_MAX_SIZE:g})")
    if size < RAYLEIGH_LIMIT:
        return rayleigh_rcs(radius, k, theta)

    n_max = n_max or mie_truncation(size)
    a, b = mie_coefficients(size, n_max)
    pi, tau = angular_functions(np.cos(theta), n_max)
    n = np.arange(1, n_max + 1)
    weight = (2 * n + 1) / (n * (n + 1))
    S2 = np.einsum("n,nm->m", weight * a, tau) + np.einsum("n,nm->m", weight * b, pi)
    return 4.0 * math.pi * np.abs(S2) ** 2 / k ** 2


# ──────────────────────────────────────────────
# Metrics and cuts
# ──────────────────────────────────────────────

def l2_relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """‖a − b‖/‖b‖ in percent."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ConfigError(f"curves sampled on different grids: {a.shape} vs {b.shape}")
    ref = np.linalg.norm(b)
    diff = np.linalg.norm(a - b)
    if ref == 0:
        return 0.0 if diff == 0 else math.inf
    return float(100.0 * diff / ref)


def build_far_field_cut(
    mesh: Optional[TriangleMesh],
    parts: Optional[CurrentParts],
    k: float,
    theta: Optional[np.ndarray] = None,
    phi: float = 0.0,
    amplitude: float = 1.0,
    radius: Optional[float] = None,
    quad: Optional[QuadratureConfig] = None,
) -> FarFieldCut:
    """
    MoM cut for `parts` (skipped when None) and, when `radius` is given,
    the Mie reference on the same angles.
    """
    theta = cut_angles() if theta is None else np.asarray(theta, dtype=float)
    radiation = np.zeros((len(theta), 3), dtype=complex)
    rcs = None
    if parts is not None:
        radiation = far_field_of_parts(mesh, parts, k, cut_directions(theta, phi), quad)
        rcs = rcs_bistatic(radiation, k, amplitude)
    reference = None
    if radius is not None:
        reference = to_dbsm(mie_rcs(radius, k, theta))
    logger.debug("far-field cut: %d angles, k=%.3e, reference=%s", len(theta), k, radius is not None)
    return FarFieldCut(theta=theta, phi=phi, far_field=radiation, rcs_dbsm=rcs, reference_dbsm=reference)


def rcs_error(cut: FarFieldCut) -> float:
    """Relative L2 error (percent) of the MoM cut against its reference, on linear σ."""
    if cut.rcs_dbsm is None or cut.reference_dbsm is None:
        raise ConfigError("cut needs both a MoM curve and a reference curve")
    return l2_relative_error(10.0 ** (cut.rcs_dbsm / 10.0), 10.0 ** (cut.reference_dbsm / 10.0))
