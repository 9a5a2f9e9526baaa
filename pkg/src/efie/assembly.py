"""
Dense Galerkin assembly of the EFIE blocks and the electrostatic matrices.

For every (test cell c, source cell d) pair four kernel moments are
accumulated:

    M00 = ∬ G                     M10 = ∬ (r − c̄_c) G
    M01 = ∬ (r′ − c̄_d) G           M11 = ∬ (r − c̄_c)·(r′ − c̄_d) G

with G = e^{ikR}/(4πR). The 1/R part of the inner integral is analytic
over the source triangle; (e^{ikR} − 1)/R is smooth and integrated with
the inner Gauss rule. Touching and close pairs use a composite outer rule.

Every block is a contraction of the same moments:

    T_A    RWG local functions (r − p_ci) expanded around the centroids
    V      M00 / (A_c A_d)
    T_Phi  Σ V Σᵀ (gathered per edge pair)
    W      Σ_α C_α M00 C_αᵀ with C_α the constant surface curls of λ_v

so ΛᵀT_A⁰Λ = W and T_Φ = ΣVΣᵀ hold up to roundoff.
"""

from __future__ import annotations

import logging
import math
import time
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from tqdm import tqdm

from meshes import TriangleMesh

from .discretization import deflected_laplacian, gram_lambda, mean_moment
from .errors import ConfigError
from .models import EfieMatrices, Excitation
from .quadrature import QuadratureConfig, rule_for_degree

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi

# an observation point closer than this (relative to the edge length) to an
# edge line contributes nothing through that edge's logarithm
ON_LINE_RTOL = 1e-10

UNIT_VECTOR_TOL = 1e-9


# ──────────────────────────────────────────────
# Kernel integrals
# ──────────────────────────────────────────────

def _shifted_distance(R: np.ndarray, l: np.ndarray, r0_sq: np.ndarray) -> np.ndarray:
    """R + l, rewritten as R0²/(R − l) where l < 0 to avoid cancellation."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(l >= 0, R + l, r0_sq / (R - l))


def triangle_potentials(
    triangle: np.ndarray,
    points: np.ndarray,
    origin: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Closed-form static potentials of a flat triangle.

    Returns (∫_T 1/R dS′, ∫_T (r′ − origin)/R dS′) for every observation
    point, shapes (P,) and (P, 3). `origin` defaults to the centroid.
    """
    triangle = np.asarray(triangle, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if origin is None:
        origin = triangle.mean(axis=0)

    a = triangle
    b = np.roll(triangle, -1, axis=0)
    cross = np.cross(triangle[1] - triangle[0], triangle[2] - triangle[0])
    normal = cross / np.linalg.norm(cross)
    lengths = np.linalg.norm(b - a, axis=1)
    l_hat = (b - a) / lengths[:, None]
    u_hat = np.cross(l_hat, normal)                          # in-plane, outward

    h = (points - triangle[0]) @ normal
    rho = points - h[:, None] * normal

    to_a = a[None, :, :] - points[:, None, :]                # (P, 3 edges, 3)
    to_b = b[None, :, :] - points[:, None, :]
    l_minus = np.einsum("pid,id->pi", to_a, l_hat)
    l_plus = np.einsum("pid,id->pi", to_b, l_hat)
    p0 = np.einsum("pid,id->pi", to_a, u_hat)
    R_minus = np.linalg.norm(to_a, axis=2)
    R_plus = np.linalg.norm(to_b, axis=2)
    h_abs = np.abs(h)[:, None]
    r0_sq = p0 * p0 + h_abs * h_abs

    on_line = r0_sq <= (ON_LINE_RTOL * lengths.max()) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = np.log(
            _shifted_distance(R_plus, l_plus, r0_sq) / _shifted_distance(R_minus, l_minus, r0_sq)
        )
    log_term = np.where(on_line, 0.0, log_term)

    angle = (
        np.arctan2(p0 * l_plus, r0_sq + h_abs * R_plus)
        - np.arctan2(p0 * l_minus, r0_sq + h_abs * R_minus)
    )
    scalar = np.sum(p0 * log_term - h_abs * angle, axis=1)
    in_plane = 0.5 * (r0_sq * log_term + l_plus * R_plus - l_minus * R_minus) @ u_hat
    vector = in_plane + (rho - origin) * scalar[:, None]
    return scalar, vector


def smooth_kernel(R: np.ndarray, k: float) -> np.ndarray:
    """(e^{ikR} − 1)/R, finite at R = 0 and exactly 0 for k = 0."""
    R = np.asarray(R, dtype=float)
    return 1j * k * np.exp(0.5j * k * R) * np.sinc(k * R / (2.0 * math.pi))


def cell_curls(mesh: TriangleMesh) -> list[sp.csr_matrix]:
    """
    Components α = x, y, z of the constant surface curls n × ∇λ_v per cell,
    as three sparse N_V × N_C matrices.
    """
    p = mesh.cell_points
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    curl = -e / (2.0 * mesh.areas[:, None, None])            # (N_C, 3 local, 3)
    rows = mesh.cells.ravel()
    cols = np.repeat(np.arange(mesh.n_cells), 3)
    shape = (mesh.n_vertices, mesh.n_cells)
    return [sp.csr_matrix((curl[:, :, a].ravel(), (rows, cols)), shape=shape) for a in range(3)]


# ──────────────────────────────────────────────
# Assembler
# ──────────────────────────────────────────────

class EfieAssembler:
    """
    Assembles T_A^k and V^k for one mesh in a single pass over source cells.
    Results are cached per wavenumber.
    """

    def __init__(self, mesh: TriangleMesh, quad: Optional[QuadratureConfig] = None, progress: bool = False):
        self.mesh = mesh
        self.quad = (quad or QuadratureConfig()).validate()
        self.progress = progress
        outer = rule_for_degree(self.quad.outer_degree)
        self.far_rule = outer.subdivided(self.quad.far_subdivisions)
        self.near_rule = outer.subdivided(self.quad.near_subdivisions)
        self.inner_rule = rule_for_degree(self.quad.inner_degree)
        self._cache: dict[float, EfieMatrices] = {}

        diam = mesh.edge_lengths[mesh.cell_edges].max(axis=1)
        self._diam = diam
        edge_index, sign = mesh.rwg_local
        n_c = mesh.n_cells
        self._scatter = sp.csr_matrix(
            (np.ones(3 * n_c), (edge_index.ravel(), np.arange(3 * n_c))),
            shape=(mesh.n_edges, 3 * n_c),
        )
        self._q = mesh.cell_points - mesh.centroids[:, None, :]
        self._rwg_scale = sign / (2.0 * mesh.areas[:, None])

    # ── moments ────────────────────────────────

    def near_cells(self, d: int) -> np.ndarray:
        mesh = self.mesh
        dist = np.linalg.norm(mesh.centroids - mesh.centroids[d], axis=1)
        return np.flatnonzero(dist < self.quad.near_factor * (self._diam + self._diam[d]))

    def _moments(self, d: int, cells: np.ndarray, rule, k: float):
        """Moments (M00, M10, M01, M11) between test `cells` and source cell d."""
        mesh = self.mesh
        tri = mesh.cell_points[d]
        center = mesh.centroids[d]

        points = rule.map_to(mesh.cell_points[cells])        # (n, Q, 3)
        weights = rule.scaled_weights(mesh.areas[cells])     # (n, Q)
        n, q = weights.shape
        flat = points.reshape(-1, 3)

        s0, s1 = triangle_potentials(tri, flat, center)
        s0 = s0.astype(complex)
        s1 = s1.astype(complex)
        if k != 0.0:
            inner_pts = self.inner_rule.map_to(tri)          # (Q', 3)
            inner_w = self.inner_rule.weights * mesh.areas[d]
            R = np.linalg.norm(flat[:, None, :] - inner_pts[None, :, :], axis=2)
            g = smooth_kernel(R, k) * inner_w
            s0 += g.sum(axis=1)
            s1 += g @ (inner_pts - center)
        s0 = s0.reshape(n, q) / FOUR_PI
        s1 = s1.reshape(n, q, 3) / FOUR_PI

        rel = points - mesh.centroids[cells][:, None, :]
        m00 = np.einsum("cq,cq->c", weights, s0)
        m10 = np.einsum("cq,cqd,cq->cd", weights, rel, s0)
        m01 = np.einsum("cq,cqd->cd", weights, s1)
        m11 = np.einsum("cq,cqd,cqd->c", weights, rel, s1)
        return m00, m10, m01, m11

    def source_moments(self, d: int, k: float):
        """Moments of every test cell against source d; near cells use the composite rule."""
        all_cells = np.arange(self.mesh.n_cells)
        m00, m10, m01, m11 = self._moments(d, all_cells, self.far_rule, k)
        if self.quad.near_subdivisions != self.quad.far_subdivisions:
            near = self.near_cells(d)
            n00, n10, n01, n11 = self._moments(d, near, self.near_rule, k)
            m00[near], m10[near], m01[near], m11[near] = n00, n10, n01, n11
        return m00, m10, m01, m11

    # ── blocks ─────────────────────────────────

    def blocks(self, k: float) -> EfieMatrices:
        k = float(k)
        if k < 0 or not math.isfinite(k):
            raise ConfigError(f"wavenumber must be finite and ≥ 0, got {k}")
        if k in self._cache:
            return self._cache[k]

        mesh = self.mesh
        n, n_c = mesh.n_edges, mesh.n_cells
        edge_index, _ = mesh.rwg_local
        areas = mesh.areas
        T_A = np.zeros((n, n), dtype=complex)
        M00 = np.zeros((n_c, n_c), dtype=complex)

        start = time.time()
        sources = tqdm(range(n_c), desc=f"Assembling k={k:.3e}", unit="cell", disable=not self.progress)
        for d in sources:
            m00, m10, m01, m11 = self.source_moments(d, k)
            M00[:, d] = m00

            q_c, q_d = self._q, self._q[d]
            X = (
                m11[:, None, None]
                - np.einsum("cid,cd->ci", q_c, m01)[:, :, None]
                - np.einsum("cd,jd->cj", m10, q_d)[:, None, :]
                + np.einsum("cid,jd->cij", q_c, q_d) * m00[:, None, None]
            )
            Y = X * self._rwg_scale[:, :, None]
            cols = self._scatter @ Y.reshape(3 * n_c, 3)
            T_A[:, edge_index[d]] += cols * self._rwg_scale[d]

        T_A = _symmetrized(T_A, "T_A")
        M00 = _symmetrized(M00, "M00")
        V = M00 / np.outer(areas, areas)
        T_Phi = _star_gather(V, mesh.edge_cells)
        if k == 0.0:
            T_A, V, T_Phi = T_A.real.astype(complex), V.real.astype(complex), T_Phi.real.astype(complex)

        logger.info("Assembled EFIE blocks: N=%d N_C=%d k=%.3e in %.2fs", n, n_c, k, time.time() - start)
        blocks = EfieMatrices(T_A=T_A, T_Phi=T_Phi, V=V, k=k)
        self._cache[k] = blocks
        return blocks

    def static_W(self) -> np.ndarray:
        """Hypersingular matrix W from the static patch moments."""
        V0 = self.blocks(0.0).V.real
        M00 = V0 * np.outer(self.mesh.areas, self.mesh.areas)
        W = np.zeros((self.mesh.n_vertices, self.mesh.n_vertices))
        for C in cell_curls(self.mesh):
            W += C @ (C @ M00.T).T
        return 0.5 * (W + W.T)


def _symmetrized(matrix: np.ndarray, label: str) -> np.ndarray:
    scale = np.abs(matrix).max()
    if scale > 0 and logger.isEnabledFor(logging.DEBUG):
        logger.debug("%s raw asymmetry %.3e", label, np.abs(matrix - matrix.T).max() / scale)
    return 0.5 * (matrix + matrix.T)


def _star_gather(V: np.ndarray, edge_cells: np.ndarray) -> np.ndarray:
    """Σ V Σᵀ for Σ[n, c⁺] = +1, Σ[n, c⁻] = −1."""
    plus, minus = edge_cells.T
    return (
        V[np.ix_(plus, plus)] - V[np.ix_(plus, minus)]
        - V[np.ix_(minus, plus)] + V[np.ix_(minus, minus)]
    )


# ──────────────────────────────────────────────
# Public assembly functions
# ──────────────────────────────────────────────

def assemble_efie(mesh: TriangleMesh, k: float, quad: Optional[QuadratureConfig] = None) -> EfieMatrices:
    return EfieAssembler(mesh, quad).blocks(k)


def assemble_TA(mesh: TriangleMesh, k: float, quad: Optional[QuadratureConfig] = None) -> np.ndarray:
    return assemble_efie(mesh, k, quad).T_A


def assemble_TPhi(mesh: TriangleMesh, k: float, quad: Optional[QuadratureConfig] = None) -> np.ndarray:
    return assemble_efie(mesh, k, quad).T_Phi


def assemble_T(mesh: TriangleMesh, k: float, quad: Optional[QuadratureConfig] = None) -> np.ndarray:
    """T = ik·T_A + T_Phi/(ik); k = 0 is rejected."""
    if not k > 0:
        raise ConfigError(f"the full EFIE operator needs k > 0, got {k}; use the static blocks at k = 0")
    return assemble_efie(mesh, k, quad).combined()


def assemble_V(mesh: TriangleMesh, quad: Optional[QuadratureConfig] = None) -> np.ndarray:
    """Static single-layer patch matrix [V]_cd = (p_c, V p_d), real symmetric positive definite."""
    return assemble_efie(mesh, 0.0, quad).V.real.copy()


def assemble_W(mesh: TriangleMesh, quad: Optional[QuadratureConfig] = None) -> np.ndarray:
    """Hypersingular matrix via the curl-curl weak form; W·1 = 0."""
    return EfieAssembler(mesh, quad).static_W()


def deflected_W(
    mesh: TriangleMesh,
    quad: Optional[QuadratureConfig] = None,
    W: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Ŵ = W + (G_λλ1)(G_λλ1)ᵀ."""
    if W is None:
        W = assemble_W(mesh, quad)
    g = mean_moment(mesh)
    return W + np.outer(g, g)


def spectral_equivalence_bounds(
    mesh: TriangleMesh,
    quad: Optional[QuadratureConfig] = None,
    W: Optional[np.ndarray] = None,
) -> tuple[float, float]:
    """Extreme generalized eigenvalues of (Ŵ G_λλ⁻¹ Ŵ, Δ̂)."""
    W_hat = deflected_W(mesh, quad, W)
    G = gram_lambda(mesh).toarray()
    lhs = W_hat @ scipy.linalg.solve(G, W_hat, assume_a="pos")
    lhs = 0.5 * (lhs + lhs.T)
    eigs = scipy.linalg.eigh(lhs, deflected_laplacian(mesh), eigvals_only=True)
    return float(eigs[0]), float(eigs[-1])


# ──────────────────────────────────────────────
# Excitations
# ──────────────────────────────────────────────

def _unit(vector, name: str) -> np.ndarray:
    v = np.asarray(vector, dtype=float).reshape(3)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_VECTOR_TOL:
        raise ConfigError(f"{name} must be a unit vector, got |{name}| = {np.linalg.norm(v):.6g}")
    return v


def excitation_planewave(
    mesh: TriangleMesh,
    direction,
    polarization,
    k: float,
    amplitude: complex = 1.0,
    quad: Optional[QuadratureConfig] = None,
) -> Excitation:
    """
    e_n = ∫ f_n · E^i dS for E^i = amplitude·p·e^{ik d·r}.

    The constant-field part is the surface gradient of amplitude·p·r and is
    returned as star coefficients y_c = −amplitude·p·c̄_c; the remainder
    carries e^{ik d·r} − 1 only.
    """
    d = _unit(direction, "direction")
    p = _unit(polarization, "polarization")
    if abs(d @ p) > UNIT_VECTOR_TOL:
        raise ConfigError(f"polarization must be orthogonal to direction (p·d = {d @ p:.3e})")
    if k < 0 or not math.isfinite(k):
        raise ConfigError(f"wavenumber must be finite and ≥ 0, got {k}")

    gradient = -amplitude * (mesh.centroids @ p)

    quad = (quad or QuadratureConfig()).validate()
    rule = rule_for_degree(quad.outer_degree)
    points = rule.map_to(mesh.cell_points)                   # (N_C, Q, 3)
    weights = rule.scaled_weights(mesh.areas)
    phase = k * (points @ d)
    shifted = -2.0 * np.sin(0.5 * phase) ** 2 + 1j * np.sin(phase)   # e^{iφ} − 1

    rel = points[:, :, None, :] - mesh.cell_points[:, None, :, :]   # (N_C, Q, 3, 3)
    local = np.einsum("cq,cq,cqid,d->ci", weights, shifted, rel, p)
    edge_index, sign = mesh.rwg_local
    local = amplitude * local * sign / (2.0 * mesh.areas[:, None])
    remainder = np.zeros(mesh.n_edges, dtype=complex)
    np.add.at(remainder, edge_index.ravel(), local.ravel())

    return Excitation(
        remainder=remainder,
        gradient=np.asarray(gradient, dtype=complex),
        edge_cells=mesh.edge_cells,
        label=f"planewave k={k:.3e}",
    )


def excitation_voltage_gap(mesh: TriangleMesh, edge_index: int, voltage: complex = 1.0) -> Excitation:
    """Delta-gap source: e_n = voltage on `edge_index`, 0 elsewhere."""
    if not 0 <= int(edge_index) < mesh.n_edges:
        raise ConfigError(f"edge index {edge_index} out of range [0, {mesh.n_edges})")
    e = np.zeros(mesh.n_edges, dtype=complex)
    e[int(edge_index)] = voltage
    return Excitation(remainder=e, gradient=None, edge_cells=mesh.edge_cells, label=f"gap edge={edge_index}")
