import math

import numpy as np
import pytest
import scipy.linalg

from meshes import make_sphere
from src.efie.discretization import (
    SparseGramSolver,
    basis_descriptors,
    deflected_laplacian,
    gram_dual_lambda_p,
    gram_ff,
    gram_lambda,
    gram_pp,
    laplace_beltrami,
    mean_moment,
    rwg_divergence,
)
from src.efie.errors import QuadratureError
from src.efie.quadrature import RULES, QuadratureConfig, rule_for_degree
from src.efie.quasi_helmholtz import build_loop_matrix

REFERENCE = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def monomial_integral(a: int, b: int) -> float:
    """∫ x^a y^b over the reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


# ──────────────────────────────────────────────
# Quadrature
# ──────────────────────────────────────────────

@pytest.mark.parametrize("degree", sorted(RULES))
def test_rule_weights_sum_to_one(degree):
    rule = RULES[degree]
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(rule.points.sum(axis=1), 1.0, atol=1e-15)


@pytest.mark.parametrize("degree", sorted(RULES))
@pytest.mark.parametrize("levels", [0, 2])
def test_rule_is_exact_up_to_its_degree(degree, levels):
    rule = RULES[degree].subdivided(levels)
    points = rule.map_to(REFERENCE)
    weights = rule.scaled_weights(0.5)
    x, y = points[:, 0], points[:, 1]
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            assert weights @ (x ** a * y ** b) == pytest.approx(monomial_integral(a, b), rel=1e-12)


def test_subdivided_rule_size():
    rule = rule_for_degree(5).subdivided(2)
    assert rule.size == 7 * 16
    assert rule.degree == 5


def test_rule_lookup_picks_smallest_exact_rule():
    assert rule_for_degree(2).degree == 2
    assert rule_for_degree(3).degree == 5
    with pytest.raises(QuadratureError):
        rule_for_degree(6)


def test_weak_gram_rule_is_rejected():
    with pytest.raises(QuadratureError):
        QuadratureConfig(gram_degree=1).validate()
    with pytest.raises(QuadratureError):
        QuadratureConfig(near_factor=0.0).validate()


# ──────────────────────────────────────────────
# Gram matrices
# ──────────────────────────────────────────────

def test_basis_counts(sphere1):
    d = basis_descriptors(sphere1)
    assert (d["RWG"].count, d["nodal"].count, d["patch"].count) == (120, 42, 80)


def test_rwg_divergence_satisfies_integration_by_parts(sphere1):
    # ∫ f_n dS = −∫ (∇·f_n) r dS on a closed surface
    rule = rule_for_degree(2)
    points = rule.map_to(sphere1.cell_points)
    weights = rule.scaled_weights(sphere1.areas)
    edge_index, sign = sphere1.rwg_local
    moments = np.zeros((sphere1.n_edges, 3))
    for i in range(3):
        free = sphere1.cell_points[:, i]
        f = sign[:, i, None, None] * (points - free[:, None, :]) / (2.0 * sphere1.areas[:, None, None])
        np.add.at(moments, edge_index[:, i], np.einsum("cq,cqd->cd", weights, f))

    div = rwg_divergence(sphere1)
    plus, minus = sphere1.edge_cells.T
    charge = (
        (div[:, 0] * sphere1.areas[plus])[:, None] * sphere1.centroids[plus]
        + (div[:, 1] * sphere1.areas[minus])[:, None] * sphere1.centroids[minus]
    )
    np.testing.assert_allclose(moments, -charge, atol=1e-13)


def test_rwg_divergence_carries_unit_charge(sphere0):
    div = rwg_divergence(sphere0)
    plus = sphere0.edge_cells[:, 0]
    charge = div * sphere0.areas[sphere0.edge_cells]
    np.testing.assert_allclose(charge[:, 0], 1.0, rtol=1e-13)
    np.testing.assert_allclose(charge[:, 1], -1.0, rtol=1e-13)
    # the plus cell lies to the left of v1 → v2
    v1, v2 = sphere0.vertices[sphere0.edges[:, 0]], sphere0.vertices[sphere0.edges[:, 1]]
    outward = np.cross(v2 - v1, sphere0.normals[plus])
    towards_free = sphere0.centroids[plus] - 0.5 * (v1 + v2)
    assert np.all(np.einsum("nd,nd->n", outward, towards_free) < 0)


def test_gram_ff_is_symmetric_positive_definite(sphere1):
    G = gram_ff(sphere1).toarray()
    np.testing.assert_allclose(G, G.T, atol=1e-14 * np.abs(G).max())
    assert np.linalg.eigvalsh(G).min() > 0


def test_gram_ff_sparsity(sphere1):
    G = gram_ff(sphere1)
    # each RWG overlaps itself and the four others sharing one of its two cells
    assert np.all(np.diff(G.indptr) == 5)


def test_loop_gram_is_laplace_beltrami(sphere1):
    loop = build_loop_matrix(sphere1).astype(float)
    lhs = (loop.T @ gram_ff(sphere1) @ loop).toarray()
    delta = laplace_beltrami(sphere1).toarray()
    np.testing.assert_allclose(lhs, delta, atol=1e-10 * np.abs(delta).max())


def test_laplace_beltrami_kernel_is_constants(torus_small):
    delta = laplace_beltrami(torus_small).toarray()
    np.testing.assert_allclose(delta @ np.ones(torus_small.n_vertices), 0.0, atol=1e-12)
    eigs = np.linalg.eigvalsh(delta)
    assert abs(eigs[0]) < 1e-10
    assert eigs[1] > 1e-6


def test_deflected_laplacian_is_positive_definite(sphere1):
    assert np.linalg.eigvalsh(deflected_laplacian(sphere1)).min() > 0


def test_deflected_laplacian_lifts_only_the_constants(sphere1):
    deflected = deflected_laplacian(sphere1)
    delta = laplace_beltrami(sphere1).toarray()
    ones = np.ones(sphere1.n_vertices)
    area = sphere1.surface_area
    assert ones @ deflected @ ones == pytest.approx(area ** 2, rel=1e-12)

    g = mean_moment(sphere1)
    x = np.random.default_rng(5).standard_normal(sphere1.n_vertices)
    x -= (g @ x) / (g @ ones) * ones
    np.testing.assert_allclose(deflected @ x, delta @ x, atol=1e-12 * np.abs(delta @ x).max())


def test_laplace_beltrami_spectrum_on_sphere():
    mesh = make_sphere(1.0, 3)
    eigs = scipy.linalg.eigh(laplace_beltrami(mesh).toarray(), gram_lambda(mesh).toarray(), eigvals_only=True)
    assert abs(eigs[0]) < 1e-8
    # l = 1 harmonics: l(l + 1) = 2, three of them
    np.testing.assert_allclose(eigs[1:4], 2.0, atol=0.03)
    assert eigs[4] > 5.0


def test_gram_lambda_spectrum_scales_with_h_squared(sphere1):
    bounds = []
    for mesh in (sphere1, make_sphere(1.0, 2)):
        eigs = np.linalg.eigvalsh(gram_lambda(mesh).toarray())
        moments = mean_moment(mesh)
        assert eigs[-1] <= moments.max() * (1 + 1e-12)
        assert eigs[0] >= moments.min() / 4 * (1 - 1e-12)
        bounds.append((eigs[0] / mesh.h ** 2, eigs[-1] / mesh.h ** 2))
    (low1, high1), (low2, high2) = bounds
    assert 0.5 < low2 / low1 < 2
    assert 0.5 < high2 / high1 < 2


def test_gram_lambda_totals(sphere1):
    G = gram_lambda(sphere1)
    assert G.sum() == pytest.approx(sphere1.surface_area, rel=1e-13)
    assert mean_moment(sphere1).sum() == pytest.approx(sphere1.surface_area, rel=1e-13)


def test_gram_pp_is_inverse_area(sphere0):
    np.testing.assert_allclose(gram_pp(sphere0).diagonal(), 1.0 / sphere0.areas)


def test_dual_gram_closed_form_on_icosahedron(sphere0):
    G = gram_dual_lambda_p(sphere0).toarray()
    topo = sphere0.topology
    expected = {
        "identical": (2 / 18) * (4.5 + 3 / 5),
        "edge": (2 / 18) * (0.5 + 2 / 5),
        "vertex": (2 / 18) * (1 / 5),
        "disjoint": 0.0,
    }
    for c in range(sphere0.n_cells):
        for d in range(sphere0.n_cells):
            assert G[c, d] == pytest.approx(expected[topo.relation(c, d)], abs=1e-15)


def test_dual_gram_is_invertible(sphere1):
    G = gram_dual_lambda_p(sphere1).toarray()
    assert abs(np.linalg.det(G)) > 0
    assert np.linalg.cond(G) < 1e3


@pytest.mark.parametrize("name", ["sphere1", "torus_small"])
def test_dual_gram_columns_sum_to_one(request, name):
    # dual hats partition unity and every patch function integrates to one
    mesh = request.getfixturevalue(name)
    G = gram_dual_lambda_p(mesh).toarray()
    np.testing.assert_allclose(G.sum(axis=0), 1.0, atol=1e-13)
    np.testing.assert_allclose(G, G.T, atol=1e-15)


def test_dual_gram_closed_form_at_valence_six(torus_small):
    topo = torus_small.topology
    assert np.all(topo.cells_at_vertex == 6)
    G = gram_dual_lambda_p(torus_small).toarray()
    expected = {"identical": 5 / 9, "edge": 5 / 54, "vertex": 1 / 54, "disjoint": 0.0}
    for c in range(torus_small.n_cells):
        for d in range(torus_small.n_cells):
            assert G[c, d] == pytest.approx(expected[topo.relation(c, d)], abs=1e-15)


def test_sparse_gram_solver_complex(sphere1):
    G = gram_lambda(sphere1)
    solver = SparseGramSolver(G, "G")
    rng = np.random.default_rng(3)
    x = rng.standard_normal(sphere1.n_vertices) + 1j * rng.standard_normal(sphere1.n_vertices)
    np.testing.assert_allclose(G @ solver.solve(x), x, rtol=1e-10, atol=1e-12)
    block = rng.standard_normal((sphere1.n_vertices, 3))
    np.testing.assert_allclose(G @ solver.solve(block), block, rtol=1e-10, atol=1e-12)
