import math

import numpy as np
import pytest

from src.efie.assembly import excitation_planewave
from src.efie.errors import ConfigError, NumericalError
from src.efie.krylov import cg_solve, dense_condition, materialize
from src.efie.models import ScalingConstants, wavenumber
from src.efie.postprocess import cut_angles, cut_directions, far_field, far_field_of_parts
from src.efie.preconditioner import (
    RfCmpOperator,
    build_rfcmp,
    estimate_scalings,
    hermiticity_defect,
    rayleigh_quotients,
)

K_MID = wavenumber(1e6)
K_STATIC = wavenumber(1e-25)


@pytest.fixture(scope="module")
def blocks(assembler1):
    return {k: assembler1.blocks(k) for k in (1.0, K_MID, K_STATIC)}


@pytest.fixture(scope="module")
def impl_ops(blocks, components1):
    return {k: build_rfcmp(b, components1) for k, b in blocks.items()}


@pytest.fixture(scope="module")
def theory_ops(blocks, components1):
    return {k: build_rfcmp(b, components1, scaling_mode="wavenumber", outer="g_sigma") for k, b in blocks.items()}


def planewave(mesh, k):
    return excitation_planewave(mesh, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], k)


def relative(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def solved_parts(op, mesh, k):
    i, report = cg_solve(op.as_linear_operator(), op.build_rhs(planewave(mesh, k)), tol=1e-8)
    assert report.converged
    return op.recover_current_parts(i)


# ──────────────────────────────────────────────
# Scalings
# ──────────────────────────────────────────────

def test_wavenumber_scalings(blocks, components1):
    s = estimate_scalings(blocks[K_MID], components1, mode="wavenumber")
    assert s.alpha == pytest.approx(math.sqrt(K_MID))
    assert s.beta == pytest.approx(1 / math.sqrt(K_MID))
    assert s.gamma == pytest.approx(K_MID)
    assert s.mode == "wavenumber"


@pytest.mark.parametrize("k", [1.0, K_MID, K_STATIC])
def test_norm_scalings_are_finite(blocks, components1, k):
    s = estimate_scalings(blocks[k], components1, mode="norm")
    for value in (s.alpha, s.beta, s.gamma):
        assert math.isfinite(value) and value > 0
    assert s.converged


def test_norm_scalings_follow_wavenumber_in_static_limit(blocks, components1):
    mid = estimate_scalings(blocks[K_MID], components1)
    low = estimate_scalings(blocks[K_STATIC], components1)
    # α ~ √k, β ~ 1/√k, γ ~ k once the static blocks dominate
    assert low.alpha / mid.alpha == pytest.approx(math.sqrt(K_STATIC / K_MID), rel=0.05)
    assert low.beta / mid.beta == pytest.approx(math.sqrt(K_MID / K_STATIC), rel=0.05)
    assert low.gamma / mid.gamma == pytest.approx(K_STATIC / K_MID, rel=0.1)


def test_unknown_scaling_mode(blocks, components1):
    with pytest.raises(ConfigError):
        estimate_scalings(blocks[1.0], components1, mode="fixed")


def test_scalings_must_be_positive():
    with pytest.raises(NumericalError):
        ScalingConstants(0.0, 1.0, 1.0)
    with pytest.raises(NumericalError):
        ScalingConstants(1.0, float("inf"), 1.0)


def test_operator_rejects_static_blocks(static1, components1):
    with pytest.raises(ConfigError):
        RfCmpOperator(static1, components1, ScalingConstants(1.0, 1.0, 1.0))


def test_operator_rejects_unknown_outer_projector(blocks, components1):
    with pytest.raises(ConfigError):
        RfCmpOperator(blocks[1.0], components1, ScalingConstants(1.0, 1.0, 1.0), outer="lambda")


# ──────────────────────────────────────────────
# Hermitian positive definite system
# ──────────────────────────────────────────────

@pytest.mark.parametrize("k", [1.0, K_MID, K_STATIC])
def test_hermitian_impl(impl_ops, k):
    assert hermiticity_defect(impl_ops[k]) < 1e-10


@pytest.mark.parametrize("k", [1.0, K_MID, K_STATIC])
def test_hermitian_theory(theory_ops, k):
    assert hermiticity_defect(theory_ops[k]) < 1e-10


@pytest.mark.parametrize("k", [1.0, K_MID, K_STATIC])
def test_positive_rayleigh_quotients(impl_ops, theory_ops, k):
    assert np.all(rayleigh_quotients(impl_ops[k]) > 0)
    assert np.all(rayleigh_quotients(theory_ops[k]) > 0)


def test_materialized_system_is_positive_definite(impl_ops):
    A = impl_ops[K_MID].materialize()
    np.testing.assert_array_equal(A, A.conj().T)
    assert np.linalg.eigvalsh(A).min() > 0


def test_split_form_matches_dense_composition(impl_ops, theory_ops, sphere1):
    x = np.random.default_rng(11).standard_normal(sphere1.n_edges) + 0j
    for op in (impl_ops[1.0], theory_ops[1.0]):
        assert relative(op.apply_system(x), op.apply_system_dense(x)) < 1e-8


def test_rhs_matches_dense_composition(impl_ops, sphere1):
    op = impl_ops[1.0]
    exc = planewave(sphere1, 1.0)
    T = op.blocks.combined()
    dense = -op.apply_Po_dagger(np.conj(T @ np.conj(op.apply_Pm(exc.vector))))
    assert relative(op.build_rhs(exc), dense) < 1e-8


def test_joint_rescaling_scales_system(blocks, components1, impl_ops, sphere1):
    op = impl_ops[K_MID]
    scaled = RfCmpOperator(blocks[K_MID], components1, op.scalings.rescaled(2.0))
    x = np.random.default_rng(12).standard_normal(sphere1.n_edges) + 0j
    assert relative(16.0 * scaled.apply_system(x), op.apply_system(x)) < 1e-12


def test_middle_projector_is_symmetric_semidefinite(impl_ops, sphere1):
    Pm = impl_ops[K_MID].apply_Pm(np.eye(sphere1.n_edges))
    scale = np.abs(Pm).max()
    np.testing.assert_allclose(Pm, Pm.T, atol=1e-10 * scale)
    assert np.linalg.eigvalsh(0.5 * (Pm + Pm.T)).min() > -1e-10 * scale


def test_current_recovery_is_outer_projector(impl_ops, sphere1):
    op = impl_ops[1.0]
    i = np.random.default_rng(13).standard_normal(sphere1.n_edges) + 0j
    parts = op.recover_current_parts(i)
    np.testing.assert_allclose(parts.total, op.apply_Po(i))
    divergence = op.components.star.T @ parts.solenoidal
    assert np.abs(divergence).max() < 1e-10 * np.abs(parts.solenoidal).max()


def test_gsigma_projector_maps_into_star_space(theory_ops, sphere1):
    op = theory_ops[1.0]
    x = np.random.default_rng(14).standard_normal(sphere1.n_edges)
    y = op.apply_PgSigma(x)
    assert np.abs(op.components.loop.T @ y).max() < 1e-10 * np.abs(y).max()


def test_matvec_counter(impl_ops, sphere1):
    op = impl_ops[1.0]
    before = op.matvec_count
    op.apply_system(np.ones(sphere1.n_edges, dtype=complex))
    op.apply_system(np.ones((sphere1.n_edges, 3), dtype=complex))
    assert op.matvec_count == before + 4


# ──────────────────────────────────────────────
# Solves and conditioning
# ──────────────────────────────────────────────

@pytest.mark.parametrize("k", [K_MID, K_STATIC])
def test_cg_converges_on_preconditioned_system(impl_ops, sphere1, k):
    op = impl_ops[k]
    rhs = op.build_rhs(planewave(sphere1, k))
    _, report = cg_solve(op.as_linear_operator(), rhs, tol=1e-6)
    assert report.converged
    assert report.iterations < sphere1.n_edges


def test_static_current_parts_keep_their_scale(impl_ops, sphere1):
    mid = solved_parts(impl_ops[K_MID], sphere1, K_MID)
    low = solved_parts(impl_ops[K_STATIC], sphere1, K_STATIC)
    for parts in (mid, low):
        assert np.all(np.isfinite(parts.solenoidal)) and np.all(np.isfinite(parts.nonsolenoidal))
        assert np.linalg.norm(parts.solenoidal) > 0.1
    # loop current stays O(1), charge current shrinks like k
    ratio_mid = np.linalg.norm(mid.nonsolenoidal) / (K_MID * np.linalg.norm(mid.solenoidal))
    ratio_low = np.linalg.norm(low.nonsolenoidal) / (K_STATIC * np.linalg.norm(low.solenoidal))
    assert ratio_low > 0
    assert 0.5 < ratio_low / ratio_mid < 2.0


def test_far_field_of_parts_matches_total_current(impl_ops, sphere1):
    parts = solved_parts(impl_ops[K_MID], sphere1, K_MID)
    directions = cut_directions(cut_angles(10.0))
    split = far_field_of_parts(sphere1, parts, K_MID, directions)
    whole = far_field(sphere1, parts.total, K_MID, directions)
    assert relative(split, whole) < 1e-10


def test_static_far_field_scales_with_wavenumber(impl_ops, sphere1):
    directions = cut_directions(cut_angles(10.0))
    mid = far_field_of_parts(sphere1, solved_parts(impl_ops[K_MID], sphere1, K_MID), K_MID, directions)
    low = far_field_of_parts(sphere1, solved_parts(impl_ops[K_STATIC], sphere1, K_STATIC), K_STATIC, directions)
    assert np.all(np.isfinite(low))
    assert relative(low / K_STATIC, mid / K_MID) < 0.1


def test_condition_number_stays_bounded_in_static_limit(impl_ops):
    mid = dense_condition(impl_ops[K_MID].materialize())
    low = dense_condition(impl_ops[K_STATIC].materialize())
    assert 0.5 < low / mid < 2.0
    assert mid < 1e3


def test_unpreconditioned_breaks_down_in_static_limit(blocks, impl_ops):
    T = blocks[K_STATIC].combined()
    assert dense_condition(T) > 1e8 * dense_condition(impl_ops[K_STATIC].materialize())


def test_materialize_matches_linear_operator(impl_ops, sphere1):
    op = impl_ops[1.0]
    A = materialize(op.as_linear_operator())
    x = np.random.default_rng(15).standard_normal(sphere1.n_edges) + 0j
    assert relative(A @ x, op.apply_system(x)) < 1e-12
