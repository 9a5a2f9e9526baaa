import math

import numpy as np
import pytest
from scipy.sparse.linalg import LinearOperator

from src.efie.errors import NotHPDError, SizeCapError
from src.efie.exports import read_csv_rows
from src.efie.krylov import (
    block_cg,
    cg_iteration_bound,
    cg_solve,
    cgs_solve,
    dense_condition,
    materialize,
    power_iteration,
    write_residual_history,
)


def spd_matrix(n=40, seed=0, complex_=False):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    if complex_:
        B = B + 1j * rng.standard_normal((n, n))
    return B @ B.conj().T + n * np.eye(n)


def known_spectrum(n=50, seed=0):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(np.arange(1.0, n + 1)) @ Q.T


# ──────────────────────────────────────────────
# CG
# ──────────────────────────────────────────────

def test_cg_solves_spd_system():
    A = spd_matrix()
    b = np.random.default_rng(1).standard_normal(40)
    x, report = cg_solve(A, b, tol=1e-10)
    assert report.converged
    assert report.solver == "cg"
    assert report.residual_history[0] == 1.0
    assert report.final_residual <= 1e-10
    assert report.iterations == len(report.residual_history) - 1
    assert report.matvec_count == report.iterations
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-8)


def test_cg_complex_hermitian():
    A = spd_matrix(30, seed=2, complex_=True)
    rng = np.random.default_rng(3)
    b = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    x, report = cg_solve(A, b, tol=1e-10)
    assert report.converged
    np.testing.assert_allclose(A @ x, b, rtol=1e-8, atol=1e-8)


def test_cg_residual_history_matches_true_residual():
    A = spd_matrix()
    b = np.ones(40)
    x, report = cg_solve(A, b, tol=1e-6)
    true = np.linalg.norm(b - A @ x) / np.linalg.norm(b)
    assert true == pytest.approx(report.final_residual, rel=1e-4, abs=1e-12)


def test_cg_accepts_linear_operator():
    A = spd_matrix(20, seed=4)
    op = LinearOperator(A.shape, matvec=lambda v: A @ v, dtype=float)
    b = np.arange(1.0, 21.0)
    x, report = cg_solve(op, b, tol=1e-9)
    assert report.converged
    np.testing.assert_allclose(A @ x, b, rtol=1e-7)


def test_cg_rejects_indefinite_operator():
    with pytest.raises(NotHPDError):
        cg_solve(np.diag([1.0, -1.0]), np.array([1.0, 1.0]))


def test_cg_zero_rhs():
    x, report = cg_solve(spd_matrix(10), np.zeros(10))
    assert report.converged
    assert report.iterations == 0
    np.testing.assert_array_equal(x, 0.0)


def test_cg_reports_non_convergence():
    A = known_spectrum(50)
    _, report = cg_solve(A, np.ones(50), tol=1e-12, maxit=3)
    assert not report.converged
    assert report.iterations == 3


def test_cg_respects_iteration_bound():
    A = known_spectrum(50, seed=1)
    kappa = dense_condition(A)
    eps = 1e-6
    _, report = cg_solve(A, np.random.default_rng(5).standard_normal(50), tol=eps)
    assert report.converged
    # the bound is on the A-norm error; the residual costs an extra √κ
    assert report.iterations <= cg_iteration_bound(kappa, eps / math.sqrt(kappa))


def test_cg_within_bound_for_kappa_100():
    rng = np.random.default_rng(10)
    Q, _ = np.linalg.qr(rng.standard_normal((60, 60)))
    A = Q @ np.diag(np.logspace(0.0, 2.0, 60)) @ Q.T
    assert dense_condition(A) == pytest.approx(100.0, rel=1e-8)
    _, report = cg_solve(A, rng.standard_normal(60), tol=1e-4)
    assert report.converged
    assert report.iterations <= 50


def test_block_cg_matches_columnwise_solves():
    A = spd_matrix(25, seed=6)
    B = np.random.default_rng(7).standard_normal((25, 4))
    X, iterations, residuals = block_cg(A, B, tol=1e-12)
    assert iterations <= 250
    assert np.all(residuals <= 1e-12)
    np.testing.assert_allclose(X, np.linalg.solve(A, B), rtol=1e-9)


# ──────────────────────────────────────────────
# CGS
# ──────────────────────────────────────────────

def test_cgs_nonsymmetric_complex():
    rng = np.random.default_rng(8)
    n = 40
    A = np.eye(n) + 0.1 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(n)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x, report = cgs_solve(A, b, tol=1e-10)
    assert report.converged
    assert report.solver == "cgs"
    assert report.matvec_count == 2 * report.iterations
    np.testing.assert_allclose(A @ x, b, rtol=1e-8, atol=1e-8)


def test_cgs_zero_rhs():
    x, report = cgs_solve(np.eye(5), np.zeros(5))
    assert report.converged
    np.testing.assert_array_equal(x, 0.0)


# ──────────────────────────────────────────────
# Spectral estimates
# ──────────────────────────────────────────────

def test_power_iteration_diagonal():
    result = power_iteration(np.diag([1.0, 2.0, 3.0]), tol=1e-12, maxit=500)
    assert result.converged
    assert result.value == pytest.approx(3.0, rel=1e-6)


def test_power_iteration_known_spectrum():
    result = power_iteration(known_spectrum(50, seed=2), tol=1e-10, maxit=5000)
    assert result.converged
    assert result.value == pytest.approx(50.0, rel=1e-6)


def test_power_iteration_reports_cap():
    result = power_iteration(known_spectrum(50, seed=3), tol=1e-14, maxit=2)
    assert not result.converged
    assert result.iterations == 2


def test_materialize_operator():
    A = spd_matrix(12, seed=9)
    op = LinearOperator(A.shape, matvec=lambda v: A @ v, matmat=lambda V: A @ V, dtype=float)
    np.testing.assert_allclose(materialize(op, block=5), A)


def test_dense_condition():
    assert dense_condition(np.diag([1.0, 10.0])) == pytest.approx(10.0)
    assert dense_condition(np.diag([1.0, 0.0])) == math.inf
    with pytest.raises(SizeCapError):
        dense_condition(np.eye(3), cap=2)


def test_cg_iteration_bound():
    assert cg_iteration_bound(100.0, 1e-4) == 50
    assert cg_iteration_bound(1.0, 2.0) == 0


def test_write_residual_history(tmp_path):
    _, report = cg_solve(spd_matrix(10), np.ones(10), tol=1e-8)
    path = write_residual_history(report, tmp_path / "residuals.csv", timestamp=False)
    first = path.read_text(encoding="utf-8").splitlines()[0]
    assert first == "# schema: residual_history v1"
    header, rows = read_csv_rows(path)
    assert header == ["iteration", "residual"]
    assert len(rows) == len(report.residual_history)
    assert float(rows[0][1]) == 1.0
