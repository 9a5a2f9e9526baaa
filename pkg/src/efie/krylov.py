"""
Krylov solvers, power iteration and dense condition numbers.

Operators are anything scipy.sparse.linalg.aslinearoperator accepts
(dense arrays, sparse matrices, LinearOperator). Residuals are relative to
‖b‖ and recorded every iteration, the initial one included.
"""

from __future__ import annotations

import logging
import math
import time
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .errors import BreakdownError, NotHPDError, SizeCapError
from .exports import RESIDUAL_HEADER, write_csv
from .models import PowerIterationResult, SolveReport

logger = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 3000
DEFAULT_POWER_TOL = 1e-3
DEFAULT_POWER_MAXIT = 200
MATERIALIZE_BLOCK = 256

# |ρ| below this fraction of ‖r̃‖‖r‖ counts as CGS breakdown
BREAKDOWN_RTOL = 1e-30


def _as_operator(op) -> LinearOperator:
    return op if isinstance(op, LinearOperator) else aslinearoperator(op)


def _result_dtype(op: LinearOperator, b: np.ndarray):
    return np.result_type(op.dtype, b.dtype, np.float64)


# ──────────────────────────────────────────────
# Conjugate gradients
# ──────────────────────────────────────────────

def cg_solve(
    op,
    rhs: np.ndarray,
    tol: float = 1e-4,
    maxit: Optional[int] = None,
    x0: Optional[np.ndarray] = None,
    preconditioner: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple[np.ndarray, SolveReport]:
    """
    CG for Hermitian positive definite operators.

    Raises NotHPDError as soon as a search direction has p·Ap ≤ 0.
    """
    A = _as_operator(op)
    b = np.asarray(rhs)
    dtype = _result_dtype(A, b)
    n = b.shape[0]
    maxit = maxit or 10 * n
    report = SolveReport(solver="cg", tolerance=tol)
    start = time.time()

    x = np.zeros(n, dtype=dtype) if x0 is None else np.array(x0, dtype=dtype)
    b_norm = np.linalg.norm(b)
    if b_norm == 0:
        report.residual_history = [0.0]
        report.converged = True
        report.wall_time = time.time() - start
        return np.zeros(n, dtype=dtype), report

    r = b.astype(dtype)
    if x0 is not None:
        r = r - A.matvec(x)
        report.matvec_count += 1
    report.residual_history.append(float(np.linalg.norm(r) / b_norm))

    z = preconditioner(r) if preconditioner else r
    p = z.copy()
    rz = np.vdot(r, z).real

    for it in range(1, maxit + 1):
        if report.residual_history[-1] <= tol:
            break
        Ap = A.matvec(p)
        report.matvec_count += 1
        curvature = np.vdot(p, Ap).real
        if not curvature > 0:
            raise NotHPDError(
                f"nonpositive curvature p·Ap = {curvature:.3e} at iteration {it}; operator is not HPD"
            )
        alpha = rz / curvature
        x += alpha * p
        r -= alpha * Ap
        report.iterations = it
        report.residual_history.append(float(np.linalg.norm(r) / b_norm))
        if report.residual_history[-1] <= tol:
            break
        z = preconditioner(r) if preconditioner else r
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new

    report.converged = report.residual_history[-1] <= tol
    report.wall_time = time.time() - start
    if not report.converged:
        logger.warning("CG stopped after %d iterations at residual %.3e", report.iterations, report.final_residual)
    return x, report


def block_cg(
    op,
    rhs: np.ndarray,
    tol: float = 1e-14,
    maxit: Optional[int] = None,
    preconditioner: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple[np.ndarray, int, np.ndarray]:
    """
    Independent CG recurrences for every column of `rhs`, advanced together.

    `op` must accept (n, m) blocks. Returns (X, iterations, relative
    residuals per column); converged columns are frozen.
    """
    B = np.asarray(rhs)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    n, m = B.shape
    maxit = maxit or 10 * n
    dtype = np.result_type(B.dtype, np.float64)

    X = np.zeros((n, m), dtype=dtype)
    b_norm = np.linalg.norm(B, axis=0)
    b_norm[b_norm == 0] = 1.0
    R = B.astype(dtype)
    Z = preconditioner(R) if preconditioner else R
    P = Z.copy()
    rz = np.einsum("ij,ij->j", R.conj(), Z).real
    res = np.linalg.norm(R, axis=0) / b_norm
    active = res > tol

    it = 0
    while active.any() and it < maxit:
        it += 1
        cols = np.flatnonzero(active)
        AP = op @ P[:, cols]
        curvature = np.einsum("ij,ij->j", P[:, cols].conj(), AP).real
        safe = curvature > 0
        alpha = np.where(safe, rz[cols] / np.where(safe, curvature, 1.0), 0.0)
        X[:, cols] += alpha * P[:, cols]
        R[:, cols] -= alpha * AP
        res[cols] = np.linalg.norm(R[:, cols], axis=0) / b_norm[cols]

        done = (res[cols] <= tol) | ~safe
        active[cols[done]] = False
        cols = cols[~done]
        if cols.size == 0:
            break
        Zc = preconditioner(R[:, cols]) if preconditioner else R[:, cols]
        rz_new = np.einsum("ij,ij->j", R[:, cols].conj(), Zc).real
        P[:, cols] = Zc + (rz_new / rz[cols]) * P[:, cols]
        rz[cols] = rz_new

    if squeeze:
        return X[:, 0], it, res
    return X, it, res


# ──────────────────────────────────────────────
# Conjugate gradients squared
# ──────────────────────────────────────────────

def cgs_solve(
    op,
    rhs: np.ndarray,
    tol: float = 1e-4,
    maxit: Optional[int] = None,
    x0: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, SolveReport]:
    """CGS for general (complex) systems; two mat-vecs per iteration."""
    A = _as_operator(op)
    b = np.asarray(rhs)
    dtype = _result_dtype(A, b)
    n = b.shape[0]
    maxit = maxit or 10 * n
    report = SolveReport(solver="cgs", tolerance=tol)
    start = time.time()

    x = np.zeros(n, dtype=dtype) if x0 is None else np.array(x0, dtype=dtype)
    b_norm = np.linalg.norm(b)
    if b_norm == 0:
        report.residual_history = [0.0]
        report.converged = True
        report.wall_time = time.time() - start
        return np.zeros(n, dtype=dtype), report

    r = b.astype(dtype)
    if x0 is not None:
        r = r - A.matvec(x)
        report.matvec_count += 1
    report.residual_history.append(float(np.linalg.norm(r) / b_norm))
    r_tilde = r.copy()
    r_tilde_norm = np.linalg.norm(r_tilde)
    u = p = q = np.zeros(n, dtype=dtype)
    rho_prev = 1.0

    for it in range(1, maxit + 1):
        if report.residual_history[-1] <= tol:
            break
        rho = np.vdot(r_tilde, r)
        if abs(rho) <= BREAKDOWN_RTOL * r_tilde_norm * np.linalg.norm(r):
            raise BreakdownError(f"CGS breakdown at iteration {it}: ρ = {abs(rho):.3e}")
        if it == 1:
            u = r.copy()
            p = u.copy()
        else:
            beta = rho / rho_prev
            u = r + beta * q
            p = u + beta * (q + beta * p)
        v = A.matvec(p)
        sigma = np.vdot(r_tilde, v)
        if sigma == 0:
            raise BreakdownError(f"CGS breakdown at iteration {it}: r̃·Ap = 0")
        alpha = rho / sigma
        q = u - alpha * v
        uq = u + q
        x += alpha * uq
        r -= alpha * A.matvec(uq)
        report.matvec_count += 2
        report.iterations = it
        rho_prev = rho

        res = float(np.linalg.norm(r) / b_norm)
        report.residual_history.append(res)
        if not math.isfinite(res):
            logger.warning("CGS residual became non-finite at iteration %d", it)
            break
        if res <= tol:
            break

    report.converged = math.isfinite(report.final_residual) and report.final_residual <= tol
    report.wall_time = time.time() - start
    if not report.converged:
        logger.warning("CGS stopped after %d iterations at residual %.3e", report.iterations, report.final_residual)
    return x, report


# ──────────────────────────────────────────────
# Spectral estimates
# ──────────────────────────────────────────────

def power_iteration(
    op,
    tol: float = DEFAULT_POWER_TOL,
    maxit: int = DEFAULT_POWER_MAXIT,
    seed: int = 0,
    hermitian: bool = True,
) -> PowerIterationResult:
    """
    Dominant eigenvalue magnitude.

    Hermitian operators use the Rayleigh quotient, others ‖Ax‖ of the unit
    iterate. Stops when the estimate changes by less than `tol` (relative)
    or the eigen-residual ‖Ax − θx‖ drops below tol·|θ|.
    """
    A = _as_operator(op)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    if np.issubdtype(A.dtype, np.complexfloating):
        x = x + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)

    previous = None
    value = 0.0
    for it in range(1, maxit + 1):
        y = A.matvec(x)
        y_norm = np.linalg.norm(y)
        if y_norm == 0:
            return PowerIterationResult(0.0, it, True)
        if hermitian:
            rayleigh = np.vdot(x, y).real
            value = abs(rayleigh)
            residual = np.linalg.norm(y - rayleigh * x)
        else:
            value = y_norm
            residual = math.inf
        if residual <= tol * value:
            return PowerIterationResult(float(value), it, True)
        if previous is not None and abs(value - previous) <= tol * value:
            return PowerIterationResult(float(value), it, True)
        previous = value
        x = y / y_norm

    logger.warning("power iteration hit %d iterations; last estimate %.6e", maxit, value)
    return PowerIterationResult(float(value), maxit, False)


def materialize(op, n: Optional[int] = None, block: int = MATERIALIZE_BLOCK) -> np.ndarray:
    """Dense matrix of an operator handle, applied to identity blocks."""
    if isinstance(op, np.ndarray):
        return op
    A = _as_operator(op)
    n = n or A.shape[1]
    out = np.empty((A.shape[0], n), dtype=np.result_type(A.dtype, np.float64))
    for s in range(0, n, block):
        e = min(s + block, n)
        eye = np.zeros((n, e - s))
        eye[np.arange(s, e), np.arange(e - s)] = 1.0
        out[:, s:e] = A.matmat(eye)
    return out


def dense_condition(matrix, cap: int = DEFAULT_DENSE_CAP) -> float:
    """2-norm condition number σ_max/σ_min by full SVD."""
    n = matrix.shape[0]
    if n > cap:
        raise SizeCapError(f"dense condition number requested for N={n} > cap {cap}")
    dense = materialize(matrix)
    sv = scipy.linalg.svdvals(dense)
    if sv[-1] == 0:
        return math.inf
    return float(sv[0] / sv[-1])


def cg_iteration_bound(kappa: float, eps: float) -> int:
    """⌈½·√κ·ln(2/ε)⌉."""
    return math.ceil(0.5 * math.sqrt(kappa) * math.log(2.0 / eps))


def write_residual_history(report: SolveReport, path: str | Path, timestamp: bool = True) -> Path:
    rows = ([i, r] for i, r in enumerate(report.residual_history))
    return write_csv(path, "residual_history", RESIDUAL_HEADER, rows, timestamp)
