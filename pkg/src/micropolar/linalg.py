"""Sparse matrices and the linear solvers behind every elliptic solve.

The direct path is banded LU with partial pivoting (LAPACK ``dgbtrf`` /
``dgbtrs``); the iterative paths are hand-written conjugate gradients and
Jacobi-preconditioned BiCGStab.  All paths are single-threaded in their own
logic and deterministic for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from .errors import LinearSolveError

__all__ = [
    "SparseMatrix",
    "LinearSolveReport",
    "BandedLU",
    "solve_linear",
    "DIRECT_SIZE_LIMIT",
]

# grids up to 129 x 129 nodes go to the banded direct solver by default
DIRECT_SIZE_LIMIT = 129 * 129

PIVOT_TOL = 1e-14


class SparseMatrix:
    """Square sparse matrix in CSR form (no duplicate columns per row)."""

    def __init__(self, matrix):
        m = sp.csr_matrix(matrix, dtype=float)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got {m.shape}")
        m.sum_duplicates()
        m.sort_indices()
        if not np.all(np.isfinite(m.data)):
            raise ValueError("matrix has non-finite entries")
        self.csr = m

    @classmethod
    def from_triplets(cls, n, rows, cols, vals):
        return cls(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))

    @property
    def n(self) -> int:
        return self.csr.shape[0]

    def row(self, k):
        """Ordered ``(column, value)`` entries of row ``k``."""
        lo, hi = self.csr.indptr[k], self.csr.indptr[k + 1]
        return list(zip(self.csr.indices[lo:hi].tolist(), self.csr.data[lo:hi].tolist()))

    def __matmul__(self, x):
        return self.csr @ x

    def diagonal(self):
        return self.csr.diagonal()

    def bandwidths(self) -> tuple[int, int]:
        coo = self.csr.tocoo()
        if coo.nnz == 0:
            return 0, 0
        off = coo.row - coo.col
        return int(max(off.max(), 0)), int(max(-off.min(), 0))

    def is_symmetric(self, tol=1e-12) -> bool:
        d = self.csr - self.csr.T
        if d.nnz == 0:
            return True
        return float(abs(d).max()) <= tol * max(float(abs(self.csr).max()), 1.0)

    def toarray(self):
        return self.csr.toarray()


@dataclass
class LinearSolveReport:
    method: str
    iterations: int
    residual: float
    converged: bool
    message: str = ""


def _relres(A, x, b):
    bn = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return float(r / bn) if bn > 0 else float(r)


class BandedLU:
    """Banded LU factorisation with partial pivoting, reusable across RHS."""

    def __init__(self, A: SparseMatrix):
        self.A = A
        n = A.n
        kl, ku = A.bandwidths()
        self.kl, self.ku = kl, ku
        ab = np.zeros((2 * kl + ku + 1, n))
        coo = A.csr.tocoo()
        ab[kl + ku + coo.row - coo.col, coo.col] = coo.data
        scale = float(np.max(np.abs(coo.data))) if coo.nnz else 0.0
        lu, piv, info = lapack.dgbtrf(ab, kl, ku, overwrite_ab=1)
        if info < 0:
            raise LinearSolveError(f"dgbtrf argument error {info}")
        udiag = lu[kl + ku, :]
        if info > 0 or n == 0 or np.min(np.abs(udiag)) <= PIVOT_TOL * max(scale, 1e-300):
            raise LinearSolveError("singular matrix")
        self.lu, self.piv = lu, piv

    def solve(self, rhs, refine=True):
        rhs = np.asarray(rhs, dtype=float)
        x, info = lapack.dgbtrs(self.lu, self.kl, self.ku, rhs, self.piv)
        if info != 0:
            raise LinearSolveError(f"dgbtrs failed with info={info}")
        res = _relres(self.A.csr, x, rhs)
        if refine and res > 1e-12:
            dx, _ = lapack.dgbtrs(self.lu, self.kl, self.ku, rhs - self.A.csr @ x, self.piv)
            x = x + dx
            res = _relres(self.A.csr, x, rhs)
        return x, LinearSolveReport("direct", 1, res, res <= 1e-10)


def _cg(A, b, x0, tol, max_iter, precond):
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b), LinearSolveReport("cg", 0, 0.0, True)
    z = precond * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    k = 0
    while res > tol and k < max_iter:
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0:
            raise LinearSolveError("indefinite matrix in cg")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        k += 1
        res = np.linalg.norm(r) / bnorm
        z = precond * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    msg = "" if res <= tol else "max iterations"
    return x, LinearSolveReport("cg", k, float(res), res <= tol, msg)


def _bicgstab(A, b, x0, tol, max_iter, precond):
    x = np.zeros_like(b) if x0 is None else x0.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b), LinearSolveReport("bicgstab", 0, 0.0, True)
    r = b - A @ x
    r_hat = r.copy()
    rho_old = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    res = np.linalg.norm(r) / bnorm
    k = 0
    while res > tol and k < max_iter:
        rho = r_hat @ r
        if rho == 0:
            break
        if k == 0:
            p = r.copy()
        else:
            p = r + (rho / rho_old) * (alpha / omega) * (p - omega * v)
        ph = precond * p
        v = A @ ph
        denom = r_hat @ v
        if denom == 0:
            break
        alpha = rho / denom
        s = r - alpha * v
        if np.linalg.norm(s) / bnorm <= tol:
            x += alpha * ph
            r = s
            k += 1
            res = np.linalg.norm(r) / bnorm
            break
        sh = precond * s
        t = A @ sh
        tt = t @ t
        omega = (t @ s) / tt if tt > 0 else 0.0
        x += alpha * ph + omega * sh
        r = s - omega * t
        rho_old = rho
        k += 1
        res = np.linalg.norm(r) / bnorm
        if omega == 0:
            break
    # recompute the true residual; the recurrence drifts
    res = _relres(A, x, b)
    msg = "" if res <= tol else "max iterations"
    return x, LinearSolveReport("bicgstab", k, float(res), res <= tol, msg)


def solve_linear(A: SparseMatrix, rhs, method: str = "auto", tol: float = 1e-10,
                 max_iter: int = 10_000, x0=None, jacobi: bool = True):
    """Solve ``A x = rhs``.

    Parameters
    ----------
    A : SparseMatrix
    rhs : array_like, shape (n,)
    method : {"auto", "direct", "cg", "bicgstab"}
        ``auto`` picks the banded direct solver for ``n <= DIRECT_SIZE_LIMIT``
        and BiCGStab beyond.
    tol : float
        Relative residual target for the iterative methods.
    max_iter : int
    x0 : array_like, optional
        Initial guess for the iterative methods.
    jacobi : bool
        Use diagonal preconditioning in the iterative methods.

    Returns
    -------
    x : ndarray
    report : LinearSolveReport
        ``converged`` is False (and ``message`` is "max iterations") when an
        iterative method runs out of iterations; that case does not raise.

    Raises
    ------
    LinearSolveError
        "singular matrix" for a (numerically) zero pivot and
        "indefinite matrix in cg" on negative curvature.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (A.n,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({A.n},)")
    if method == "auto":
        method = "direct" if A.n <= DIRECT_SIZE_LIMIT else "bicgstab"
    if method == "direct":
        return BandedLU(A).solve(rhs)
    if method not in ("cg", "bicgstab"):
        raise ValueError(f"unknown method {method!r}")
    d = A.diagonal()
    if jacobi:
        if np.any(d == 0):
            raise LinearSolveError("singular matrix")
        precond = 1.0 / d
    else:
        precond = np.ones(A.n)
    x0 = None if x0 is None else np.asarray(x0, dtype=float)
    solver = _cg if method == "cg" else _bicgstab
    return solver(A.csr, rhs, x0, tol, max_iter, precond)
