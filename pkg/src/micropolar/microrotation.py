"""Microrotation subproblem: linear advection-diffusion-reaction for ``w``.

Given a velocity ``v`` and density ``rho`` the total microrotation solves

    -kappa Lap w + rho v . grad w + 4 mu_r w = 2 mu_r curl v + rho g

with ``w = w0`` on the boundary.  The advection term is assembled in the
centred skew-symmetric form ``(rho v . grad w + div(rho v w)) / 2`` so the
matrix's advective part is exactly antisymmetric.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .boundary import BoundaryTrace, boundary_h_half_norm, build_lift_w
from .errors import LinearSolveError
from .fields import GridSpec, ScalarField, VectorField, curl, norm
from .linalg import SparseMatrix, solve_linear
from .stencils import five_point_matrix, interior_values, restrict_dirichlet, scatter_interior

__all__ = [
    "FluidParams",
    "AdvectionDominatedWarning",
    "assemble_problem_A",
    "solve_problem_A",
    "EstimateReport",
    "check_estw",
    "cell_peclet",
]


class AdvectionDominatedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FluidParams:
    """Material constants; ``sigma = mu + mu_r`` and ``kappa = c_a + c_d``.

    The microinertia is fixed to one.  ``c0`` only enters the 3D model and is
    recorded for completeness.
    """

    mu: float
    mu_r: float
    c_a: float
    c_d: float
    c0: float | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("invariant violated: mu > 0")
        if not self.mu_r >= 0:
            raise ValueError("invariant violated: mu_r >= 0")
        if not self.c_a > 0:
            raise ValueError("invariant violated: c_a > 0")
        if not self.c_d > 0:
            raise ValueError("invariant violated: c_d > 0")
        if self.c0 is not None and not self.c0 > self.c_a + self.c_d:
            raise ValueError("invariant violated: c0 > c_a + c_d")

    @property
    def sigma(self) -> float:
        return self.mu + self.mu_r

    @property
    def kappa(self) -> float:
        return self.c_a + self.c_d

    @property
    def j_inertia(self) -> float:
        return 1.0


def cell_peclet(v: VectorField, rho: ScalarField, kappa: float) -> float:
    return float(np.max(np.abs(rho.values) * v.magnitude()) * v.grid.h / (2.0 * kappa))


def _skew_advection_matrix(grid: GridSpec, mx: np.ndarray, my: np.ndarray) -> sp.csr_matrix:
    """Full-grid matrix of the skew form, rows filled on interior nodes only."""
    nx, ny, h = grid.nx, grid.ny, grid.h
    I, J = np.meshgrid(np.arange(1, nx - 1), np.arange(1, ny - 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    row = I + nx * J
    rows, cols, vals = [], [], []
    for di, dj, m in ((1, 0, mx), (-1, 0, mx), (0, 1, my), (0, -1, my)):
        ti, tj = I + di, J + dj
        sign = 1.0 if (di + dj) > 0 else -1.0
        rows.append(row)
        cols.append(ti + nx * tj)
        vals.append(sign * (m[I, J] + m[ti, tj]) / (4.0 * h))
    n = grid.size
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def assemble_problem_A(v: VectorField, rho: ScalarField, g: ScalarField, w0: BoundaryTrace,
                       params: FluidParams):
    """Return ``(matrix, rhs, boundary_values)`` of the interior system."""
    grid = v.grid
    kappa, mu_r = params.kappa, params.mu_r
    mx = rho.values * v.vx
    my = rho.values * v.vy
    full = (-kappa * five_point_matrix(grid)
            + _skew_advection_matrix(grid, mx, my)
            + 4.0 * mu_r * sp.identity(grid.size, format="csr"))
    wb = w0.to_field().values
    A, lift = restrict_dirichlet(grid, full, wb)
    source = 2.0 * mu_r * curl(v).values + rho.values * g.values
    rhs = interior_values(grid, source) - lift
    return A, rhs, wb


def solve_problem_A(v: VectorField, rho: ScalarField, g: ScalarField, w0: BoundaryTrace,
                    params: FluidParams, method: str = "auto", return_report: bool = False):
    """Solve for the total microrotation ``w`` (``w = w0`` on the boundary).

    Emits ``AdvectionDominatedWarning`` when the cell Peclet number
    ``max |rho v| h / (2 kappa)`` exceeds one; the solution is still returned.
    """
    pe = cell_peclet(v, rho, params.kappa)
    if pe > 1.0:
        warnings.warn(f"advection-dominated grid (cell Peclet {pe:.3g})", AdvectionDominatedWarning,
                      stacklevel=2)
    A, rhs, wb = assemble_problem_A(v, rho, g, w0, params)
    x, report = solve_linear(A, rhs, method=method, tol=1e-12)
    if not report.converged and report.method == "direct":
        raise LinearSolveError(f"linear solve failed (residual {report.residual:.2e})")
    w = ScalarField(v.grid, scatter_interior(v.grid, x, wb))
    if return_report:
        return w, report
    return w


@dataclass
class EstimateReport:
    """Both sides of the a priori microrotation energy estimate."""

    left: float
    right: float
    terms: tuple
    margin: float = 0.0

    def __post_init__(self):
        self.margin = self.right - self.left


def check_estw(w_shifted: ScalarField, v: VectorField, g: ScalarField, w0: BoundaryTrace,
               params: FluidParams, eta_sup: float, lift: ScalarField | None = None) -> EstimateReport:
    """Evaluate the energy estimate for the homogeneous part ``w - b``.

    Left: ``kappa |grad w_|^2 + 4 mu_r |w_|^2``.  Right: the five-term bound in
    which the lift constant times ``|w0|_{H^1/2}`` is replaced by the computed
    ``|b|_{H1}`` of the harmonic lift ``b``.
    """
    kappa, mu_r = params.kappa, params.mu_r
    b = build_lift_w(w0) if lift is None else lift
    cb = norm(b, "H1")
    grad_w = norm(w_shifted, "H1SEMI")
    w_l2 = norm(w_shifted, "L2")
    left = kappa * grad_w**2 + 4.0 * mu_r * w_l2**2
    terms = (
        2.0 * mu_r * norm(v, "H1SEMI") * w_l2,
        eta_sup * norm(g, "L2") * w_l2,
        eta_sup * cb * norm(v, "L4") * w_l2,
        kappa * cb * grad_w,
        4.0 * mu_r * cb * w_l2,
    )
    return EstimateReport(float(left), float(sum(terms)), tuple(float(t) for t in terms))
