"""Stream function of a divergence-free velocity and the density ``eta(psi)``."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .boundary import BoundaryTrace, DensityLaw, GammaSpec, boundary_stream
from .errors import MicropolarError
from .fields import GridSpec, ScalarField, VectorField, curl, div
from .linalg import BandedLU
from .stencils import interior_values, restrict_dirichlet, scatter_interior, wide_laplacian_matrix

__all__ = ["stream_of", "density_of", "stream_hessian", "DIV_TOLERANCE"]

DIV_TOLERANCE = 1e-10


@lru_cache(maxsize=8)
def _wide_lu(grid: GridSpec):
    A, _ = restrict_dirichlet(grid, wide_laplacian_matrix(grid), np.zeros(grid.shape))
    return BandedLU(A)


def stream_of(v: VectorField, v_trace: BoundaryTrace, gamma: GammaSpec) -> ScalarField:
    """Anchored stream function ``psi`` with ``perp_grad(psi) = v``.

    Boundary values come from integrating ``-v0 . n`` from the first Gamma
    node; the interior solves ``L psi = curl v`` where ``L = curl o perp_grad``
    is the discrete operator composed from the same differences as
    ``perp_grad``.  The map is therefore an exact left inverse of
    ``perp_grad`` on fields whose boundary values match the anchored trace.
    """
    grid = v.grid
    d = div(v).values[grid.interior]
    scale = max(1.0, float(np.max(np.abs([v.vx, v.vy]))) / grid.h)
    if d.size and np.max(np.abs(d)) > DIV_TOLERANCE * scale:
        raise MicropolarError("input not divergence-free")
    phi = boundary_stream(v_trace, gamma).to_field().values
    full = wide_laplacian_matrix(grid)
    _, lift = restrict_dirichlet(grid, full, phi)
    rhs = interior_values(grid, curl(v).values) - lift
    x, report = _wide_lu(grid).solve(rhs)
    return ScalarField(grid, scatter_interior(grid, x, phi))


def density_of(psi: ScalarField, law: DensityLaw) -> ScalarField:
    return ScalarField(psi.grid, law(psi.values))


def _second_difference(q: np.ndarray, slope_lo: np.ndarray, slope_hi: np.ndarray, h: float) -> np.ndarray:
    """``d2q/dx2`` along axis 0; the end rows use the clamped ghost closure.

    ``slope_lo``/``slope_hi`` are ``dq/dx`` on the first and last row.  The
    ghost is the same third-order one used by the biharmonic solve.
    """
    out = np.empty_like(q)
    out[1:-1] = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / h**2
    lo = 0.5 * (-3.0 * q[0] + 6.0 * q[1] - q[2]) - 3.0 * h * slope_lo
    hi = 0.5 * (-3.0 * q[-1] + 6.0 * q[-2] - q[-3]) + 3.0 * h * slope_hi
    out[0] = (lo - 2.0 * q[0] + q[1]) / h**2
    out[-1] = (hi - 2.0 * q[-1] + q[-2]) / h**2
    return out


def stream_hessian(psi: ScalarField, v_boundary: VectorField):
    """Second derivatives ``(psi_xx, psi_yy, psi_xy)`` at every node.

    Only the boundary values of ``v_boundary`` are read; they give the wall
    slopes ``psi_x = v_y`` and ``psi_y = -v_x``.  Normal second derivatives at
    the walls use the clamped ghost closure and the mixed derivative there is
    the tangential difference of the trace, so no one-sided difference of
    ``perp_grad(psi)`` enters.  All three are second order up to the wall.
    """
    grid = psi.grid
    h = grid.h
    q = psi.values
    vx, vy = v_boundary.vx, v_boundary.vy
    qxx = _second_difference(q, vy[0], vy[-1], h)
    qyy = _second_difference(q.T, -vx[:, 0], -vx[:, -1], h).T
    qxy = np.empty_like(q)
    qxy[1:-1, 1:-1] = (q[2:, 2:] - q[2:, :-2] - q[:-2, 2:] + q[:-2, :-2]) / (4.0 * h**2)
    # psi_xy = d/dx psi_y on horizontal walls, d/dy psi_x on vertical walls
    qxy[:, 0] = np.gradient(-vx[:, 0], h, edge_order=2)
    qxy[:, -1] = np.gradient(-vx[:, -1], h, edge_order=2)
    qxy[0, :] = np.gradient(vy[0, :], h, edge_order=2)
    qxy[-1, :] = np.gradient(vy[-1, :], h, edge_order=2)
    return qxx, qyy, qxy
