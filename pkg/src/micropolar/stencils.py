"""Assembly of the elliptic systems used by the solver.

Unknowns are the interior nodes in natural order unless stated otherwise;
boundary data is moved to the right-hand side.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .fields import GridSpec, ScalarField, derivative_matrix
from .linalg import BandedLU, SparseMatrix, solve_linear

# 13-point stencil of the squared five-point Laplacian (times h**4)
_BIHARMONIC = [
    (0, 0, 20.0),
    (1, 0, -8.0), (-1, 0, -8.0), (0, 1, -8.0), (0, -1, -8.0),
    (1, 1, 2.0), (1, -1, 2.0), (-1, 1, 2.0), (-1, -1, 2.0),
    (2, 0, 1.0), (-2, 0, 1.0), (0, 2, 1.0), (0, -2, 1.0),
]


def interior_index(grid: GridSpec) -> np.ndarray:
    """Map full-grid node -> interior unknown number (-1 on the boundary)."""
    idx = -np.ones(grid.shape, dtype=np.int64)
    ni, nj = grid.nx - 2, grid.ny - 2
    idx[1:-1, 1:-1] = (np.arange(ni)[:, None] + ni * np.arange(nj)[None, :])
    return idx


def interior_values(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    return np.asarray(values)[1:-1, 1:-1].reshape(-1, order="F")


def scatter_interior(grid: GridSpec, vec: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    out = np.array(boundary, dtype=float, copy=True)
    out[1:-1, 1:-1] = np.asarray(vec).reshape(grid.nx - 2, grid.ny - 2, order="F")
    return out


def restrict_dirichlet(grid: GridSpec, full: sp.spmatrix, boundary: np.ndarray):
    """Split a full-grid operator into interior block and boundary lift.

    Returns ``(A_II, lift)`` with ``lift = A_IB @ boundary`` on the interior
    rows, so the Dirichlet system reads ``A_II x = rhs_I - lift``.
    """
    mask = grid.ravel(grid.interior)
    full = sp.csr_matrix(full)
    A_II = full[mask][:, mask]
    bvec = grid.ravel(np.where(grid.interior, 0.0, boundary))
    lift = (full[mask] @ bvec)
    return SparseMatrix(A_II), lift


def five_point_matrix(grid: GridSpec) -> sp.csr_matrix:
    """Full-grid five-point Laplacian (rows of boundary nodes are meaningless)."""
    def d2(n):
        main = -2.0 * np.ones(n)
        off = np.ones(n - 1)
        return sp.diags([off, main, off], [-1, 0, 1]) / grid.h**2

    return (sp.kron(sp.identity(grid.ny), d2(grid.nx))
            + sp.kron(d2(grid.ny), sp.identity(grid.nx))).tocsr()


def wide_laplacian_matrix(grid: GridSpec) -> sp.csr_matrix:
    """``curl o perp_grad`` as a full-grid matrix (= Dx Dx + Dy Dy)."""
    Dx = derivative_matrix(grid, 0)
    Dy = derivative_matrix(grid, 1)
    return (Dx @ Dx + Dy @ Dy).tocsr()


def solve_dirichlet(grid: GridSpec, full: sp.spmatrix, rhs: np.ndarray, boundary: np.ndarray,
                    method="auto", tol=1e-12):
    """Solve ``full @ q = rhs`` on interior nodes with ``q = boundary`` on the edge."""
    A, lift = restrict_dirichlet(grid, full, boundary)
    b = interior_values(grid, rhs) - lift
    x, report = solve_linear(A, b, method=method, tol=tol)
    return scatter_interior(grid, x, boundary), report


def harmonic_extension(grid: GridSpec, boundary: np.ndarray, method="auto"):
    """Discrete harmonic extension (five-point) of the boundary values."""
    return solve_dirichlet(grid, five_point_matrix(grid), np.zeros(grid.shape), boundary, method)


class ClampedBiharmonic:
    """Factorised 13-point operator ``Delta_h^2`` with clamped boundary data.

    Boundary values of the unknown are prescribed.  Ghost values one cell
    outside the domain are eliminated with the third-order one-sided normal
    derivative ``q'(0) = (-2 q[-1] - 3 q[0] + 6 q[1] - q[2]) / (6 h)``, i.e.
    ``q[-1] = (-3 q[0] + 6 q[1] - q[2]) / 2 - 3 h q'(0)`` with ``q'`` the
    inward normal derivative.  The plain central closure ``q[-1] = q[1] -
    2 h q'`` keeps ``q`` second order but loses an order in the wall
    vorticity, which the pressure recovery needs.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        nx, ny, h = grid.nx, grid.ny, grid.h
        idx = interior_index(grid)
        I, J = np.meshgrid(np.arange(1, nx - 1), np.arange(1, ny - 1), indexing="ij")
        I, J = I.ravel(), J.ravel()
        row = idx[I, J]
        rows, cols, vals = [], [], []

        def add(mask, ti, tj, w):
            col = idx[ti[mask], tj[mask]]
            keep = col >= 0
            rows.append(row[mask][keep])
            cols.append(col[keep])
            vals.append(np.broadcast_to(w, mask.sum())[keep] if np.ndim(w) == 0 else w[keep])

        for di, dj, c in _BIHARMONIC:
            w = c / h**4
            ti, tj = I + di, J + dj
            inside = (ti >= 0) & (ti <= nx - 1) & (tj >= 0) & (tj <= ny - 1)
            add(inside, ti, tj, w)
            for gmask, r1, r2 in self._ghosts(ti, tj):
                add(gmask, *r1, 3.0 * w)
                add(gmask, *r2, -0.5 * w)
        self.matrix = SparseMatrix.from_triplets(
            (nx - 2) * (ny - 2), np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
        self._lu = None

    def _ghosts(self, ti, tj):
        """Yield ``(mask, ring1_index, ring2_index)`` for ghosts on each edge."""
        nx, ny = self.grid.nx, self.grid.ny
        yield ti < 0, (np.ones_like(ti), tj), (2 * np.ones_like(ti), tj)
        yield ti > nx - 1, ((nx - 2) * np.ones_like(ti), tj), ((nx - 3) * np.ones_like(ti), tj)
        yield tj < 0, (ti, np.ones_like(tj)), (ti, 2 * np.ones_like(tj))
        yield tj > ny - 1, (ti, (ny - 2) * np.ones_like(tj)), (ti, (ny - 3) * np.ones_like(tj))

    @property
    def lu(self):
        if self._lu is None:
            self._lu = BandedLU(self.matrix)
        return self._lu

    def boundary_rhs(self, values: np.ndarray, dqdx: np.ndarray, dqdy: np.ndarray) -> np.ndarray:
        """Right-hand-side contribution of the clamped data (interior layout).

        ``values`` holds the Dirichlet data on boundary nodes; ``dqdx`` is used
        on the left/right edges and ``dqdy`` on the bottom/top edges.
        """
        g = self.grid
        nx, ny, h = g.nx, g.ny, g.h
        full = np.zeros(g.shape)
        I, J = np.meshgrid(np.arange(1, nx - 1), np.arange(1, ny - 1), indexing="ij")
        for di, dj, c in _BIHARMONIC:
            ti, tj = I + di, J + dj
            w = c / h**4
            contrib = np.zeros(I.shape)
            gl, gr, gb, gt = ti < 0, ti > nx - 1, tj < 0, tj > ny - 1
            # known part of each ghost: boundary value and normal derivative
            contrib[gl] += w * (-1.5 * values[0, tj[gl]] - 3.0 * h * dqdx[0, tj[gl]])
            contrib[gr] += w * (-1.5 * values[nx - 1, tj[gr]] + 3.0 * h * dqdx[nx - 1, tj[gr]])
            contrib[gb] += w * (-1.5 * values[ti[gb], 0] - 3.0 * h * dqdy[ti[gb], 0])
            contrib[gt] += w * (-1.5 * values[ti[gt], ny - 1] + 3.0 * h * dqdy[ti[gt], ny - 1])
            ghost = gl | gr | gb | gt
            on_bdry = (~ghost) & ((ti == 0) | (ti == nx - 1) | (tj == 0) | (tj == ny - 1))
            contrib[on_bdry] += w * values[ti[on_bdry], tj[on_bdry]]
            full[1:-1, 1:-1] += contrib
        return interior_values(g, full)

    def solve(self, rhs: np.ndarray, values: np.ndarray, dqdx: np.ndarray, dqdy: np.ndarray):
        """Solve ``Delta^2 q = rhs`` (full-grid ``rhs``; only interior rows used)."""
        b = interior_values(self.grid, rhs) - self.boundary_rhs(values, dqdx, dqdy)
        x, report = self.lu.solve(b)
        return scatter_interior(self.grid, x, values), report


def neumann_poisson_matrix(grid: GridSpec) -> sp.csr_matrix:
    """Five-point Laplacian on all nodes with ghost-reflected boundary rows."""
    nx, ny, h = grid.nx, grid.ny, grid.h

    def d2(n):
        m = sp.lil_matrix((n, n))
        for k in range(n):
            m[k, k] = -2.0
            if k > 0:
                m[k, k - 1] += 1.0
            if k < n - 1:
                m[k, k + 1] += 1.0
        m[0, 1] = 2.0
        m[n - 1, n - 2] = 2.0
        return m.tocsr() / h**2

    return (sp.kron(sp.identity(ny), d2(nx)) + sp.kron(d2(ny), sp.identity(nx))).tocsr()


def solve_neumann_poisson(grid: GridSpec, source: np.ndarray, flux_x: np.ndarray, flux_y: np.ndarray):
    """Solve ``Delta p = source`` with ``grad p = (flux_x, flux_y)`` normal data.

    Only the normal component of the flux is used on each edge.  The discrete
    compatibility condition is enforced by shifting the outward normal data by
    a constant; the solution is returned with zero trapezoid mean.

    Returns
    -------
    p : ndarray
    shift : float
        The constant subtracted from the outward normal flux.
    report : LinearSolveReport
    """
    from .fields import trapezoid_weights

    nx, ny, h = grid.nx, grid.ny, grid.h
    rhs = np.array(source, dtype=float, copy=True)
    edges = np.zeros(grid.shape)
    # outward normal derivative g_n enters as -2 g_n / h
    rhs[0, :] -= 2.0 * (-flux_x[0, :]) / h
    rhs[-1, :] -= 2.0 * flux_x[-1, :] / h
    rhs[:, 0] -= 2.0 * (-flux_y[:, 0]) / h
    rhs[:, -1] -= 2.0 * flux_y[:, -1] / h
    edges[0, :] += 1
    edges[-1, :] += 1
    edges[:, 0] += 1
    edges[:, -1] += 1
    w = trapezoid_weights(grid)
    defect = float(np.sum(w * rhs))
    shift = defect * h / (2.0 * float(np.sum(w * edges)))
    rhs -= 2.0 * shift / h * edges
    # equivalent to g_n -> g_n - shift
    A = neumann_poisson_matrix(grid).tolil()
    b = grid.ravel(rhs)
    A[0, :] = 0.0
    A[0, 0] = 1.0
    b[0] = 0.0
    x, report = solve_linear(SparseMatrix(A.tocsr()), b, method="direct")
    p = grid.unravel(x)
    p = p - np.sum(w * p) / np.sum(w)
    return p, -shift, report
