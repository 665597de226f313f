"""Node-centred fields on a uniform rectangular grid and their FD operators.

Arrays are stored with shape ``(nx, ny)`` and indexed ``[i, j]`` so that
node ``(i, j)`` sits at ``(i*h, j*h)``.  Flattening to a vector uses the
natural row-major node ordering ``k = j*nx + i`` (x runs fastest), which is
``order="F"`` for an ``(nx, ny)`` array.

First derivatives are second-order central differences at interior nodes and
second-order one-sided differences on the boundary (the ``numpy.gradient``
convention with ``edge_order=2``).  Because the same 1D derivative is used in
both directions, ``div(perp_grad(psi))`` vanishes to roundoff at every
interior node.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatchError

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "perp_grad",
    "grad",
    "div",
    "curl",
    "curl_scalar",
    "laplacian",
    "advect",
    "norm",
    "trapezoid_weights",
    "integrate",
    "derivative_matrix",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform node-centred grid on ``[0, lx] x [0, ly]`` with square cells."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid needs at least 3 nodes per direction")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError("domain lengths must be positive")
        hx = self.lx / (self.nx - 1)
        hy = self.ly / (self.ny - 1)
        if abs(hx - hy) > 1e-12 * max(hx, hy):
            raise ValueError(f"cells must be square (hx={hx!r}, hy={hy!r})")

    @classmethod
    def unit(cls, n: int) -> "GridSpec":
        return cls(n, n, 1.0, 1.0)

    @property
    def h(self) -> float:
        return self.lx / (self.nx - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.h

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.h

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        X.setflags(write=False)
        Y.setflags(write=False)
        return X, Y

    @cached_property
    def interior(self) -> np.ndarray:
        """Boolean mask of interior nodes."""
        mask = np.zeros(self.shape, dtype=bool)
        mask[1:-1, 1:-1] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def wall_distance(self) -> np.ndarray:
        X, Y = self.mesh
        d = np.minimum(np.minimum(X, self.lx - X), np.minimum(Y, self.ly - Y))
        d = np.maximum(d, 0.0)
        d.setflags(write=False)
        return d

    def ravel(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape(-1, order="F")

    def unravel(self, vec: np.ndarray) -> np.ndarray:
        return np.asarray(vec).reshape(self.shape, order="F")

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))

    def sample(self, fn) -> "ScalarField":
        """Evaluate ``fn(X, Y)`` on the nodes."""
        X, Y = self.mesh
        return ScalarField(self, np.broadcast_to(np.asarray(fn(X, Y), dtype=float), self.shape).copy())

    def sample_vector(self, fn) -> "VectorField":
        X, Y = self.mesh
        vx, vy = fn(X, Y)
        vx = np.broadcast_to(np.asarray(vx, dtype=float), self.shape).copy()
        vy = np.broadcast_to(np.asarray(vy, dtype=float), self.shape).copy()
        return VectorField(self, vx, vy)


def _check_values(grid, *arrays):
    for a in arrays:
        if a.shape != grid.shape:
            raise ValueError(f"array shape {a.shape} does not match grid {grid.shape}")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        _check_values(self.grid, self.values)

    def _wrap(self, values):
        return ScalarField(self.grid, values)

    def _other(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __mul__(self, other):
        if isinstance(other, VectorField):
            return other * self
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / self._other(other))

    def __neg__(self):
        return self._wrap(-self.values)

    def copy(self):
        return self._wrap(self.values.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vx", np.asarray(self.vx, dtype=float))
        object.__setattr__(self, "vy", np.asarray(self.vy, dtype=float))
        _check_values(self.grid, self.vx, self.vy)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    def _wrap(self, vx, vy):
        return VectorField(self.grid, vx, vy)

    def __add__(self, other):
        _same_grid(self, other)
        return self._wrap(self.vx + other.vx, self.vy + other.vy)

    def __sub__(self, other):
        _same_grid(self, other)
        return self._wrap(self.vx - other.vx, self.vy - other.vy)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self, other)
            other = other.values
        return self._wrap(self.vx * other, self.vy * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self, other)
            other = other.values
        return self._wrap(self.vx / other, self.vy / other)

    def __neg__(self):
        return self._wrap(-self.vx, -self.vy)

    def dot(self, other: "VectorField") -> ScalarField:
        _same_grid(self, other)
        return ScalarField(self.grid, self.vx * other.vx + self.vy * other.vy)

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.vx, self.vy)

    def copy(self):
        return self._wrap(self.vx.copy(), self.vy.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.vx)) and np.all(np.isfinite(self.vy)))


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError()
    return g


# --------------------------------------------------------------------------
# derivatives


def _dx(a, h):
    return np.gradient(a, h, axis=0, edge_order=2)


def _dy(a, h):
    return np.gradient(a, h, axis=1, edge_order=2)


def _d2(a, h, axis):
    """Second derivative: 3-point central inside, 4-point one-sided at ends."""
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - 2.0 * a[1:-1] + a[:-2]) / h**2
    if len(a) < 4:
        # three nodes carry a single second difference
        out[0] = out[-1] = out[1]
    else:
        out[0] = (2.0 * a[0] - 5.0 * a[1] + 4.0 * a[2] - a[3]) / h**2
        out[-1] = (2.0 * a[-1] - 5.0 * a[-2] + 4.0 * a[-3] - a[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def grad(q: ScalarField) -> VectorField:
    h = q.grid.h
    return VectorField(q.grid, _dx(q.values, h), _dy(q.values, h))


def perp_grad(psi: ScalarField) -> VectorField:
    """Return ``(-d psi/dy, d psi/dx)``."""
    h = psi.grid.h
    return VectorField(psi.grid, -_dy(psi.values, h), _dx(psi.values, h))


def div(v: VectorField) -> ScalarField:
    h = v.grid.h
    return ScalarField(v.grid, _dx(v.vx, h) + _dy(v.vy, h))


def curl(v: VectorField) -> ScalarField:
    """Planar curl ``d vy/dx - d vx/dy``."""
    h = v.grid.h
    return ScalarField(v.grid, _dx(v.vy, h) - _dy(v.vx, h))


def curl_scalar(w: ScalarField) -> VectorField:
    """Curl of ``(0, 0, w)`` restricted to the plane: ``(dw/dy, -dw/dx)``."""
    h = w.grid.h
    return VectorField(w.grid, _dy(w.values, h), -_dx(w.values, h))


def laplacian(q, include_boundary: bool = True):
    """Five-point Laplacian.

    Boundary rows use one-sided second-order second derivatives; they are for
    diagnostics only.  Pass ``include_boundary=False`` to zero them.
    Vector fields are handled componentwise.
    """
    if isinstance(q, VectorField):
        lx = laplacian(ScalarField(q.grid, q.vx), include_boundary)
        ly = laplacian(ScalarField(q.grid, q.vy), include_boundary)
        return VectorField(q.grid, lx.values, ly.values)
    h = q.grid.h
    out = _d2(q.values, h, 0) + _d2(q.values, h, 1)
    if not include_boundary:
        out[~q.grid.interior] = 0.0
    return ScalarField(q.grid, out)


def advect(v: VectorField, q, include_boundary: bool = False):
    """Central ``(v . grad) q`` for a scalar or (componentwise) vector ``q``.

    Boundary values are zero unless ``include_boundary`` is set, in which case
    they use the one-sided derivatives.
    """
    _same_grid(v, q)
    h = v.grid.h

    def one(a):
        out = v.vx * _dx(a, h) + v.vy * _dy(a, h)
        if not include_boundary:
            out[~v.grid.interior] = 0.0
        return out

    if isinstance(q, VectorField):
        return VectorField(v.grid, one(q.vx), one(q.vy))
    return ScalarField(v.grid, one(q.values))


# --------------------------------------------------------------------------
# quadrature and norms


def trapezoid_weights(grid: GridSpec) -> np.ndarray:
    """Nodal weights of the tensor trapezoid rule (sum = lx*ly)."""
    cx = np.ones(grid.nx)
    cx[[0, -1]] = 0.5
    cy = np.ones(grid.ny)
    cy[[0, -1]] = 0.5
    return np.outer(cx, cy) * grid.h**2


def integrate(values: np.ndarray, grid: GridSpec) -> float:
    return float(np.sum(trapezoid_weights(grid) * values))


def _components(field):
    if isinstance(field, VectorField):
        return [field.vx, field.vy]
    return [field.values]


def _forward_gradient_sq(a, h, grid):
    # forward differences live on cell edges: midpoint weight along the
    # differenced axis, trapezoid weight across it
    cy = np.ones(grid.ny)
    cy[[0, -1]] = 0.5
    cx = np.ones(grid.nx)
    cx[[0, -1]] = 0.5
    gx = np.diff(a, axis=0) / h
    gy = np.diff(a, axis=1) / h
    return float(h * h * (np.sum(gx**2 * cy[None, :]) + np.sum(gy**2 * cx[:, None])))


def norm(field, kind: str = "L2") -> float:
    """Discrete L2, H1, L4 or Linf norm of a scalar or vector field.

    Integrals use the trapezoid rule; the H1 gradient part uses forward
    differences.
    """
    comps = _components(field)
    grid = field.grid
    kind = kind.upper()
    if kind == "LINF":
        mag = np.sqrt(sum(c**2 for c in comps))
        return float(mag.max())
    w = trapezoid_weights(grid)
    sq = sum(c**2 for c in comps)
    if kind == "L2":
        return float(np.sqrt(np.sum(w * sq)))
    if kind == "L4":
        return float(np.sum(w * sq**2) ** 0.25)
    if kind == "H1":
        semi = sum(_forward_gradient_sq(c, grid.h, grid) for c in comps)
        return float(np.sqrt(np.sum(w * sq) + semi))
    if kind == "H1SEMI":
        return float(np.sqrt(sum(_forward_gradient_sq(c, grid.h, grid) for c in comps)))
    raise ValueError(f"unknown norm kind {kind!r}")


# --------------------------------------------------------------------------
# sparse operator matrices (natural node ordering)


def _gradient_matrix_1d(n, h):
    rows, cols, vals = [], [], []
    for k in range(1, n - 1):
        rows += [k, k]
        cols += [k - 1, k + 1]
        vals += [-0.5 / h, 0.5 / h]
    rows += [0, 0, 0, n - 1, n - 1, n - 1]
    cols += [0, 1, 2, n - 1, n - 2, n - 3]
    vals += [-1.5 / h, 2.0 / h, -0.5 / h, 1.5 / h, -2.0 / h, 0.5 / h]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def derivative_matrix(grid: GridSpec, axis: int) -> sp.csr_matrix:
    """Sparse matrix of the first-derivative operator used by this module."""
    if axis == 0:
        return sp.kron(sp.identity(grid.ny), _gradient_matrix_1d(grid.nx, grid.h), format="csr")
    return sp.kron(_gradient_matrix_1d(grid.ny, grid.h), sp.identity(grid.nx), format="csr")
