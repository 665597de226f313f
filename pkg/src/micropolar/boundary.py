"""Boundary traces, the inflow arc, the density law and boundary extensions.

The boundary loop runs counterclockwise from node ``(0, 0)``: along the
bottom edge, up the right edge, back along the top edge and down the left
edge.  Arclength ``s`` increases strictly along the loop and the closing
segment back to ``(0, 0)`` completes the perimeter ``2 (lx + ly)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import CompatibilityError, DensityError, InflowError
from .fields import GridSpec, ScalarField, VectorField, norm, perp_grad, trapezoid_weights
from .stencils import ClampedBiharmonic, harmonic_extension

__all__ = [
    "BoundaryTrace",
    "GammaSpec",
    "DensityLaw",
    "HopfExtension",
    "boundary_loop",
    "check_compatibility",
    "boundary_stream",
    "build_density_law",
    "build_hopf_extension",
    "build_lift_w",
    "boundary_h_half_norm",
    "smoothstep_cutoff",
    "DEFAULT_PANEL_SEED",
    "FLUX_FLOOR",
]

FLUX_FLOOR = 1e-10
DEFAULT_PANEL_SEED = 20110519
PANEL_SIZE = 50


@dataclass(frozen=True)
class _Loop:
    i: np.ndarray
    j: np.ndarray
    s: np.ndarray
    node_normal: np.ndarray  # (N, 2), corners get the normalised average
    seg_normal: np.ndarray   # (N, 2), normal of segment k -> k+1
    perimeter: float


@lru_cache(maxsize=32)
def boundary_loop(grid: GridSpec) -> _Loop:
    nx, ny, h = grid.nx, grid.ny, grid.h
    ii = list(range(nx)) + [nx - 1] * (ny - 1) + list(range(nx - 2, -1, -1)) + [0] * (ny - 2)
    jj = [0] * nx + list(range(1, ny)) + [ny - 1] * (nx - 1) + list(range(ny - 2, 0, -1))
    ii = np.array(ii)
    jj = np.array(jj)
    n = len(ii)
    s = np.arange(n) * h
    seg = np.zeros((n, 2))
    nxt = np.roll(np.arange(n), -1)
    for k in range(n):
        di = ii[nxt[k]] - ii[k]
        dj = jj[nxt[k]] - jj[k]
        # outward normal of a counterclockwise segment: rotate tangent by -90 deg
        seg[k] = (dj, -di)
    prev = np.roll(seg, 1, axis=0)
    nn = seg + prev
    nn /= np.linalg.norm(nn, axis=1)[:, None]
    for a in (ii, jj, s, seg, nn):
        a.setflags(write=False)
    return _Loop(ii, jj, s, nn, seg, 2.0 * (grid.lx + grid.ly))


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Values on the ordered boundary loop.

    ``values`` has shape ``(N,)`` for a scalar trace and ``(N, 2)`` for a
    vector trace.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        n = len(self.loop.s)
        if vals.shape not in ((n,), (n, 2)):
            raise ValueError(f"trace has shape {vals.shape}, expected ({n},) or ({n}, 2)")
        object.__setattr__(self, "values", vals)

    @property
    def loop(self) -> _Loop:
        return boundary_loop(self.grid)

    @property
    def s(self) -> np.ndarray:
        return self.loop.s

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 2

    @classmethod
    def from_field(cls, field) -> "BoundaryTrace":
        lp = boundary_loop(field.grid)
        if isinstance(field, VectorField):
            return cls(field.grid, np.column_stack([field.vx[lp.i, lp.j], field.vy[lp.i, lp.j]]))
        return cls(field.grid, field.values[lp.i, lp.j])

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "BoundaryTrace":
        """Sample ``fn(x, y)``; a tuple result makes a vector trace."""
        lp = boundary_loop(grid)
        x, y = lp.i * grid.h, lp.j * grid.h
        out = fn(x, y)
        if isinstance(out, tuple):
            vx, vy = (np.broadcast_to(np.asarray(c, dtype=float), x.shape) for c in out)
            return cls(grid, np.column_stack([vx, vy]))
        return cls(grid, np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy())

    @classmethod
    def from_csv(cls, grid: GridSpec, path) -> "BoundaryTrace":
        """Read ``s,value`` or ``s,vx,vy`` columns and resample linearly (periodic in s)."""
        path = Path(path)
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        header = [c.strip() for c in rows[0]]
        data = np.array([[float(c) for c in r] for r in rows[1:]])
        if header[0] != "s" or len(header) not in (2, 3) or data.shape[1] != len(header):
            raise ValueError(f"{path}: expected columns s,value or s,vx,vy")
        lp = boundary_loop(grid)
        order = np.argsort(data[:, 0])
        data = data[order]
        cols = [np.interp(lp.s, data[:, 0], data[:, c], period=lp.perimeter) for c in range(1, data.shape[1])]
        values = cols[0] if len(cols) == 1 else np.column_stack(cols)
        return cls(grid, values)

    def normal_component(self) -> np.ndarray:
        """``v . n`` at the nodes using node normals (corners: averaged)."""
        return np.sum(self.values * self.loop.node_normal, axis=1)

    def to_field(self, fill: float = 0.0):
        """Embed the trace into a full-grid array (interior filled with ``fill``)."""
        lp = self.loop
        if self.is_vector:
            vx = np.full(self.grid.shape, fill)
            vy = np.full(self.grid.shape, fill)
            vx[lp.i, lp.j] = self.values[:, 0]
            vy[lp.i, lp.j] = self.values[:, 1]
            return VectorField(self.grid, vx, vy)
        a = np.full(self.grid.shape, fill)
        a[lp.i, lp.j] = self.values
        return ScalarField(self.grid, a)


@dataclass(frozen=True)
class GammaSpec:
    """Single connected inflow arc ``s_start <= s <= s_end`` of the loop."""

    s_start: float
    s_end: float
    nodes: tuple  # loop indices in traversal order
    perimeter: float

    @property
    def anchor_index(self) -> int:
        return self.nodes[0]

    @classmethod
    def from_arc(cls, grid: GridSpec, s_start: float, s_end: float) -> "GammaSpec":
        lp = boundary_loop(grid)
        P = lp.perimeter
        if not (0.0 <= s_start < s_end <= P + 1e-12):
            raise InflowError(f"invalid Gamma arc [{s_start}, {s_end}] on perimeter {P}")
        tol = 1e-9 * grid.h
        s_ext = np.concatenate([lp.s, [P]])
        idx_ext = np.concatenate([np.arange(len(lp.s)), [0]])
        sel = (s_ext >= s_start - tol) & (s_ext <= s_end + tol)
        nodes = tuple(int(k) for k in idx_ext[sel])
        if len(nodes) != len(set(nodes)):
            raise InflowError("Gamma arc must not cover the whole boundary")
        if not nodes:
            raise InflowError("Gamma arc contains no boundary node")
        return cls(float(s_start), float(s_end), nodes, P)

    @classmethod
    def edge(cls, grid: GridSpec, name: str) -> "GammaSpec":
        lx, ly = grid.lx, grid.ly
        arcs = {
            "bottom": (0.0, lx),
            "right": (lx, lx + ly),
            "top": (lx + ly, 2 * lx + ly),
            "left": (2 * lx + ly, 2 * (lx + ly)),
        }
        return cls.from_arc(grid, *arcs[name])

    def check_inflow(self, v0: BoundaryTrace, flux_floor: float = FLUX_FLOOR):
        """Strict inflow at interior arc nodes, no outflow at the two end nodes.

        The end nodes are often corners where a no-slip wall meets the inflow
        edge, so their normal velocity may vanish.
        """
        vn = v0.normal_component()[list(self.nodes)]
        inner = vn[1:-1] if len(vn) > 2 else vn[:0]
        ends = vn[[0, -1]] if len(vn) > 1 else vn
        if np.any(inner >= -flux_floor) or np.any(ends > flux_floor) or np.all(vn >= -flux_floor):
            raise InflowError("Gamma not strict inflow")


def check_compatibility(v0: BoundaryTrace) -> float:
    """Trapezoid value of the net outward flux around the closed loop."""
    if not v0.is_vector:
        raise ValueError("compatibility needs a vector trace")
    lp = v0.loop
    nxt = np.roll(v0.values, -1, axis=0)
    seg = 0.5 * (v0.values + nxt)
    lengths = np.diff(np.concatenate([lp.s, [lp.perimeter]]))
    return float(np.sum(np.sum(seg * lp.seg_normal, axis=1) * lengths))


def _flux_tolerance(v0: BoundaryTrace) -> float:
    vmax = float(np.max(np.abs(v0.values))) if v0.values.size else 0.0
    return max(1e-10 * vmax * v0.loop.perimeter, 1e-14)


def _segment_fluxes(v0: BoundaryTrace) -> np.ndarray:
    """Mean of ``v0 . n`` over each loop segment, fourth order along each edge.

    Uses the cubic-interpolation rule ``(-f[-1] + 13 f[0] + 13 f[1] - f[2]) / 24``
    and its one-sided variants on the first and last segment of an edge, so
    no stencil reaches around a corner.
    """
    lp = v0.loop
    n = len(lp.s)
    k = np.arange(n)
    seg = lp.seg_normal

    def f(offset):
        # v0 at node k+offset projected on the normal of segment k
        return np.sum(v0.values[(k + offset) % n] * seg, axis=1)

    same_prev = np.all(np.roll(seg, 1, axis=0) == seg, axis=1)
    same_next = np.all(np.roll(seg, -1, axis=0) == seg, axis=1)
    f0, f1 = f(0), f(1)
    mid = (-f(-1) + 13 * f0 + 13 * f1 - f(2)) / 24.0
    first = (9 * f0 + 19 * f1 - 5 * f(2) + f(3)) / 24.0
    last = (f(-2) - 5 * f(-1) + 19 * f0 + 9 * f1) / 24.0
    return np.where(~same_prev, first, np.where(~same_next, last, mid))


def boundary_stream(v0: BoundaryTrace, gamma: GammaSpec) -> BoundaryTrace:
    """Boundary stream function ``phi(x) = -int_{x_bar}^x v0 . n ds``.

    Anchored to zero at the first Gamma node; the closure gap after a full
    loop is removed by a linear-in-arclength correction.
    """
    lp = v0.loop
    n = len(lp.s)
    lengths = np.diff(np.concatenate([lp.s, [lp.perimeter]]))
    dphi = -_segment_fluxes(v0) * lengths
    a = gamma.anchor_index
    order = (a + np.arange(n)) % n
    phi_ordered = np.concatenate([[0.0], np.cumsum(dphi[order])])
    gap = phi_ordered[-1]
    if abs(gap) > _flux_tolerance(v0):
        raise CompatibilityError(f"incompatible flux (closure gap {gap:.3e})")
    s_rel = np.concatenate([[0.0], np.cumsum(lengths[order])])
    phi_ordered = phi_ordered - gap * s_rel / lp.perimeter
    phi = np.empty(n)
    phi[order] = phi_ordered[:-1]
    return BoundaryTrace(v0.grid, phi)


@dataclass(frozen=True, eq=False)
class DensityLaw:
    """Piecewise-linear density law with constant extension.

    ``law(y)`` interpolates ``rho_values`` at ``breakpoints`` and is constant
    outside the table, hence positive and globally Lipschitz.
    """

    breakpoints: np.ndarray
    rho_values: np.ndarray
    lipschitz: float = field(init=False)
    sup_norm: float = field(init=False)

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.breakpoints, dtype=float))
        r = np.atleast_1d(np.asarray(self.rho_values, dtype=float))
        if y.shape != r.shape or y.size == 0:
            raise ValueError("breakpoints and rho_values must be non-empty and of equal length")
        if np.any(np.diff(y) <= 0):
            raise InflowError("Gamma not strict inflow")
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise DensityError("nonpositive boundary density")
        object.__setattr__(self, "breakpoints", y)
        object.__setattr__(self, "rho_values", r)
        lip = float(np.max(np.abs(np.diff(r) / np.diff(y)))) if y.size > 1 else 0.0
        object.__setattr__(self, "lipschitz", lip)
        object.__setattr__(self, "sup_norm", float(r.max()))

    @classmethod
    def constant(cls, value: float) -> "DensityLaw":
        return cls(np.array([0.0]), np.array([float(value)]))

    @property
    def min_value(self) -> float:
        return float(self.rho_values.min())

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.rho_values == self.rho_values[0]))

    def __call__(self, y):
        return np.interp(y, self.breakpoints, self.rho_values)


def build_density_law(rho0: BoundaryTrace, phi_b: BoundaryTrace, gamma: GammaSpec) -> DensityLaw:
    """Density law with ``eta(phi_b(x)) = rho0(x)`` at every Gamma node.

    ``rho0`` is a scalar trace on the whole loop; only its Gamma values are
    read.
    """
    nodes = list(gamma.nodes)
    rho = rho0.values[nodes]
    if np.any(rho <= 0):
        raise DensityError("nonpositive boundary density")
    y = phi_b.values[nodes]
    if len(y) > 1 and np.any(np.diff(y) <= 0):
        raise InflowError("Gamma not strict inflow")
    return DensityLaw(y, rho)


def smoothstep_cutoff(d: np.ndarray, width: float) -> np.ndarray:
    """C^1 cutoff: 1 at ``d = 0``, 0 for ``d >= width``, zero slope at both ends."""
    t = np.clip(np.asarray(d, dtype=float) / width, 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


@dataclass(frozen=True, eq=False)
class HopfExtension:
    a: VectorField
    chi: ScalarField  # stream function of a
    eps: float
    measured_delta: float


def _layer_cutoff(grid: GridSpec, width: float) -> np.ndarray:
    """``1 - (1 - theta(dx)) (1 - theta(dy))``: one on every wall, flat normal to it.

    ``dx``/``dy`` are the distances to the nearest vertical/horizontal wall.
    Unlike ``theta(min(dx, dy))`` this is smooth across the corner diagonals.
    """
    X, Y = grid.mesh
    dx = np.minimum(X, grid.lx - X)
    dy = np.minimum(Y, grid.ly - Y)
    return 1.0 - (1.0 - smoothstep_cutoff(dx, width)) * (1.0 - smoothstep_cutoff(dy, width))


def _panel_stream_functions(grid: GridSpec, seed: int, count: int):
    """Random bubble sums vanishing with their gradient on the boundary."""
    rng = np.random.default_rng(seed)
    X, Y = grid.mesh
    bubble = (X * (grid.lx - X) * Y * (grid.ly - Y)) ** 2
    for _ in range(count):
        c = rng.standard_normal((3, 3))
        z = np.zeros(grid.shape)
        for k in range(3):
            for m in range(3):
                z += c[k, m] * np.sin((k + 1) * np.pi * X / grid.lx) * np.sin((m + 1) * np.pi * Y / grid.ly)
        yield ScalarField(grid, bubble * z)


def hopf_smallness(a: VectorField, seed: int = DEFAULT_PANEL_SEED, count: int = PANEL_SIZE) -> float:
    """Largest ``(int |a|^2 |phi|^2 / int |grad phi|^2)^(1/2)`` over a test panel."""
    grid = a.grid
    w = trapezoid_weights(grid)
    a2 = a.vx**2 + a.vy**2
    if not np.any(a2):
        return 0.0
    best = 0.0
    for zeta in _panel_stream_functions(grid, seed, count):
        phi = perp_grad(zeta)
        num = float(np.sum(w * a2 * (phi.vx**2 + phi.vy**2)))
        den = norm(phi, "H1SEMI") ** 2
        if den > 0:
            best = max(best, np.sqrt(num / den))
    return float(best)


def build_hopf_extension(v0: BoundaryTrace, phi_b: BoundaryTrace, eps: float,
                         seed: int = DEFAULT_PANEL_SEED, biharmonic=None) -> HopfExtension:
    """Divergence-free extension of ``v0`` supported in a layer of width ``eps``.

    ``a = perp_grad(chi)`` with ``chi = theta Psi``: ``Psi`` is the clamped
    biharmonic extension of the boundary data (values ``phi_b``, normal slope
    from ``v0``) and ``theta`` a smoothstep cutoff that equals one on the
    walls with zero normal slope, so the discrete trace of ``a`` matches
    ``v0`` to second order.  The cutoff reaches zero one cell before ``eps``
    so that the centred differences vanish at every node farther than ``eps``
    from the wall.  Pass ``biharmonic`` to reuse a factorised operator.
    """
    grid = v0.grid
    h = grid.h
    if eps < 2 * h - 1e-12 * h:
        raise ValueError("eps too small for grid")
    if not np.any(v0.values):
        zero = VectorField.zeros(grid)
        return HopfExtension(zero, grid.zeros(), eps, 0.0)
    if biharmonic is None:
        biharmonic = ClampedBiharmonic(grid)
    phi_full = phi_b.to_field().values
    v0f = v0.to_field()
    # chi_x = v_y on vertical walls, chi_y = -v_x on horizontal walls
    Psi, _ = biharmonic.solve(np.zeros(grid.shape), phi_full, v0f.vy, -v0f.vx)
    chi = _layer_cutoff(grid, eps - h) * Psi
    chi[~grid.interior] = phi_full[~grid.interior]
    chi_f = ScalarField(grid, chi)
    a = perp_grad(chi_f)
    delta = hopf_smallness(a, seed)
    return HopfExtension(a, chi_f, float(eps), delta)


def build_lift_w(w0: BoundaryTrace) -> ScalarField:
    """Discrete harmonic extension of the scalar trace ``w0``."""
    if w0.is_vector:
        raise ValueError("w0 must be a scalar trace")
    b, _ = harmonic_extension(w0.grid, w0.to_field().values)
    return ScalarField(w0.grid, b)


def boundary_h_half_norm(trace: BoundaryTrace) -> float:
    """Discrete ``H^{1/2}(boundary)`` norm (L2 part plus Slobodeckij double sum)."""
    lp = trace.loop
    vals = trace.values if trace.is_vector else trace.values[:, None]
    ds = np.full(len(lp.s), trace.grid.h)
    l2 = float(np.sum(ds * np.sum(vals**2, axis=1)))
    diff = vals[:, None, :] - vals[None, :, :]
    num = np.sum(diff**2, axis=2)
    dist = np.abs(lp.s[:, None] - lp.s[None, :])
    dist = np.minimum(dist, lp.perimeter - dist)
    np.fill_diagonal(dist, 1.0)
    semi = float(np.sum(num / dist**2 * ds[:, None] * ds[None, :]))
    return float(np.sqrt(l2 + semi))
