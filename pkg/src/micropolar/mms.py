"""Manufactured solutions with symbolically derived forcings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sy

from .boundary import BoundaryTrace, GammaSpec, boundary_loop
from .errors import MicropolarError
from .fields import GridSpec, ScalarField, VectorField
from .microrotation import FluidParams

__all__ = ["MmsCase", "build_mms_case", "BUILTIN_CASES"]

X, Y, S = sy.symbols("x y s", real=True)

BUILTIN_CASES = {
    # inflow through the right edge, no-slip top and bottom, outflow on the left
    "duct": dict(psi="y**2*(3 - 2*y)", w="sin(pi*x)*sin(pi*y)", p="cos(pi*x)*cos(pi*y)",
                 eta="1 + s/2", gamma="right"),
    # uniform leftward stream; every stencil is exact on it
    "linear": dict(psi="y", w="0", p="0", eta="1", gamma="right"),
    "zero": dict(psi="0", w="0", p="0", eta="1", gamma="right"),
}


def _lam(expr):
    fn = sy.lambdify((X, Y), expr, "numpy")

    def call(x, y):
        return np.broadcast_to(np.asarray(fn(x, y), dtype=float), np.shape(x)).copy()

    return call


@dataclass(eq=False)
class MmsCase:
    """Closed-form exact fields and the forcings that make them a solution."""

    name: str
    params: FluidParams
    psi_expr: sy.Expr
    w_expr: sy.Expr
    p_expr: sy.Expr
    eta_expr: sy.Expr
    gamma_edge: str = "right"
    lx: float = 1.0
    ly: float = 1.0
    exprs: dict = field(default_factory=dict)

    def __post_init__(self):
        psi, w, p = self.psi_expr, self.w_expr, self.p_expr
        vx, vy = -sy.diff(psi, Y), sy.diff(psi, X)
        rho = self.eta_expr.subs(S, psi)
        mu_r = sy.nsimplify(self.params.mu_r)
        sigma = sy.nsimplify(self.params.sigma)
        kappa = sy.nsimplify(self.params.kappa)

        def lap(q):
            return sy.diff(q, X, 2) + sy.diff(q, Y, 2)

        def adv(q):
            return vx * sy.diff(q, X) + vy * sy.diff(q, Y)

        curl_w = (sy.diff(w, Y), -sy.diff(w, X))
        curl_v = sy.diff(vy, X) - sy.diff(vx, Y)
        fx = (-sigma * lap(vx) + rho * adv(vx) + sy.diff(p, X) - 2 * mu_r * curl_w[0]) / rho
        fy = (-sigma * lap(vy) + rho * adv(vy) + sy.diff(p, Y) - 2 * mu_r * curl_w[1]) / rho
        g = (-kappa * lap(w) + rho * adv(w) + 4 * mu_r * w - 2 * mu_r * curl_v) / rho
        self.exprs = dict(psi=psi, vx=vx, vy=vy, w=w, p=p, rho=rho, fx=fx, fy=fy, g=g,
                          curl_w_x=curl_w[0], curl_w_y=curl_w[1])
        self._fn = {k: _lam(e) for k, e in self.exprs.items()}
        self._eta = sy.lambdify(S, self.eta_expr, "numpy")

    # closed-form evaluators
    def psi(self, x, y):
        return self._fn["psi"](x, y)

    def v(self, x, y):
        return self._fn["vx"](x, y), self._fn["vy"](x, y)

    def w(self, x, y):
        return self._fn["w"](x, y)

    def p(self, x, y):
        return self._fn["p"](x, y)

    def rho(self, x, y):
        return self._fn["rho"](x, y)

    def eta(self, s):
        return np.broadcast_to(np.asarray(self._eta(s), dtype=float), np.shape(s)).copy()

    def f(self, x, y):
        return self._fn["fx"](x, y), self._fn["fy"](x, y)

    def g(self, x, y):
        return self._fn["g"](x, y)

    def evaluate(self, key, x, y):
        return self._fn[key](x, y)

    # discrete ingredients
    def grid(self, n: int) -> GridSpec:
        return GridSpec(n, int(round((n - 1) * self.ly / self.lx)) + 1, self.lx, self.ly)

    def gamma(self, grid: GridSpec) -> GammaSpec:
        return GammaSpec.edge(grid, self.gamma_edge)

    def traces(self, grid: GridSpec):
        v0 = BoundaryTrace.from_function(grid, lambda x, y: self.v(x, y))
        w0 = BoundaryTrace.from_function(grid, self.w)
        rho0 = BoundaryTrace.from_function(grid, self.rho)
        return v0, w0, rho0

    def forcings(self, grid: GridSpec):
        return grid.sample_vector(self.f), grid.sample(self.g)

    def exact_fields(self, grid: GridSpec) -> dict:
        """Exact nodal fields; ``psi`` is shifted to vanish at the Gamma anchor
        and ``p`` to zero trapezoid mean."""
        from .fields import trapezoid_weights

        gam = self.gamma(grid)
        lp = boundary_loop(grid)
        k = gam.anchor_index
        xa, ya = lp.i[k] * grid.h, lp.j[k] * grid.h
        psi = grid.sample(self.psi) - float(self.psi(np.array(xa), np.array(ya)))
        p = grid.sample(self.p)
        wts = trapezoid_weights(grid)
        p = p - float(np.sum(wts * p.values) / np.sum(wts))
        return dict(psi=psi, v=grid.sample_vector(self.v), w=grid.sample(self.w), p=p,
                    rho=grid.sample(self.rho))

    def iteration_data(self, grid: GridSpec, params: FluidParams | None = None, **kw):
        from .momentum import IterationData

        if params is not None and params != self.params:
            raise ValueError("case was built for different parameters")
        v0, w0, rho0 = self.traces(grid)
        f, g = self.forcings(grid)
        return IterationData.build(grid, self.params, v0, w0, rho0, self.gamma(grid), f, g, **kw)

    def check_invariants(self, n: int = 64):
        """Scan ``n x n`` nodes: strict inflow inside Gamma, zero net flux, rho > 0."""
        grid = GridSpec(n, int(round((n - 1) * self.ly / self.lx)) + 1, self.lx, self.ly)
        rho = grid.sample(self.rho).values
        if not np.all(rho > 0):
            raise MicropolarError("invalid MMS case: density not positive")
        psi = self.psi_expr
        # net flux of a perp-gradient = -(jump of psi around the loop) = 0 for a
        # single-valued psi; check it symbolically on the four edges anyway
        lx, ly = sy.nsimplify(self.lx), sy.nsimplify(self.ly)
        vx, vy = self.exprs["vx"], self.exprs["vy"]
        flux = (sy.integrate(-vy.subs(Y, 0), (X, 0, lx)) + sy.integrate(vx.subs(X, lx), (Y, 0, ly))
                + sy.integrate(vy.subs(Y, ly), (X, 0, lx)) + sy.integrate(-vx.subs(X, 0), (Y, 0, ly)))
        if abs(float(sy.N(flux))) > 1e-12:
            raise MicropolarError("invalid MMS case: nonzero net boundary flux")
        if psi != 0:
            v0, _, _ = self.traces(grid)
            try:
                self.gamma(grid).check_inflow(v0)
            except Exception as exc:
                raise MicropolarError(f"invalid MMS case: {exc}") from exc
        return True


def build_mms_case(name_or_forms="duct", params: FluidParams | None = None, **forms) -> MmsCase:
    """Build a manufactured case by name or from expression strings.

    Expression strings use ``x``, ``y`` and, for ``eta``, the argument ``s``.

    >>> case = build_mms_case("duct", FluidParams(1.0, 0.1, 0.5, 0.5))
    >>> [float(c) for c in case.v(0.5, 0.5)]
    [-1.5, 0.0]
    """
    params = params or FluidParams(1.0, 0.1, 0.5, 0.5)
    if isinstance(name_or_forms, dict):
        forms = {**name_or_forms, **forms}
        name = forms.pop("name", "custom")
    elif name_or_forms in BUILTIN_CASES:
        name = name_or_forms
        forms = {**BUILTIN_CASES[name], **forms}
    else:
        raise MicropolarError(f"invalid MMS case: unknown case {name_or_forms!r}")
    loc = {"x": X, "y": Y, "s": S, "pi": sy.pi}
    try:
        parsed = {k: sy.sympify(forms[k], locals=loc) for k in ("psi", "w", "p", "eta")}
    except (KeyError, sy.SympifyError) as exc:
        raise MicropolarError(f"invalid MMS case: {exc}") from exc
    case = MmsCase(name, params, parsed["psi"], parsed["w"], parsed["p"], parsed["eta"],
                   forms.get("gamma", "right"), float(forms.get("lx", 1.0)), float(forms.get("ly", 1.0)))
    return case
