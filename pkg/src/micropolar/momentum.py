"""The fixed-point map for the velocity and the pressure recovery.

One application of the map freezes density and microrotation at the current
iterate and solves the linear momentum problem in stream-function form: the
curl of the momentum equation gives the clamped biharmonic problem

    sigma Lap^2 chi = -curl R,   chi = phi_b,   d chi/dn = v0 . tau

for the total stream function, with ``R = -rho (v.grad) v + 2 mu_r curl w +
rho f``.  The shifted velocity is then ``u = perp_grad(chi) - a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import (
    BoundaryTrace,
    DensityLaw,
    GammaSpec,
    HopfExtension,
    boundary_stream,
    build_density_law,
    build_hopf_extension,
    build_lift_w,
    check_compatibility,
    DEFAULT_PANEL_SEED,
)
from .errors import CompatibilityError
from .fields import (
    GridSpec,
    ScalarField,
    VectorField,
    advect,
    curl,
    curl_scalar,
    div,
    grad,
    laplacian,
    norm,
    perp_grad,
    trapezoid_weights,
)
from .microrotation import FluidParams, solve_problem_A
from .stencils import ClampedBiharmonic, solve_neumann_poisson

__all__ = [
    "IterationData",
    "ApplyResult",
    "assemble_rhs",
    "apply_A",
    "recover_pressure",
    "momentum_residual",
    "default_eps",
    "final_velocity",
]


def default_eps(grid: GridSpec) -> float:
    return min(grid.lx, grid.ly) / 8.0


@dataclass(eq=False)
class IterationData:
    """Fixed data of the iteration: traces, extensions, forcings, density law."""

    grid: GridSpec
    params: FluidParams
    v0: BoundaryTrace
    w0: BoundaryTrace
    gamma: GammaSpec
    phi_b: BoundaryTrace
    law: DensityLaw
    hopf: HopfExtension
    b: ScalarField
    f: VectorField
    g: ScalarField
    constant_density: float | None = None
    _biharmonic: ClampedBiharmonic | None = field(default=None, repr=False)

    @classmethod
    def build(cls, grid: GridSpec, params: FluidParams, v0: BoundaryTrace, w0: BoundaryTrace,
              rho0: BoundaryTrace, gamma: GammaSpec, f: VectorField | None = None,
              g: ScalarField | None = None, eps: float | None = None,
              seed: int = DEFAULT_PANEL_SEED, constant_density: float | None = None):
        """Validate boundary data and construct every fixed ingredient.

        Raises ``CompatibilityError`` for a net boundary flux and
        ``InflowError`` when Gamma is not a strict inflow arc.
        """
        net = check_compatibility(v0)
        vmax = float(np.max(np.abs(v0.values))) if v0.values.size else 0.0
        if abs(net) > 1e-10 * vmax * v0.loop.perimeter + 1e-14:
            raise CompatibilityError(f"incompatible flux (net {net:.3e})")
        if np.any(v0.values):
            gamma.check_inflow(v0)
        phi_b = boundary_stream(v0, gamma)
        if constant_density is not None:
            law = DensityLaw.constant(constant_density)
        elif np.any(v0.values):
            law = build_density_law(rho0, phi_b, gamma)
        else:
            # no flow through Gamma: the law degenerates to the boundary value at x_bar
            law = DensityLaw.constant(float(rho0.values[gamma.anchor_index]))
        eps = default_eps(grid) if eps is None else eps
        biharmonic = ClampedBiharmonic(grid)
        hopf = build_hopf_extension(v0, phi_b, eps, seed=seed, biharmonic=biharmonic)
        b = build_lift_w(w0)
        f = VectorField.zeros(grid) if f is None else f
        g = grid.zeros() if g is None else g
        return cls(grid, params, v0, w0, gamma, phi_b, law, hopf, b, f, g, constant_density, biharmonic)

    @property
    def a(self) -> VectorField:
        return self.hopf.a

    @property
    def biharmonic(self) -> ClampedBiharmonic:
        if self._biharmonic is None:
            self._biharmonic = ClampedBiharmonic(self.grid)
        return self._biharmonic

    def density(self, psi: ScalarField) -> ScalarField:
        if self.constant_density is not None:
            return ScalarField(self.grid, np.full(self.grid.shape, float(self.constant_density)))
        return ScalarField(self.grid, self.law(psi.values))

    def clamped_data(self):
        """Dirichlet values and normal-derivative arrays for the biharmonic solve."""
        phi = self.phi_b.to_field().values
        v0f = self.v0.to_field()
        # chi_x = v_y on vertical edges, chi_y = -v_x on horizontal edges
        return phi, v0f.vy, -v0f.vx

    def data_norm(self) -> float:
        return (norm(self.a, "H1") + norm(self.b, "H1") + norm(self.f, "L2") + norm(self.g, "L2"))

    def with_forcing(self, f=None, g=None) -> "IterationData":
        """Copy with replaced forcings (shares the factorised operator)."""
        new = IterationData(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        if f is not None:
            new.f = f
        if g is not None:
            new.g = g
        return new


def assemble_rhs(u: VectorField, w_total: ScalarField, rho: ScalarField, data: IterationData,
                 include_boundary: bool = True) -> VectorField:
    """``R = -rho (v.grad) v + 2 mu_r curl w + rho f`` with ``v = u + a``.

    Boundary nodes carry one-sided values (the curl of ``R`` at the first
    interior ring reads them); pass ``include_boundary=False`` to zero them.
    """
    v = u + data.a
    adv = advect(v, v, include_boundary=include_boundary)
    R = -(rho * adv) + 2.0 * data.params.mu_r * curl_scalar(w_total) + rho * data.f
    if not include_boundary:
        mask = ~data.grid.interior
        R.vx[mask] = 0.0
        R.vy[mask] = 0.0
    return R


@dataclass(eq=False)
class ApplyResult:
    u: VectorField
    chi: ScalarField
    w: ScalarField
    rho: ScalarField
    psi: ScalarField
    chi_total: ScalarField
    reports: list

    def __iter__(self):
        yield self.u
        yield self.chi


def apply_A(u, data: IterationData, lam: float = 1.0, chi_u: ScalarField | None = None) -> ApplyResult:
    """One application of the fixed-point map, scaled by the homotopy parameter.

    ``u`` is the shifted velocity (zero trace, divergence-free); pass its
    stream function as ``chi_u`` (or pass the stream function itself as
    ``u``).  Returns ``lam * (perp_grad(chi_total) - a)`` and its stream
    function together with the intermediate fields.
    """
    grid = data.grid
    if isinstance(u, ScalarField):
        chi_u, u = u, perp_grad(u)
    elif chi_u is None:
        from .streamfunction import stream_of
        zero = BoundaryTrace(grid, np.zeros((len(data.phi_b.values), 2)))
        chi_u = stream_of(u, zero, data.gamma)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    psi = chi_u + data.hopf.chi
    rho = data.density(psi)
    v = u + data.a
    w, rep_w = solve_problem_A(v, rho, data.g, data.w0, data.params, return_report=True)
    R = assemble_rhs(u, w, rho, data)
    source = -curl(R).values / data.params.sigma
    phi, dqdx, dqdy = data.clamped_data()
    chi_total, rep_b = data.biharmonic.solve(source, phi, dqdx, dqdy)
    chi_total = ScalarField(grid, chi_total)
    chi_new = lam * (chi_total - data.hopf.chi)
    return ApplyResult(perp_grad(chi_new), chi_new, w, rho, psi, chi_total, [rep_w, rep_b])


def _total_force(v, w, rho, f, params, psi=None):
    if psi is None:
        visc = laplacian(v)
        adv = advect(v, v, include_boundary=True)
    else:
        from .streamfunction import stream_hessian

        qxx, qyy, qxy = stream_hessian(psi, v)
        visc = perp_grad(ScalarField(v.grid, qxx + qyy))
        # grad v = [[-psi_xy, -psi_yy], [psi_xx, psi_xy]]
        adv = VectorField(v.grid, -v.vx * qxy - v.vy * qyy, v.vx * qxx + v.vy * qxy)
    return params.sigma * visc - rho * adv + 2.0 * params.mu_r * curl_scalar(w) + rho * f


def momentum_residual(v: VectorField, w: ScalarField, rho: ScalarField, f: VectorField,
                      p: ScalarField, params: FluidParams, psi: ScalarField | None = None) -> float:
    """Trapezoid L2 norm over interior nodes of ``sigma Lap v - rho (v.grad)v + 2 mu_r curl w + rho f - grad p``."""
    r = _total_force(v, w, rho, f, params, psi) - grad(p)
    wts = trapezoid_weights(v.grid) * v.grid.interior
    return float(np.sqrt(np.sum(wts * (r.vx**2 + r.vy**2))))


def recover_pressure(v: VectorField, w_total: ScalarField, rho: ScalarField, f: VectorField,
                     params: FluidParams, return_residual: bool = False, psi: ScalarField | None = None):
    """Zero-mean pressure from the Neumann problem ``Lap p = div R``, ``dp/dn = R . n``.

    ``R`` collects every non-pressure term of the momentum equation.  When the
    stream function ``psi`` of ``v`` is supplied, the velocity gradient and
    ``Lap v = perp_grad(Lap psi)`` are formed from second differences of
    ``psi`` (boundary values of ``v`` serve as wall slopes), which keeps ``R``
    second order up to the wall; differencing ``v`` twice does not.  With
    ``return_residual`` the discrete momentum residual is returned as well.
    """
    R = _total_force(v, w_total, rho, f, params, psi)
    p, _, _ = solve_neumann_poisson(v.grid, div(R).values, R.vx, R.vy)
    p = ScalarField(v.grid, p)
    if return_residual:
        return p, momentum_residual(v, w_total, rho, f, p, params, psi)
    return p


def final_velocity(psi: ScalarField, v0: BoundaryTrace) -> VectorField:
    """``perp_grad(psi)`` with its boundary values replaced by the data ``v0``."""
    v = perp_grad(psi)
    v0f = v0.to_field()
    mask = ~psi.grid.interior
    vx, vy = v.vx.copy(), v.vy.copy()
    vx[mask] = v0f.vx[mask]
    vy[mask] = v0f.vy[mask]
    return VectorField(psi.grid, vx, vy)
