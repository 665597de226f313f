"""Convergence studies and model-reduction checks on manufactured solutions."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundaryTrace
from .errors import MicropolarError
from .fields import GridSpec, ScalarField, VectorField, div, norm, trapezoid_weights
from .microrotation import FluidParams
from .mms import BUILTIN_CASES, MmsCase, build_mms_case
from .momentum import IterationData
from .picard import SolverOptions, run_fixed_point

__all__ = [
    "MmsCase",
    "build_mms_case",
    "BUILTIN_CASES",
    "StudyRow",
    "ConvergenceTable",
    "convergence_study",
    "density_residual",
    "ReductionResult",
    "reduction_tests",
    "ACCEPTANCE_PARAMS",
]

# mu = kappa = 1, mu_r = 0.1
ACCEPTANCE_PARAMS = FluidParams(1.0, 0.1, 0.5, 0.5)

FIELDS = ("v", "w", "psi", "p")
# errors at or below the default iteration tolerance count as exact
EXACT_LEVEL = 1e-8


@dataclass
class StudyRow:
    grid: int
    field: str
    error: float
    order: float | str = ""


@dataclass
class ConvergenceTable:
    """Errors per grid and field with observed orders ``log2(e_h / e_{h/2})``."""

    case: str
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    reports: dict = field(default_factory=dict)

    def errors(self, name: str) -> list:
        return [r.error for r in self.rows if r.field == name]

    def orders(self, name: str) -> list:
        return [r.order for r in self.rows if r.field == name and r.order != ""]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("grid,field,error,order\n")
        for r in self.rows:
            order = r.order if isinstance(r.order, str) else f"{r.order:.6g}"
            buf.write(f"{r.grid},{r.field},{r.error:.6e},{order}\n")
        return buf.getvalue()

    def verdict(self, bands: dict | None = None) -> tuple[bool, str]:
        """Check the finest observed order of each field against its band.

        Coarser pairs are listed but not judged; they may be pre-asymptotic.
        """
        bands = bands or {"v": (1.7, 2.3), "w": (1.7, 2.3), "psi": (1.7, 2.3), "p": (1.4, 2.3)}
        lines, ok = [], not self.notes
        for name, (lo, hi) in bands.items():
            orders = self.orders(name)
            errs = self.errors(name)
            if errs and max(errs) <= EXACT_LEVEL:
                lines.append(f"{name}: exact")
                continue
            numeric = [o for o in orders if not isinstance(o, str)]
            if not numeric:
                lines.append(f"{name}: no order")
                ok = False
                continue
            good = lo <= numeric[-1] <= hi
            ok &= good
            lines.append(f"{name}: orders {' '.join(f'{o:.2f}' for o in numeric)} "
                         f"band [{lo}, {hi}] {'PASS' if good else 'FAIL'}")
        lines += self.notes
        lines.append("verdict: " + ("PASS" if ok else "FAIL"))
        return ok, "\n".join(lines) + "\n"


def density_residual(rho: ScalarField, v: VectorField) -> float:
    """Trapezoid L2 norm of ``div(rho v)`` over interior nodes."""
    r = div(v * rho).values
    w = trapezoid_weights(rho.grid) * rho.grid.interior
    return float(np.sqrt(np.sum(w * r**2)))


def _l2_error(a, b) -> float:
    return norm(a - b, "L2")


def convergence_study(case: MmsCase | str, grids, opts: SolverOptions | None = None,
                      extra: bool = True) -> ConvergenceTable:
    """Run the full pipeline on each grid and tabulate L2 errors and orders.

    Parameters
    ----------
    case : MmsCase or str
        Case or builtin case name (built with ``ACCEPTANCE_PARAMS``).
    grids : sequence of int
        Node counts per side, each a factor-2 refinement of the previous.
    extra : bool
        Also tabulate the momentum residual and ``div(rho v)``.

    Errors at roundoff level are tagged ``exact`` instead of an order.
    """
    if isinstance(case, str):
        case = build_mms_case(case, ACCEPTANCE_PARAMS)
    grids = [int(n) for n in grids]
    if len(grids) < 3:
        raise ValueError("convergence study needs at least 3 grids")
    if any(b - 1 != 2 * (a - 1) for a, b in zip(grids, grids[1:])):
        raise ValueError("grids must be successive factor-2 refinements")
    table = ConvergenceTable(case.name)
    names = FIELDS + (("momentum_residual", "density_residual") if extra else ())
    errs = {k: [] for k in names}
    for n in grids:
        grid = case.grid(n)
        try:
            data = case.iteration_data(grid)
            state, report = run_fixed_point(data, opts)
        except MicropolarError as exc:
            table.notes.append(f"no convergence on grid {n}: {exc}")
            break
        if not report.converged:
            table.notes.append(f"no convergence on grid {n}: {report.status}")
        table.reports[n] = report
        ex = case.exact_fields(grid)
        e = {
            "v": _l2_error(state.v, ex["v"]),
            "w": _l2_error(state.w_total, ex["w"]),
            "psi": _l2_error(state.psi, ex["psi"]),
            "p": _l2_error(state.p, ex["p"]),
            "momentum_residual": report.momentum_residual,
            "density_residual": density_residual(state.rho, state.v),
        }
        for k in names:
            errs[k].append(e[k])
    for k in names:
        for idx, err in enumerate(errs[k]):
            if err <= EXACT_LEVEL:
                order = "exact"
            elif idx == 0:
                order = ""
            else:
                prev = errs[k][idx - 1]
                order = math.log2(prev / err) if prev > EXACT_LEVEL else ""
            table.rows.append(StudyRow(grids[idx], k, float(err), order))
    return table


@dataclass
class ReductionResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        return (f"{self.name}: {'PASS' if self.passed else 'FAIL'} "
                f"value={self.value:.3e} threshold={self.threshold:.1e} {self.detail}".rstrip())


def _decoupling(n: int, opts: SolverOptions) -> ReductionResult:
    # mu_r = 0: the velocity equation no longer sees w, so g must not matter
    params = FluidParams(1.0, 0.0, 0.5, 0.5)
    case = build_mms_case("duct", params)
    grid = case.grid(n)
    data = case.iteration_data(grid)
    s1, _ = run_fixed_point(data, opts)
    s2, _ = run_fixed_point(data.with_forcing(g=data.g * 2.0), opts)
    diff = norm(s1.v - s2.v, "H1")
    return ReductionResult("mu_r=0 decoupling", diff <= 1e-9, diff, 1e-9)


def _constant_density(n: int, opts: SolverOptions, value: float = 2.0) -> list:
    case = build_mms_case("duct", ACCEPTANCE_PARAMS, eta=str(value))
    grid = case.grid(n)
    v0, w0, _ = case.traces(grid)
    rho0 = BoundaryTrace(grid, np.full(len(v0.values), value))
    f, g = case.forcings(grid)
    gamma = case.gamma(grid)
    law_data = IterationData.build(grid, ACCEPTANCE_PARAMS, v0, w0, rho0, gamma, f, g)
    const_data = IterationData.build(grid, ACCEPTANCE_PARAMS, v0, w0, rho0, gamma, f, g,
                                     constant_density=value)
    s1, _ = run_fixed_point(law_data, opts)
    s2, _ = run_fixed_point(const_data, opts)
    dev = float(np.max(np.abs(s1.rho.values - value)))
    diff = max(norm(s1.v - s2.v, "H1"), norm(s1.w_total - s2.w_total, "H1"))
    return [
        ReductionResult("constant density field", dev <= 1e-14, dev, 1e-14),
        ReductionResult("constant density path", diff <= 1e-10, diff, 1e-10),
    ]


def _zero_data(n: int, opts: SolverOptions) -> ReductionResult:
    case = build_mms_case("zero", ACCEPTANCE_PARAMS)
    data = case.iteration_data(case.grid(n))
    state, report = run_fixed_point(data, opts)
    size = max(float(np.max(np.abs(state.chi_u.values))), float(np.max(np.abs(state.w_total.values))),
               float(np.max(np.abs(state.p.values))))
    ok = size == 0.0 and report.iterations == 1
    return ReductionResult("zero data", ok, size, 0.0, f"iterations={report.iterations}")


def reduction_tests(n: int = 33, opts: SolverOptions | None = None) -> list:
    """Model-reduction checks; failures are reported, never raised.

    Returns a list of ``ReductionResult`` for the ``mu_r = 0`` decoupling, the
    constant-density equivalence and zero-data exactness.
    """
    opts = opts or SolverOptions()
    out = []
    checks = (("mu_r=0 decoupling", lambda: [_decoupling(n, opts)]),
              ("constant density", lambda: _constant_density(n, opts)),
              ("zero data", lambda: [_zero_data(n, opts)]))
    for name, check in checks:
        try:
            out += check()
        except (MicropolarError, ValueError) as exc:
            out.append(ReductionResult(name, False, math.nan, 0.0, str(exc)))
    return out
