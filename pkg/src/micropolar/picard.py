"""Fixed-point driver, weak-identity audit and solvability report.

The driver iterates ``u <- (1 - theta) u + theta A_lambda(u)`` from ``u = 0``
for each homotopy parameter of the schedule, warm-starting every stage from
the previous one.  Iterates are carried as stream functions so every
velocity is divergence-free to roundoff.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import DEFAULT_PANEL_SEED, boundary_h_half_norm
from .errors import DivergenceError, LinearSolveError
from .fields import ScalarField, VectorField, norm, perp_grad, trapezoid_weights
from .microrotation import check_estw
from .momentum import IterationData, apply_A, final_velocity, recover_pressure

__all__ = [
    "SolverOptions",
    "PicardState",
    "SolveReport",
    "SolvabilityReport",
    "run_fixed_point",
    "weak_residual",
    "solvability_margin",
]


@dataclass(frozen=True)
class SolverOptions:
    """Iteration controls.

    Parameters
    ----------
    tol : float
        Stop when ``|u_{k+1} - u_k|_{H1} <= tol``.
    max_iter : int
        Iteration cap per homotopy stage.
    damping : float
        Relaxation ``theta`` in ``(0, 1]``.
    lambda_schedule : tuple of float
        Strictly increasing, ending at 1.
    divergence_factor : float
        Abort when ``|u|_{H1}`` exceeds this factor times ``1 + data norms``.
    weak_tests : int
        Number of test pairs in the final weak-identity audit.
    seed : int
        Seed of the audit's test functions.
    """

    tol: float = 1e-8
    max_iter: int = 200
    damping: float = 1.0
    lambda_schedule: tuple = (1.0,)
    divergence_factor: float = 1e6
    weak_tests: int = 20
    seed: int = DEFAULT_PANEL_SEED

    def __post_init__(self):
        sched = tuple(float(x) for x in self.lambda_schedule)
        object.__setattr__(self, "lambda_schedule", sched)
        if not self.tol > 0:
            raise ValueError("invariant violated: tol > 0")
        if not 0 < self.damping <= 1:
            raise ValueError("invariant violated: 0 < damping <= 1")
        if not sched or any(b <= a for a, b in zip(sched, sched[1:])) or sched[-1] != 1.0 or sched[0] <= 0:
            raise ValueError("invariant violated: lambda schedule strictly increasing in (0, 1], ending at 1")
        if self.max_iter < 1:
            raise ValueError("invariant violated: max_iter >= 1")
        if not self.divergence_factor > 0:
            raise ValueError("invariant violated: divergence_factor > 0")

    @classmethod
    def with_steps(cls, steps: int, **kw) -> "SolverOptions":
        """Uniform schedule ``1/steps, 2/steps, ..., 1``."""
        return cls(lambda_schedule=tuple((k + 1) / steps for k in range(steps)), **kw)


@dataclass(eq=False)
class PicardState:
    """Current iterate: stream function of ``u`` plus the fields it induces."""

    chi_u: ScalarField
    w_total: ScalarField
    rho: ScalarField
    psi: ScalarField
    iter: int = 0
    lam: float = 0.0
    residual_history: list = field(default_factory=list)
    p: ScalarField | None = None

    @property
    def u(self) -> VectorField:
        return perp_grad(self.chi_u)

    @property
    def v(self) -> VectorField:
        """Total velocity ``u + a``, the perp-gradient of ``psi``."""
        return perp_grad(self.psi)


@dataclass
class SolvabilityReport:
    lhs: float
    rhs: float
    margin: float
    hopf_lhs: float
    hopf_rhs: float
    hopf_ok: bool
    c_user: float

    def items(self):
        return [
            ("solvability_lhs", self.lhs),
            ("solvability_rhs", self.rhs),
            ("solvability_margin", self.margin),
            ("solvability_c_user", self.c_user),
            ("hopf_delta_eta", self.hopf_lhs),
            ("hopf_half_mu", self.hopf_rhs),
            ("hopf_ok", self.hopf_ok),
        ]


@dataclass
class SolveReport:
    """Outcome of a run; rendered as ``key = value`` lines."""

    converged: bool = False
    status: str = "running"
    iterations: int = 0
    final_lambda: float = 0.0
    final_residual: float = math.nan
    history: list = field(default_factory=list)  # (lambda, iteration, residual)
    weak: dict = field(default_factory=dict)
    energy: dict = field(default_factory=dict)
    solvability: SolvabilityReport | None = None
    momentum_residual: float = math.nan
    message: str = ""
    extra: dict = field(default_factory=dict)

    def items(self):
        out = [
            ("status", self.status),
            ("converged", self.converged),
            ("iterations", self.iterations),
            ("final_lambda", self.final_lambda),
            ("final_residual", self.final_residual),
        ]
        if self.message:
            out.append(("message", self.message))
        out += [(f"weak_{k}", v) for k, v in self.weak.items()]
        out += [(f"energy_{k}", v) for k, v in self.energy.items()]
        if self.solvability is not None:
            out += self.solvability.items()
        out.append(("momentum_residual", self.momentum_residual))
        out += list(self.extra.items())
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.items())

    def history_csv(self) -> str:
        buf = io.StringIO()
        buf.write("lambda,iteration,residual\n")
        for lam, k, r in self.history:
            buf.write(f"{lam:.17g},{k},{r:.17g}\n")
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _state_from(result, it, lam, history) -> PicardState:
    return PicardState(result.chi, result.w, result.rho, result.psi, it, lam, history)


def run_fixed_point(data: IterationData, opts: SolverOptions | None = None, callback=None):
    """Iterate the fixed-point map to convergence.

    Returns ``(state, report)``.  On hitting ``max_iter`` the state with the
    smallest residual is returned with ``report.converged = False`` and status
    ``max iterations``.  Blow-up (non-finite iterates, or ``|u|_{H1}`` beyond
    ``divergence_factor * (1 + data norms)``) raises ``DivergenceError``
    carrying the partial report.  ``callback(state)`` is invoked after every
    map evaluation.

    Examples
    --------
    >>> from micropolar.mms import build_mms_case
    >>> case = build_mms_case("zero")
    >>> data = case.iteration_data(case.grid(17))
    >>> state, report = run_fixed_point(data)
    >>> report.converged, report.iterations
    (True, 1)
    """
    opts = opts or SolverOptions()
    grid = data.grid
    theta = opts.damping
    bound = opts.divergence_factor * (1.0 + data.data_norm())
    report = SolveReport()
    history: list = []
    chi = grid.zeros()
    state = None
    total = 0
    for lam in opts.lambda_schedule:
        best = None
        stage_done = False
        for k in range(1, opts.max_iter + 1):
            total += 1
            try:
                res = apply_A(chi, data, lam)
            except LinearSolveError as exc:
                report.status = "diverged"
                report.message = f"diverged at lambda={lam:g}, iteration {k}: {exc}"
                _fail(report, history, total, lam)
                raise DivergenceError(report.message, report, state) from exc
            chi_new = res.chi if theta == 1.0 else (1.0 - theta) * chi + theta * res.chi
            step = norm(perp_grad(chi_new - chi), "H1")
            size = norm(perp_grad(chi_new), "H1")
            history.append((lam, k, step))
            state = _state_from(res, total, lam, [h[2] for h in history])
            if callback is not None:
                callback(state)
            if not (math.isfinite(step) and math.isfinite(size)) or size > bound:
                report.status = "diverged"
                report.message = (f"diverged at lambda={lam:g}, iteration {k}: "
                                  f"|u|_H1={size:.3e} exceeds bound {bound:.3e}")
                _fail(report, history, total, lam)
                raise DivergenceError(report.message, report, state)
            if best is None or step < best[0]:
                best = (step, chi_new, state)
            chi = chi_new
            if step <= opts.tol:
                stage_done = True
                break
        if not stage_done:
            report.status = "max iterations"
            report.message = f"max iterations reached at lambda={lam:g}"
            _fail(report, history, total, lam)
            state = best[2]
            state.chi_u = best[1]
            _finish(state, data, report, opts)
            return state, report
    report.converged = True
    report.status = "converged"
    report.iterations = total
    report.final_lambda = opts.lambda_schedule[-1]
    report.final_residual = history[-1][2]
    report.history = history
    # the last map evaluation already holds w, rho, psi of the fixed point
    state.chi_u = chi
    state.psi = chi + data.hopf.chi
    _finish(state, data, report, opts)
    return state, report


def _fail(report, history, total, lam):
    report.converged = False
    report.iterations = total
    report.final_lambda = lam
    report.final_residual = history[-1][2] if history else math.nan
    report.history = history


def _finish(state: PicardState, data: IterationData, report: SolveReport, opts: SolverOptions):
    """Pressure, weak-identity audit, energy margins and solvability report."""
    v = final_velocity(state.psi, data.v0)
    p, mres = recover_pressure(v, state.w_total, state.rho, data.f, data.params,
                               return_residual=True, psi=state.psi)
    state.p = p
    report.momentum_residual = mres
    report.weak = weak_residual(state, data, opts.weak_tests, opts.seed)
    est = check_estw(state.w_total - data.b, state.v, data.g, data.w0, data.params,
                     data.law.sup_norm, lift=data.b)
    report.energy = {"left": est.left, "right": est.right, "margin": est.margin}
    report.solvability = solvability_margin(data)


def _bubble_tests(grid, rng, power):
    """Random cosine sum times ``(x (lx - x) y (ly - y))**power``.

    The cosine factor does not vanish on the walls, so the product vanishes
    to exactly ``power``-th order there.
    """
    X, Y = grid.mesh
    c = rng.standard_normal((3, 3))
    z = np.zeros(grid.shape)
    for k in range(3):
        for m in range(3):
            z += c[k, m] * np.cos(k * np.pi * X / grid.lx) * np.cos(m * np.pi * Y / grid.ly)
    return (X * (grid.lx - X) * Y * (grid.ly - Y)) ** power * z


def weak_residual(state: PicardState, data: IterationData, n_tests: int = 20,
                  seed: int = DEFAULT_PANEL_SEED) -> dict:
    """Gaps in both weak identities over random smooth test pairs.

    The velocity test is ``phi = perp_grad(zeta)`` with ``zeta`` vanishing
    together with its gradient on the boundary; the microrotation test ``xi``
    vanishes on the boundary.  All derivatives are moved onto the test functions, so the
    identities read

        sigma [(v, -Lap phi) + <v0, dphi/dn>] - (rho v_k d_k phi, v)
            - 2 mu_r (w, curl phi) = (rho f, phi)
        kappa [(w, -Lap xi) + <w0, dxi/dn>] - (rho v . grad xi, w)
            + 4 mu_r (w, xi) - 2 mu_r (v, curl_scalar xi) = (rho g, xi)

    with the boundary terms taken from the data, so a state violating its
    trace condition is detected too.  Integrals use trapezoid quadrature.  Each gap is divided by the H1 norm of
    its test function.  Returns ``max``/``mean`` of the larger of the two gaps
    per pair, plus per-identity maxima.
    """
    grid = data.grid
    h = grid.h
    wts = trapezoid_weights(grid)
    prm = data.params
    v = state.v
    w = state.w_total.values
    rho = state.rho.values
    f, g = data.f, data.g.values
    rng = np.random.default_rng(seed)

    def d(a, axis):
        return np.gradient(a, h, axis=axis, edge_order=2)

    def lap(a):
        return d(d(a, 0), 0) + d(d(a, 1), 1)

    def integ(a):
        return float(np.sum(wts * a))

    def along_boundary(val, a):
        # int over the boundary of val * (outward normal derivative of a)
        ax, ay = d(a, 0), d(a, 1)
        tot = 0.0
        for vals, dn in ((val[0, :], -ax[0, :]), (val[-1, :], ax[-1, :]),
                         (val[:, 0], -ay[:, 0]), (val[:, -1], ay[:, -1])):
            q = vals * dn
            tot += h * (float(np.sum(q)) - 0.5 * (q[0] + q[-1]))
        return tot

    v0f = data.v0.to_field()
    w0f = data.w0.to_field().values

    gaps_u, gaps_w = [], []
    for _ in range(n_tests):
        zeta = _bubble_tests(grid, rng, 2)
        phx, phy = -d(zeta, 1), d(zeta, 0)
        xi = _bubble_tests(grid, rng, 1)
        # momentum identity
        visc = prm.sigma * (-integ(v.vx * lap(phx) + v.vy * lap(phy))
                            + along_boundary(v0f.vx, phx) + along_boundary(v0f.vy, phy))
        conv = integ(rho * (v.vx * (v.vx * d(phx, 0) + v.vy * d(phx, 1))
                            + v.vy * (v.vx * d(phy, 0) + v.vy * d(phy, 1))))
        curl_phi = d(phy, 0) - d(phx, 1)
        coup = 2.0 * prm.mu_r * integ(w * curl_phi)
        force = integ(rho * (f.vx * phx + f.vy * phy))
        nphi = norm(VectorField(grid, phx, phy), "H1")
        gaps_u.append(abs(visc - conv - coup - force) / nphi if nphi > 0 else 0.0)
        # microrotation identity
        xx, xy = d(xi, 0), d(xi, 1)
        diff = prm.kappa * (-integ(w * lap(xi)) + along_boundary(w0f, xi))
        conv_w = integ(rho * (v.vx * xx + v.vy * xy) * w)
        react = 4.0 * prm.mu_r * integ(w * xi)
        coup_w = 2.0 * prm.mu_r * integ(v.vx * xy - v.vy * xx)
        src = integ(rho * g * xi)
        nxi = norm(ScalarField(grid, xi), "H1")
        gaps_w.append(abs(diff - conv_w + react - coup_w - src) / nxi if nxi > 0 else 0.0)
    both = np.maximum(gaps_u, gaps_w)
    return {
        "max": float(both.max()) if n_tests else 0.0,
        "mean": float(both.mean()) if n_tests else 0.0,
        "max_momentum": float(max(gaps_u, default=0.0)),
        "max_microrotation": float(max(gaps_w, default=0.0)),
        "tests": int(n_tests),
    }


def solvability_margin(data: IterationData, C_user: float = 1.0) -> SolvabilityReport:
    """Heuristic check of the viscosity condition for existence.

    ``lhs = min(mu, 2 kappa)`` against ``C_user * sup(eta) * |w0|_{H^1/2}``;
    the constant is not computable, so a negative margin is only a warning.
    Also reports the Hopf smallness ``delta * sup(eta) < mu / 2``.

    Examples
    --------
    With ``mu = kappa = 1``, ``sup(eta) = 2`` and ``|w0| = 0.3`` the margin is
    ``1 - 0.6 = 0.4``.
    """
    if not C_user > 0:
        raise ValueError("invariant violated: C_user > 0")
    prm = data.params
    lhs = min(prm.mu, 2.0 * prm.kappa)
    rhs = C_user * data.law.sup_norm * boundary_h_half_norm(data.w0)
    hopf_lhs = data.hopf.measured_delta * data.law.sup_norm
    return SolvabilityReport(lhs, rhs, lhs - rhs, hopf_lhs, 0.5 * prm.mu, hopf_lhs < 0.5 * prm.mu, C_user)
