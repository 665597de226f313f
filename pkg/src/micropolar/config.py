"""INI run configuration: parsing, validation, profiles and the effective echo.

A minimal file needs ``[grid]``, ``[fluid]`` and ``[bc]``::

    [grid]
    nx = 33

    [fluid]
    mu = 1.0
    mu_r = 0.1
    c_a = 0.5
    c_d = 0.5

    [bc]
    mms = duct

Profiles for boundary traces and forcings are short specs:

``uniform A`` / ``uniform A B``
    Constant scalar or vector.
``parabolic U``
    Scalar ``U * 4 y (ly - y) / ly**2``; as a velocity, that value as the
    x-component on the left and right edges and zero elsewhere.
``poly c0 c1 ...``
    Polynomial in arclength ``s``; as a velocity, the outward normal
    component times the node normal.
``expr E`` / ``expr E1; E2``
    Closed-form expression(s) in ``x``, ``y`` (and ``pi``).
``csv PATH``
    Columns ``s,value`` or ``s,vx,vy`` (traces only), resampled linearly.
``mms``
    Taken from the manufactured case named by ``[bc] mms``.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import sympy as sy

from .boundary import DEFAULT_PANEL_SEED, BoundaryTrace, GammaSpec, boundary_loop
from .errors import ConfigError, InflowError
from .fields import GridSpec, ScalarField, VectorField
from .microrotation import FluidParams

__all__ = ["RunConfig", "parse_config", "parse_config_text", "SEED_ENV"]

SEED_ENV = "MICROPOLAR_SEED"

# section -> key -> default (None means required, "" means unset)
SCHEMA = {
    "grid": {"nx": None, "ny": "", "lx": "1.0", "ly": "1.0"},
    "fluid": {"mu": None, "mu_r": None, "c_a": None, "c_d": None, "c0": ""},
    "bc": {"mms": "", "gamma": "", "v0": "mms", "w0": "mms", "rho0": "mms"},
    "forcing": {"f": "mms", "g": "mms"},
    "solver": {"tol": "1e-8", "max_iter": "200", "damping": "1.0", "lambda_steps": "1",
               "lambda_schedule": "", "divergence_factor": "1e6", "eps": "", "c_user": "1.0",
               "seed": str(DEFAULT_PANEL_SEED), "weak_tests": "20"},
    "output": {"directory": "out", "formats": "csv", "history": "true", "plots": "false"},
}
REQUIRED_SECTIONS = ("grid", "fluid", "bc")


@dataclass
class RunConfig:
    """Validated run configuration with every default filled in."""

    values: dict
    source: Path | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    def get(self, section: str, key: str) -> str:
        return self.values[section][key]

    def _float(self, section, key):
        raw = self.get(section, key)
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"invariant violated: {section}.{key} must be a number, got {raw!r}") from None

    def _int(self, section, key):
        raw = self.get(section, key)
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"invariant violated: {section}.{key} must be an integer, got {raw!r}") from None

    # typed views
    @property
    def grid(self) -> GridSpec:
        nx = self._int("grid", "nx")
        lx, ly = self._float("grid", "lx"), self._float("grid", "ly")
        ny = self._int("grid", "ny") if self.get("grid", "ny") else None
        if ny is None:
            ny = int(round((nx - 1) * ly / lx)) + 1
        try:
            return GridSpec(nx, ny, lx, ly)
        except ValueError as exc:
            raise ConfigError(f"invariant violated: {exc}") from None

    @property
    def params(self) -> FluidParams:
        c0 = self._float("fluid", "c0") if self.get("fluid", "c0") else None
        try:
            return FluidParams(self._float("fluid", "mu"), self._float("fluid", "mu_r"),
                               self._float("fluid", "c_a"), self._float("fluid", "c_d"), c0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def mms_name(self) -> str:
        return self.get("bc", "mms")

    @property
    def seed(self) -> int:
        return self._int("solver", "seed")

    @property
    def formats(self) -> tuple:
        fmt = self.get("output", "formats").replace(",", " ").split()
        if fmt == ["both"]:
            return ("csv", "vtk")
        if not fmt or any(f not in ("csv", "vtk") for f in fmt):
            raise ConfigError("invariant violated: output.formats is csv, vtk or both")
        return tuple(fmt)

    def solver_options(self):
        from .picard import SolverOptions

        sched = self.get("solver", "lambda_schedule")
        try:
            if sched:
                schedule = tuple(float(x) for x in sched.replace(",", " ").split())
            else:
                k = self._int("solver", "lambda_steps")
                if k < 1:
                    raise ValueError("invariant violated: lambda_steps >= 1")
                schedule = tuple((i + 1) / k for i in range(k))
            return SolverOptions(tol=self._float("solver", "tol"), max_iter=self._int("solver", "max_iter"),
                                 damping=self._float("solver", "damping"), lambda_schedule=schedule,
                                 divergence_factor=self._float("solver", "divergence_factor"),
                                 weak_tests=self._int("solver", "weak_tests"), seed=self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def eps(self):
        return self._float("solver", "eps") if self.get("solver", "eps") else None

    @property
    def c_user(self) -> float:
        c = self._float("solver", "c_user")
        if not c > 0:
            raise ConfigError("invariant violated: c_user > 0")
        return c

    def override(self, section: str, key: str, value) -> None:
        self.values[section][key] = str(value)

    def echo(self) -> str:
        """Effective configuration, every key present, in schema order."""
        lines = []
        for sec, keys in SCHEMA.items():
            lines.append(f"[{sec}]")
            for key in keys:
                lines.append(f"{key} = {self.values[sec][key]}")
            lines.append("")
        return "\n".join(lines)

    # boundary data and forcings
    def mms_case(self):
        from .mms import build_mms_case

        name = self.mms_name
        if not name:
            return None
        try:
            return build_mms_case(name, self.params)
        except Exception as exc:
            raise ConfigError(f"invariant violated: bc.mms: {exc}") from None

    def gamma(self, grid: GridSpec, case=None) -> GammaSpec:
        spec = self.get("bc", "gamma") or (case.gamma_edge if case is not None else "")
        if not spec:
            raise ConfigError("invariant violated: bc.gamma is required without bc.mms")
        if spec in ("bottom", "right", "top", "left"):
            return GammaSpec.edge(grid, spec)
        try:
            lo, hi = (float(t) for t in spec.replace(":", " ").split())
        except ValueError:
            raise ConfigError(f"invariant violated: bc.gamma must be an edge name or 's_start:s_end', got {spec!r}") from None
        try:
            return GammaSpec.from_arc(grid, lo, hi)
        except InflowError as exc:
            raise ConfigError(f"invariant violated: bc.gamma: {exc}") from None

    def trace(self, key: str, grid: GridSpec, vector: bool, case=None) -> BoundaryTrace:
        spec = self.get("bc", key)
        if spec.split()[0] == "mms":
            if case is None:
                raise ConfigError(f"invariant violated: bc.{key} = mms needs bc.mms")
            v0, w0, rho0 = case.traces(grid)
            return {"v0": v0, "w0": w0, "rho0": rho0}[key]
        kind, _, rest = spec.partition(" ")
        lp = boundary_loop(grid)
        x, y = lp.i * grid.h, lp.j * grid.h
        if kind == "csv":
            path = Path(rest.strip())
            path = path if path.is_absolute() else self.base_dir / path
            if not path.exists():
                raise ConfigError(f"invariant violated: bc.{key}: file not found: {path}")
            tr = BoundaryTrace.from_csv(grid, path)
            if tr.is_vector != vector:
                raise ConfigError(f"invariant violated: bc.{key}: wrong number of CSV columns")
            return tr
        if kind == "poly":
            coef = _numbers(rest, key)
            q = np.polynomial.polynomial.polyval(lp.s, coef)
            if vector:
                return BoundaryTrace(grid, q[:, None] * lp.node_normal)
            return BoundaryTrace(grid, q)
        vals = _profile(kind, rest, x, y, grid, vector, f"bc.{key}")
        return BoundaryTrace(grid, np.column_stack(vals) if vector else vals)

    def forcing(self, key: str, grid: GridSpec, case=None):
        vector = key == "f"
        spec = self.get("forcing", key)
        kind, _, rest = spec.partition(" ")
        if kind == "mms":
            if case is None:
                if self.get("forcing", key) == SCHEMA["forcing"][key]:
                    # default with no manufactured case: no forcing
                    return VectorField.zeros(grid) if vector else grid.zeros()
                raise ConfigError(f"invariant violated: forcing.{key} = mms needs bc.mms")
            f, g = case.forcings(grid)
            return f if vector else g
        if kind in ("zero", "none"):
            return VectorField.zeros(grid) if vector else grid.zeros()
        X, Y = grid.mesh
        vals = _profile(kind, rest, X, Y, grid, vector, f"forcing.{key}")
        return VectorField(grid, *vals) if vector else ScalarField(grid, vals)

    def validate_boundary(self, grid: GridSpec | None = None) -> None:
        """Build the traces and check the inflow arc without solving anything."""
        grid = grid or self.grid
        case = self.mms_case()
        v0 = self.trace("v0", grid, True, case)
        self.trace("w0", grid, False, case)
        self.trace("rho0", grid, False, case)
        self.forcing("f", grid, case)
        self.forcing("g", grid, case)
        gamma = self.gamma(grid, case)
        if np.any(v0.values):
            gamma.check_inflow(v0)

    def iteration_data(self, grid: GridSpec | None = None):
        """Assemble ``IterationData``; boundary-data errors propagate unchanged."""
        from .momentum import IterationData

        grid = grid or self.grid
        case = self.mms_case()
        v0 = self.trace("v0", grid, True, case)
        w0 = self.trace("w0", grid, False, case)
        rho0 = self.trace("rho0", grid, False, case)
        f = self.forcing("f", grid, case)
        g = self.forcing("g", grid, case)
        return IterationData.build(grid, self.params, v0, w0, rho0, self.gamma(grid, case), f, g,
                                   eps=self.eps, seed=self.seed)


def _numbers(text: str, where: str) -> list:
    try:
        out = [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"invariant violated: {where}: expected numbers, got {text!r}") from None
    if not out:
        raise ConfigError(f"invariant violated: {where}: missing values")
    return out


def _profile(kind, rest, x, y, grid, vector, where):
    """Evaluate ``uniform``/``parabolic``/``expr`` specs at points ``x, y``."""
    shape = np.shape(x)
    if kind == "uniform":
        vals = _numbers(rest, where)
        if len(vals) != (2 if vector else 1):
            raise ConfigError(f"invariant violated: {where}: uniform needs {2 if vector else 1} value(s)")
        if vector:
            return np.full(shape, vals[0]), np.full(shape, vals[1])
        return np.full(shape, vals[0])
    if kind == "parabolic":
        (u,) = _numbers(rest, where)[:1]
        prof = u * 4.0 * y * (grid.ly - y) / grid.ly**2
        if vector:
            side = np.isclose(x, 0.0) | np.isclose(x, grid.lx)
            return np.where(side, prof, 0.0), np.zeros(shape)
        return prof
    if kind == "expr":
        parts = [p.strip() for p in rest.split(";")]
        if len(parts) != (2 if vector else 1):
            raise ConfigError(f"invariant violated: {where}: expr needs {2 if vector else 1} expression(s)")
        X, Y = sy.symbols("x y", real=True)
        out = []
        for p in parts:
            try:
                e = sy.sympify(p, locals={"x": X, "y": Y, "pi": sy.pi})
                fn = sy.lambdify((X, Y), e, "numpy")
                out.append(np.broadcast_to(np.asarray(fn(x, y), dtype=float), shape).copy())
            except (sy.SympifyError, TypeError, ValueError) as exc:
                raise ConfigError(f"invariant violated: {where}: bad expression {p!r}: {exc}") from None
        return tuple(out) if vector else out[0]
    raise ConfigError(f"invariant violated: {where}: unknown profile {kind!r}")


def parse_config_text(text: str, source: Path | None = None) -> RunConfig:
    """Parse INI text; see ``parse_config``."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",), empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(source) if source else "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}: missing section header") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else 0
        raise ConfigError(f"parse error at line {lineno}") from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigError(f"parse error at line {exc.lineno}: {exc.message if hasattr(exc, 'message') else exc}") from None
    values = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown key: section [{sec}]")
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key: {key!r} in [{sec}]")
    for sec in REQUIRED_SECTIONS:
        if sec not in cp:
            raise ConfigError(f"invariant violated: missing section [{sec}]")
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        for key, default in keys.items():
            raw = cp[sec][key].strip() if sec in cp and key in cp[sec] else default
            if raw is None:
                raise ConfigError(f"invariant violated: missing {sec}.{key}")
            values[sec][key] = raw
    base = source.parent if source is not None else Path.cwd()
    cfg = RunConfig(values, source, base)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed:
        cfg.override("solver", "seed", env_seed)
    # validate eagerly so check-config catches everything it can
    cfg.grid, cfg.params, cfg.solver_options(), cfg.formats, cfg.c_user
    cfg.validate_boundary()
    return cfg


def parse_config(path) -> RunConfig:
    """Read and validate a configuration file.

    Raises
    ------
    ConfigError
        ``parse error at line N``, ``unknown key: ...`` or
        ``invariant violated: ...``.
    InflowError
        ``Gamma not strict inflow`` for the configured ``v0``.
    OSError
        When the file cannot be read.
    """
    path = Path(path)
    return parse_config_text(path.read_text(), path.resolve())
