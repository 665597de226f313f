import math

import numpy as np
import pytest

from micropolar.errors import MicropolarError
from micropolar.fields import GridSpec, ScalarField, advect, curl, curl_scalar, laplacian, trapezoid_weights
from micropolar.microrotation import FluidParams
from micropolar.momentum import momentum_residual
from micropolar.verify import (ACCEPTANCE_PARAMS, BUILTIN_CASES, ConvergenceTable, StudyRow,
                               build_mms_case, convergence_study, reduction_tests)


def test_duct_velocity_at_centre(duct):
    assert [float(c) for c in duct.v(0.5, 0.5)] == [-1.5, 0.0]
    y = np.linspace(0, 1, 7)
    assert np.allclose(duct.v(0 * y + 0.3, y)[0], -6 * y * (1 - y), atol=1e-14)


def test_zero_case_has_zero_forcing():
    case = build_mms_case("zero")
    x, y = np.meshgrid(np.linspace(0, 1, 5), np.linspace(0, 1, 5))
    assert np.all(case.f(x, y)[0] == 0) and np.all(case.f(x, y)[1] == 0)
    assert np.all(case.g(x, y) == 0)


def test_coupling_term_isolated_by_linearity():
    # hold sigma = mu + mu_r fixed so only the coupling term moves
    without = build_mms_case("duct", FluidParams(1.5, 0.0, 0.5, 0.5))
    with_c = build_mms_case("duct", FluidParams(1.0, 0.5, 0.5, 0.5))
    g = GridSpec.unit(17)
    w = g.sample(with_c.w)
    x, y = g.mesh
    # analytic curl of w: (w_y, -w_x)
    cw = (np.pi * np.sin(np.pi * x) * np.cos(np.pi * y), -np.pi * np.cos(np.pi * x) * np.sin(np.pi * y))
    rho = with_c.rho(x, y)
    f0, f1 = without.f(x, y), with_c.f(x, y)
    for k in range(2):
        assert np.allclose(f0[k] - f1[k], 2 * 0.5 * cw[k] / rho, atol=1e-12)
    assert np.all(w.values == g.sample(without.w).values)


@pytest.mark.parametrize("name", sorted(BUILTIN_CASES))
def test_builtin_cases_pass_invariant_scan(name):
    assert build_mms_case(name).check_invariants(128)


def test_invalid_cases_rejected():
    with pytest.raises(MicropolarError, match="invalid MMS case"):
        build_mms_case("no-such-case")
    with pytest.raises(MicropolarError, match="invalid MMS case"):
        build_mms_case("duct", eta="-1").check_invariants(64)
    with pytest.raises(MicropolarError, match="invalid MMS case"):
        build_mms_case("duct", gamma="left").check_invariants(64)


def _discrete_residuals(case, n):
    g = case.grid(n)
    ex = case.exact_fields(g)
    f, gf = case.forcings(g)
    prm = case.params
    v, w, rho, p = ex["v"], ex["w"], ex["rho"], ex["p"]
    mom = momentum_residual(v, w, rho, f, p, prm, psi=ex["psi"])
    r = (-prm.kappa * laplacian(w) + rho * advect(v, w) + 4 * prm.mu_r * w
         - 2 * prm.mu_r * curl(v) - rho * gf).values
    wts = trapezoid_weights(g) * g.interior
    return mom, float(np.sqrt(np.sum(wts * r**2)))


def test_forcing_consistency(duct):
    res = [_discrete_residuals(duct, n) for n in (33, 65, 129)]
    for k in range(2):
        orders = [math.log2(a[k] / b[k]) for a, b in zip(res, res[1:])]
        assert orders[-1] >= 1.9


def test_linear_case_is_exact():
    table = convergence_study("linear", [17, 33, 65], extra=False)
    for name in ("v", "w", "psi", "p"):
        assert max(table.errors(name)) <= 1e-8
        assert all(r.order == "exact" for r in table.rows if r.field == name)
    ok, text = table.verdict()
    assert ok and "v: exact" in text


def test_study_grid_validation():
    with pytest.raises(ValueError, match="at least 3 grids"):
        convergence_study("duct", [17, 33])
    with pytest.raises(ValueError, match="factor-2"):
        convergence_study("duct", [17, 33, 64])


def test_verdict_judges_finest_order():
    t = ConvergenceTable("synthetic")
    for field in ("v", "w", "psi", "p"):
        t.rows += [StudyRow(17, field, 1e-2), StudyRow(33, field, 5e-3, 1.0), StudyRow(65, field, 1.25e-3, 2.0)]
    ok, text = t.verdict()
    assert ok and text.endswith("verdict: PASS\n")
    t.rows[-1] = StudyRow(65, "p", 4e-3, 0.3)
    ok, text = t.verdict()
    assert not ok and "p: orders 1.00 0.30" in text
    assert t.to_csv().splitlines()[0] == "grid,field,error,order"


def test_reduction_failures_are_reported_not_raised():
    results = reduction_tests(9)
    assert results and not any(r.passed for r in results)
    assert all("FAIL" in r.line() for r in results)
