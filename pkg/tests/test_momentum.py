import numpy as np
import pytest

from micropolar.fields import GridSpec, ScalarField, VectorField, div, integrate, norm, perp_grad, trapezoid_weights
from micropolar.microrotation import FluidParams
from micropolar.mms import build_mms_case
from micropolar.momentum import apply_A, assemble_rhs, final_velocity, recover_pressure
from micropolar.verify import ACCEPTANCE_PARAMS


def interior(a, g):
    return a[g.interior]


@pytest.fixture(scope="module")
def zero_data():
    case = build_mms_case("zero", FluidParams(1.0, 0.5, 0.5, 0.5))
    return case.iteration_data(case.grid(17))


def exact_chi(case, data):
    return data.grid.sample(case.psi) - data.hopf.chi


def bubble_stream(g, rng):
    X, Y = g.mesh
    z = sum(rng.standard_normal() * np.sin(k * np.pi * X) * np.sin(m * np.pi * Y)
            for k in (1, 2, 3) for m in (1, 2, 3))
    return ScalarField(g, (X * (1 - X) * Y * (1 - Y)) ** 2 * z)


def test_rhs_of_zero_fields(zero_data):
    g = zero_data.grid
    R = assemble_rhs(VectorField.zeros(g), g.zeros(), g.sample(lambda x, y: 1 + 0 * x), zero_data)
    assert np.all(R.vx == 0) and np.all(R.vy == 0)


def test_rhs_pure_coupling(zero_data):
    g = zero_data.grid
    X, _ = g.mesh
    R = assemble_rhs(VectorField.zeros(g), g.sample(lambda x, y: x**2), ScalarField(g, np.ones(g.shape)),
                     zero_data)
    assert np.allclose(interior(R.vx, g), 0.0, atol=1e-12)
    assert np.allclose(interior(R.vy, g), interior(-2 * X, g), atol=1e-12)


def test_rhs_uniform_stream(zero_data):
    g = zero_data.grid
    u = VectorField(g, np.ones(g.shape), np.zeros(g.shape))
    R = assemble_rhs(u, g.zeros(), ScalarField(g, np.ones(g.shape)), zero_data)
    assert np.all(R.vx == 0) and np.all(R.vy == 0)


def test_apply_zero_data(zero_data):
    res = apply_A(zero_data.grid.zeros(), zero_data, 1.0)
    assert np.all(res.chi.values == 0)


def test_apply_lambda_zero_and_linearity(duct):
    data = duct.iteration_data(duct.grid(33))
    chi = bubble_stream(data.grid, np.random.default_rng(5))
    assert np.all(apply_A(chi, data, 0.0).chi.values == 0)
    full = apply_A(chi, data, 1.0)
    part = apply_A(chi, data, 0.3)
    assert np.array_equal(part.chi.values, 0.3 * full.chi.values)
    with pytest.raises(ValueError):
        apply_A(chi, data, 1.5)


def test_apply_output_is_solenoidal_with_zero_trace(duct):
    data = duct.iteration_data(duct.grid(33))
    g = data.grid
    rng = np.random.default_rng(11)
    for _ in range(3):
        out = apply_A(bubble_stream(g, rng) * 50.0, data, rng.uniform(0.1, 1.0))
        u = out.u
        scale = max(np.abs(u.vx).max(), np.abs(u.vy).max()) / g.h
        assert np.abs(interior(div(u).values, g)).max() <= 1e-13 * scale
        # stream function of the update vanishes on the boundary
        assert np.abs(out.chi.values[~g.interior]).max() <= 1e-14


def test_one_step_from_exact_solution_is_second_order(duct):
    errs = []
    for n in (33, 65):
        data = duct.iteration_data(duct.grid(n))
        chi = exact_chi(duct, data)
        errs.append(norm(apply_A(chi, data).u - perp_grad(chi), "L2"))
    assert errs[0] / errs[1] >= 3.0


def test_pressure_of_uniform_force():
    g = GridSpec.unit(33)
    f = VectorField(g, np.ones(g.shape), np.zeros(g.shape))
    ones = ScalarField(g, np.ones(g.shape))
    p = recover_pressure(VectorField.zeros(g), g.zeros(), ones, f, ACCEPTANCE_PARAMS)
    X, _ = g.mesh
    assert np.abs(p.values - (X - 0.5)).max() <= 1e-10
    p0 = recover_pressure(VectorField.zeros(g), g.zeros(), ones, VectorField.zeros(g), ACCEPTANCE_PARAMS)
    assert np.abs(p0.values).max() <= 1e-14


def test_pressure_gauge(duct33):
    data, state, _ = duct33
    p = state.p
    assert abs(integrate(p.values, data.grid) / np.sum(trapezoid_weights(data.grid))) <= 1e-12


def test_final_velocity_uses_boundary_data(duct33):
    data, state, _ = duct33
    v = final_velocity(state.psi, data.v0)
    lp = data.v0.loop
    assert np.array_equal(np.column_stack([v.vx[lp.i, lp.j], v.vy[lp.i, lp.j]]), data.v0.values)
    g = data.grid
    assert np.array_equal(v.vx[g.interior], state.v.vx[g.interior])


def test_contraction_for_large_viscosity():
    case = build_mms_case("duct", FluidParams(10.0, 0.1, 5.0, 5.0))
    data = case.iteration_data(case.grid(33))
    chi = exact_chi(case, data)
    base = apply_A(chi, data).u
    size = norm(perp_grad(chi), "H1")
    rng = np.random.default_rng(20110519)
    for _ in range(10):
        d = bubble_stream(data.grid, rng)
        d = d * (1e-3 * size / norm(perp_grad(d), "H1"))
        moved = apply_A(chi + d, data).u
        assert norm(moved - base, "H1") <= 0.9 * norm(perp_grad(d), "H1")
