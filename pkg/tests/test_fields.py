import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from micropolar.errors import GridMismatchError
from micropolar.fields import (GridSpec, ScalarField, VectorField, advect, curl, curl_scalar, div,
                               grad, integrate, laplacian, norm, perp_grad)

G17 = GridSpec.unit(17)


def interior(a, grid):
    return a[grid.interior]


def test_perp_grad_of_constant_is_zero():
    v = perp_grad(ScalarField(G17, np.full(G17.shape, 3.5)))
    assert np.all(v.vx == 0) and np.all(v.vy == 0)


def test_perp_grad_exact_on_linear():
    v = perp_grad(G17.sample(lambda x, y: y))
    assert np.allclose(v.vx, -1.0, atol=1e-13, rtol=0)
    assert np.allclose(v.vy, 0.0, atol=1e-13)


def test_perp_grad_duct_midline():
    g = GridSpec.unit(33)
    v = perp_grad(g.sample(lambda x, y: y**2 * (3 - 2 * y)))
    j = 16
    assert abs(v.vx[:, j] + 1.5).max() <= 2 * g.h**2


def test_grid_rejects_rectangular_cells():
    with pytest.raises(ValueError, match="square"):
        GridSpec(9, 9, 1.0, 2.0)


def test_mixed_grids_raise():
    a = GridSpec.unit(9).zeros()
    b = GridSpec.unit(17).zeros()
    with pytest.raises(GridMismatchError, match="incompatible grids"):
        a + b
    with pytest.raises(GridMismatchError, match="incompatible grids"):
        advect(VectorField.zeros(GridSpec.unit(9)), b)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (12, 12), elements=st.floats(-1e3, 1e3)))
def test_div_perp_grad_vanishes(values):
    g = GridSpec.unit(12)
    d = div(perp_grad(ScalarField(g, values))).values
    scale = max(1.0, np.abs(values).max()) / g.h
    assert np.abs(interior(d, g)).max() <= 1e-13 * scale


def test_curl_perp_grad_matches_laplacian_on_quadratics():
    # the wide curl-of-perp-grad stencil and the 5-point stencil agree on quadratics
    psi = G17.sample(lambda x, y: 1 + x - 2 * y + 3 * x * x + x * y - y * y)
    c = curl(perp_grad(psi)).values
    lap = laplacian(psi).values
    assert np.allclose(interior(c, G17), interior(lap, G17), atol=1e-10)
    assert np.allclose(interior(lap, G17), 4.0, atol=1e-10)


def test_curl_scalar_of_x_squared():
    X, _ = G17.mesh
    cs = curl_scalar(G17.sample(lambda x, y: x**2))
    assert np.allclose(interior(cs.vx, G17), 0.0, atol=1e-12)
    assert np.allclose(interior(cs.vy, G17), interior(-2 * X, G17), atol=1e-12)


def test_operators_exact_on_quadratics():
    g = G17
    X, Y = g.mesh
    q = g.sample(lambda x, y: x * x - 3 * x * y + 2 * y * y + x)
    gq = grad(q)
    assert np.allclose(gq.vx, 2 * X - 3 * Y + 1, atol=1e-11)
    assert np.allclose(gq.vy, -3 * X + 4 * Y, atol=1e-11)
    assert np.allclose(laplacian(q).values, 6.0, atol=1e-9)


def test_advect_examples():
    g = G17
    X, Y = g.mesh
    ones = VectorField(g, np.ones(g.shape), np.zeros(g.shape))
    a = advect(ones, g.sample(lambda x, y: x)).values
    assert np.allclose(interior(a, g), 1.0, atol=1e-13)
    assert np.all(a[~g.interior] == 0)
    assert np.all(advect(VectorField.zeros(g), g.sample(lambda x, y: x * y)).values == 0)
    rot = VectorField(g, Y, -X)
    r = advect(rot, g.sample(lambda x, y: x * x + y * y)).values
    assert np.abs(interior(r, g)).max() <= 1e-12


def test_norms_of_simple_fields():
    g = GridSpec.unit(65)
    z = g.zeros()
    for kind in ("L2", "H1", "L4", "Linf"):
        assert norm(z, kind) == 0.0
    one = ScalarField(g, np.ones(g.shape))
    for kind in ("L2", "L4", "Linf", "H1"):
        assert norm(one, kind) == pytest.approx(1.0, abs=1e-14)
    s = g.sample(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
    assert abs(norm(s, "L2") - 0.5) <= 5e-4
    with pytest.raises(ValueError):
        norm(s, "H2")


def test_integrate_is_exact_on_bilinear():
    g = GridSpec(9, 17, 1.0, 2.0)
    assert integrate(g.sample(lambda x, y: x * y).values, g) == pytest.approx(1.0, rel=1e-13)


def _operator_errors(n):
    g = GridSpec.unit(n)
    psi = g.sample(lambda x, y: np.sin(np.pi * x) * np.cos(2 * y))
    ex_v = g.sample_vector(lambda x, y: (2 * np.sin(np.pi * x) * np.sin(2 * y),
                                         np.pi * np.cos(np.pi * x) * np.cos(2 * y)))
    ex_lap = g.sample(lambda x, y: -(np.pi**2 + 4) * np.sin(np.pi * x) * np.cos(2 * y))
    ex_cs = g.sample_vector(lambda x, y: (-2 * np.sin(np.pi * x) * np.sin(2 * y),
                                          -np.pi * np.cos(np.pi * x) * np.cos(2 * y)))
    mask = ScalarField(g, g.interior.astype(float))
    return (norm(perp_grad(psi) - ex_v, "L2"),
            norm((laplacian(psi) - ex_lap) * mask, "L2"),
            norm(curl_scalar(psi) - ex_cs, "L2"))


def test_operator_convergence_orders():
    errs = [_operator_errors(n) for n in (17, 33, 65)]
    for k in range(3):
        for coarse, fine in zip(errs, errs[1:]):
            assert math.log2(coarse[k] / fine[k]) >= 1.9
