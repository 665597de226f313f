import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from micropolar.boundary import (BoundaryTrace, DensityLaw, GammaSpec, boundary_h_half_norm,
                                 boundary_stream, build_density_law, build_hopf_extension,
                                 build_lift_w, check_compatibility)
from micropolar.errors import DensityError, InflowError
from micropolar.fields import GridSpec, div

G17 = GridSpec.unit(17)


def duct_trace(grid):
    return BoundaryTrace.from_function(grid, lambda x, y: (-6 * y * (1 - y), 0 * x))


def uniform_x(grid):
    return BoundaryTrace.from_function(grid, lambda x, y: (np.ones_like(x), 0 * x))


def test_loop_is_counterclockwise_from_origin():
    lp = G17.zeros() and BoundaryTrace(G17, np.zeros(64)).loop
    assert (lp.i[0], lp.j[0]) == (0, 0)
    assert (lp.i[16], lp.j[16]) == (16, 0)
    assert (lp.i[32], lp.j[32]) == (16, 16)
    assert lp.perimeter == pytest.approx(4.0)


def test_compatibility_examples():
    zero = BoundaryTrace(G17, np.zeros((64, 2)))
    assert check_compatibility(zero) == 0.0
    assert abs(check_compatibility(uniform_x(G17))) <= 1e-14
    vals = np.zeros((64, 2))
    lp = zero.loop
    vals[lp.i == 0, 0] = 1.0
    assert check_compatibility(BoundaryTrace(G17, vals)) == pytest.approx(-1.0, abs=1e-12)


def test_boundary_stream_zero_and_linear():
    gam = GammaSpec.edge(G17, "left")
    zero = BoundaryTrace(G17, np.zeros((64, 2)))
    assert np.all(boundary_stream(zero, gam).values == 0)
    phi = boundary_stream(uniform_x(G17), gam).values[list(gam.nodes)]
    assert np.allclose(phi, np.linspace(0, 1, 17), atol=1e-14)


def test_boundary_stream_matches_duct_stream_function():
    devs = []
    for n in (17, 33):
        g = GridSpec.unit(n)
        gam = GammaSpec.edge(g, "right")
        phi = boundary_stream(duct_trace(g), gam)
        exact = BoundaryTrace.from_function(g, lambda x, y: y**2 * (3 - 2 * y))
        devs.append(np.abs(phi.values - exact.values).max())
    assert devs[1] <= 1e-12 or devs[0] / devs[1] >= 3.5


def test_gamma_must_be_inflow():
    gam = GammaSpec.edge(G17, "right")
    with pytest.raises(InflowError, match="Gamma not strict inflow"):
        gam.check_inflow(uniform_x(G17))
    GammaSpec.edge(G17, "left").check_inflow(uniform_x(G17))


def test_density_law_examples():
    law = DensityLaw(np.array([0.0, 1.0]), np.array([1.0, 3.0]))
    assert law(np.array(0.5)) == pytest.approx(2.0)
    c = DensityLaw.constant(2.0)
    assert c.lipschitz == 0.0
    assert np.all(c(np.linspace(-5, 5, 11)) == 2.0)
    with pytest.raises(DensityError, match="nonpositive boundary density"):
        DensityLaw(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    with pytest.raises(InflowError, match="Gamma not strict inflow"):
        DensityLaw(np.array([0.0, 0.0]), np.array([1.0, 2.0]))


def test_density_law_from_unit_inflow():
    gam = GammaSpec.edge(G17, "left")
    v0 = uniform_x(G17)
    phi = boundary_stream(v0, gam)
    # arclength along the left edge runs downward from the top corner
    rho0 = BoundaryTrace.from_function(G17, lambda x, y: 1 + (1 - y))
    law = build_density_law(rho0, phi, gam)
    ys = np.array([-0.5, 0.0, 0.3, 0.75, 1.0, 1.7])
    assert np.allclose(law(ys), np.clip(1 + ys, 1, 2), atol=1e-14)
    nodes = list(gam.nodes)
    assert np.array_equal(law(phi.values[nodes]), rho0.values[nodes])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=17, max_size=17))
def test_density_law_hits_boundary_values_exactly(rhos):
    gam = GammaSpec.edge(G17, "left")
    phi = boundary_stream(uniform_x(G17), gam)
    vals = np.ones(64)
    vals[list(gam.nodes)] = rhos
    law = build_density_law(BoundaryTrace(G17, vals), phi, gam)
    nodes = list(gam.nodes)
    assert np.array_equal(law(phi.values[nodes]), vals[nodes])
    assert law(np.linspace(-3, 3, 50)).min() >= min(rhos)


def test_hopf_zero_data():
    zero = BoundaryTrace(G17, np.zeros((64, 2)))
    hop = build_hopf_extension(zero, BoundaryTrace(G17, np.zeros(64)), 0.25)
    assert hop.measured_delta == 0.0
    assert np.all(hop.a.vx == 0) and np.all(hop.a.vy == 0)


def _duct_hopf(n, eps):
    g = GridSpec.unit(n)
    v0 = duct_trace(g)
    phi = boundary_stream(v0, GammaSpec.edge(g, "right"))
    return g, v0, build_hopf_extension(v0, phi, eps)


def test_hopf_support_and_divergence():
    g, _, hop = _duct_hopf(33, 0.25)
    far = g.wall_distance > 0.25
    assert np.all(hop.a.vx[far] == 0) and np.all(hop.a.vy[far] == 0)
    d = div(hop.a).values[g.interior]
    assert np.abs(d).max() <= 1e-12 * np.abs([hop.a.vx, hop.a.vy]).max() / g.h


def test_hopf_delta_shrinks_with_layer_width():
    assert _duct_hopf(65, 0.125)[2].measured_delta < _duct_hopf(65, 0.25)[2].measured_delta


def test_hopf_trace_is_second_order():
    devs = []
    for n in (33, 65):
        g, v0, hop = _duct_hopf(n, 0.25)
        lp = v0.loop
        a = np.column_stack([hop.a.vx[lp.i, lp.j], hop.a.vy[lp.i, lp.j]])
        devs.append(np.abs(a - v0.values).max())
    assert devs[0] / devs[1] >= 3.5


def test_hopf_rejects_thin_layer():
    g = GridSpec.unit(17)
    v0 = duct_trace(g)
    phi = boundary_stream(v0, GammaSpec.edge(g, "right"))
    with pytest.raises(ValueError, match="eps too small for grid"):
        build_hopf_extension(v0, phi, g.h)


@pytest.mark.parametrize("fn", [lambda x, y: 0 * x, lambda x, y: 0 * x + 2.5, lambda x, y: x])
def test_lift_reproduces_discrete_harmonic_data(fn):
    g = G17
    b = build_lift_w(BoundaryTrace.from_function(g, fn))
    assert np.allclose(b.values, g.sample(fn).values, atol=1e-13)


def test_h_half_norm_examples():
    assert boundary_h_half_norm(BoundaryTrace(G17, np.zeros(64))) == 0.0
    c = boundary_h_half_norm(BoundaryTrace(G17, np.full(64, 3.0)))
    assert c == pytest.approx(3.0 * 2.0, rel=1e-13)
    vals = []
    for n in (33, 65):
        g = GridSpec.unit(n)
        tr = BoundaryTrace(g, np.zeros(4 * (n - 1)))
        vals.append(boundary_h_half_norm(BoundaryTrace(g, np.sin(2 * np.pi * tr.s / 4.0))))
    assert np.isfinite(vals).all()
    assert abs(vals[1] / vals[0] - 1) <= 0.02
