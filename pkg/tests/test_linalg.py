import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from micropolar.errors import LinearSolveError
from micropolar.fields import GridSpec
from micropolar.linalg import SparseMatrix, solve_linear
from micropolar.stencils import five_point_matrix, interior_values, restrict_dirichlet


def laplace_system(n):
    g = GridSpec.unit(n)
    A, _ = restrict_dirichlet(g, -five_point_matrix(g), np.zeros(g.shape))
    f = g.sample(lambda x, y: 2 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y)).values
    return SparseMatrix(A.csr if isinstance(A, SparseMatrix) else A), interior_values(g, f)


@pytest.mark.parametrize("method", ["direct", "cg", "bicgstab"])
def test_identity(method):
    A = SparseMatrix(sp.identity(6))
    e1 = np.eye(6)[0]
    x, rep = solve_linear(A, e1, method=method)
    assert np.array_equal(x, e1)
    assert rep.converged and rep.iterations <= 1


def test_one_dimensional_poisson_by_hand():
    h = 0.25
    A = SparseMatrix(sp.diags([-1, 2, -1], [-1, 0, 1], shape=(3, 3)) / h**2)
    x, rep = solve_linear(A, np.ones(3), method="direct")
    assert np.allclose(x, [0.09375, 0.125, 0.09375], atol=1e-14)
    assert rep.residual <= 1e-10


def test_cg_on_laplacian_within_budget():
    A, b = laplace_system(33)
    x, rep = solve_linear(A, b, method="cg", tol=1e-10, max_iter=200)
    assert rep.converged and rep.iterations <= 200
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b)


def test_direct_and_bicgstab_agree():
    A, b = laplace_system(33)
    # add a nonsymmetric advection part
    n = A.n
    skew = sp.diags([0.5, -0.5], [1, -1], shape=(n, n)) * 40
    M = SparseMatrix(A.csr + skew)
    xd, _ = solve_linear(M, b, method="direct")
    xb, rep = solve_linear(M, b, method="bicgstab", tol=1e-12)
    assert rep.converged
    assert np.linalg.norm(xd - xb) <= 1e-8 * np.linalg.norm(xd)


def test_singular_matrix():
    A = SparseMatrix(sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]])))
    with pytest.raises(LinearSolveError, match="singular matrix"):
        solve_linear(A, np.ones(2), method="direct")


def test_indefinite_cg():
    A = SparseMatrix(sp.diags([1.0, -1.0, 2.0]))
    with pytest.raises(LinearSolveError, match="indefinite matrix in cg"):
        solve_linear(A, np.ones(3), method="cg", jacobi=False)


def test_iteration_cap_is_reported_not_raised():
    A, _ = laplace_system(33)
    b = np.random.default_rng(1).standard_normal(A.n)
    x, rep = solve_linear(A, b, method="cg", tol=1e-14, max_iter=3)
    assert not rep.converged and rep.message == "max iterations"


def test_rhs_shape_checked():
    with pytest.raises(ValueError):
        solve_linear(SparseMatrix(sp.identity(3)), np.ones(4))


def test_deterministic():
    A, b = laplace_system(17)
    for method in ("direct", "cg", "bicgstab"):
        x1, _ = solve_linear(A, b, method=method)
        x2, _ = solve_linear(A, b, method=method)
        assert np.array_equal(x1, x2)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**31 - 1))
def test_direct_solves_diagonally_dominant_systems(n, seed):
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.3)
    dense += np.diag(np.abs(dense).sum(axis=1) + 1.0)
    b = rng.standard_normal(n)
    x, rep = solve_linear(SparseMatrix(sp.csr_matrix(dense)), b, method="direct")
    assert np.allclose(dense @ x, b, atol=1e-10 * max(1.0, np.abs(b).max()))
