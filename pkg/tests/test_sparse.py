import itertools

import numpy as np
import numpy.testing as npt
import pytest
import scipy.sparse

from slrtrack.exceptions import DimensionError
from slrtrack.exceptions import IllConditionedSupport
from slrtrack.exceptions import InvalidConfig
from slrtrack.exceptions import IterationLimit
from slrtrack.linalg import BasisMatrix
from slrtrack.linalg import random_basis
from slrtrack.sparse import L1Problem
from slrtrack.sparse import ProjectionOperator
from slrtrack.sparse import hard_threshold
from slrtrack.sparse import l1_bpdn
from slrtrack.sparse import l1_bpdn_columns
from slrtrack.sparse import ls_on_support
from slrtrack.sparse import support_threshold
from slrtrack.utilities import rng_stream

from .helpers import sparse_vector


def sparsest_solution(A, y, k):
    """
    Exhaustive search over all supports of size ``k`` for an exact solution of ``A x = y``.

    """
    n = A.shape[1]
    exact = []
    for T in itertools.combinations(range(n), k):
        coef, *_ = np.linalg.lstsq(A[:, T], y, rcond=None)
        if np.linalg.norm(A[:, T] @ coef - y) <= 1e-9 * max(1.0, np.linalg.norm(y)):
            x = np.zeros(n)
            x[list(T)] = coef
            exact.append(x)
    return exact


def test_l1_matches_combinatorial_oracle():
    recovered = 0
    for seed in range(10):
        rng = rng_stream(seed, "l1-oracle")
        A = rng.standard_normal((8, 16))
        T = rng.choice(16, size=2, replace=False)
        x0 = np.zeros(16)
        x0[T] = rng.standard_normal(2)
        y = A @ x0
        oracle = sparsest_solution(A, y, 2)
        assert len(oracle) == 1
        npt.assert_allclose(oracle[0], x0, atol=1e-8)
        xhat = l1_bpdn(L1Problem(A, y, xi=1e-8, max_iters=20000, tol=1e-10))
        if np.max(np.abs(xhat - oracle[0])) <= 1e-5:
            recovered += 1
    assert recovered >= 8


def test_l1_solution_is_feasible_for_large_measurements():
    for seed in range(5):
        rng = rng_stream(seed, "l1-feasible")
        A = rng.standard_normal((8, 16))
        T = rng.choice(16, size=2, replace=False)
        x0 = np.zeros(16)
        x0[T] = [500.0, -800.0]
        y = A @ x0
        problem = L1Problem(A, y, xi=1e-8, max_iters=20000, tol=1e-7)
        xhat = l1_bpdn(problem)
        assert np.linalg.norm(y - A @ xhat) <= problem.xi + problem.tol
        assert np.sum(np.abs(xhat)) <= np.sum(np.abs(x0)) * (1 + 1e-5)


def test_l1_projected_sensing_recovers_support():
    rng = rng_stream(3, "projected")
    P = random_basis(100, 3, rng)
    T = np.sort(rng.choice(100, size=5, replace=False))
    x0 = sparse_vector(100, T, rng)
    m = P.data @ rng.standard_normal(3) * 5 + x0
    Psi = ProjectionOperator(P)
    y = Psi.matvec(m)
    x_cs = l1_bpdn(L1Problem(Psi, y, xi=0.0, max_iters=5000, tol=1e-8))
    npt.assert_array_equal(support_threshold(x_cs, 5.0), T)
    npt.assert_allclose(ls_on_support(Psi, y, T), x0, atol=1e-8)


def test_l1_with_sparse_operator(rng):
    A = rng.standard_normal((20, 40))
    x0 = np.zeros(40)
    x0[[3, 17]] = [5.0, -7.0]
    dense = l1_bpdn(L1Problem(A, A @ x0, max_iters=10000, tol=1e-9))
    sparse = l1_bpdn(L1Problem(scipy.sparse.csr_matrix(A), A @ x0, max_iters=10000, tol=1e-9))
    npt.assert_allclose(sparse, dense, atol=1e-5)
    npt.assert_allclose(dense, x0, atol=1e-5)


def test_l1_columns_match_single_solves():
    rng = rng_stream(5, "columns")
    P = random_basis(80, 4, rng)
    M = P.data @ rng.standard_normal((4, 12))
    for i in range(12):
        T = np.sort(rng.choice(80, size=4, replace=False))
        M[:, i] += sparse_vector(80, T, rng)
    M[:, 3] = P.data @ rng.standard_normal(4)
    Psi = ProjectionOperator(P)
    Y = Psi.matmat(M)
    X, converged = l1_bpdn_columns(Psi, Y, xi=0.5, max_iters=5000, tol=1e-8)
    assert converged.all()
    npt.assert_array_equal(X[:, 3], np.zeros(80))
    for i in range(12):
        single = l1_bpdn(L1Problem(Psi, Y[:, i], xi=0.5, max_iters=5000, tol=1e-8))
        npt.assert_allclose(X[:, i], single, atol=1e-5)
        npt.assert_array_equal(support_threshold(X[:, i], 5.0), support_threshold(single, 5.0))


def test_l1_columns_with_dense_operator(rng):
    A = rng.standard_normal((20, 40))
    X0 = np.zeros((40, 3))
    X0[[3, 17], 0] = [5.0, -7.0]
    X0[[1, 30], 1] = [-4.0, 6.0]
    X, converged = l1_bpdn_columns(A, A @ X0, max_iters=10000, tol=1e-9)
    assert converged.all()
    npt.assert_allclose(X, X0, atol=1e-5)
    with pytest.raises(DimensionError):
        l1_bpdn_columns(A, np.zeros((21, 2)))


def test_l1_zero_inside_noise_ball(rng):
    A = rng.standard_normal((5, 10))
    y = 1e-3 * rng.standard_normal(5)
    npt.assert_array_equal(l1_bpdn(L1Problem(A, y, xi=1.0)), np.zeros(10))


def test_l1_iteration_limit_carries_iterate(rng):
    A = rng.standard_normal((8, 16))
    with pytest.raises(IterationLimit) as info:
        l1_bpdn(L1Problem(A, A @ np.eye(16)[0], max_iters=1))
    assert info.value.last_iterate.shape == (16,)
    assert info.value.residual > 0


def test_l1_problem_validation(rng):
    A = rng.standard_normal((4, 6))
    with pytest.raises(InvalidConfig):
        L1Problem(A, np.zeros(4), xi=-1.0)
    with pytest.raises(DimensionError):
        L1Problem(A, np.zeros(5))


def test_projection_operator(basis_200x5, rng):
    Psi = ProjectionOperator(basis_200x5)
    x = rng.standard_normal(200)
    npt.assert_allclose(Psi.matvec(x), x - basis_200x5.project(x), atol=1e-12)
    npt.assert_allclose(Psi.rmatvec(x), Psi.matvec(x), atol=1e-12)
    npt.assert_allclose(Psi.matvec(Psi.matvec(x)), Psi.matvec(x), atol=1e-12)
    b = rng.standard_normal(200)
    sol = Psi.shifted_solve(b)
    npt.assert_allclose(sol + Psi.matvec(sol), b, atol=1e-12)


def test_hard_threshold_is_strict_and_idempotent(rng):
    M = rng.standard_normal((10, 10))
    once = hard_threshold(M, 0.5)
    npt.assert_array_equal(hard_threshold(once, 0.5), once)
    npt.assert_array_equal(hard_threshold(np.array([[1.0, -1.0, 2.0]]), 1.0), [[0.0, 0.0, 2.0]])
    with pytest.raises(InvalidConfig):
        hard_threshold(M, -1.0)


def test_support_threshold_is_strict():
    npt.assert_array_equal(support_threshold(np.array([5.0, -6.0, 4.9, 0.0, 5.0001]), 5.0), [1, 4])


def test_ls_on_support_exact():
    rng = rng_stream(20, "ls")
    P = random_basis(20, 3, rng)
    T = np.array([1, 6, 11, 19])
    x0 = sparse_vector(20, T, rng)
    Psi = ProjectionOperator(P)
    npt.assert_allclose(ls_on_support(Psi, Psi.matvec(x0), T), x0, atol=1e-10)
    npt.assert_allclose(ls_on_support(P, Psi.matvec(x0), T), x0, atol=1e-10)


def test_ls_on_empty_support(basis_200x5):
    npt.assert_array_equal(ls_on_support(basis_200x5, np.ones(200), []), np.zeros(200))


def test_ls_on_support_ill_conditioned():
    P = BasisMatrix(np.eye(5)[:, :1])
    with pytest.raises(IllConditionedSupport) as info:
        ls_on_support(P, np.ones(5), [0, 2])
    assert info.value.cond > 1e12
