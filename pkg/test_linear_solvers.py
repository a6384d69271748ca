#!/usr/bin/env python3
"""
Tests for the SPD solvers.
"""

import numpy as np
import pytest
import scipy.sparse as sp

from errors import SolverError
from linear_solvers import SpdSolver, pcg, relative_residual, solve_spd
from settings import get_settings


def laplacian(n):
    return sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


@pytest.fixture
def system():
    A = laplacian(50)
    x = np.random.default_rng(0).standard_normal(50)
    return A, x, A @ x


def test_pcg_recovers_solution(system):
    A, x, b = system
    solution, info = pcg(A, b, rtol=1e-12)
    assert info.method == "pcg"
    assert info.residual <= 1e-12
    np.testing.assert_allclose(solution, x, atol=1e-8)


def test_pcg_zero_rhs_short_circuits(system):
    A, _, _ = system
    solution, info = pcg(A, np.zeros(50))
    assert not np.any(solution)
    assert info.iterations == 0


def test_pcg_initial_guess_at_solution(system):
    A, x, b = system
    _, info = pcg(A, b, x0=x, rtol=1e-8)
    assert info.iterations == 0


def test_pcg_reports_non_convergence(system):
    A, _, b = system
    with pytest.raises(SolverError) as exc:
        pcg(A, b, rtol=1e-14, max_iterations=3)
    assert exc.value.iterations == 3
    assert exc.value.residual > 1e-14


def test_pcg_rejects_non_positive_diagonal():
    A = sp.diags([1.0, -1.0, 2.0], format="csr")
    with pytest.raises(SolverError):
        pcg(A, np.ones(3))


def test_pcg_detects_indefinite_matrix():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(SolverError):
        pcg(A, np.array([1.0, -1.0]))


def test_dense_and_iterative_paths_agree(system):
    A, x, b = system
    dense, dense_info = solve_spd(A, b, settings=get_settings(dense_threshold=100))
    iterative, iter_info = solve_spd(A, b, settings=get_settings(dense_threshold=10, rtol=1e-12))
    assert dense_info.method == "cholesky"
    assert iter_info.method == "pcg"
    np.testing.assert_allclose(dense, x, atol=1e-10)
    np.testing.assert_allclose(iterative, x, atol=1e-8)


def test_dense_path_rejects_indefinite_matrix():
    A = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(SolverError):
        solve_spd(A, np.ones(2))


def test_empty_system():
    x, info = solve_spd(sp.csr_matrix((0, 0)), np.zeros(0))
    assert x.shape == (0,)
    assert info.method == "empty"


@pytest.mark.parametrize("threshold, method", [(100, "cholesky"), (10, "sparse-lu")])
def test_factorized_solver_reuses_factor(system, threshold, method):
    A, x, b = system
    solver = SpdSolver(A, settings=get_settings(dense_threshold=threshold))
    assert solver.method == method
    np.testing.assert_allclose(solver.solve(b), x, atol=1e-10)
    np.testing.assert_allclose(solver.solve(2.0 * b), 2.0 * x, atol=1e-10)
    assert not np.any(solver.solve(np.zeros(50)))


def test_relative_residual():
    A = np.eye(2)
    assert relative_residual(A, np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 0.0
    assert relative_residual(A, np.zeros(2), np.zeros(2)) == 0.0
    assert relative_residual(A, np.zeros(2), np.array([3.0, 4.0])) == pytest.approx(1.0)
