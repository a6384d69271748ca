#!/usr/bin/env python3
"""
Tests for the static solvers: homogeneous and lifted micromorphic problems
and the linear elasticity baseline.
"""

import numpy as np
import pytest

from assembly import MaterialParams, assemble_loads, assemble_micromorphic, block_layout, free_dofs
from errors import BoundaryDataError, InvalidParametersError
from extension import BoundaryData, DirichletData
from manufactured import build_fields, get_case
from mesh import BoxSpec, build_box_mesh
from spaces import H1VectorSpace, HcurlSpace, interpolate_h1
from static_solver import (
    StaticProblem,
    boundary_mismatch,
    solve_elastic_static,
    solve_static,
    solve_static_homogeneous,
)
from verification import interpolate_rows


@pytest.fixture(scope="module")
def spaces():
    mesh = build_box_mesh(BoxSpec.cube(2))
    return H1VectorSpace(mesh, 1), HcurlSpace(mesh)


def body_force(p):
    return np.tile([0.0, 0.0, -1.0], (len(p), 1))


def affine_map(p):
    A = np.array([[0.1, 0.2, 0.0], [0.0, -0.1, 0.3], [0.05, 0.0, 0.2]])
    return p @ A.T + np.array([0.5, 0.0, -0.25])


# --- HOMOGENEOUS ---

def test_zero_loads_give_zero_solution(spaces):
    Vu, VP = spaces
    sol = solve_static_homogeneous(StaticProblem(Vu, VP))
    assert not np.any(sol.u)
    assert not np.any(sol.P)
    assert sol.energy == 0.0


def test_homogeneous_solution_minimizes_energy(spaces):
    Vu, VP = spaces
    params = MaterialParams(mu_c=0.5, lambda_e=0.5)
    sol = solve_static_homogeneous(StaticProblem(Vu, VP, params, F=body_force))
    assert sol.residual < 1e-8
    layout = block_layout(Vu, VP)
    K = assemble_micromorphic(params, Vu, VP)
    b = assemble_loads(body_force, None, Vu, VP)
    x = sol.vector()
    assert sol.energy == pytest.approx(0.5 * (x @ (K @ x)))

    def functional(y):
        return 0.5 * (y @ (K @ y)) - b @ y

    rng = np.random.default_rng(0)
    free = free_dofs(Vu, VP)
    for _ in range(10):
        delta = np.zeros(layout.size)
        delta[free] = 1e-3 * rng.standard_normal(len(free))
        increase = functional(x + delta) - functional(x)
        assert increase > 0
        assert increase == pytest.approx(0.5 * (delta @ (K @ delta)), rel=1e-4)


def test_homogeneous_residual_is_galerkin_orthogonal(spaces):
    Vu, VP = spaces
    params = MaterialParams(mu_c=0.3, lambda_micro=0.1)
    sol = solve_static_homogeneous(StaticProblem(Vu, VP, params, F=body_force))
    K = assemble_micromorphic(params, Vu, VP)
    b = assemble_loads(body_force, None, Vu, VP)
    free = free_dofs(Vu, VP)
    residual = (K @ sol.vector() - b)[free]
    rng = np.random.default_rng(5)
    for _ in range(20):
        v = rng.standard_normal(len(free))
        assert abs(v @ residual) <= 1e-8 * np.linalg.norm(v) * np.linalg.norm(b[free])


def test_homogeneous_solution_does_not_depend_on_the_start(spaces):
    Vu, VP = spaces
    prob = StaticProblem(Vu, VP, MaterialParams(mu_c=0.5), F=body_force)
    reference = solve_static_homogeneous(prob).vector()
    x0 = np.random.default_rng(6).standard_normal(block_layout(Vu, VP).size)
    started = solve_static_homogeneous(prob, x0=x0).vector()
    np.testing.assert_allclose(started, reference, atol=1e-6 * np.linalg.norm(reference))


def test_homogeneous_solution_satisfies_constraints(spaces):
    Vu, VP = spaces
    sol = solve_static_homogeneous(StaticProblem(Vu, VP, F=body_force))
    assert not np.any(Vu.as_nodal(sol.u)[Vu.boundary_nodes])
    assert not np.any(sol.P[:, VP.boundary_dofs])
    assert np.any(sol.u)


def test_homogeneous_solver_refuses_boundary_data(spaces):
    Vu, VP = spaces
    bdata = BoundaryData(DirichletData(g=lambda p, t: p))
    with pytest.raises(BoundaryDataError):
        solve_static_homogeneous(StaticProblem(Vu, VP, boundary=bdata))


def test_problem_validation(spaces):
    Vu, VP = spaces
    with pytest.raises(InvalidParametersError):
        StaticProblem(Vu, VP, MaterialParams(mu_micro=-1.0))
    with pytest.raises(BoundaryDataError):
        StaticProblem(Vu, VP, lifting="spectral")


# --- LIFTED ---

@pytest.mark.parametrize("lifting", ["direct", "constructive"])
def test_affine_case_is_reproduced(spaces, lifting):
    Vu, VP = spaces
    params = MaterialParams(mu_c=0.3, lambda_e=0.5, lambda_micro=0.2)
    fields = build_fields(get_case("affine"), params)
    F, M = fields.static_loads()
    sol = solve_static(StaticProblem(Vu, VP, params, F, M, fields.boundary_data("case"), lifting))
    np.testing.assert_allclose(sol.u, interpolate_h1(Vu, lambda p: fields.u(p, 0.0)), atol=1e-9)
    np.testing.assert_allclose(sol.P, interpolate_rows(VP, lambda p: fields.P(p, 0.0)), atol=1e-9)
    assert sol.boundary_error < 1e-12


def test_coupled_data_are_matched(spaces):
    Vu, VP = spaces
    bdata = BoundaryData.coupled(DirichletData(g=lambda p, t: np.sin(p)))
    sol = solve_static(StaticProblem(Vu, VP, F=body_force, boundary=bdata))
    assert sol.boundary_error < 1e-12
    assert boundary_mismatch(bdata, Vu, VP, sol.u, sol.P) == sol.boundary_error


def test_lifted_solver_delegates_when_homogeneous(spaces):
    Vu, VP = spaces
    prob = StaticProblem(Vu, VP, F=body_force)
    np.testing.assert_allclose(solve_static(prob).u, solve_static_homogeneous(prob).u)


# --- ELASTICITY BASELINE ---

def test_elastic_affine_displacement_is_equilibrium(spaces):
    Vu, _ = spaces
    params = MaterialParams(lambda_e=1.0)
    sol = solve_elastic_static(params, Vu, g=DirichletData(g=lambda p, t: affine_map(p)))
    np.testing.assert_allclose(sol.u, interpolate_h1(Vu, affine_map), atol=1e-9)


def test_elastic_body_force(spaces):
    Vu, _ = spaces
    sol = solve_elastic_static(MaterialParams(), Vu, F=body_force)
    assert sol.energy > 0
    assert sol.residual < 1e-8
    # gravity pushes every interior node down
    interior = np.setdiff1d(np.arange(Vu.n_nodes), Vu.boundary_nodes)
    assert np.all(Vu.as_nodal(sol.u)[interior, 2] < 0)
