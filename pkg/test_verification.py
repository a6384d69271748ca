#!/usr/bin/env python3
"""
Tests for the structural constants, error norms, convergence tables and
the extension property suite.
"""

import numpy as np
import pytest
import scipy.sparse as sp

from assembly import MaterialParams
from extension import constructive_extension
from manufactured import build_fields, get_case
from mesh import BoxSpec, build_box_mesh
from settings import get_settings
from spaces import H1VectorSpace, HcurlSpace, interpolate_hcurl, trace_moments
from static_solver import StaticProblem, solve_static
from verification import (
    C1,
    C1_STAR,
    KORN,
    SMOOTH_TRACE_FIELDS,
    ConstantReport,
    coercivity_constant,
    decreases,
    ensemble_traces,
    extension_property_suite,
    fitted_order,
    korn_constant,
    l2_error_curl,
    l2_error_h1,
    l2_error_hcurl,
    manufactured_convergence,
    smallest_generalized_eigenvalue,
    trace_field_error,
    unconstrained_skew_quotient,
)


@pytest.fixture(scope="module")
def meshes():
    return {n: build_box_mesh(BoxSpec.cube(n)) for n in (2, 3, 4)}


# --- HELPERS ---

def test_generalized_eigenvalue_of_diagonal_pencil():
    A = sp.diags([2.0, 6.0, 12.0])
    B = sp.diags([1.0, 2.0, 3.0])
    assert smallest_generalized_eigenvalue(A, B) == pytest.approx(2.0)


def test_fitted_order():
    h = [0.5, 0.25, 0.125]
    assert fitted_order(h, [3.0 * x ** 2 for x in h]) == pytest.approx(2.0)
    assert np.isnan(fitted_order(h, [1.0, 0.0, 0.0]))
    assert np.isnan(fitted_order([0.5], [1.0]))


def test_constant_report_spread():
    report = ConstantReport(KORN)
    assert report.spread == 0.0
    for level, value in ((2, 0.8), (3, 0.9), (4, 1.0)):
        report.add(level, value)
    assert report.spread == pytest.approx(0.2)
    assert report.rows()[0] == (KORN, 2, 0.8)


def test_hcurl_errors_vanish_for_constant_rows(meshes):
    VP = HcurlSpace(meshes[2])
    A = np.array([[1.0, 0.0, 2.0], [0.0, -1.0, 0.5], [3.0, 1.0, 0.0]])
    rows = np.stack([VP.mesh.edge_vectors() @ A[i] for i in range(3)])
    exact = lambda p: np.broadcast_to(A, (len(p), 3, 3))
    assert l2_error_hcurl(VP, rows, exact) < 1e-12
    assert l2_error_curl(VP, rows, lambda p: np.zeros((len(p), 3, 3))) < 1e-12
    assert l2_error_hcurl(VP, np.zeros_like(rows), exact) == pytest.approx(np.linalg.norm(A), rel=1e-12)


# --- CONSTANTS ---

def test_korn_constant_positive_and_stable(meshes):
    report = ConstantReport(KORN)
    for n in (2, 3, 4):
        report.add(n, korn_constant(meshes[n]))
    assert min(report.values) > 0
    assert report.spread < 0.25


def test_constant_skew_field_defeats_unconstrained_estimate(meshes):
    assert abs(unconstrained_skew_quotient(meshes[2])) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_coercivity_without_cosserat_coupling(meshes, n):
    assert coercivity_constant(MaterialParams(mu_c=0.0), meshes[n]) > 0


def test_coercivity_grows_with_cosserat_coupling(meshes):
    values = [coercivity_constant(MaterialParams(mu_c=mu_c), meshes[2]) for mu_c in (0.0, 0.5, 1.0)]
    assert values[0] <= values[1] + 1e-12
    assert values[1] <= values[2] + 1e-12


def test_coercivity_scales_with_moduli(meshes):
    base = MaterialParams(mu_c=0.2)
    doubled = base.scaled(2.0)
    assert coercivity_constant(doubled, meshes[2]) == pytest.approx(2.0 * coercivity_constant(base, meshes[2]), rel=1e-8)


# --- MANUFACTURED CONVERGENCE ---

def test_affine_case_is_exact():
    params = MaterialParams(mu_c=0.5)
    table = manufactured_convergence(build_fields(get_case("affine"), params), levels=(1, 2), params=params)
    assert max(table.errors["u"] + table.errors["P"] + table.errors["curl_P"]) < 1e-9


def test_poly3_converges():
    params = MaterialParams()
    table = manufactured_convergence(build_fields(get_case("poly3"), params), levels=(2, 4, 8), params=params)
    assert table.orders["u"] >= 0.9
    assert table.orders["P"] >= 0.9
    assert all(b < a for a, b in zip(table.errors["u"], table.errors["u"][1:]))
    rows = list(table.rows())
    assert [r[0] for r in rows] == [2, 4, 8]
    assert rows[1][1] == pytest.approx(0.25)


def test_lifting_paths_give_the_same_solution():
    params = MaterialParams()
    fields = build_fields(get_case("poly3"), params)
    mesh = build_box_mesh(BoxSpec.cube(2))
    Vu, VP = H1VectorSpace(mesh, 1), HcurlSpace(mesh)
    F, M = fields.static_loads()
    bdata = fields.boundary_data(None)
    direct = solve_static(StaticProblem(Vu, VP, params, F, M, bdata, "direct"))
    constructive = solve_static(StaticProblem(Vu, VP, params, F, M, bdata, "constructive"))
    gap = np.linalg.norm(direct.vector() - constructive.vector())
    error = l2_error_h1(Vu, direct.u, lambda p: fields.u(p, 0.0)) + l2_error_hcurl(VP, direct.P, lambda p: fields.P(p, 0.0))
    assert error > 0
    assert gap <= 5.0 * error
    # the boundary moments agree, so only the free dofs can differ and they absorb the lift
    assert gap <= 1e-8 * np.linalg.norm(direct.vector())


def test_time_dependent_case_runs_through_the_integrator():
    params = MaterialParams()
    fields = build_fields(get_case("harmonic-bc"), params)
    table = manufactured_convergence(fields, levels=(1, 2), params=params, dynamics=(0.2, 0.05, "newmark"))
    assert all(np.isfinite(v) for v in table.errors["u"])
    assert table.residuals == [0.0, 0.0]


# --- EXTENSION SUITE ---

def test_ensemble_members(meshes):
    VP = HcurlSpace(meshes[2])
    members = ensemble_traces(VP, 5, np.random.default_rng(0))
    assert [m[0] for m in members] == ["zero", "gradient_xyz", "rotation_z", "random_0", "random_1"]
    assert [m[1] for m in members] == ["zero", "smooth", "smooth", "random", "random"]
    assert not np.any(members[0][2].values)
    assert members[1][3] is SMOOTH_TRACE_FIELDS["gradient_xyz"]
    assert members[0][3] is None and members[3][3] is None


@pytest.mark.parametrize(
    "values, expected",
    [
        ([3.0, 2.0, 1.0], True),
        ([3.0, 3.0, 1.0], False),
        ([1.0, 2.0], False),
        ([1e-16, 3e-16, 2e-16], True),
    ],
)
def test_decreases(values, expected):
    assert decreases(values, floor=1e-9) is expected


def test_trace_field_error_of_interpolated_linear_field(meshes):
    VP = HcurlSpace(meshes[2])
    fn = SMOOTH_TRACE_FIELDS["rotation_z"]
    R = interpolate_hcurl(VP, fn)
    assert trace_field_error(VP, R, fn) < 1e-12
    assert trace_field_error(VP, np.zeros(VP.n_dofs), fn) > 0.1


def test_constructive_trace_converges_for_smooth_data():
    fn = SMOOTH_TRACE_FIELDS["gradient_xyz"]
    h, errors = [], []
    for level in (2, 4, 8):
        VP = HcurlSpace(build_box_mesh(BoxSpec.cube(level)))
        R, report = constructive_extension(trace_moments(VP, fn))
        h.append(1.0 / level)
        errors.append(trace_field_error(VP, R, fn))
        assert report.auxiliary_weak_div_residual <= 10.0 * get_settings().rtol
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert fitted_order(h, errors) >= 0.8


def test_extension_suite_on_smooth_data():
    report = extension_property_suite(levels=(2, 4, 8), ensemble_size=3, seed=0)
    assert report.smooth_decreasing
    zero_rows = [r for r in report.rows if r["member"] == "zero"]
    assert len(zero_rows) == 3
    for row in zero_rows:
        for metric in ("trace_error", "field_trace_error", "curl_curl_residual", "div_residual"):
            assert row[metric] == 0.0
    floor = 10.0 * get_settings().rtol
    for row in report.rows:
        assert row["trace_error"] == 0.0
        assert row["div_residual"] <= floor
        assert row["auxiliary_weak_div_residual"] <= floor
        assert row["harmonic_dimension"] == 0
    assert set(report.constants) == {C1_STAR, C1}
    assert report.constants[C1].levels == [2, 4, 8]


def test_extension_suite_is_seeded():
    a = extension_property_suite(levels=(2,), ensemble_size=5, seed=3)
    b = extension_property_suite(levels=(2,), ensemble_size=5, seed=3)
    assert a.rows == b.rows
