#!/usr/bin/env python3
"""
Tests for the manufactured cases and their finite-difference oracle.
"""

import numpy as np
import pytest

from assembly import MaterialParams
from errors import ManufacturedCaseError
from extension import BoundaryData
from manufactured import (
    FD_TOLERANCE,
    MANUFACTURED_CASES,
    ManufacturedCase,
    build_fields,
    finite_difference_residual,
    get_case,
    oracle_points,
)

PARAMS = MaterialParams(mu_c=0.4, lambda_e=0.6, lambda_micro=0.3, mu_macro=2.0, L_c=0.5)


@pytest.mark.parametrize("name", sorted(MANUFACTURED_CASES))
def test_cases_pass_the_oracle(name):
    fields = build_fields(get_case(name), PARAMS, check=False)
    assert finite_difference_residual(fields, PARAMS) < FD_TOLERANCE


def test_unknown_case():
    with pytest.raises(ManufacturedCaseError) as exc:
        get_case("quartic")
    assert "affine" in str(exc.value)


def test_zero_case_has_zero_loads():
    fields = build_fields(get_case("zero"), PARAMS)
    points = oracle_points()
    assert not np.any(fields.F(points, 0.5))
    assert not np.any(fields.M(points, 0.5))


def test_affine_case_loads():
    # ∇u = P, so the body force vanishes and M is the micro stress of the constant P
    fields = build_fields(get_case("affine"), PARAMS)
    points = oracle_points()
    A = np.array([[1.0, 2.0, -1.0], [3.0, -1.0, 2.0], [-1.0, 1.0, 4.0]])
    expected = 2 * PARAMS.mu_micro * 0.5 * (A + A.T) + PARAMS.lambda_micro * np.trace(A) * np.eye(3)
    np.testing.assert_allclose(fields.F(points), 0.0, atol=1e-12)
    np.testing.assert_allclose(fields.M(points), np.broadcast_to(expected, (len(points), 3, 3)), atol=1e-12)
    np.testing.assert_allclose(fields.P(points), np.broadcast_to(A, (len(points), 3, 3)), atol=1e-14)
    assert not fields.time_dependent


def test_compatible_micro_distortion_has_no_curl():
    fields = build_fields(get_case("harmonic-bc"), PARAMS)
    np.testing.assert_allclose(fields.curl_P(oracle_points(), 0.7), 0.0, atol=1e-12)
    assert fields.time_dependent


def test_time_derivatives():
    fields = build_fields(get_case("harmonic-bc"), PARAMS)
    p = np.array([[0.3, 0.6, 0.9]])
    t = 0.4
    x, y, z = p[0]
    base = np.array([x * y * z, x ** 2 - y * z, y ** 2 * z])
    np.testing.assert_allclose(fields.u(p, t)[0], np.sin(2 * t) * base, rtol=1e-12)
    np.testing.assert_allclose(fields.u_t(p, t)[0], 2 * np.cos(2 * t) * base, rtol=1e-12)
    np.testing.assert_allclose(fields.u_tt(p, t)[0], -4 * np.sin(2 * t) * base, rtol=1e-12)


def test_poly3_curl_is_analytic():
    fields = build_fields(get_case("poly3"), PARAMS)
    p = np.array([[0.2, 0.5, 0.7]])
    x, y, z = p[0]
    # rows of P: (yz, x², xy), (z², xz, y²), (xy, yz, x² + z²)
    expected = np.array([
        [x, 0.0, 2 * x - z],
        [2 * y - x, 2 * z, z],
        [-y, -2 * x, -x],
    ])
    np.testing.assert_allclose(fields.curl_P(p)[0], expected, atol=1e-12)


def test_wrong_loads_fail_the_oracle():
    fields = build_fields(get_case("poly3"), PARAMS)
    other = MaterialParams(mu_c=0.4, lambda_e=0.6, lambda_micro=0.3, mu_macro=2.0, L_c=1.5)
    assert finite_difference_residual(fields, other) > 1e-3


@pytest.mark.parametrize(
    "case",
    [
        ManufacturedCase("bad-symbol", ("x*q", "0", "0")),
        ManufacturedCase("bad-syntax", ("x +* y", "0", "0")),
        ManufacturedCase("undefined-function", ("foo(x)", "0", "0")),
        ManufacturedCase("undefined-in-P", ("x", "y", "z"), ("g(t)",) + ("0",) * 8),
        ManufacturedCase("short-P", ("x", "y", "z"), ("1", "0")),
    ],
)
def test_malformed_cases_are_rejected(case):
    with pytest.raises(ManufacturedCaseError):
        build_fields(case, PARAMS)


def test_boundary_modes():
    fields = build_fields(get_case("harmonic-bc"), PARAMS)
    assert fields.boundary_data().tangential.coupled_to is not None
    assert fields.boundary_data("homogeneous") == BoundaryData()
    case_mode = fields.boundary_data("case")
    assert case_mode.tangential.field is fields.P
    with pytest.raises(ManufacturedCaseError):
        fields.boundary_data("periodic")


def test_undefined_function_is_named():
    with pytest.raises(ManufacturedCaseError, match="undefined functions foo"):
        ManufacturedCase("inline", ("foo(x)", "0", "0")).expressions()
