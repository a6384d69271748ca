#!/usr/bin/env python3
"""
Tests for the Lagrange and Nedelec spaces: interpolation, the commuting
property of edge interpolation and tangential traces.
"""

import numpy as np
import pytest

from errors import SpaceMismatchError
from mesh import BoxSpec, build_box_mesh
from spaces import (
    BoundaryFaces,
    H1VectorSpace,
    HcurlSpace,
    TangentialTraceData,
    cell_curl,
    evaluate_h1_gradient,
    evaluate_hcurl,
    extend_by_zero,
    interpolate_h1,
    interpolate_hcurl,
    tangential_trace,
    trace_moments,
)
from quadrature import triangle_rule
from verification import l2_error_h1


@pytest.fixture(scope="module")
def mesh():
    return build_box_mesh(BoxSpec.cube(2))


def constant(c):
    c = np.asarray(c, dtype=float)
    return lambda p: np.tile(c, (len(p), 1))


def identity(p):
    return p.copy()


def grad_xyz(p):
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    return np.stack([y * z, x * z, x * y], axis=1)


def rotation_z(p):
    return np.stack([-p[:, 1], p[:, 0], np.zeros(len(p))], axis=1)


# --- H1 ---

@pytest.mark.parametrize("degree", [1, 2])
def test_h1_dof_counts(mesh, degree):
    V = H1VectorSpace(mesh, degree)
    nodes = mesh.n_vertices if degree == 1 else mesh.n_vertices + mesh.n_edges
    assert V.n_dofs == 3 * nodes
    on_boundary = np.any(np.isclose(V.node_coordinates, 0.0) | np.isclose(V.node_coordinates, 1.0), axis=1)
    np.testing.assert_array_equal(np.sort(V.boundary_nodes), np.flatnonzero(on_boundary))


def test_h1_rejects_degree_three(mesh):
    with pytest.raises(SpaceMismatchError):
        H1VectorSpace(mesh, 3)


def test_interpolate_constant(mesh):
    V = H1VectorSpace(mesh, 1)
    coeffs = interpolate_h1(V, constant([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(V.as_nodal(coeffs), np.tile([1.0, 2.0, 3.0], (V.n_nodes, 1)))
    assert l2_error_h1(V, coeffs, constant([1.0, 2.0, 3.0])) == pytest.approx(0.0, abs=1e-13)


@pytest.mark.parametrize("degree", [1, 2])
def test_interpolate_linear_is_exact(mesh, degree):
    V = H1VectorSpace(mesh, degree)
    coeffs = interpolate_h1(V, identity)
    assert l2_error_h1(V, coeffs, identity) < 1e-13


def test_interpolation_error_is_second_order():
    def f(p):
        return np.stack([p[:, 0] ** 2, np.zeros(len(p)), np.zeros(len(p))], axis=1)

    errors = []
    for n in (2, 4):
        V = H1VectorSpace(build_box_mesh(BoxSpec.cube(n)), 1)
        errors.append(l2_error_h1(V, interpolate_h1(V, f), f))
    assert errors[0] / errors[1] == pytest.approx(4.0, abs=0.1)


def test_degree_one_interpolation_is_a_projection(mesh):
    V = H1VectorSpace(mesh, 1)
    coeffs = np.random.default_rng(0).standard_normal(V.n_dofs)
    again = interpolate_h1(V, lambda p: V.as_nodal(coeffs))
    np.testing.assert_array_equal(again, coeffs)


@pytest.mark.parametrize("degree", [1, 2])
def test_gradient_of_identity_interpolant(mesh, degree):
    V = H1VectorSpace(mesh, degree)
    bary = np.array([[0.25, 0.25, 0.25, 0.25], [0.7, 0.1, 0.1, 0.1]])
    grads = evaluate_h1_gradient(V, interpolate_h1(V, identity), bary)
    assert grads.shape == (mesh.n_cells, 2, 3, 3)
    np.testing.assert_allclose(grads, np.broadcast_to(np.eye(3), grads.shape), atol=1e-12)


def test_quadratic_gradient_is_exact_in_degree_two(mesh):
    V = H1VectorSpace(mesh, 2)
    coeffs = interpolate_h1(V, lambda p: np.stack([p[:, 0] ** 2, np.zeros(len(p)), np.zeros(len(p))], axis=1))
    bary = np.array([[0.25, 0.25, 0.25, 0.25]])
    grads = evaluate_h1_gradient(V, coeffs, bary)
    centroids = mesh.cell_coordinates(np.arange(mesh.n_cells)).mean(axis=1)
    np.testing.assert_allclose(grads[:, 0, 0, 0], 2.0 * centroids[:, 0], atol=1e-12)
    np.testing.assert_allclose(grads[:, 0, 1:, :], 0.0, atol=1e-12)


# --- H(curl) ---

def test_constant_field_moments_and_reconstruction(mesh):
    VP = HcurlSpace(mesh)
    c = np.array([0.3, -1.2, 2.0])
    coeffs = interpolate_hcurl(VP, constant(c))
    np.testing.assert_allclose(coeffs, mesh.edge_vectors() @ c, atol=1e-14)
    bary = np.array([[0.25, 0.25, 0.25, 0.25], [0.1, 0.2, 0.3, 0.4]])
    values = evaluate_hcurl(VP, coeffs, bary)
    np.testing.assert_allclose(values, np.broadcast_to(c, values.shape), atol=1e-12)


def test_gradient_interpolant_is_curl_free(mesh):
    VP = HcurlSpace(mesh)
    coeffs = interpolate_hcurl(VP, grad_xyz)
    np.testing.assert_allclose(cell_curl(VP, coeffs), 0.0, atol=1e-12)


def test_rotation_has_constant_curl(mesh):
    VP = HcurlSpace(mesh)
    coeffs = interpolate_hcurl(VP, rotation_z)
    np.testing.assert_allclose(cell_curl(VP, coeffs), np.tile([0.0, 0.0, 2.0], (mesh.n_cells, 1)), atol=1e-12)


def test_coefficient_length_checked(mesh):
    VP = HcurlSpace(mesh)
    with pytest.raises(SpaceMismatchError):
        cell_curl(VP, np.zeros(VP.n_dofs + 1))


# --- TANGENTIAL TRACES ---

def test_trace_of_interior_supported_field_vanishes(mesh):
    VP = HcurlSpace(mesh)
    coeffs = np.zeros(VP.n_dofs)
    coeffs[VP.interior_dofs] = np.random.default_rng(1).standard_normal(len(VP.interior_dofs))
    assert not np.any(tangential_trace(VP, coeffs).values)


def test_trace_of_constant_field(mesh):
    VP = HcurlSpace(mesh)
    c = np.array([1.0, 2.0, -1.0])
    trace = tangential_trace(VP, interpolate_hcurl(VP, constant(c)))
    np.testing.assert_allclose(trace.values, mesh.edge_vectors(VP.boundary_dofs) @ c, atol=1e-14)
    np.testing.assert_allclose(trace_moments(VP, constant(c)).values, trace.values, atol=1e-14)


def test_trace_is_onto(mesh):
    VP = HcurlSpace(mesh)
    data = TangentialTraceData(VP, np.random.default_rng(2).standard_normal(len(VP.boundary_dofs)))
    np.testing.assert_array_equal(tangential_trace(VP, extend_by_zero(data)).values, data.values)


def test_trace_data_arithmetic(mesh):
    VP = HcurlSpace(mesh)
    a = TangentialTraceData(VP, np.ones(len(VP.boundary_dofs)))
    b = 2.0 * a - a
    np.testing.assert_array_equal(b.values, a.values)
    with pytest.raises(SpaceMismatchError):
        TangentialTraceData(VP, np.ones(3))
    other = HcurlSpace(mesh)
    with pytest.raises(SpaceMismatchError):
        a + TangentialTraceData.zeros(other)


def test_face_reconstruction_is_tangential_projection(mesh):
    VP = HcurlSpace(mesh)
    c = np.array([0.5, -1.0, 2.0])
    faces = BoundaryFaces(VP)
    bary, _ = triangle_rule(3)
    values = faces.reconstruct(trace_moments(VP, constant(c)), bary)
    n = faces.normals
    expected = c[None, :] - (n @ c)[:, None] * n
    np.testing.assert_allclose(values, np.broadcast_to(expected[:, None, :], values.shape), atol=1e-12)


def test_face_points_lie_on_the_boundary(mesh):
    faces = BoundaryFaces(HcurlSpace(mesh))
    bary, _ = triangle_rule(3)
    points = faces.points(bary)
    assert points.shape == (len(faces.normals), len(bary), 3)
    on_boundary = np.isclose(points, 0.0) | np.isclose(points, 1.0)
    assert np.all(np.any(on_boundary, axis=-1))
    offsets = np.einsum("fqj,fj->fq", points - points[:, :1, :], faces.normals)
    np.testing.assert_allclose(offsets, 0.0, atol=1e-14)
