#!/usr/bin/env python3
"""
Tests for Kuhn box meshes: counts, orientation conventions, boundary normals
and the discrete exterior-derivative matrices.
"""

import numpy as np
import pytest

from errors import InvalidSpecError, MeshDomainError
from mesh import (
    LOCAL_EDGES,
    BoxSpec,
    boundary_normals,
    build_box_mesh,
    curl_matrix,
    first_betti_number,
    gradient_matrix,
)


@pytest.fixture(scope="module")
def unit_cube():
    return build_box_mesh(BoxSpec.cube(1))


@pytest.fixture(scope="module")
def box():
    return build_box_mesh(BoxSpec(lx=2.0, ly=1.0, lz=0.5, nx=3, ny=2, nz=2))


# --- COUNTS ---

def test_single_cube_counts(unit_cube):
    assert unit_cube.n_vertices == 8
    assert unit_cube.n_cells == 6
    # 12 cube edges + 6 face diagonals + 1 space diagonal
    assert unit_cube.n_edges == 19
    assert unit_cube.n_faces == 18
    assert len(unit_cube.boundary_faces) == 12


def test_two_cube_box_volume():
    mesh = build_box_mesh(BoxSpec(lx=2.0, ly=1.0, lz=1.0, nx=2, ny=1, nz=1))
    assert mesh.n_vertices == 12
    assert mesh.cell_volumes.sum() == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("spec", [BoxSpec.cube(2), BoxSpec(lx=2.0, ly=1.0, lz=0.5, nx=3, ny=2, nz=2)])
def test_volumes_positive_and_additive(spec):
    mesh = build_box_mesh(spec)
    assert np.all(mesh.cell_volumes > 0)
    assert mesh.cell_volumes.sum() == pytest.approx(spec.volume, abs=1e-12)


def test_vertex_numbering_is_x_fastest(box):
    h = box.spec.lx / box.spec.nx
    np.testing.assert_allclose(box.vertices[1], [h, 0.0, 0.0])
    np.testing.assert_allclose(box.vertices[box.spec.nx + 1], [0.0, box.spec.ly / box.spec.ny, 0.0])


def test_construction_is_deterministic():
    a = build_box_mesh(BoxSpec.cube(2))
    b = build_box_mesh(BoxSpec.cube(2))
    np.testing.assert_array_equal(a.cells, b.cells)
    np.testing.assert_array_equal(a.edges, b.edges)
    np.testing.assert_array_equal(a.faces, b.faces)


# --- TOPOLOGY ---

def test_faces_shared_by_one_or_two_cells(box):
    assert set(np.unique(box.face_cell_count)) <= {1, 2}
    np.testing.assert_array_equal(np.flatnonzero(box.face_cell_count == 1), box.boundary_faces)


def test_edge_orientation_and_signs(box):
    assert np.all(box.edges[:, 0] < box.edges[:, 1])
    for k, (i, j) in enumerate(LOCAL_EDGES):
        a, b = box.cells[:, i], box.cells[:, j]
        expected = np.where(a < b, 1, -1)
        np.testing.assert_array_equal(box.cell_edge_signs[:, k], expected)
        stored = box.edges[box.cell_edges[:, k]]
        np.testing.assert_array_equal(stored[:, 0], np.minimum(a, b))
        np.testing.assert_array_equal(stored[:, 1], np.maximum(a, b))


def test_boundary_is_closed_surface(box):
    counts = np.bincount(box.face_edges[box.boundary_faces].ravel(), minlength=box.n_edges)
    assert np.all(counts[box.boundary_edges] == 2)


def test_grad_then_curl_vanishes(box):
    product = curl_matrix(box) @ gradient_matrix(box)
    assert abs(product).max() == 0.0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_box_is_simply_connected(n):
    assert first_betti_number(build_box_mesh(BoxSpec.cube(n))) == 0


# --- BOUNDARY NORMALS ---

def test_normals_axis_aligned_and_outward(box):
    normals = boundary_normals(box)
    assert len(normals) == len(box.boundary_faces)
    lengths = (box.spec.lx, box.spec.ly, box.spec.lz)
    for face, n in normals.items():
        assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-14)
        axis = int(np.argmax(np.abs(n)))
        assert np.count_nonzero(np.abs(n) > 1e-14) == 1
        coords = box.vertices[box.faces[face], axis]
        plane = lengths[axis] if n[axis] > 0 else 0.0
        np.testing.assert_allclose(coords, plane, atol=1e-14)


def test_normal_examples(unit_cube):
    normals = boundary_normals(unit_cube)
    for face, n in normals.items():
        xyz = unit_cube.vertices[unit_cube.faces[face]]
        if np.all(xyz[:, 0] == 1.0):
            np.testing.assert_allclose(n, [1.0, 0.0, 0.0])
        if np.all(xyz[:, 2] == 0.0):
            np.testing.assert_allclose(n, [0.0, 0.0, -1.0])


def test_closed_surface_identity(box):
    areas = box.face_areas(box.boundary_faces)
    total = (areas[:, None] * box.boundary_face_normals).sum(axis=0)
    np.testing.assert_allclose(total, 0.0, atol=1e-12)


def test_interior_face_has_no_normal(box):
    interior = np.flatnonzero(box.face_cell_count == 2)[0]
    with pytest.raises(MeshDomainError):
        boundary_normals(box, [interior])


# --- INVALID INPUT ---

def test_box_spec_rejects_non_positive_values():
    with pytest.raises(ValueError):
        BoxSpec(nx=0)
    with pytest.raises(ValueError):
        BoxSpec(lx=-1.0)


def test_build_rejects_unvalidated_spec():
    spec = BoxSpec.model_construct(lx=1.0, ly=1.0, lz=1.0, nx=0, ny=1, nz=1)
    with pytest.raises(InvalidSpecError):
        build_box_mesh(spec)


def test_edge_lookup_rejects_non_edge(unit_cube):
    with pytest.raises(MeshDomainError):
        unit_cube.edge_lookup([0], [0])
