"""
Finite-element spaces on a box mesh.

H1VectorSpace: continuous Lagrange fields of degree 1 or 2 (vector or scalar).
HcurlSpace: lowest-order Nedelec edge space, one moment dof per global edge.
Tangential traces of edge fields are the restriction of the dofs to boundary edges.
"""

import logging
from dataclasses import dataclass

import numpy as np

from errors import SpaceMismatchError
from mesh import FACE_EDGES, LOCAL_EDGES
from quadrature import edge_rule

logger = logging.getLogger(__name__)


# --- H1 (Lagrange) SPACES ---

def lagrange_values(degree, bary) -> np.ndarray:
    """Scalar shape functions at barycentric points: (nq, nloc)."""
    bary = np.atleast_2d(bary)
    if degree == 1:
        return bary.copy()
    vertex = bary * (2.0 * bary - 1.0)
    edge = np.stack([4.0 * bary[:, i] * bary[:, j] for i, j in LOCAL_EDGES], axis=1)
    return np.concatenate([vertex, edge], axis=1)


def lagrange_gradients(degree, grads, bary) -> np.ndarray:
    """Shape function gradients (nc, nq, nloc, 3) from barycentric gradients (nc, 4, 3)."""
    bary = np.atleast_2d(bary)
    nq = len(bary)
    if degree == 1:
        return np.broadcast_to(grads[:, None, :, :], (len(grads), nq, 4, 3))
    vertex = (4.0 * bary - 1.0)[None, :, :, None] * grads[:, None, :, :]
    edge = np.stack(
        [
            4.0 * (bary[None, :, i, None] * grads[:, None, j, :] + bary[None, :, j, None] * grads[:, None, i, :])
            for i, j in LOCAL_EDGES
        ],
        axis=2,
    )
    return np.concatenate([vertex, edge], axis=2)


class H1VectorSpace:
    """Continuous Lagrange space with `components` copies of a scalar P1/P2 space.

    Dofs are component-blocked: dof(c, node) = c * n_nodes + node. For degree 2
    the nodes are the vertices followed by the edge midpoints.
    """

    def __init__(self, mesh, degree=1, components=3):
        if degree not in (1, 2):
            raise SpaceMismatchError(f"Lagrange degree must be 1 or 2, got {degree}")
        self.mesh = mesh
        self.degree = degree
        self.components = components
        nv = mesh.n_vertices
        if degree == 1:
            self.node_coordinates = mesh.vertices
            self.cell_nodes = mesh.cells
            self.boundary_nodes = mesh.boundary_vertices
        else:
            midpoints = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
            self.node_coordinates = np.vstack([mesh.vertices, midpoints])
            self.cell_nodes = np.hstack([mesh.cells, nv + mesh.cell_edges])
            self.boundary_nodes = np.concatenate([mesh.boundary_vertices, nv + mesh.boundary_edges])
        self.n_nodes = len(self.node_coordinates)
        self.n_local = self.cell_nodes.shape[1]
        self.n_dofs = components * self.n_nodes
        self.boundary_dofs = np.concatenate([c * self.n_nodes + self.boundary_nodes for c in range(components)])
        logger.debug("H1 space degree %d x%d: %d dofs", degree, components, self.n_dofs)

    def cell_dofs(self) -> np.ndarray:
        """(nc, components * nloc) global dofs in local order c * nloc + a."""
        return np.hstack([c * self.n_nodes + self.cell_nodes for c in range(self.components)])

    def as_nodal(self, coeffs) -> np.ndarray:
        """Coefficient vector -> (n_nodes, components) array."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_dofs,):
            raise SpaceMismatchError(f"expected {self.n_dofs} coefficients, got {coeffs.shape}")
        return coeffs.reshape(self.components, self.n_nodes).T

    def from_nodal(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float).reshape(self.n_nodes, self.components)
        return values.T.reshape(-1).copy()

    def vertex_values(self, coeffs) -> np.ndarray:
        """Nodal values restricted to mesh vertices: (nv, components)."""
        return self.as_nodal(coeffs)[: self.mesh.n_vertices]


def interpolate_h1(space, f) -> np.ndarray:
    """Nodal interpolant of f: points (n, 3) -> values (n, components)."""
    values = np.asarray(f(space.node_coordinates), dtype=float)
    values = np.broadcast_to(values.reshape(space.n_nodes, -1), (space.n_nodes, space.components))
    return space.from_nodal(values)


def evaluate_h1(space, coeffs, bary, cell_ids=slice(None)) -> np.ndarray:
    """Field values (nc, nq, components) at barycentric points of each cell."""
    nodal = space.as_nodal(coeffs)
    phi = lagrange_values(space.degree, bary)
    local = nodal[space.cell_nodes[cell_ids]]  # (nc, nloc, comps)
    return np.einsum("qa,cak->cqk", phi, local)


def evaluate_h1_gradient(space, coeffs, bary, cell_ids=slice(None)) -> np.ndarray:
    """Gradients (nc, nq, components, 3) with [..., k, j] = d u_k / d x_j."""
    nodal = space.as_nodal(coeffs)
    grads = space.mesh.cell_gradients[cell_ids]
    dphi = lagrange_gradients(space.degree, grads, bary)
    local = nodal[space.cell_nodes[cell_ids]]
    return np.einsum("cqaj,cak->cqkj", dphi, local)


# --- H(curl) (NEDELEC) SPACE ---

def whitney_values(grads, signs, bary) -> np.ndarray:
    """Edge basis values (nc, nq, 6, 3), oriented along the canonical edge direction."""
    bary = np.atleast_2d(bary)
    values = np.stack(
        [
            bary[None, :, i, None] * grads[:, None, j, :] - bary[None, :, j, None] * grads[:, None, i, :]
            for i, j in LOCAL_EDGES
        ],
        axis=2,
    )
    return values * signs[:, None, :, None]


def whitney_curls(grads, signs) -> np.ndarray:
    """Edge basis curls (nc, 6, 3); constant on each cell."""
    curls = np.stack([2.0 * np.cross(grads[:, i, :], grads[:, j, :]) for i, j in LOCAL_EDGES], axis=1)
    return curls * signs[:, :, None]


class HcurlSpace:
    """Lowest-order Nedelec (first kind) space; dof_e = integral of v . t_e along edge e."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.n_dofs = mesh.n_edges
        self.cell_dofs = mesh.cell_edges
        self.cell_signs = mesh.cell_edge_signs
        self.boundary_dofs = mesh.boundary_edges
        interior = np.ones(self.n_dofs, dtype=bool)
        interior[self.boundary_dofs] = False
        self.interior_dofs = np.flatnonzero(interior)
        logger.debug("Hcurl space: %d dofs (%d on the boundary)", self.n_dofs, len(self.boundary_dofs))

    def check(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_dofs,):
            raise SpaceMismatchError(f"expected {self.n_dofs} edge coefficients, got {coeffs.shape}")
        return coeffs


def interpolate_hcurl(space, v, edge_ids=None) -> np.ndarray:
    """Edge moments of v by 2-point Gauss along each (selected) edge."""
    mesh = space.mesh
    if edge_ids is None:
        edge_ids = np.arange(space.n_dofs)
    t, w = edge_rule(2)
    a = mesh.vertices[mesh.edges[edge_ids, 0]]
    d = mesh.edge_vectors(edge_ids)
    moments = np.zeros(len(edge_ids))
    for tq, wq in zip(t, w):
        values = np.asarray(v(a + tq * d), dtype=float).reshape(len(edge_ids), 3)
        moments += wq * np.einsum("ij,ij->i", values, d)
    if len(edge_ids) == space.n_dofs:
        return moments
    full = np.zeros(space.n_dofs)
    full[edge_ids] = moments
    return full


def evaluate_hcurl(space, coeffs, bary, cell_ids=slice(None)) -> np.ndarray:
    """Field values (nc, nq, 3) at barycentric points."""
    coeffs = space.check(coeffs)
    mesh = space.mesh
    phi = whitney_values(mesh.cell_gradients[cell_ids], space.cell_signs[cell_ids], bary)
    local = coeffs[space.cell_dofs[cell_ids]]
    return np.einsum("cqkj,ck->cqj", phi, local)


def cell_curl(space, coeffs, cell_ids=slice(None)) -> np.ndarray:
    """Element-wise curl (nc, 3) of a discrete edge field."""
    coeffs = space.check(coeffs)
    mesh = space.mesh
    curls = whitney_curls(mesh.cell_gradients[cell_ids], space.cell_signs[cell_ids])
    return np.einsum("ckj,ck->cj", curls, coeffs[space.cell_dofs[cell_ids]])


# --- TANGENTIAL TRACES ---

@dataclass(frozen=True, eq=False)
class TangentialTraceData:
    """Boundary-edge moments of a tangential field, ordered as space.boundary_dofs.

    Only tangential moments are stored, so the represented field has no
    normal component by construction.
    """

    space: HcurlSpace
    values: np.ndarray

    def __post_init__(self):
        if np.shape(self.values) != (len(self.space.boundary_dofs),):
            raise SpaceMismatchError(
                f"expected {len(self.space.boundary_dofs)} boundary moments, got {np.shape(self.values)}"
            )

    @classmethod
    def zeros(cls, space) -> "TangentialTraceData":
        return cls(space, np.zeros(len(space.boundary_dofs)))

    def __add__(self, other):
        _same_space(self, other)
        return TangentialTraceData(self.space, self.values + other.values)

    def __sub__(self, other):
        _same_space(self, other)
        return TangentialTraceData(self.space, self.values - other.values)

    def __mul__(self, scalar):
        return TangentialTraceData(self.space, float(scalar) * self.values)

    __rmul__ = __mul__


def _same_space(a, b):
    if a.space is not b.space:
        raise SpaceMismatchError("tangential data live on different spaces")


def tangential_trace(space, coeffs) -> TangentialTraceData:
    """Restriction of edge dofs to the boundary edges."""
    coeffs = space.check(coeffs)
    return TangentialTraceData(space, coeffs[space.boundary_dofs].copy())


def trace_moments(space, v) -> TangentialTraceData:
    """Tangential trace data of a smooth field v without touching interior edges."""
    values = interpolate_hcurl(space, v, edge_ids=space.boundary_dofs)[space.boundary_dofs]
    return TangentialTraceData(space, values)


def extend_by_zero(trace) -> np.ndarray:
    """Right inverse of tangential_trace: boundary dofs from the data, interior zero."""
    coeffs = np.zeros(trace.space.n_dofs)
    coeffs[trace.space.boundary_dofs] = trace.values
    return coeffs


# --- BOUNDARY FACE RECONSTRUCTION ---

class BoundaryFaces:
    """Geometry of the boundary triangles used to reconstruct tangential data.

    On every boundary face the edge moments define a 2D Whitney field (the
    tangential trace of the 3D edge field); these helpers evaluate it.
    """

    def __init__(self, space):
        mesh = space.mesh
        self.space = space
        self.face_ids = mesh.boundary_faces
        self.vertices = mesh.faces[self.face_ids]  # sorted, so local edges are canonical
        self.normals = mesh.boundary_face_normals
        X = mesh.vertices[self.vertices]  # (nbf, 3, 3)
        J = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=2)  # (nbf, 3, 2)
        pinv = np.linalg.solve(np.einsum("fki,fkj->fij", J, J), np.transpose(J, (0, 2, 1)))  # (nbf, 2, 3)
        self.gradients = np.concatenate([-pinv.sum(axis=1, keepdims=True), pinv], axis=1)  # (nbf, 3, 3)
        self.areas = 0.5 * np.linalg.norm(np.cross(J[:, :, 0], J[:, :, 1]), axis=1)
        self.coordinates = X
        edge_ids = mesh.face_edges[self.face_ids]  # (nbf, 3)
        position = np.full(mesh.n_edges, -1, dtype=np.int64)
        position[space.boundary_dofs] = np.arange(len(space.boundary_dofs))
        self.edge_ids = edge_ids
        self.trace_index = position[edge_ids]

    def basis_values(self, bary) -> np.ndarray:
        """Face Whitney basis (nbf, nq, 3, 3) at face barycentric points (nq, 3)."""
        bary = np.atleast_2d(bary)
        g = self.gradients
        return np.stack(
            [bary[None, :, i, None] * g[:, None, j, :] - bary[None, :, j, None] * g[:, None, i, :] for i, j in FACE_EDGES],
            axis=2,
        )

    def basis_means(self) -> np.ndarray:
        """Face integrals of the Whitney basis, (nbf, 3, 3)."""
        g = self.gradients
        return np.stack([(g[:, j, :] - g[:, i, :]) / 3.0 for i, j in FACE_EDGES], axis=1) * self.areas[:, None, None]

    def reconstruct(self, trace, bary) -> np.ndarray:
        """Tangential field (nbf, nq, 3) represented by the boundary moments."""
        local = np.asarray(trace.values)[self.trace_index]  # (nbf, 3)
        return np.einsum("fqkj,fk->fqj", self.basis_values(bary), local)

    def points(self, bary) -> np.ndarray:
        return np.einsum("qi,fij->fqj", np.atleast_2d(bary), self.coordinates)
