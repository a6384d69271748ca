"""
Conforming tetrahedral meshes of axis-aligned boxes.

Each sub-cube is split into the 6 Kuhn tetrahedra that share its main
diagonal, so neighbouring cubes always agree on their face diagonals.
Vertex ids run lexicographically with x fastest and z slowest.
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field

from errors import InvalidSpecError, MeshDomainError

logger = logging.getLogger(__name__)

# Local edge (i, j) and local face (opposite vertex m) numbering inside a cell
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LOCAL_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))
# Edges of a sorted face (a, b, c) and their orientation along a -> b -> c -> a
FACE_EDGES = ((0, 1), (0, 2), (1, 2))
FACE_EDGE_CIRCULATION = (1, -1, 1)


class BoxSpec(BaseModel):
    """Box [0, lx] x [0, ly] x [0, lz] split into nx * ny * nz cubes."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lx: float = Field(1.0, gt=0)
    ly: float = Field(1.0, gt=0)
    lz: float = Field(1.0, gt=0)
    nx: int = Field(1, gt=0)
    ny: int = Field(1, gt=0)
    nz: int = Field(1, gt=0)

    @classmethod
    def cube(cls, n, length=1.0):
        return cls(lx=length, ly=length, lz=length, nx=n, ny=n, nz=n)

    @property
    def volume(self):
        return self.lx * self.ly * self.lz


def _frozen(array):
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable simplicial complex of a box with its boundary data.

    Edges are stored lower vertex id first; cell_edge_signs is +1 where a
    cell's local edge (i, j) runs along that canonical direction.
    """

    spec: BoxSpec
    vertices: np.ndarray  # (nv, 3)
    cells: np.ndarray  # (nc, 4), positive orientation
    edges: np.ndarray  # (ne, 2), sorted
    faces: np.ndarray  # (nf, 3), sorted
    cell_edges: np.ndarray  # (nc, 6)
    cell_edge_signs: np.ndarray  # (nc, 6)
    cell_faces: np.ndarray  # (nc, 4)
    face_edges: np.ndarray  # (nf, 3)
    face_cell_count: np.ndarray  # (nf,)
    boundary_faces: np.ndarray  # face ids
    boundary_face_normals: np.ndarray  # (nbf, 3) outward
    boundary_edges: np.ndarray  # edge ids
    boundary_vertices: np.ndarray  # vertex ids
    cell_volumes: np.ndarray  # (nc,)
    cell_gradients: np.ndarray  # (nc, 4, 3) barycentric gradients

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    def cell_coordinates(self, cell_ids=slice(None)):
        return self.vertices[self.cells[cell_ids]]

    def edge_vectors(self, edge_ids=slice(None)):
        e = self.edges[edge_ids]
        return self.vertices[e[..., 1]] - self.vertices[e[..., 0]]

    def face_areas(self, face_ids):
        f = self.faces[face_ids]
        a, b, c = (self.vertices[f[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def edge_lookup(self, lo, hi):
        """Global edge ids of sorted vertex pairs (lo < hi)."""
        keys = self.edges[:, 0].astype(np.int64) * self.n_vertices + self.edges[:, 1]
        wanted = np.asarray(lo, dtype=np.int64) * self.n_vertices + np.asarray(hi)
        idx = np.searchsorted(keys, wanted)
        idx = np.clip(idx, 0, len(keys) - 1)
        if not np.array_equal(keys[idx], wanted):
            raise MeshDomainError("vertex pair is not an edge of the mesh")
        return idx


def _validate(spec):
    for name in ("lx", "ly", "lz", "nx", "ny", "nz"):
        value = getattr(spec, name)
        if not value > 0:
            raise InvalidSpecError(f"{name} must be positive, got {value}")


def _kuhn_cells(spec):
    nx, ny, nz = spec.nx, spec.ny, spec.nz
    K, J, I = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()

    def vid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    blocks = []
    for order in itertools.permutations((0, 1, 2)):
        step = np.zeros(3, dtype=int)
        path = [vid(I, J, K)]
        for axis in order:
            step[axis] += 1
            path.append(vid(I + step[0], J + step[1], K + step[2]))
        blocks.append(np.stack(path, axis=1))
    # cube-major ordering keeps ids deterministic and local
    return np.stack(blocks, axis=1).reshape(-1, 4)


def build_box_mesh(spec):
    """Kuhn-subdivided tetrahedral mesh of the box described by spec."""
    _validate(spec)
    nx, ny, nz = spec.nx, spec.ny, spec.nz
    xs = np.linspace(0.0, spec.lx, nx + 1)
    ys = np.linspace(0.0, spec.ly, ny + 1)
    zs = np.linspace(0.0, spec.lz, nz + 1)
    K, J, I = np.meshgrid(np.arange(nz + 1), np.arange(ny + 1), np.arange(nx + 1), indexing="ij")
    vertices = np.stack([xs[I.ravel()], ys[J.ravel()], zs[K.ravel()]], axis=1)
    nv = len(vertices)

    cells = _kuhn_cells(spec)
    X = vertices[cells]
    jac = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0], X[:, 3] - X[:, 0]], axis=2)
    det = np.linalg.det(jac)
    flip = det < 0
    cells[flip] = cells[flip][:, [0, 1, 3, 2]]
    X = vertices[cells]
    jac = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0], X[:, 3] - X[:, 0]], axis=2)
    det = np.linalg.det(jac)
    volumes = det / 6.0
    inv = np.linalg.inv(jac)
    gradients = np.empty((len(cells), 4, 3))
    gradients[:, 1:, :] = inv
    gradients[:, 0, :] = -inv.sum(axis=1)

    # --- edges ---
    pairs = cells[:, LOCAL_EDGES]  # (nc, 6, 2)
    lo = pairs.min(axis=2).astype(np.int64)
    hi = pairs.max(axis=2).astype(np.int64)
    edge_keys, edge_inverse = np.unique((lo * nv + hi).ravel(), return_inverse=True)
    edges = np.stack([edge_keys // nv, edge_keys % nv], axis=1)
    cell_edges = edge_inverse.reshape(-1, 6)
    cell_edge_signs = np.where(pairs[:, :, 0] < pairs[:, :, 1], 1, -1)

    # --- faces ---
    triples = np.sort(cells[:, LOCAL_FACES], axis=2).astype(np.int64)  # (nc, 4, 3)
    face_keys = (triples[:, :, 0] * nv + triples[:, :, 1]) * nv + triples[:, :, 2]
    uniq_faces, face_inverse, counts = np.unique(face_keys.ravel(), return_inverse=True, return_counts=True)
    faces = np.stack([uniq_faces // (nv * nv), (uniq_faces // nv) % nv, uniq_faces % nv], axis=1)
    cell_faces = face_inverse.reshape(-1, 4)

    edge_key_of = lambda a, b: np.searchsorted(edge_keys, a * nv + b)
    face_edges = np.stack([edge_key_of(faces[:, i], faces[:, j]) for i, j in FACE_EDGES], axis=1)

    boundary_faces = np.flatnonzero(counts == 1)
    occurrence = np.full(len(faces), -1, dtype=np.int64)
    occurrence[face_inverse] = np.arange(len(face_inverse))
    owner = occurrence[boundary_faces]
    owner_cell, owner_local = owner // 4, owner % 4
    opposite = vertices[cells[owner_cell, owner_local]]
    fa, fb, fc = (vertices[faces[boundary_faces, k]] for k in range(3))
    normals = np.cross(fb - fa, fc - fa)
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    inward = np.einsum("ij,ij->i", normals, opposite - fa) > 0
    normals[inward] *= -1.0

    boundary_edges = np.unique(face_edges[boundary_faces])
    boundary_vertices = np.unique(faces[boundary_faces])

    mesh = Mesh(
        spec=spec,
        vertices=_frozen(vertices),
        cells=_frozen(cells),
        edges=_frozen(edges),
        faces=_frozen(faces),
        cell_edges=_frozen(cell_edges),
        cell_edge_signs=_frozen(cell_edge_signs),
        cell_faces=_frozen(cell_faces),
        face_edges=_frozen(face_edges),
        face_cell_count=_frozen(counts),
        boundary_faces=_frozen(boundary_faces),
        boundary_face_normals=_frozen(normals),
        boundary_edges=_frozen(boundary_edges),
        boundary_vertices=_frozen(boundary_vertices),
        cell_volumes=_frozen(volumes),
        cell_gradients=_frozen(gradients),
    )
    logger.info(
        "Built box mesh %dx%dx%d: %d vertices, %d cells, %d edges, %d faces",
        nx, ny, nz, nv, mesh.n_cells, mesh.n_edges, mesh.n_faces,
    )
    return mesh


def boundary_normals(mesh, face_ids=None):
    """Map boundary face id -> outward unit normal.

    Args:
        mesh: Mesh to query
        face_ids: optional iterable of face ids; defaults to every boundary face

    Returns: dict {face_id: (3,) array}
    """
    position = {int(f): k for k, f in enumerate(mesh.boundary_faces)}
    if face_ids is None:
        face_ids = mesh.boundary_faces
    normals = {}
    for f in face_ids:
        k = position.get(int(f))
        if k is None:
            raise MeshDomainError(f"face {int(f)} is not on the boundary")
        normals[int(f)] = mesh.boundary_face_normals[k].copy()
    return normals


def gradient_matrix(mesh):
    """Vertex -> edge incidence (discrete gradient), shape (ne, nv)."""
    ne = mesh.n_edges
    rows = np.repeat(np.arange(ne), 2)
    cols = mesh.edges.ravel()
    data = np.tile([-1.0, 1.0], ne)
    return sp.csr_matrix((data, (rows, cols)), shape=(ne, mesh.n_vertices))


def curl_matrix(mesh):
    """Edge -> face incidence (discrete curl), shape (nf, ne)."""
    nf = mesh.n_faces
    rows = np.repeat(np.arange(nf), 3)
    cols = mesh.face_edges.ravel()
    data = np.tile(np.asarray(FACE_EDGE_CIRCULATION, dtype=float), nf)
    return sp.csr_matrix((data, (rows, cols)), shape=(nf, mesh.n_edges))


def first_betti_number(mesh):
    """dim ker(curl) - dim im(grad) on the edge cochains; 0 for a box."""
    grad = gradient_matrix(mesh).toarray()
    curl = curl_matrix(mesh).toarray()
    rank_grad = np.linalg.matrix_rank(grad)
    rank_curl = np.linalg.matrix_rank(curl)
    return int(mesh.n_edges - rank_curl - rank_grad)
