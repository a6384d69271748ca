"""
Boundary-data lifting.

Dirichlet data g are extended into the domain component-wise by a discrete
harmonic extension. Tangential data G (one TangentialTraceData per row of P)
are lifted either directly (boundary edge moments fixed, interior minimizing
||curl||^2 + ||.||^2) or by the constructive three-step pipeline:

    1. Neumann problem      -Δw = 0, dw/dn = -div_τ v, mean(w) = 0
    2. harmonic fields      curl λ = 0, div λ = 0, λ.n = 0 (empty on a box)
    3. auxiliary problem    curl-curl + div-div solve for r in a degree-2 space
                            with zero normal component on the boundary and
                            div r orthogonal to the P1 scalars

and the extension is R = curl r, carried to edge elements with the boundary
moments of G and interior moments from the H(curl) projection of curl r.
Here v = n x G is the rotated datum. H^{-1/2} pairings and norms are replaced
by boundary-L2 ones throughout.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from assembly import (
    assemble_curl_coupling,
    assemble_curl_div,
    assemble_h1_forms,
    assemble_hcurl_forms,
    assemble_vector_gradient_coupling,
    restrict,
)
from errors import BoundaryDataError, EigenSolverError, SolverError, SpaceMismatchError
from linear_solvers import SpdSolver, relative_residual
from mesh import FACE_EDGES, gradient_matrix
from quadrature import DEFAULT_POINTS, triangle_rule
from settings import SolverSettings, get_settings
from spaces import (
    BoundaryFaces,
    H1VectorSpace,
    HcurlSpace,
    TangentialTraceData,
    extend_by_zero,
    tangential_trace,
    trace_moments,
)

logger = logging.getLogger(__name__)

LIFTING_PATHS = ("direct", "constructive")

# proximal corrections of the divergence multipliers in the auxiliary solve
MULTIPLIER_SWEEPS = 2


# --- BOUNDARY DATA ---

@dataclass(frozen=True)
class DirichletData:
    """Displacement data g(points, t) -> (n, 3) with optional analytic time derivatives.

    A missing derivative means the data do not depend on time; missing g means g = 0.
    """

    g: Optional[Callable] = None
    g_t: Optional[Callable] = None
    g_tt: Optional[Callable] = None

    @property
    def homogeneous(self) -> bool:
        return self.g is None

    def sample(self, points, t=0.0, derivative=0) -> np.ndarray:
        fn = (self.g, self.g_t, self.g_tt)[derivative]
        if fn is None:
            return np.zeros((len(points), 3))
        values = np.asarray(fn(points, t), dtype=float)
        return np.array(np.broadcast_to(values, (len(points), 3)))


@dataclass(frozen=True)
class TangentialData:
    """Tangential data for the three rows of P.

    Exactly one source is used: a matrix field (points, t) -> (n, 3, 3) whose
    rows are traced on the boundary edges, the coupling to Dirichlet data
    (row i is the tangential trace of grad g_i), or fixed trace rows.
    """

    field: Optional[Callable] = None
    field_t: Optional[Callable] = None
    field_tt: Optional[Callable] = None
    coupled_to: Optional[DirichletData] = None
    traces: Optional[Tuple[TangentialTraceData, ...]] = None

    def __post_init__(self):
        sources = [self.field is not None, self.coupled_to is not None, self.traces is not None]
        if sum(sources) > 1:
            raise BoundaryDataError("tangential data take at most one source")
        if self.traces is not None and len(self.traces) != 3:
            raise BoundaryDataError(f"expected 3 trace rows, got {len(self.traces)}")

    @property
    def homogeneous(self) -> bool:
        if self.coupled_to is not None:
            return self.coupled_to.homogeneous
        return self.field is None and self.traces is None

    def rows(self, VP, t=0.0, derivative=0) -> Tuple[TangentialTraceData, ...]:
        """Three TangentialTraceData at time t (or their time derivative)."""
        if self.coupled_to is not None:
            return coupling_trace(self.coupled_to, VP, t, derivative)
        if self.traces is not None:
            for trace in self.traces:
                if trace.space is not VP:
                    raise SpaceMismatchError("trace rows belong to another edge space")
            if derivative == 0:
                return tuple(self.traces)
            return tuple(TangentialTraceData.zeros(VP) for _ in range(3))
        fn = (self.field, self.field_t, self.field_tt)[derivative]
        if fn is None:
            return tuple(TangentialTraceData.zeros(VP) for _ in range(3))
        return tuple(trace_moments(VP, _row_of(fn, i, t)) for i in range(3))


def _row_of(fn, i, t):
    def row(points):
        values = np.asarray(fn(points, t), dtype=float)
        return np.broadcast_to(values, (len(points), 3, 3))[:, i, :]
    return row


@dataclass(frozen=True)
class BoundaryData:
    dirichlet: DirichletData = field(default_factory=DirichletData)
    tangential: TangentialData = field(default_factory=TangentialData)

    @property
    def homogeneous(self) -> bool:
        return self.dirichlet.homogeneous and self.tangential.homogeneous

    @classmethod
    def coupled(cls, dirichlet: DirichletData) -> "BoundaryData":
        """Tangential rows tied to the displacement data: P_i x n = grad g_i x n."""
        return cls(dirichlet, TangentialData(coupled_to=dirichlet))


def coupling_trace(g: DirichletData, VP: HcurlSpace, t=0.0, derivative=0) -> Tuple[TangentialTraceData, ...]:
    """Tangential data induced by grad g: row i moment on edge (a, b) is g_i(b) - g_i(a)."""
    mesh = VP.mesh
    edges = mesh.edges[VP.boundary_dofs]
    values = g.sample(mesh.vertices, t, derivative)
    diff = values[edges[:, 1]] - values[edges[:, 0]]
    return tuple(TangentialTraceData(VP, diff[:, i].copy()) for i in range(3))


# --- DIRICHLET LIFTING ---

class DirichletLifter:
    """Component-wise discrete harmonic extension on a Lagrange space."""

    def __init__(self, Vu: H1VectorSpace):
        self.Vu = Vu
        self.scalar = H1VectorSpace(Vu.mesh, Vu.degree, components=1)
        laplacian, _ = assemble_h1_forms(self.scalar)
        boundary = self.scalar.boundary_nodes
        interior = np.setdiff1d(np.arange(self.scalar.n_nodes), boundary)
        self.boundary, self.interior = boundary, interior
        self.coupling = restrict_rect(laplacian, interior, boundary)
        self.solver = SpdSolver(restrict(laplacian, interior))

    def lift(self, samples: np.ndarray) -> np.ndarray:
        """samples (n_boundary_nodes, components) -> full coefficient vector."""
        nodal = np.zeros((self.Vu.n_nodes, self.Vu.components))
        nodal[self.boundary] = samples
        for c in range(self.Vu.components):
            nodal[self.interior, c] = self.solver.solve(-(self.coupling @ samples[:, c]))
        return self.Vu.from_nodal(nodal)


def restrict_rect(A, rows, cols) -> sp.csr_matrix:
    return sp.csr_matrix(A)[rows][:, cols]


@lru_cache(maxsize=16)
def dirichlet_lifter(Vu: H1VectorSpace) -> DirichletLifter:
    return DirichletLifter(Vu)


def lift_dirichlet(g: DirichletData, Vu: H1VectorSpace, t=0.0, derivative=0) -> np.ndarray:
    """Discrete harmonic extension g̃ whose boundary nodes carry g exactly."""
    if g.homogeneous:
        return np.zeros(Vu.n_dofs)
    lifter = dirichlet_lifter(Vu)
    samples = g.sample(Vu.node_coordinates[lifter.boundary], t, derivative)
    return lifter.lift(samples)


# --- DIRECT TANGENTIAL LIFTING ---

class HcurlLifter:
    """Interior edge dofs minimizing ||curl v||^2 + ||v||^2 for fixed boundary moments."""

    def __init__(self, VP: HcurlSpace):
        self.VP = VP
        mass, curl = assemble_hcurl_forms(VP)
        A = (mass + curl).tocsr()
        self.coupling = restrict_rect(A, VP.interior_dofs, VP.boundary_dofs)
        self.solver = SpdSolver(restrict(A, VP.interior_dofs))

    def lift(self, trace: TangentialTraceData, load: Optional[np.ndarray] = None) -> np.ndarray:
        """Trace-constrained minimizer; load adds an interior linear term (H(curl) projection)."""
        coeffs = extend_by_zero(trace)
        rhs = -(self.coupling @ trace.values)
        if load is not None:
            rhs = rhs + load[self.VP.interior_dofs]
        coeffs[self.VP.interior_dofs] = self.solver.solve(rhs)
        return coeffs


@lru_cache(maxsize=16)
def hcurl_lifter(VP: HcurlSpace) -> HcurlLifter:
    return HcurlLifter(VP)


def direct_lifting(G: TangentialTraceData, VP: Optional[HcurlSpace] = None) -> np.ndarray:
    """Edge coefficients with tangential trace exactly G and discrete-harmonic interior."""
    VP = VP or G.space
    if G.space is not VP:
        raise SpaceMismatchError("tangential data belong to another edge space")
    if not np.any(G.values):
        return np.zeros(VP.n_dofs)
    return hcurl_lifter(VP).lift(G)


# --- BOUNDARY NORMS ---

def _boundary_mass(mesh) -> sp.csr_matrix:
    """P1 mass on the boundary surface, indexed by boundary vertex position."""
    nb = len(mesh.boundary_vertices)
    position = np.full(mesh.n_vertices, -1, dtype=np.int64)
    position[mesh.boundary_vertices] = np.arange(nb)
    tri = position[mesh.faces[mesh.boundary_faces]]
    areas = mesh.face_areas(mesh.boundary_faces)
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    blocks = areas[:, None, None] * local[None]
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    M = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(nb, nb)).tocsr()
    M.sum_duplicates()
    return M


@lru_cache(maxsize=16)
def boundary_faces(VP: HcurlSpace) -> BoundaryFaces:
    return BoundaryFaces(VP)


def boundary_l2_norm(trace: TangentialTraceData) -> float:
    """L2 norm over the boundary surface of the field reconstructed from the moments."""
    faces = boundary_faces(trace.space)
    bary, w = triangle_rule(DEFAULT_POINTS)
    values = faces.reconstruct(trace, bary)
    return float(np.sqrt(np.einsum("f,q,fqj,fqj->", faces.areas, w, values, values)))


def tangential_div_boundary(G: TangentialTraceData, rotate=False) -> np.ndarray:
    """Discrete div_τ of G as coefficients on the P1 hat functions of every mesh vertex.

    Entry v is -(integral over the boundary of <T G_rep, grad_τ λ_v>), with T the
    identity or, when rotate is set, the rotation by the outward normal (n x .).
    Entries at interior vertices are zero.
    """
    VP = G.space
    mesh = VP.mesh
    faces = boundary_faces(VP)
    local = np.asarray(G.values)[faces.trace_index]  # (nbf, 3)
    means = faces.basis_means()  # (nbf, 3 edges, 3)
    if rotate:
        means = np.cross(faces.normals[:, None, :], means)
    field_mean = np.einsum("fk,fkj->fj", local, means)
    contributions = -np.einsum("fj,fvj->fv", field_mean, faces.gradients)
    return np.bincount(faces.vertices.ravel(), weights=contributions.ravel(), minlength=mesh.n_vertices)


# --- CONSTRUCTIVE PIPELINE TYPES ---

@dataclass(frozen=True, eq=False)
class NeumannScalarSolution:
    space: H1VectorSpace
    w: np.ndarray
    mean: float
    residual: float


@dataclass(frozen=True, eq=False)
class HarmonicBasis:
    """Neumann harmonic fields in auxiliary-space coefficients, L2-orthonormal."""

    space: "AuxiliarySpace"
    members: np.ndarray  # (n, W dofs)
    eigenvalues: np.ndarray
    scale: float

    @property
    def dimension(self) -> int:
        return len(self.members)


@dataclass(frozen=True, eq=False)
class AuxiliaryField:
    space: "AuxiliarySpace"
    r: np.ndarray
    harmonic_coefficients: np.ndarray  # [v, λ_i]
    residual: float
    weak_div_residual: float = 0.0


@dataclass
class ExtensionReport:
    """Properties of a constructive extension. Norms are boundary-L2 surrogates."""

    trace_error: float = 0.0
    curl_curl_residual: float = 0.0
    div_residual: float = 0.0
    auxiliary_div_norm: float = 0.0
    auxiliary_weak_div_residual: float = 0.0
    harmonic_projection: float = 0.0
    neumann_mean: float = 0.0
    c1_star_ratio: float = 0.0
    c1_ratio: float = 0.0
    harmonic_dimension: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class AuxiliarySpace:
    """Degree-2 vector Lagrange space with the normal component pinned at boundary nodes."""

    space: H1VectorSpace
    pinned: np.ndarray
    free: np.ndarray


@lru_cache(maxsize=16)
def auxiliary_space(mesh) -> AuxiliarySpace:
    W = H1VectorSpace(mesh, degree=2, components=3)
    nv = mesh.n_vertices
    axes = np.argmax(np.abs(mesh.boundary_face_normals), axis=1)
    face_nodes = np.hstack([mesh.faces[mesh.boundary_faces], nv + mesh.face_edges[mesh.boundary_faces]])
    pinned = np.unique((axes[:, None] * W.n_nodes + face_nodes).ravel())
    free = np.setdiff1d(np.arange(W.n_dofs), pinned)
    return AuxiliarySpace(W, pinned, free)


def _face_p2_values(bary):
    bary = np.atleast_2d(bary)
    vertex = bary * (2.0 * bary - 1.0)
    edge = np.stack([4.0 * bary[:, i] * bary[:, j] for i, j in FACE_EDGES], axis=1)
    return np.concatenate([vertex, edge], axis=1)


def _dual_norm(solver, residual):
    if not np.any(residual):
        return 0.0
    return float(np.sqrt(max(residual @ solver.solve(residual), 0.0)))


def _ratio(num, den):
    return float(num / den) if den > 0 else 0.0


# --- CONSTRUCTIVE PIPELINE ---

class ExtensionPipeline:
    """All operators of the constructive extension on one edge space, factorized once."""

    def __init__(self, VP: HcurlSpace, settings: Optional[SolverSettings] = None):
        self.VP = VP
        self.mesh = mesh = VP.mesh
        self.settings = settings or get_settings()
        self.faces = boundary_faces(VP)

        # Neumann problem on P1 scalars, mean fixed by one multiplier
        self.scalar = H1VectorSpace(mesh, 1, components=1)
        self.laplacian, self.scalar_mass = assemble_h1_forms(self.scalar)
        self.mean_weights = self.scalar_mass @ np.ones(self.scalar.n_dofs)
        m = sp.csr_matrix(self.mean_weights[:, None])
        self.bordered = sp.bmat([[self.laplacian, m], [m.T, None]], format="csc")
        self._bordered_solve = spla.factorized(self.bordered)

        # auxiliary problem; div phi = -(phi, grad q) since phi.n = 0 on every boundary face
        self.aux = auxiliary_space(mesh)
        W = self.aux.space
        self.curl_gram, self.div_gram = assemble_curl_div(W)
        self.aux_matrix = (self.curl_gram + self.div_gram).tocsr()
        _, self.aux_mass = assemble_h1_forms(W)
        self.coupling = assemble_vector_gradient_coupling(W, self.scalar)
        self.div_constraint = sp.csr_matrix(-self.coupling[self.aux.free].T)
        self.face_nodes = np.hstack([mesh.faces[self.faces.face_ids], mesh.n_vertices + mesh.face_edges[self.faces.face_ids]])
        self._aux_system = None

        # curl r -> edge moments, and residual norms
        self.curl_coupling = assemble_curl_coupling(VP, W)
        self.lifter = hcurl_lifter(VP)
        self.edge_mass, self.edge_curl = assemble_hcurl_forms(VP)
        interior_vertices = np.setdiff1d(np.arange(mesh.n_vertices), mesh.boundary_vertices)
        self.interior_vertices = interior_vertices
        self.h1_seminorm = SpdSolver(restrict(self.laplacian, interior_vertices), self.settings)
        self.gradient = gradient_matrix(mesh)
        self.boundary_mass = SpdSolver(_boundary_mass(mesh), self.settings)
        self._basis = None
        logger.info(
            "Extension pipeline ready: %d auxiliary dofs (%d pinned), %d edge dofs",
            W.n_dofs, len(self.aux.pinned), VP.n_dofs,
        )

    # --- step 1 ---
    def solve_neumann(self, G: TangentialTraceData) -> NeumannScalarSolution:
        f = tangential_div_boundary(G, rotate=True)
        rhs = np.concatenate([-f, [0.0]])
        if not np.any(rhs):
            return NeumannScalarSolution(self.scalar, np.zeros(self.scalar.n_dofs), 0.0, 0.0)
        sol = self._bordered_solve(rhs)
        residual = relative_residual(self.bordered, sol, rhs)
        if not np.isfinite(residual) or residual > self.settings.rtol:
            raise SolverError("Neumann problem missed its tolerance", residual=residual)
        w = sol[:-1]
        mean = float(self.mean_weights @ w / self.mesh.spec.volume)
        logger.debug("Neumann solve: residual %.2e, mean %.2e", residual, mean)
        return NeumannScalarSolution(self.scalar, w, mean, residual)

    # --- step 2 ---
    def harmonic_basis(self) -> HarmonicBasis:
        if self._basis is not None:
            return self._basis
        A = restrict(self.aux_matrix, self.aux.free)
        M = restrict(self.aux_mass, self.aux.free)
        n = A.shape[0]
        scale = float(np.mean(A.diagonal()) / np.mean(M.diagonal()))
        k = min(self.settings.harmonic_modes, n)
        try:
            if n <= self.settings.dense_threshold:
                values, vectors = la.eigh(A.toarray(), M.toarray(), subset_by_index=[0, k - 1])
            else:
                values, vectors = spla.eigsh(A.tocsc(), k=k, M=M.tocsc(), sigma=-1e-3 * scale, which="LM")
                order = np.argsort(values)
                values, vectors = values[order], vectors[:, order]
        except (la.LinAlgError, spla.ArpackError, spla.ArpackNoConvergence) as exc:
            raise EigenSolverError(f"harmonic-field eigenproblem failed: {exc}") from exc
        keep = values < self.settings.harmonic_tolerance * scale
        members = np.zeros((int(keep.sum()), self.aux.space.n_dofs))
        members[:, self.aux.free] = vectors[:, keep].T
        if keep.all() and k < n:
            logger.warning("All %d computed harmonic modes are below tolerance; the basis may be incomplete", k)
        logger.info("Harmonic basis: dimension %d (lowest ratio %.3e)", len(members), values[0] / scale)
        self._basis = HarmonicBasis(self.aux, members, values[keep], scale)
        return self._basis

    # --- step 3 ---
    def _boundary_pairing(self, G):
        """Vector b[a] = integral over the boundary of (n x G_rep) . phi_a."""
        W = self.aux.space
        bary, w = triangle_rule(DEFAULT_POINTS)
        values = np.cross(self.faces.normals[:, None, :], self.faces.reconstruct(G, bary))
        phi = _face_p2_values(bary)
        local = np.einsum("f,q,fqc,qk->fck", self.faces.areas, w, values, phi)
        dofs = np.arange(3)[None, :, None] * W.n_nodes + self.face_nodes[:, None, :]
        return np.bincount(dofs.ravel(), weights=local.ravel(), minlength=W.n_dofs)

    def _auxiliary_system(self, basis):
        """Saddle matrix over (r free, divergence multipliers, harmonic multipliers) and its -(2,2) block."""
        if self._aux_system is not None:
            return self._aux_system
        free = self.aux.free
        delta = self.settings.rtol
        constraints = [self.div_constraint]
        regularization = [delta * self.scalar_mass]
        if basis.dimension:
            constraints.append(sp.csr_matrix((self.aux_mass @ basis.members.T)[free].T))
            regularization.append(delta * sp.identity(basis.dimension, format="csr"))
        B = sp.vstack(constraints, format="csr")
        D = sp.block_diag(regularization, format="csr")
        system = sp.bmat([[restrict(self.aux_matrix, free), B.T], [B, -D]], format="csc")
        self._aux_system = (system, spla.factorized(system), D)
        logger.debug("Auxiliary saddle system: %d x %d", *system.shape)
        return self._aux_system

    def weak_div_residual(self, r: np.ndarray) -> float:
        """max over P1 test functions of <div r, q>, relative to the size of the pairing."""
        r_free = r[self.aux.free]
        if not np.any(r_free):
            return 0.0
        pairing = self.div_constraint @ r_free
        scale = np.linalg.norm(abs(self.div_constraint) @ np.abs(r_free))
        return float(np.linalg.norm(pairing) / scale)

    def solve_auxiliary(self, G: TangentialTraceData, neumann: NeumannScalarSolution, basis: HarmonicBasis) -> AuxiliaryField:
        W = self.aux.space
        free = self.aux.free
        n = len(free)
        boundary = self._boundary_pairing(G)
        coefficients = basis.members @ boundary if basis.dimension else np.zeros(0)
        rhs = self.coupling @ neumann.w - boundary
        if basis.dimension:
            rhs = rhs + self.aux_mass @ (basis.members.T @ coefficients)
        r = np.zeros(W.n_dofs)
        if not np.any(rhs[free]):
            return AuxiliaryField(self.aux, r, coefficients, 0.0)
        system, solve, D = self._auxiliary_system(basis)
        b = np.zeros(system.shape[0])
        b[:n] = rhs[free]
        sol = solve(b)
        for _ in range(MULTIPLIER_SWEEPS):
            # fixed point has B r = 0 exactly
            b[n:] = -(D @ sol[n:])
            sol = solve(b)
        residual = relative_residual(system, sol, b)
        if not np.isfinite(residual) or residual > self.settings.rtol:
            raise SolverError("auxiliary problem missed its tolerance", residual=residual)
        r[free] = sol[:n]
        weak_div = self.weak_div_residual(r)
        logger.debug("Auxiliary solve: residual %.2e, weak div residual %.2e", residual, weak_div)
        return AuxiliaryField(self.aux, r, coefficients, residual, weak_div)

    def project_curl(self, aux_field: AuxiliaryField, G: TangentialTraceData) -> np.ndarray:
        """Edge field with the boundary moments of G whose interior is the H(curl) projection of curl r."""
        return self.lifter.lift(G, load=self.curl_coupling @ aux_field.r)

    def extend(self, G: TangentialTraceData) -> Tuple[np.ndarray, ExtensionReport]:
        """Constructive extension R of G and its property report."""
        if G.space is not self.VP:
            raise SpaceMismatchError("tangential data belong to another edge space")
        basis = self.harmonic_basis()
        if not np.any(G.values):
            return np.zeros(self.VP.n_dofs), ExtensionReport(harmonic_dimension=basis.dimension)
        neumann = self.solve_neumann(G)
        aux = self.solve_auxiliary(G, neumann, basis)
        R = self.project_curl(aux, G)
        report = self.report(G, R, neumann, aux, basis)
        logger.info(
            "Constructive extension: curl-curl residual %.3e, div residual %.3e, auxiliary weak div %.3e",
            report.curl_curl_residual, report.div_residual, report.auxiliary_weak_div_residual,
        )
        return R, report

    def report(self, G, R, neumann, aux, basis) -> ExtensionReport:
        VP = self.VP
        trace_error = boundary_l2_norm(tangential_trace(VP, R) - G)
        curl_residual = (self.edge_curl @ R)[VP.interior_dofs]
        div_residual = (self.gradient.T @ (self.edge_mass @ R))[self.interior_vertices]
        r = aux.r
        w = neumann.w
        f = tangential_div_boundary(G, rotate=True)[self.mesh.boundary_vertices]
        w_h1 = np.sqrt(max(w @ (self.laplacian @ w) + w @ (self.scalar_mass @ w), 0.0))
        grad_w = np.sqrt(max(w @ (self.laplacian @ w), 0.0))
        curl_r = np.sqrt(max(r @ (self.curl_gram @ r), 0.0))
        return ExtensionReport(
            trace_error=trace_error,
            curl_curl_residual=_dual_norm(self.lifter.solver, curl_residual),
            div_residual=_dual_norm(self.h1_seminorm, div_residual),
            auxiliary_div_norm=float(np.sqrt(max(r @ (self.div_gram @ r), 0.0))),
            auxiliary_weak_div_residual=aux.weak_div_residual,
            harmonic_projection=float(np.linalg.norm(aux.harmonic_coefficients)),
            neumann_mean=neumann.mean,
            c1_star_ratio=_ratio(w_h1, _dual_norm(self.boundary_mass, f)),
            c1_ratio=_ratio(curl_r, grad_w + boundary_l2_norm(G)),
            harmonic_dimension=basis.dimension,
        )


@lru_cache(maxsize=8)
def extension_pipeline(VP: HcurlSpace) -> ExtensionPipeline:
    return ExtensionPipeline(VP)


def solve_neumann(G: TangentialTraceData) -> NeumannScalarSolution:
    return extension_pipeline(G.space).solve_neumann(G)


def harmonic_basis(VP: HcurlSpace) -> HarmonicBasis:
    return extension_pipeline(VP).harmonic_basis()


def solve_auxiliary(G: TangentialTraceData, w: NeumannScalarSolution, basis: HarmonicBasis) -> AuxiliaryField:
    return extension_pipeline(G.space).solve_auxiliary(G, w, basis)


def constructive_extension(G: TangentialTraceData) -> Tuple[np.ndarray, ExtensionReport]:
    """Returns (R edge coefficients, ExtensionReport); the boundary moments of R are those of G."""
    return extension_pipeline(G.space).extend(G)


# --- LIFTING FRONT END ---

def lift_tangential(rows, VP: HcurlSpace, path="direct") -> np.ndarray:
    """Lift three trace rows to (3, n_edges) edge coefficients whose boundary moments equal the data."""
    if path not in LIFTING_PATHS:
        raise BoundaryDataError(f"unknown lifting path {path!r}; expected one of {LIFTING_PATHS}")
    lifted = np.zeros((3, VP.n_dofs))
    for i, trace in enumerate(rows):
        if path == "direct":
            lifted[i] = direct_lifting(trace, VP)
        else:
            lifted[i], _ = constructive_extension(trace)
    return lifted


def lift_boundary_data(bdata: BoundaryData, Vu: H1VectorSpace, VP: HcurlSpace, t=0.0, derivative=0, path="direct") -> Tuple[np.ndarray, np.ndarray]:
    """(g̃, G̃) for the boundary data at time t, or of its time derivative of the given order."""
    g_lift = lift_dirichlet(bdata.dirichlet, Vu, t, derivative)
    if bdata.tangential.homogeneous:
        return g_lift, np.zeros((3, VP.n_dofs))
    return g_lift, lift_tangential(bdata.tangential.rows(VP, t, derivative), VP, path)
