"""
Sparse operators and load vectors of the relaxed micromorphic system.

The unknown x = (u, P) is laid out as [u | P row 0 | P row 1 | P row 2]:
u uses the component-blocked numbering of H1VectorSpace, each row of P one
copy of the edge space. Every operator is assembled once per pair of spaces
with unit coefficients (a FormSet) and then combined with the moduli.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict

from errors import InvalidParametersError, SpaceMismatchError
from quadrature import DEFAULT_POINTS, tetrahedron_rule
from settings import get_settings
from spaces import lagrange_gradients, lagrange_values, whitney_curls, whitney_values

logger = logging.getLogger(__name__)


# --- MATERIAL PARAMETERS ---

class MaterialParams(BaseModel):
    """Isotropic relaxed micromorphic moduli. Any finite numbers are accepted; see validate_params."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mu_e: float = 1.0
    lambda_e: float = 0.0
    mu_c: float = 0.0
    mu_micro: float = 1.0
    lambda_micro: float = 0.0
    mu_macro: float = 1.0
    L_c: float = 1.0

    def scaled(self, factor):
        """Same characteristic length, every modulus multiplied by factor."""
        return self.model_copy(
            update={
                name: factor * getattr(self, name)
                for name in ("mu_e", "lambda_e", "mu_c", "mu_micro", "lambda_micro", "mu_macro")
            }
        )


# (name, admissibility test) in the order violations are reported
PARAMETER_CONDITIONS = (
    ("μ_e > 0", lambda p: p.mu_e > 0),
    ("2μ_e + 3λ_e > 0", lambda p: 2 * p.mu_e + 3 * p.lambda_e > 0),
    ("μ_c ≥ 0", lambda p: p.mu_c >= 0),
    ("μ_micro > 0", lambda p: p.mu_micro > 0),
    ("2μ_micro + 3λ_micro > 0", lambda p: 2 * p.mu_micro + 3 * p.lambda_micro > 0),
    ("μ_macro > 0", lambda p: p.mu_macro > 0),
    ("L_c > 0", lambda p: p.L_c > 0),
)


def validate_params(params: MaterialParams) -> List[str]:
    """Return every violated admissibility inequality by name (empty list means ok)."""
    violations = []
    for name, holds in PARAMETER_CONDITIONS:
        if not holds(params):
            violations.append(name)
    return violations


def require_valid_params(params):
    violations = validate_params(params)
    if violations:
        raise InvalidParametersError(violations)
    return params


# --- BLOCK LAYOUT & STATE ---

@dataclass(frozen=True)
class BlockLayout:
    n_u: int
    n_edges: int

    @property
    def n_p(self):
        return 3 * self.n_edges

    @property
    def size(self):
        return self.n_u + self.n_p

    def split(self, x):
        """Vector -> (u, P) with P shaped (3, n_edges)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise SpaceMismatchError(f"expected a vector of length {self.size}, got {x.shape}")
        return x[: self.n_u], x[self.n_u:].reshape(3, self.n_edges)

    def join(self, u, P):
        u = np.asarray(u, dtype=float)
        P = np.asarray(P, dtype=float)
        if u.shape != (self.n_u,) or P.shape != (3, self.n_edges):
            raise SpaceMismatchError(
                f"expected u {(self.n_u,)} and P {(3, self.n_edges)}, got {u.shape} and {P.shape}"
            )
        return np.concatenate([u, P.reshape(-1)])


def block_layout(Vu, VP):
    if Vu.mesh is not VP.mesh:
        raise SpaceMismatchError("displacement and micro-distortion spaces live on different meshes")
    if Vu.components != 3:
        raise SpaceMismatchError("the displacement space must have 3 components")
    return BlockLayout(Vu.n_dofs, VP.n_dofs)


def constrained_dofs(Vu, VP):
    """Dofs fixed by the boundary conditions: boundary u nodes and boundary edges of every P row."""
    layout = block_layout(Vu, VP)
    p_dofs = [layout.n_u + i * layout.n_edges + VP.boundary_dofs for i in range(3)]
    return np.sort(np.concatenate([Vu.boundary_dofs] + p_dofs))


def free_dofs(Vu, VP):
    layout = block_layout(Vu, VP)
    mask = np.ones(layout.size, dtype=bool)
    mask[constrained_dofs(Vu, VP)] = False
    return np.flatnonzero(mask)


@dataclass
class MicromorphicState:
    """Coefficients of (u, P) and, in dynamics, their velocities."""

    u: np.ndarray
    P: np.ndarray  # (3, n_edges)
    u_t: Optional[np.ndarray] = None
    P_t: Optional[np.ndarray] = None

    @classmethod
    def from_vectors(cls, layout, x, v=None):
        u, P = layout.split(x)
        if v is None:
            return cls(u.copy(), P.copy())
        u_t, P_t = layout.split(v)
        return cls(u.copy(), P.copy(), u_t.copy(), P_t.copy())

    def position(self, layout):
        return layout.join(self.u, self.P)

    def velocity(self, layout):
        if self.u_t is None:
            return np.zeros(layout.size)
        return layout.join(self.u_t, self.P_t)


@dataclass
class BlockSystem:
    """Stiffness, block mass and load over (u, P) with the constrained dofs of homogeneous data."""

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    load: np.ndarray
    constrained: np.ndarray
    layout: BlockLayout

    @property
    def free(self):
        mask = np.ones(self.layout.size, dtype=bool)
        mask[self.constrained] = False
        return np.flatnonzero(mask)


# --- LOCAL OPERATORS ---

def _chunks(n, size):
    for start in range(0, n, size):
        yield np.arange(start, min(start + size, n))


def _h1_operators(Vu, cells, bary):
    """Gradient (nc, nq, nd, 3, 3) and value (nc, nq, nd, 3) of every local vector basis function."""
    grads = Vu.mesh.cell_gradients[cells]
    nloc = Vu.n_local
    nd = Vu.components * nloc
    N = lagrange_values(Vu.degree, bary)
    dN = lagrange_gradients(Vu.degree, grads, bary)
    grad_u = np.zeros((len(cells), len(bary), nd, Vu.components, 3))
    value_u = np.zeros((len(cells), len(bary), nd, Vu.components))
    for c in range(Vu.components):
        grad_u[:, :, c * nloc:(c + 1) * nloc, c, :] = dN
        value_u[:, :, c * nloc:(c + 1) * nloc, c] = N[None]
    return grad_u, value_u


def _micromorphic_operators(Vu, cells, bary):
    """Local (u, P) operators: grad u, value u, P and Curl P for every local dof."""
    mesh = Vu.mesh
    grads = mesh.cell_gradients[cells]
    signs = mesh.cell_edge_signs[cells]
    n_u = 3 * Vu.n_local
    nd = n_u + 18
    nc, nq = len(cells), len(bary)
    grad_u_part, value_u_part = _h1_operators(Vu, cells, bary)
    phi = whitney_values(grads, signs, bary)
    curls = whitney_curls(grads, signs)

    grad_u = np.zeros((nc, nq, nd, 3, 3))
    value_u = np.zeros((nc, nq, nd, 3))
    micro = np.zeros((nc, nq, nd, 3, 3))
    curl_p = np.zeros((nc, nd, 3, 3))
    grad_u[:, :, :n_u] = grad_u_part
    value_u[:, :, :n_u] = value_u_part
    for i in range(3):
        rows = slice(n_u + 6 * i, n_u + 6 * (i + 1))
        micro[:, :, rows, i, :] = phi
        curl_p[:, rows, i, :] = curls
    return grad_u, value_u, micro, curl_p


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _skew(A):
    return 0.5 * (A - np.swapaxes(A, -1, -2))


def _trace(A):
    return np.einsum("...ii->...", A)


def _curl(grad):
    """Curl from a gradient laid out as [..., component, derivative]."""
    return np.stack(
        [grad[..., 2, 1] - grad[..., 1, 2], grad[..., 0, 2] - grad[..., 2, 0], grad[..., 1, 0] - grad[..., 0, 1]],
        axis=-1,
    )


def _micromorphic_cell_dofs(Vu, VP, cells):
    n_u = Vu.n_dofs
    ne = VP.n_dofs
    u_dofs = Vu.cell_dofs()[cells]
    p_dofs = [n_u + i * ne + VP.cell_dofs[cells] for i in range(3)]
    return np.hstack([u_dofs] + p_dofs)


def _scatter(blocks, dofs, size):
    """Sum local matrices (nc, nd, nd) into a CSR matrix."""
    nd = dofs.shape[1]
    rows = np.repeat(dofs, nd, axis=1).ravel()
    cols = np.tile(dofs, (1, nd)).ravel()
    A = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(size, size)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _scatter_vector(values, dofs, size):
    return np.bincount(dofs.ravel(), weights=values.ravel(), minlength=size)


# --- FORM SETS ---

@dataclass(frozen=True, eq=False)
class FormSet:
    """Unit-coefficient Gram matrices of every term of the micromorphic form.

    sym_e, skew_e, tr_e act on (grad u - P); sym_micro, tr_micro on P;
    curl is the Curl-Curl Gram of P; grad is the H1 seminorm Gram of u;
    mass is the block L2 Gram.
    """

    layout: BlockLayout
    sym_e: sp.csr_matrix
    skew_e: sp.csr_matrix
    tr_e: sp.csr_matrix
    sym_micro: sp.csr_matrix
    tr_micro: sp.csr_matrix
    curl: sp.csr_matrix
    grad: sp.csr_matrix
    mass: sp.csr_matrix

    def energy_terms(self, params):
        """(name, coefficient, matrix) for the six potential-energy contributions; I = 1/2 sum c x.S.x."""
        return (
            ("sym_e", 2.0 * params.mu_e, self.sym_e),
            ("skew_c", 2.0 * params.mu_c, self.skew_e),
            ("trace_e", params.lambda_e, self.tr_e),
            ("sym_micro", 2.0 * params.mu_micro, self.sym_micro),
            ("trace_micro", params.lambda_micro, self.tr_micro),
            ("curl_macro", params.mu_macro * params.L_c ** 2, self.curl),
        )


@lru_cache(maxsize=16)
def assemble_forms(Vu, VP):
    layout = block_layout(Vu, VP)
    mesh = Vu.mesh
    bary, w = tetrahedron_rule(DEFAULT_POINTS)
    chunk_size = get_settings().chunk_size
    pieces = {name: [] for name in ("sym_e", "skew_e", "tr_e", "sym_micro", "tr_micro", "curl", "grad", "mass")}
    all_dofs = []
    for cells in _chunks(mesh.n_cells, chunk_size):
        vol = mesh.cell_volumes[cells]
        wv = vol[:, None] * w[None, :]
        grad_u, value_u, micro, curl_p = _micromorphic_operators(Vu, cells, bary)
        D = grad_u - micro
        sym_D, skew_D, tr_D = _sym(D), _skew(D), _trace(D)
        sym_P, tr_P = _sym(micro), _trace(micro)
        pieces["sym_e"].append(np.einsum("cq,cqaij,cqbij->cab", wv, sym_D, sym_D))
        pieces["skew_e"].append(np.einsum("cq,cqaij,cqbij->cab", wv, skew_D, skew_D))
        pieces["tr_e"].append(np.einsum("cq,cqa,cqb->cab", wv, tr_D, tr_D))
        pieces["sym_micro"].append(np.einsum("cq,cqaij,cqbij->cab", wv, sym_P, sym_P))
        pieces["tr_micro"].append(np.einsum("cq,cqa,cqb->cab", wv, tr_P, tr_P))
        pieces["curl"].append(np.einsum("c,caij,cbij->cab", vol, curl_p, curl_p))
        pieces["grad"].append(np.einsum("cq,cqaij,cqbij->cab", wv, grad_u, grad_u))
        pieces["mass"].append(
            np.einsum("cq,cqai,cqbi->cab", wv, value_u, value_u)
            + np.einsum("cq,cqaij,cqbij->cab", wv, micro, micro)
        )
        all_dofs.append(_micromorphic_cell_dofs(Vu, VP, cells))
    dofs = np.vstack(all_dofs)
    matrices = {name: _scatter(np.concatenate(blocks), dofs, layout.size) for name, blocks in pieces.items()}
    logger.info("Assembled micromorphic forms: %d dofs, %d cells", layout.size, mesh.n_cells)
    return FormSet(layout=layout, **matrices)


def assemble_micromorphic(params, Vu, VP):
    """Stiffness K of the full bilinear form over (u, P)."""
    require_valid_params(params)
    forms = assemble_forms(Vu, VP)
    K = sp.csr_matrix(forms.mass.shape)
    for _, coef, S in forms.energy_terms(params):
        K = K + coef * S
    return K.tocsr()


def assemble_elastic(params, Vu):
    """Stiffness of 2μ_e<sym grad u, sym grad v> + λ_e<div u, div v> (linear elasticity)."""
    violations = [v for v in validate_params(params) if v in ("μ_e > 0", "2μ_e + 3λ_e > 0")]
    if violations:
        raise InvalidParametersError(violations)
    sym_g, div_g, _ = _elastic_forms(Vu)
    return (2.0 * params.mu_e * sym_g + params.lambda_e * div_g).tocsr()


def assemble_mass(Vu, VP, density=1.0):
    return density * assemble_forms(Vu, VP).mass


def assemble_system(params, Vu, VP, F=None, M=None, density=1.0):
    """Full block system for homogeneous boundary data."""
    require_valid_params(params)
    forms = assemble_forms(Vu, VP)
    K = sp.csr_matrix(forms.mass.shape)
    for _, coef, S in forms.energy_terms(params):
        K = K + coef * S
    return BlockSystem(
        stiffness=K.tocsr(),
        mass=(density * forms.mass).tocsr(),
        load=assemble_loads(F, M, Vu, VP),
        constrained=constrained_dofs(Vu, VP),
        layout=forms.layout,
    )


def is_symmetric(A, tol=1e-12):
    diff = A - A.T
    if diff.nnz == 0:
        return True
    return float(abs(diff).max()) < tol


def restrict(A, dofs):
    """Principal submatrix on the given dofs."""
    A = sp.csr_matrix(A)
    return A[dofs][:, dofs]


# --- LOADS ---

def _evaluate(f, points, shape):
    """f(points) broadcast to (n,) + shape; constant returns are allowed."""
    values = np.asarray(f(points), dtype=float)
    if values.ndim > len(shape):
        values = values.reshape((len(points),) + shape)
    return np.broadcast_to(values, (len(points),) + shape)


def assemble_loads(F: Optional[Callable], M: Optional[Callable], Vu, VP):
    """Load vector of x -> integral of <F, u> + <M, P>.

    F maps points (n, 3) to (n, 3); M maps points to (n, 3, 3). Either may be None.
    """
    layout = block_layout(Vu, VP)
    b = np.zeros(layout.size)
    if F is None and M is None:
        return b
    mesh = Vu.mesh
    bary, w = tetrahedron_rule(DEFAULT_POINTS)
    for cells in _chunks(mesh.n_cells, get_settings().chunk_size):
        wv = mesh.cell_volumes[cells][:, None] * w[None, :]
        points = np.einsum("qi,cij->cqj", bary, mesh.cell_coordinates(cells)).reshape(-1, 3)
        _, value_u, micro, _ = _micromorphic_operators(Vu, cells, bary)
        local = np.zeros(value_u.shape[:3])
        if F is not None:
            Fq = _evaluate(F, points, (3,)).reshape(len(cells), len(bary), 3)
            local += np.einsum("cqi,cqai->cqa", Fq, value_u)
        if M is not None:
            Mq = _evaluate(M, points, (3, 3)).reshape(len(cells), len(bary), 3, 3)
            local += np.einsum("cqij,cqaij->cqa", Mq, micro)
        local = np.einsum("cq,cqa->ca", wv, local)
        b += _scatter_vector(local, _micromorphic_cell_dofs(Vu, VP, cells), layout.size)
    return b


def assemble_vector_loads(F, V):
    """Load vector of v -> integral of <F, v> on a vector Lagrange space alone."""
    b = np.zeros(V.n_dofs)
    if F is None:
        return b
    mesh = V.mesh
    bary, w = tetrahedron_rule(DEFAULT_POINTS)
    for cells in _chunks(mesh.n_cells, get_settings().chunk_size):
        wv = mesh.cell_volumes[cells][:, None] * w[None, :]
        points = np.einsum("qi,cij->cqj", bary, mesh.cell_coordinates(cells)).reshape(-1, 3)
        _, value_u = _h1_operators(V, cells, bary)
        Fq = _evaluate(F, points, (V.components,)).reshape(len(cells), len(bary), V.components)
        local = np.einsum("cq,cqi,cqai->ca", wv, Fq, value_u)
        b += _scatter_vector(local, V.cell_dofs()[cells], V.n_dofs)
    return b


def assemble_modified_loads(F, M, g_lift, G_lift, g_lift_tt, G_lift_tt, params, Vu, VP):
    """Weak loads of the lifted problem: l(v) - a(lift, v) - <lift_tt, v>.

    g_lift/G_lift are the Dirichlet and tangential liftings (G as (3, n_edges)).
    The _tt arguments may be None in statics.
    """
    layout = block_layout(Vu, VP)
    lift = layout.join(g_lift, G_lift)
    b = assemble_loads(F, M, Vu, VP)
    b -= assemble_micromorphic(params, Vu, VP) @ lift
    if g_lift_tt is not None or G_lift_tt is not None:
        u_tt = np.zeros(layout.n_u) if g_lift_tt is None else g_lift_tt
        P_tt = np.zeros((3, layout.n_edges)) if G_lift_tt is None else G_lift_tt
        b -= assemble_mass(Vu, VP) @ layout.join(u_tt, P_tt)
    return b


# --- SINGLE-FIELD FORMS ---

@lru_cache(maxsize=16)
def _elastic_forms(V):
    """Unit Grams of sym grad, div and full grad for a vector H1 space."""
    mesh = V.mesh
    bary, w = tetrahedron_rule(DEFAULT_POINTS)
    sym_blocks, div_blocks, grad_blocks = [], [], []
    for cells in _chunks(mesh.n_cells, get_settings().chunk_size):
        wv = mesh.cell_volumes[cells][:, None] * w[None, :]
        grad_u, _ = _h1_operators(V, cells, bary)
        sym_g, div_g = _sym(grad_u), _trace(grad_u)
        sym_blocks.append(np.einsum("cq,cqaij,cqbij->cab", wv, sym_g, sym_g))
        div_blocks.append(np.einsum("cq,cqa,cqb->cab", wv, div_g, div_g))
        grad_blocks.append(np.einsum("cq,cqaij,cqbij->cab", wv, grad_u, grad_u))
    dofs = V.cell_dofs()
    return tuple(_scatter(np.concatenate(blocks), dofs, V.n_dofs) for blocks in (sym_blocks, div_blocks, grad_blocks))


@lru_cache(maxsize=16)
def assemble_h1_forms(V):
    """(stiffness, mass) of a Lagrange space: grad-grad and L2 Gram, all components."""
    mesh = V.mesh
    bary, w = tetrahedron_rule(DEFAULT_POINTS)
    stiff_blocks, mass_blocks = [], []
    for cells in _chunks(mesh.n_cells, get_settings().chunk_size):
        wv = mesh.cell_volumes[cells][:, None] * w[None, :]
        grad_u, value_u = _h1_operators(V, cells, bary)
        stiff_blocks.append(np.einsum("cq,cqaij,cqbij->cab", wv, grad_u, grad_u))
        mass_blocks.append(np.einsum("cq,cqai,cqbi->cab", wv, value_u, value_u))
    dofs = V.cell_dofs()
    return _scatter(np.concatenate(stiff_blocks), dofs, V.n_dofs), _scatter(np.concatenate(mass_blocks), dofs, V.n_dofs)


@lru_cache(maxsize=16)
def assemble_curl_div(W):
    """(curl-curl, div-div) Grams on a vector Lagrange space."""
    mesh = W.mesh
    bary, w = tetrahedron_rule(DEFAULT_POINTS)
    curl_blocks, div_blocks = [], []
    for cells in _chunks(mesh.n_cells, get_settings().chunk_size):
        wv = mesh.cell_volumes[cells][:, None] * w[None, :]
        grad_u, _ = _h1_operators(W, cells, bary)
        curl = _curl(grad_u)
        div = _trace(grad_u)
        curl_blocks.append(np.einsum("cq,cqai,cqbi->cab", wv, curl, curl))
        div_blocks.append(np.einsum("cq,cqa,cqb->cab", wv, div, div))
    dofs = W.cell_dofs()
    return _scatter(np.concatenate(curl_blocks), dofs, W.n_dofs), _scatter(np.concatenate(div_blocks), dofs, W.n_dofs)


def assemble_vector_gradient_coupling(W, V):
    """Matrix B[a, b] = integral of phi_a . grad psi_b for vector W and scalar V on one mesh."""
    if W.mesh is not V.mesh or V.components != 1:
        raise SpaceMismatchError("coupling needs a vector and a scalar space on one mesh")
    mesh = W.mesh
    bary, w = tetrahedron_rule(DEFAULT_POINTS)
    rows, cols, vals = [], [], []
    for cells in _chunks(mesh.n_cells, get_settings().chunk_size):
        wv = mesh.cell_volumes[cells][:, None] * w[None, :]
        _, value_w = _h1_operators(W, cells, bary)
        grad_v, _ = _h1_operators(V, cells, bary)
        local = np.einsum("cq,cqai,cqbi->cab", wv, value_w, grad_v[:, :, :, 0, :])
        dw, dv = W.cell_dofs()[cells], V.cell_dofs()[cells]
        rows.append(np.repeat(dw, dv.shape[1], axis=1).ravel())
        cols.append(np.tile(dv, (1, dw.shape[1])).ravel())
        vals.append(local.ravel())
    B = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(W.n_dofs, V.n_dofs)
    ).tocsr()
    B.sum_duplicates()
    return B


@lru_cache(maxsize=16)
def assemble_curl_coupling(VP, W):
    """Matrix C[e, a] = integral of N_e . curl phi_a for an edge space and a vector Lagrange space."""
    if VP.mesh is not W.mesh or W.components != 3:
        raise SpaceMismatchError("curl coupling needs an edge space and a 3-component space on one mesh")
    mesh = W.mesh
    bary, w = tetrahedron_rule(DEFAULT_POINTS)
    rows, cols, vals = [], [], []
    for cells in _chunks(mesh.n_cells, get_settings().chunk_size):
        wv = mesh.cell_volumes[cells][:, None] * w[None, :]
        grad_w, _ = _h1_operators(W, cells, bary)
        phi = whitney_values(mesh.cell_gradients[cells], VP.cell_signs[cells], bary)
        local = np.einsum("cq,cqei,cqai->cea", wv, phi, _curl(grad_w))
        de, dw = VP.cell_dofs[cells], W.cell_dofs()[cells]
        rows.append(np.repeat(de, dw.shape[1], axis=1).ravel())
        cols.append(np.tile(dw, (1, de.shape[1])).ravel())
        vals.append(local.ravel())
    C = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(VP.n_dofs, W.n_dofs)
    ).tocsr()
    C.sum_duplicates()
    return C


@lru_cache(maxsize=16)
def assemble_hcurl_forms(VP):
    """(mass, curl-curl) Grams of a single edge-element field."""
    mesh = VP.mesh
    bary, w = tetrahedron_rule(DEFAULT_POINTS)
    mass_blocks, curl_blocks = [], []
    for cells in _chunks(mesh.n_cells, get_settings().chunk_size):
        vol = mesh.cell_volumes[cells]
        grads = mesh.cell_gradients[cells]
        signs = VP.cell_signs[cells]
        phi = whitney_values(grads, signs, bary)
        curls = whitney_curls(grads, signs)
        mass_blocks.append(np.einsum("cq,cqai,cqbi->cab", vol[:, None] * w[None, :], phi, phi))
        curl_blocks.append(np.einsum("c,cai,cbi->cab", vol, curls, curls))
    dofs = VP.cell_dofs
    return _scatter(np.concatenate(mass_blocks), dofs, VP.n_dofs), _scatter(np.concatenate(curl_blocks), dofs, VP.n_dofs)
