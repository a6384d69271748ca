"""
Numerical checks of the structural inequalities and of the discretization.

Constants are smallest generalized eigenvalues on the constrained spaces;
manufactured solutions give error tables with least-squares orders;
the extension suite measures trace recovery and the weak residuals of the
constructive lifting over an ensemble of boundary data. All boundary norms
are boundary-L2 surrogates of the H^{-1/2} ones.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from assembly import MaterialParams, assemble_forms, assemble_micromorphic, free_dofs, restrict
from dynamic_solver import DynamicRun, InitialData, run_dynamic
from errors import EigenSolverError
from extension import boundary_faces, constructive_extension
from mesh import BoxSpec, build_box_mesh
from quadrature import ORACLE_POINTS, tetrahedron_rule, triangle_rule
from settings import get_settings
from spaces import (
    H1VectorSpace,
    HcurlSpace,
    TangentialTraceData,
    cell_curl,
    evaluate_h1,
    evaluate_hcurl,
    interpolate_h1,
    interpolate_hcurl,
    tangential_trace,
    trace_moments,
)
from static_solver import StaticProblem, solve_static

logger = logging.getLogger(__name__)

KORN = "korn_c"
COERCIVITY = "coercivity_C"
C1_STAR = "extension_c1_star"
C1 = "extension_c1"
SURROGATE_NOTE = "boundary norms are L2(boundary) surrogates of H^-1/2 norms"


@dataclass
class ConstantReport:
    """One measured constant across mesh levels."""

    name: str
    levels: List[int] = field(default_factory=list)
    values: List[float] = field(default_factory=list)

    def add(self, level, value):
        self.levels.append(level)
        self.values.append(float(value))

    @property
    def spread(self):
        """(max - min) / max over the levels."""
        if not self.values:
            return 0.0
        hi, lo = max(self.values), min(self.values)
        return (hi - lo) / hi if hi > 0 else 0.0

    def rows(self):
        return [(self.name, level, value) for level, value in zip(self.levels, self.values)]


def smallest_generalized_eigenvalue(A, B, settings=None):
    """Smallest λ of A x = λ B x for symmetric A and SPD B."""
    settings = settings or get_settings()
    n = A.shape[0]
    try:
        if n <= settings.dense_threshold:
            values = la.eigh(A.toarray(), B.toarray(), eigvals_only=True, subset_by_index=[0, 0])
            return float(values[0])
        values = spla.eigsh(sp.csc_matrix(A), k=1, M=sp.csc_matrix(B), sigma=0.0, which="LM", return_eigenvectors=False)
        return float(np.min(values))
    except (la.LinAlgError, spla.ArpackError, spla.ArpackNoConvergence) as exc:
        raise EigenSolverError(f"generalized eigenproblem of size {n} failed: {exc}") from exc


def _micro_blocks(mesh):
    """Unit forms restricted to the P block: (sym P, Curl P, L2) Grams and the interior P dofs."""
    Vu = H1VectorSpace(mesh, 1)
    VP = HcurlSpace(mesh)
    forms = assemble_forms(Vu, VP)
    layout = forms.layout
    p_all = np.arange(layout.n_u, layout.size)
    p_free = np.concatenate([layout.n_u + i * layout.n_edges + VP.interior_dofs for i in range(3)])
    return forms, VP, p_all, p_free


def korn_constant(mesh, settings=None):
    """λ_min of (sym P + Curl P Grams) against (L2 + Curl P Grams) on H0(curl) rows (C = 1/λ_min)."""
    forms, _, _, p_free = _micro_blocks(mesh)
    A = restrict(forms.sym_micro + forms.curl, p_free)
    B = restrict(forms.mass + forms.curl, p_free)
    value = smallest_generalized_eigenvalue(A, B, settings)
    logger.info("Korn constant on %d dofs: %.6e", len(p_free), value)
    return value


def unconstrained_skew_quotient(mesh):
    """Rayleigh quotient of a constant skew-symmetric P without boundary constraints (≈ 0)."""
    forms, VP, p_all, _ = _micro_blocks(mesh)
    S = np.array([[0.0, 1.0, -2.0], [-1.0, 0.0, 0.5], [2.0, -0.5, 0.0]])
    x = np.concatenate([interpolate_hcurl(VP, lambda p, row=row: np.broadcast_to(row, (len(p), 3))) for row in S])
    A = restrict(forms.sym_micro + forms.curl, p_all)
    B = restrict(forms.mass + forms.curl, p_all)
    return float((x @ (A @ x)) / (x @ (B @ x)))


def coercivity_constant(params, mesh, u_degree=1, settings=None):
    """λ_min of K against the Gram of ||∇u||² + ||P||² + ||Curl P||² on the constrained dofs."""
    Vu = H1VectorSpace(mesh, u_degree)
    VP = HcurlSpace(mesh)
    forms = assemble_forms(Vu, VP)
    K = assemble_micromorphic(params, Vu, VP)
    p_mask = np.zeros(forms.layout.size)
    p_mask[forms.layout.n_u:] = 1.0
    D = sp.diags(p_mask)
    N = forms.grad + D @ forms.mass @ D + forms.curl
    free = free_dofs(Vu, VP)
    value = smallest_generalized_eigenvalue(restrict(K, free), restrict(N, free), settings)
    logger.info("Coercivity constant (μ_c=%g) on %d dofs: %.6e", params.mu_c, len(free), value)
    return value


# --- ERROR NORMS ---

def _oracle_points(mesh):
    bary, w = tetrahedron_rule(ORACLE_POINTS)
    points = np.einsum("qi,cij->cqj", bary, mesh.cell_coordinates())
    return bary, mesh.cell_volumes[:, None] * w[None, :], points


def l2_error_h1(Vu, coeffs, exact):
    """||u_h - u|| with exact(points (n, 3)) -> (n, components)."""
    bary, wv, points = _oracle_points(Vu.mesh)
    approx = evaluate_h1(Vu, coeffs, bary)
    ref = np.asarray(exact(points.reshape(-1, 3)), dtype=float).reshape(approx.shape)
    return float(np.sqrt(np.einsum("cq,cqk->", wv, (approx - ref) ** 2)))


def l2_error_hcurl(VP, rows, exact):
    """||P_h - P|| over the three rows; exact(points) -> (n, 3, 3)."""
    bary, wv, points = _oracle_points(VP.mesh)
    ref = np.asarray(exact(points.reshape(-1, 3)), dtype=float).reshape(points.shape[:2] + (3, 3))
    total = 0.0
    for i in range(3):
        approx = evaluate_hcurl(VP, rows[i], bary)
        total += np.einsum("cq,cqk->", wv, (approx - ref[:, :, i, :]) ** 2)
    return float(np.sqrt(total))


def l2_error_curl(VP, rows, exact_curl):
    """||Curl P_h - Curl P||; exact_curl(points) -> (n, 3, 3) row-wise curls."""
    bary, wv, points = _oracle_points(VP.mesh)
    ref = np.asarray(exact_curl(points.reshape(-1, 3)), dtype=float).reshape(points.shape[:2] + (3, 3))
    total = 0.0
    for i in range(3):
        approx = cell_curl(VP, rows[i])[:, None, :]
        total += np.einsum("cq,cqk->", wv, (approx - ref[:, :, i, :]) ** 2)
    return float(np.sqrt(total))


def fitted_order(h, errors):
    """Least-squares slope of log(error) against log(h); nan when any error vanishes."""
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(h) < 2 or np.any(errors <= 0):
        return float("nan")
    slope, _ = np.polyfit(np.log(h), np.log(errors), 1)
    return float(slope)


# --- MANUFACTURED CONVERGENCE ---

@dataclass
class ConvergenceTable:
    case: str
    levels: List[int]
    h: List[float]
    errors: Dict[str, List[float]]
    orders: Dict[str, float]
    residuals: List[float]

    def rows(self):
        for k, level in enumerate(self.levels):
            yield (level, self.h[k], self.errors["u"][k], self.errors["P"][k], self.errors["curl_P"][k], self.residuals[k])


def _solve_level(fields, params, mesh, u_degree, boundary, lifting, dynamics):
    Vu = H1VectorSpace(mesh, u_degree)
    VP = HcurlSpace(mesh)
    bdata = fields.boundary_data(boundary)
    if not fields.time_dependent:
        F, M = fields.static_loads()
        sol = solve_static(StaticProblem(Vu, VP, params, F, M, bdata, lifting))
        return Vu, VP, sol.u, sol.P, 0.0, sol.residual
    t_end, dt, integrator = dynamics
    initial = InitialData(
        interpolate_h1(Vu, lambda p: fields.u(p, 0.0)),
        interpolate_h1(Vu, lambda p: fields.u_t(p, 0.0)),
        interpolate_rows(VP, lambda p: fields.P(p, 0.0)),
        interpolate_rows(VP, lambda p: fields.P_t(p, 0.0)),
    )
    run = DynamicRun(
        Vu, VP, initial, t_end, dt, params, fields.F, fields.M, bdata,
        integrator=integrator, output_every=max(1, int(round(t_end / dt))), lifting=lifting,
    )
    final = run_dynamic(run).final
    return Vu, VP, final.u, final.P, t_end, 0.0


def interpolate_rows(VP, P):
    return np.stack([interpolate_hcurl(VP, lambda p, i=i: P(p)[:, i, :]) for i in range(3)])


def manufactured_convergence(
    fields,
    levels=(2, 4, 8),
    params=None,
    u_degree=1,
    boundary=None,
    lifting="direct",
    dynamics=(0.5, 0.05, "implicit-midpoint"),
    length=1.0,
):
    """Errors of u, P and Curl P on unit boxes with nx = ny = nz = level, and their fitted orders.

    fields must come from manufactured.build_fields for the same params; the
    finite-difference oracle already ran there.
    """
    params = params or MaterialParams()
    h, residuals = [], []
    errors = {"u": [], "P": [], "curl_P": []}
    for level in levels:
        mesh = build_box_mesh(BoxSpec.cube(level, length))
        Vu, VP, u, P, t, residual = _solve_level(fields, params, mesh, u_degree, boundary, lifting, dynamics)
        errors["u"].append(l2_error_h1(Vu, u, lambda p: fields.u(p, t)))
        errors["P"].append(l2_error_hcurl(VP, P, lambda p: fields.P(p, t)))
        errors["curl_P"].append(l2_error_curl(VP, P, lambda p: fields.curl_P(p, t)))
        h.append(length / level)
        residuals.append(residual)
        logger.info(
            "Case %s level %d: |u err| %.3e  |P err| %.3e  |Curl P err| %.3e",
            fields.case.name, level, errors["u"][-1], errors["P"][-1], errors["curl_P"][-1],
        )
    orders = {name: fitted_order(h, values) for name, values in errors.items()}
    return ConvergenceTable(fields.case.name, list(levels), h, errors, orders, residuals)


# --- EXTENSION PROPERTY SUITE ---

SMOOTH_TRACE_FIELDS = {
    "gradient_xyz": lambda p: np.stack([p[:, 1] * p[:, 2], p[:, 0] * p[:, 2], p[:, 0] * p[:, 1]], axis=1),
    "rotation_z": lambda p: np.stack([-p[:, 1], p[:, 0], np.zeros(len(p))], axis=1),
}
SUITE_METRICS = ("field_trace_error", "curl_curl_residual", "div_residual")


@dataclass
class ExtensionSuiteReport:
    rows: List[dict]
    constants: Dict[str, ConstantReport]
    smooth_decreasing: bool
    note: str = SURROGATE_NOTE


def trace_field_error(VP, R, exact) -> float:
    """Boundary-L2 distance between the tangential trace of R and that of exact(points) -> (n, 3)."""
    faces = boundary_faces(VP)
    bary, w = triangle_rule(ORACLE_POINTS)
    approx = faces.reconstruct(tangential_trace(VP, R), bary)
    ref = np.asarray(exact(faces.points(bary).reshape(-1, 3)), dtype=float).reshape(approx.shape)
    n = faces.normals[:, None, :]
    diff = approx - (ref - np.sum(ref * n, axis=-1, keepdims=True) * n)
    return float(np.sqrt(np.einsum("f,q,fqj,fqj->", faces.areas, w, diff, diff)))


def ensemble_traces(VP, ensemble_size, rng) -> List[Tuple[str, str, TangentialTraceData, Optional[Callable]]]:
    """Named boundary data: zero, the smooth fields, then random edge moments.

    Each member carries the field its moments came from, or None when the
    moments are the whole datum.
    """
    members = [("zero", "zero", TangentialTraceData.zeros(VP), None)]
    for name, fn in SMOOTH_TRACE_FIELDS.items():
        members.append((name, "smooth", trace_moments(VP, fn), fn))
    lengths = np.linalg.norm(VP.mesh.edge_vectors(VP.boundary_dofs), axis=1)
    for k in range(max(0, ensemble_size - len(members))):
        values = lengths * rng.standard_normal(len(lengths))
        members.append((f"random_{k}", "random", TangentialTraceData(VP, values), None))
    return members[: max(ensemble_size, 1 + len(SMOOTH_TRACE_FIELDS))]


def decreases(values, floor) -> bool:
    """Strictly decreasing, where a value already at the floor counts as converged."""
    return all(b < a or b <= floor for a, b in zip(values, values[1:]))


def extension_property_suite(levels=(2, 4, 8), ensemble_size=5, seed=0, length=1.0) -> ExtensionSuiteReport:
    """Constructive extension metrics for every ensemble member on every level."""
    rng = np.random.default_rng(seed)
    rows = []
    constants = {C1_STAR: ConstantReport(C1_STAR), C1: ConstantReport(C1)}
    for level in levels:
        VP = HcurlSpace(build_box_mesh(BoxSpec.cube(level, length)))
        worst = {C1_STAR: 0.0, C1: 0.0}
        for name, kind, trace, source in ensemble_traces(VP, ensemble_size, rng):
            R, report = constructive_extension(trace)
            field_error = report.trace_error if source is None else trace_field_error(VP, R, source)
            rows.append({"level": level, "member": name, "kind": kind, **report.as_dict(), "field_trace_error": field_error})
            worst[C1_STAR] = max(worst[C1_STAR], report.c1_star_ratio)
            worst[C1] = max(worst[C1], report.c1_ratio)
        for key, value in worst.items():
            constants[key].add(level, value)
    floor = 10.0 * get_settings().rtol
    smooth_decreasing = True
    for name in SMOOTH_TRACE_FIELDS:
        series = [r for r in rows if r["member"] == name]
        for metric in SUITE_METRICS:
            values = [r[metric] for r in series]
            if not decreases(values, floor):
                smooth_decreasing = False
                logger.warning("%s of %s does not decrease under refinement: %s", metric, name, values)
    return ExtensionSuiteReport(rows, constants, smooth_decreasing)


def constant_reports(levels=(2, 3, 4), params=None):
    """Korn and coercivity constants across levels."""
    params = params or MaterialParams()
    korn = ConstantReport(KORN)
    coercivity = ConstantReport(COERCIVITY)
    for level in levels:
        mesh = build_box_mesh(BoxSpec.cube(level))
        korn.add(level, korn_constant(mesh))
        coercivity.add(level, coercivity_constant(params, mesh))
    return korn, coercivity
