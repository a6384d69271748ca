"""
Static equilibrium of the relaxed micromorphic body, plus the linear elasticity baseline.

Non-homogeneous boundary data are handled by lifting: the solver finds
(ũ, P̃) with homogeneous traces for the modified loads and returns
u = ũ + g̃, P = P̃ + G̃. Constraints are eliminated, never penalized.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from assembly import (
    MaterialParams,
    assemble_elastic,
    assemble_micromorphic,
    assemble_modified_loads,
    assemble_system,
    assemble_vector_loads,
    block_layout,
    free_dofs,
    require_valid_params,
    restrict,
)
from errors import BoundaryDataError
from extension import LIFTING_PATHS, BoundaryData, DirichletData, lift_boundary_data, lift_dirichlet
from linear_solvers import relative_residual, solve_spd
from settings import get_settings

logger = logging.getLogger(__name__)


@dataclass
class StaticProblem:
    """Spaces, moduli, loads and boundary data of one static solve.

    F maps points (n, 3) to (n, 3), M maps points to (n, 3, 3); None means zero.
    """

    Vu: object
    VP: object
    params: MaterialParams = field(default_factory=MaterialParams)
    F: Optional[Callable] = None
    M: Optional[Callable] = None
    boundary: BoundaryData = field(default_factory=BoundaryData)
    lifting: str = "direct"
    settings: Optional[object] = None

    def __post_init__(self):
        require_valid_params(self.params)
        if self.lifting not in LIFTING_PATHS:
            raise BoundaryDataError(f"unknown lifting path {self.lifting!r}; expected one of {LIFTING_PATHS}")
        block_layout(self.Vu, self.VP)

    @property
    def homogeneous(self) -> bool:
        return self.boundary.homogeneous


@dataclass
class StaticSolution:
    u: np.ndarray
    P: np.ndarray  # (3, n_edges)
    energy: float
    residual: float
    iterations: int
    method: str
    boundary_error: float = 0.0

    def vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.P.reshape(-1)])


def _solve_reduced(K, b, free, settings, x0=None):
    K_ff = restrict(K, free)
    b_f = b[free]
    x_f, info = solve_spd(K_ff, b_f, x0=None if x0 is None else x0[free], settings=settings)
    residual = relative_residual(K_ff, x_f, b_f)
    return x_f, info, residual


def solve_static_homogeneous(prob: StaticProblem, x0: Optional[np.ndarray] = None) -> StaticSolution:
    """Galerkin solution on the constrained dofs for homogeneous boundary data."""
    if not prob.homogeneous:
        raise BoundaryDataError("non-homogeneous boundary data; use solve_static")
    settings = prob.settings or get_settings()
    system = assemble_system(prob.params, prob.Vu, prob.VP, prob.F, prob.M)
    K, free = system.stiffness, system.free
    x = np.zeros(system.layout.size)
    x[free], info, residual = _solve_reduced(K, system.load, free, settings, x0)
    u, P = system.layout.split(x)
    logger.info("Homogeneous static solve: %d free dofs, %s, residual %.2e", len(free), info.method, residual)
    return StaticSolution(u.copy(), P.copy(), 0.5 * float(x @ (K @ x)), residual, info.iterations, info.method)


def solve_static(prob: StaticProblem, x0: Optional[np.ndarray] = None) -> StaticSolution:
    """Lifted solve for arbitrary boundary data; returns the full (u, P)."""
    if prob.homogeneous:
        return solve_static_homogeneous(prob, x0)
    settings = prob.settings or get_settings()
    Vu, VP = prob.Vu, prob.VP
    layout = block_layout(Vu, VP)
    g_lift, G_lift = lift_boundary_data(prob.boundary, Vu, VP, path=prob.lifting)
    lift = layout.join(g_lift, G_lift)
    b = assemble_modified_loads(prob.F, prob.M, g_lift, G_lift, None, None, prob.params, Vu, VP)
    K = assemble_micromorphic(prob.params, Vu, VP)
    free = free_dofs(Vu, VP)
    x = lift.copy()
    x_f, info, residual = _solve_reduced(K, b, free, settings, x0)
    x[free] += x_f
    u, P = layout.split(x)
    error = boundary_mismatch(prob.boundary, Vu, VP, u, P)
    logger.info(
        "Lifted static solve (%s lifting): %d free dofs, residual %.2e, boundary mismatch %.2e",
        prob.lifting, len(free), residual, error,
    )
    return StaticSolution(u.copy(), P.copy(), 0.5 * float(x @ (K @ x)), residual, info.iterations, info.method, error)


def boundary_mismatch(bdata, Vu, VP, u, P, t=0.0) -> float:
    """Max deviation of the boundary dofs of (u, P) from the data."""
    g = bdata.dirichlet.sample(Vu.node_coordinates[Vu.boundary_nodes], t)
    nodal = Vu.as_nodal(u)[Vu.boundary_nodes]
    error = float(np.max(np.abs(nodal - g), initial=0.0))
    for i, trace in enumerate(bdata.tangential.rows(VP, t)):
        error = max(error, float(np.max(np.abs(P[i][VP.boundary_dofs] - trace.values), initial=0.0)))
    return error


@dataclass
class ElasticSolution:
    u: np.ndarray
    energy: float
    residual: float
    iterations: int
    method: str


def solve_elastic_static(params, Vu, F=None, g=None, settings=None) -> ElasticSolution:
    """Linear elasticity with Dirichlet data g (DirichletData) lifted harmonically."""
    settings = settings or get_settings()
    g = g or DirichletData()
    K = assemble_elastic(params, Vu)
    g_lift = lift_dirichlet(g, Vu)
    b = assemble_vector_loads(F, Vu) - K @ g_lift
    free = np.setdiff1d(np.arange(Vu.n_dofs), Vu.boundary_dofs)
    u = g_lift.copy()
    u_f, info, residual = _solve_reduced(K, b, free, settings)
    u[free] += u_f
    logger.info("Elastic static solve: %d free dofs, residual %.2e", len(free), residual)
    return ElasticSolution(u, 0.5 * float(u @ (K @ u)), residual, info.iterations, info.method)
