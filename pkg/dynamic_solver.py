"""
Implicit time integration of M x'' + K x = b(t) for the lifted unknown.

The boundary data are lifted at every time the scheme needs, together with
the lifting of their analytic second time derivative; the integrator only
ever sees homogeneous constraints.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from assembly import (
    MaterialParams,
    MicromorphicState,
    _elastic_forms,
    assemble_elastic,
    assemble_forms,
    assemble_h1_forms,
    assemble_loads,
    assemble_micromorphic,
    assemble_vector_loads,
    block_layout,
    free_dofs,
    require_valid_params,
    restrict,
)
from errors import CompatibilityError, InvalidSpecError, SolverError, SpaceMismatchError
from extension import LIFTING_PATHS, BoundaryData, lift_boundary_data, lift_dirichlet
from linear_solvers import SpdSolver
from settings import get_settings

logger = logging.getLogger(__name__)

INTEGRATORS = ("implicit-midpoint", "newmark")
MODELS = ("micromorphic", "elastic")
# Newmark average-acceleration constants
NEWMARK_BETA = 0.25
NEWMARK_GAMMA = 0.5
STEP_TOLERANCE = 1e-9


def step_count(t_end: float, dt: float) -> int:
    """Number of steps of size dt that land on t_end; raises InvalidSpecError otherwise."""
    if not dt > 0 or not t_end > 0:
        raise InvalidSpecError(f"dt and t_end must be positive, got dt={dt}, t_end={t_end}")
    steps = int(round(t_end / dt))
    if steps < 1 or abs(steps * dt - t_end) > STEP_TOLERANCE * t_end:
        raise InvalidSpecError(f"t_end={t_end} is not a whole number of steps of dt={dt}")
    return steps


@dataclass
class InitialData:
    """Positions and velocities at t = 0; P rows shaped (3, n_edges)."""

    u0: np.ndarray
    u1: np.ndarray
    P0: Optional[np.ndarray] = None
    P1: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, Vu, VP) -> "InitialData":
        return cls(np.zeros(Vu.n_dofs), np.zeros(Vu.n_dofs), np.zeros((3, VP.n_dofs)), np.zeros((3, VP.n_dofs)))

    def check(self, Vu, VP, model="micromorphic") -> None:
        for name in ("u0", "u1"):
            if np.shape(getattr(self, name)) != (Vu.n_dofs,):
                raise SpaceMismatchError(f"{name} has shape {np.shape(getattr(self, name))}, expected {(Vu.n_dofs,)}")
        if model == "micromorphic":
            for name in ("P0", "P1"):
                if np.shape(getattr(self, name)) != (3, VP.n_dofs):
                    raise SpaceMismatchError(
                        f"{name} has shape {np.shape(getattr(self, name))}, expected {(3, VP.n_dofs)}"
                    )


@dataclass
class DynamicRun:
    """One time-integration job. Loads take (points, t)."""

    Vu: object
    VP: object
    initial: InitialData
    t_end: float
    dt: float
    params: MaterialParams = field(default_factory=MaterialParams)
    F: Optional[Callable] = None
    M: Optional[Callable] = None
    boundary: BoundaryData = field(default_factory=BoundaryData)
    integrator: str = "implicit-midpoint"
    output_every: int = 1
    lifting: str = "direct"
    model: str = "micromorphic"
    settings: Optional[object] = None

    def __post_init__(self):
        step_count(self.t_end, self.dt)
        if self.integrator not in INTEGRATORS:
            raise InvalidSpecError(f"unknown integrator {self.integrator!r}; expected one of {INTEGRATORS}")
        if self.model not in MODELS:
            raise InvalidSpecError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.lifting not in LIFTING_PATHS:
            raise InvalidSpecError(f"unknown lifting path {self.lifting!r}")
        if self.output_every < 1:
            raise InvalidSpecError("output_every must be at least 1")
        if self.model == "micromorphic":
            require_valid_params(self.params)
        self.initial.check(self.Vu, self.VP, self.model)

    @property
    def n_steps(self) -> int:
        return step_count(self.t_end, self.dt)


@dataclass
class EnergyRecord:
    time: float
    kinetic: float
    terms: Dict[str, float]
    potential: float
    total: float


@dataclass
class CompatibilityReport:
    u_mismatch: float
    u_t_mismatch: float
    P_mismatch: float
    P_t_mismatch: float
    tol: float = 1e-10

    @property
    def max_mismatch(self) -> float:
        return max(self.u_mismatch, self.u_t_mismatch, self.P_mismatch, self.P_t_mismatch)

    @property
    def passed(self) -> bool:
        return self.max_mismatch < self.tol


@dataclass
class DynamicResult:
    times: List[float]
    states: List[MicromorphicState]
    energies: List[EnergyRecord]

    @property
    def final(self) -> MicromorphicState:
        return self.states[-1]


def _max_abs(a):
    return float(np.max(np.abs(a), initial=0.0))


def check_compatibility(init, bdata, Vu, VP, t=0.0, tol=1e-10) -> CompatibilityReport:
    """Mismatch of the initial data against g, g_t, G and G_t on the boundary dofs."""
    points = Vu.node_coordinates[Vu.boundary_nodes]
    u_mis = _max_abs(Vu.as_nodal(init.u0)[Vu.boundary_nodes] - bdata.dirichlet.sample(points, t, 0))
    u_t_mis = _max_abs(Vu.as_nodal(init.u1)[Vu.boundary_nodes] - bdata.dirichlet.sample(points, t, 1))
    P_mis = P_t_mis = 0.0
    if init.P0 is not None:
        b = VP.boundary_dofs
        rows = bdata.tangential.rows(VP, t, 0)
        rows_t = bdata.tangential.rows(VP, t, 1)
        P_mis = max(_max_abs(init.P0[i][b] - rows[i].values) for i in range(3))
        P_t_mis = max(_max_abs(init.P1[i][b] - rows_t[i].values) for i in range(3))
    return CompatibilityReport(u_mis, u_t_mis, P_mis, P_t_mis, tol)


def energy(state, params, Vu, VP, time=0.0) -> EnergyRecord:
    """Kinetic energy and the six potential-energy contributions of a state."""
    forms = assemble_forms(Vu, VP)
    layout = forms.layout
    x = state.position(layout)
    v = state.velocity(layout)
    terms = {name: 0.5 * coef * float(x @ (S @ x)) for name, coef, S in forms.energy_terms(params)}
    kinetic = 0.5 * float(v @ (forms.mass @ v))
    potential = sum(terms.values())
    return EnergyRecord(time, kinetic, terms, potential, kinetic + potential)


def elastic_energy(u, u_t, params, Vu, time=0.0) -> EnergyRecord:
    sym_g, div_g, _ = _elastic_forms(Vu)
    _, mass = assemble_h1_forms(Vu)
    terms = {
        "sym_e": params.mu_e * float(u @ (sym_g @ u)),
        "trace_e": 0.5 * params.lambda_e * float(u @ (div_g @ u)),
    }
    kinetic = 0.5 * float(u_t @ (mass @ u_t))
    potential = sum(terms.values())
    return EnergyRecord(time, kinetic, terms, potential, kinetic + potential)


class _Model:
    """Operators, loads and liftings of the system being integrated."""

    def __init__(self, run):
        self.run = run
        Vu, VP = run.Vu, run.VP
        if run.model == "micromorphic":
            self.layout = block_layout(Vu, VP)
            self.K = assemble_micromorphic(run.params, Vu, VP)
            self.M = assemble_forms(Vu, VP).mass
            self.free = free_dofs(Vu, VP)
        else:
            self.layout = None
            self.K = assemble_elastic(run.params, Vu)
            _, self.M = assemble_h1_forms(Vu)
            self.free = np.setdiff1d(np.arange(Vu.n_dofs), Vu.boundary_dofs)
        self.K_ff = restrict(self.K, self.free)
        self.M_ff = restrict(self.M, self.free)

    def lift(self, t, derivative=0):
        run = self.run
        if run.boundary.homogeneous:
            return np.zeros(self.K.shape[0])
        if self.layout is None:
            return lift_dirichlet(run.boundary.dirichlet, run.Vu, t, derivative)
        g_lift, G_lift = lift_boundary_data(run.boundary, run.Vu, run.VP, t, derivative, run.lifting)
        return self.layout.join(g_lift, G_lift)

    def load(self, t):
        """Modified load of the lifted problem on the free dofs."""
        run = self.run
        F = None if run.F is None else (lambda p: run.F(p, t))
        if self.layout is None:
            b = assemble_vector_loads(F, run.Vu)
        else:
            M = None if run.M is None else (lambda p: run.M(p, t))
            b = assemble_loads(F, M, run.Vu, run.VP)
        if not run.boundary.homogeneous:
            b = b - self.K @ self.lift(t) - self.M @ self.lift(t, 2)
        return b[self.free]

    def initial_vectors(self):
        init = self.run.initial
        if self.layout is None:
            return np.asarray(init.u0, dtype=float), np.asarray(init.u1, dtype=float)
        return self.layout.join(init.u0, init.P0), self.layout.join(init.u1, init.P1)

    def state(self, x, v):
        if self.layout is None:
            return MicromorphicState(x.copy(), np.zeros((3, 0)), v.copy(), np.zeros((3, 0)))
        return MicromorphicState.from_vectors(self.layout, x, v)

    def energy(self, x, v, t):
        run = self.run
        if self.layout is None:
            return elastic_energy(x, v, run.params, run.Vu, t)
        return energy(self.state(x, v), run.params, run.Vu, run.VP, t)


def _midpoint_stepper(model, dt, settings):
    solver = SpdSolver(model.M_ff + (dt * dt / 4.0) * model.K_ff, settings)
    K_ff = model.K_ff

    def step(x, v, a, t):
        b_mid = model.load(t + 0.5 * dt)
        dv = solver.solve(dt * (b_mid - K_ff @ (x + 0.5 * dt * v)))
        x_new = x + dt * v + 0.5 * dt * dv
        return x_new, v + dv, a

    return step


def _newmark_stepper(model, dt, settings):
    beta, gamma = NEWMARK_BETA, NEWMARK_GAMMA
    solver = SpdSolver(model.M_ff + (beta * dt * dt) * model.K_ff, settings)
    K_ff = model.K_ff

    def step(x, v, a, t):
        predictor = x + dt * v + dt * dt * (0.5 - beta) * a
        a_new = solver.solve(model.load(t + dt) - K_ff @ predictor)
        x_new = predictor + beta * dt * dt * a_new
        v_new = v + dt * ((1.0 - gamma) * a + gamma * a_new)
        return x_new, v_new, a_new

    return step


def run_dynamic(run: DynamicRun) -> DynamicResult:
    """Integrate from 0 to t_end; states and energies are recorded every output_every steps."""
    settings = run.settings or get_settings()
    init = run.initial
    if run.model == "micromorphic":
        report = check_compatibility(init, run.boundary, run.Vu, run.VP)
    else:
        report = check_compatibility(InitialData(init.u0, init.u1), run.boundary, run.Vu, run.VP)
    if not report.passed:
        raise CompatibilityError(report)

    model = _Model(run)
    free = model.free
    dt = run.dt
    x0, v0 = model.initial_vectors()
    x = (x0 - model.lift(0.0))[free]
    v = (v0 - model.lift(0.0, 1))[free]
    a = np.zeros_like(x)
    if run.integrator == "newmark":
        a = SpdSolver(model.M_ff, settings).solve(model.load(0.0) - model.K_ff @ x)
        step = _newmark_stepper(model, dt, settings)
    else:
        step = _midpoint_stepper(model, dt, settings)

    def reconstruct(t):
        full_x = model.lift(t)
        full_v = model.lift(t, 1)
        full_x[free] += x
        full_v[free] += v
        return full_x, full_v

    result = DynamicResult([], [], [])

    def record(t):
        full_x, full_v = reconstruct(t)
        result.times.append(t)
        result.states.append(model.state(full_x, full_v))
        result.energies.append(model.energy(full_x, full_v, t))

    record(0.0)
    n_steps = run.n_steps
    for n in range(n_steps):
        t = n * dt
        try:
            x, v, a = step(x, v, a, t)
        except SolverError as exc:
            raise SolverError(f"time step {n + 1}: {exc}", residual=exc.residual) from exc
        if (n + 1) % run.output_every == 0 or n + 1 == n_steps:
            record((n + 1) * dt)
    logger.info(
        "Integrated %d steps with %s (dt=%g): energy %.6e -> %.6e",
        n_steps, run.integrator, dt, result.energies[0].total, result.energies[-1].total,
    )
    return result
