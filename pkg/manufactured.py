"""
Manufactured solutions.

Each case fixes (u*, P*) symbolically; the loads F, M follow by applying the
strong operator with sympy:

    F = u*_tt - Div σ_e
    M = P*_tt - σ_e + σ_micro + μ_macro L_c² Curl Curl P*

with σ_e = 2μ_e sym(∇u - P) + 2μ_c skew(∇u - P) + λ_e tr(∇u - P) 1 and
σ_micro = 2μ_micro sym P + λ_micro tr P 1. Every case is checked against a
finite-difference evaluation of the same operator before use.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import sympy as sy
from sympy.core.function import AppliedUndef

from errors import ManufacturedCaseError
from extension import BoundaryData, DirichletData, TangentialData

logger = logging.getLogger(__name__)

X, Y, Z, T = sy.symbols("x y z t", real=True)
COORDS = (X, Y, Z)
BOUNDARY_MODES = ("case", "coupled", "homogeneous")

# Finite-difference oracle: step and accepted relative residual
FD_STEP = 1e-4
FD_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ManufacturedCase:
    """Symbolic (u*, P*) as strings in x, y, z, t; P None means P* = ∇u*."""

    name: str
    u: Tuple[str, str, str]
    P: Optional[Tuple[str, ...]] = None
    default_boundary: str = "case"
    description: str = ""

    def expressions(self):
        local = {"x": X, "y": Y, "z": Z, "t": T}
        try:
            u = sy.Matrix([sy.sympify(e, locals=local) for e in self.u])
            if self.P is None:
                P = u.jacobian(COORDS)
            else:
                P = sy.Matrix(3, 3, [sy.sympify(e, locals=local) for e in self.P])
        except (sy.SympifyError, SyntaxError, TypeError, ValueError, AttributeError) as exc:
            raise ManufacturedCaseError(f"case {self.name!r}: cannot parse expression ({exc})") from exc
        undefined = u.atoms(AppliedUndef) | P.atoms(AppliedUndef)
        if undefined:
            names = ", ".join(sorted(str(f.func) for f in undefined))
            raise ManufacturedCaseError(f"case {self.name!r}: undefined functions {names}")
        if u.shape != (3, 1) or P.shape != (3, 3):
            raise ManufacturedCaseError(f"case {self.name!r}: u needs 3 entries and P 9")
        unknown = (u.free_symbols | P.free_symbols) - {X, Y, Z, T}
        if unknown:
            names = ", ".join(sorted(str(s) for s in unknown))
            raise ManufacturedCaseError(f"case {self.name!r}: unknown symbols {names}")
        return u, P

    @property
    def time_dependent(self):
        u, P = self.expressions()
        return T in (u.free_symbols | P.free_symbols)


MANUFACTURED_CASES = {
    "zero": ManufacturedCase("zero", ("0", "0", "0"), description="all fields vanish"),
    "affine": ManufacturedCase(
        "affine",
        ("x + 2*y - z + 1", "3*x - y + 2*z", "-x + y + 4*z - 2"),
        description="affine displacement with compatible constant micro-distortion",
    ),
    "poly3": ManufacturedCase(
        "poly3",
        ("x**2*y + z**3/3", "x*y*z + y**2", "z*x**2 - y**3"),
        (
            "y*z", "x**2", "x*y",
            "z**2", "x*z", "y**2",
            "x*y", "y*z", "x**2 + z**2",
        ),
        description="cubic displacement, quadratic micro-distortion, non-homogeneous data",
    ),
    "harmonic-bc": ManufacturedCase(
        "harmonic-bc",
        ("sin(2*t)*x*y*z", "sin(2*t)*(x**2 - y*z)", "sin(2*t)*y**2*z"),
        default_boundary="coupled",
        description="time-harmonic displacement with coupled tangential data",
    ),
}


def get_case(name):
    try:
        return MANUFACTURED_CASES[name]
    except KeyError:
        known = ", ".join(sorted(MANUFACTURED_CASES))
        raise ManufacturedCaseError(f"unknown manufactured case {name!r} (known: {known})") from None


# --- SYMBOLIC OPERATORS ---

def _div_rows(S):
    return sy.Matrix([sum(sy.diff(S[i, j], COORDS[j]) for j in range(3)) for i in range(3)])


def _curl_rows(P):
    rows = []
    for i in range(3):
        a, b, c = P[i, 0], P[i, 1], P[i, 2]
        rows.append([sy.diff(c, Y) - sy.diff(b, Z), sy.diff(a, Z) - sy.diff(c, X), sy.diff(b, X) - sy.diff(a, Y)])
    return sy.Matrix(rows)


def symbolic_loads(u, P, params):
    """(F, M, Curl P) for the given fields and moduli."""
    I3 = sy.eye(3)
    E = u.jacobian(COORDS) - P
    sigma_e = (
        2 * params.mu_e * (E + E.T) / 2
        + 2 * params.mu_c * (E - E.T) / 2
        + params.lambda_e * E.trace() * I3
    )
    sigma_micro = 2 * params.mu_micro * (P + P.T) / 2 + params.lambda_micro * P.trace() * I3
    curl_P = _curl_rows(P)
    F = sy.diff(u, T, 2) - _div_rows(sigma_e)
    M = sy.diff(P, T, 2) - sigma_e + sigma_micro + params.mu_macro * params.L_c ** 2 * _curl_rows(curl_P)
    return sy.simplify(F), sy.simplify(M), curl_P


def _vectorize(matrix):
    """Numpy callable (points, t) -> (n,) + shape for a symbolic matrix."""
    shape = matrix.shape if matrix.shape[1] != 1 else (matrix.shape[0],)
    try:
        entries = [sy.lambdify((X, Y, Z, T), e, modules="numpy") for e in matrix]
    except (SyntaxError, TypeError, NameError, ValueError) as exc:
        raise ManufacturedCaseError(f"cannot compile expression ({exc})") from exc

    def evaluate(points, t=0.0):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x, y, z = points[:, 0], points[:, 1], points[:, 2]
        values = np.empty((len(points), len(entries)))
        for k, fn in enumerate(entries):
            values[:, k] = np.broadcast_to(fn(x, y, z, t), len(points))
        return values.reshape((len(points),) + shape)

    return evaluate


@dataclass(frozen=True)
class ManufacturedFields:
    """Numerical callables (points, t) of one case for one parameter set."""

    case: ManufacturedCase
    u: Callable
    u_t: Callable
    u_tt: Callable
    P: Callable
    P_t: Callable
    P_tt: Callable
    curl_P: Callable
    F: Callable
    M: Callable

    @property
    def time_dependent(self):
        return self.case.time_dependent

    def static_loads(self, t=0.0):
        return (lambda p: self.F(p, t)), (lambda p: self.M(p, t))

    def boundary_data(self, mode=None):
        mode = mode or self.case.default_boundary
        if mode not in BOUNDARY_MODES:
            raise ManufacturedCaseError(f"unknown boundary mode {mode!r}; expected one of {BOUNDARY_MODES}")
        dirichlet = DirichletData(self.u, self.u_t, self.u_tt)
        if mode == "homogeneous":
            return BoundaryData()
        if mode == "coupled":
            return BoundaryData.coupled(dirichlet)
        return BoundaryData(dirichlet, TangentialData(field=self.P, field_t=self.P_t, field_tt=self.P_tt))


def build_fields(case, params, check=True):
    """Lambdified fields and loads; verified by the finite-difference oracle unless check is False."""
    u, P = case.expressions()
    F, M, curl_P = symbolic_loads(u, P, params)
    fields = ManufacturedFields(
        case=case,
        u=_vectorize(u),
        u_t=_vectorize(sy.diff(u, T)),
        u_tt=_vectorize(sy.diff(u, T, 2)),
        P=_vectorize(P),
        P_t=_vectorize(sy.diff(P, T)),
        P_tt=_vectorize(sy.diff(P, T, 2)),
        curl_P=_vectorize(curl_P),
        F=_vectorize(F),
        M=_vectorize(M),
    )
    if check:
        residual = finite_difference_residual(fields, params)
        if residual > FD_TOLERANCE:
            raise ManufacturedCaseError(
                f"case {case.name!r}: loads disagree with the finite-difference oracle (residual {residual:.3e})"
            )
        logger.debug("Case %s passes the finite-difference oracle (residual %.2e)", case.name, residual)
    return fields


# --- FINITE-DIFFERENCE ORACLE ---

def _fd_gradient(f, points, t, h):
    """(n,) + shape + (3,) central-difference gradient of f(points, t)."""
    parts = []
    for j in range(3):
        step = np.zeros(3)
        step[j] = h
        parts.append((f(points + step, t) - f(points - step, t)) / (2.0 * h))
    return np.stack(parts, axis=-1)


def _fd_curl_rows(f, points, t, h):
    g = _fd_gradient(f, points, t, h)  # [n, i, k, j] = d_j P_ik
    return np.stack(
        [g[:, :, 2, 1] - g[:, :, 1, 2], g[:, :, 0, 2] - g[:, :, 2, 0], g[:, :, 1, 0] - g[:, :, 0, 1]],
        axis=-1,
    )


def oracle_points():
    s = np.array([0.2, 0.5, 0.8])
    return np.stack(np.meshgrid(s, s, s, indexing="ij"), axis=-1).reshape(-1, 3)


def finite_difference_residual(fields, params, points=None, t=0.3, h=FD_STEP):
    """Relative mismatch between the symbolic loads and the strong operator applied by finite differences."""
    points = oracle_points() if points is None else points
    I3 = np.eye(3)

    def sigma_e(p, tt):
        E = _fd_gradient(fields.u, p, tt, h) - fields.P(p, tt)
        sym = 0.5 * (E + np.swapaxes(E, 1, 2))
        skew = 0.5 * (E - np.swapaxes(E, 1, 2))
        tr = np.trace(E, axis1=1, axis2=2)
        return 2 * params.mu_e * sym + 2 * params.mu_c * skew + params.lambda_e * tr[:, None, None] * I3

    def curl_P(p, tt):
        return _fd_curl_rows(fields.P, p, tt, h)

    def second_time_derivative(f):
        return (f(points, t + h) - 2.0 * f(points, t) + f(points, t - h)) / (h * h)

    P = fields.P(points, t)
    sym_P = 0.5 * (P + np.swapaxes(P, 1, 2))
    sigma_micro = 2 * params.mu_micro * sym_P + params.lambda_micro * np.trace(P, axis1=1, axis2=2)[:, None, None] * I3
    div_sigma = np.einsum("nijj->ni", _fd_gradient(sigma_e, points, t, h))
    F_fd = second_time_derivative(fields.u) - div_sigma
    M_fd = (
        second_time_derivative(fields.P)
        - sigma_e(points, t)
        + sigma_micro
        + params.mu_macro * params.L_c ** 2 * _fd_curl_rows(curl_P, points, t, h)
    )
    F_sym = fields.F(points, t)
    M_sym = fields.M(points, t)
    residual_F = np.max(np.abs(F_sym - F_fd)) / max(1.0, np.max(np.abs(F_sym)))
    residual_M = np.max(np.abs(M_sym - M_fd)) / max(1.0, np.max(np.abs(M_sym)))
    return float(max(residual_F, residual_M))
