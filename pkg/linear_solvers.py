"""
Symmetric positive definite solves.

Small systems go through a dense Cholesky factorization; larger ones through
conjugate gradients with a Jacobi (diagonal) preconditioner. Every solve
reports its relative residual and raises SolverError when it misses the
tolerance.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from errors import SolverError
from settings import get_settings

logger = logging.getLogger(__name__)

# Accepted relative residual of a direct (factorized) solve
DIRECT_RESIDUAL_LIMIT = 1e-8


@dataclass(frozen=True)
class SolveInfo:
    method: str
    iterations: int
    residual: float


def relative_residual(A, x, b):
    normb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return r / normb if normb > 0 else r


def pcg(A, b, x0=None, rtol=1e-10, max_iterations=20000, preconditioner=None):
    """Preconditioned conjugate gradients on A x = b.

    Args:
        A: SPD matrix (anything supporting A @ x)
        b: right-hand side
        x0: initial guess, zeros by default
        rtol: stop once ||r|| <= rtol * ||b||
        max_iterations: iteration cap
        preconditioner: callable r -> z; Jacobi from diag(A) when None

    Returns: (x, SolveInfo)
    """
    b = np.asarray(b, dtype=float)
    normb = np.linalg.norm(b)
    if normb == 0.0:
        return np.zeros_like(b), SolveInfo("pcg", 0, 0.0)
    if preconditioner is None:
        diag = np.asarray(A.diagonal(), dtype=float)
        if np.any(diag <= 0):
            raise SolverError("matrix has a non-positive diagonal entry; not SPD")
        inv_diag = 1.0 / diag
        preconditioner = lambda r: inv_diag * r

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = preconditioner(r)
    p = z.copy()
    gamma = r @ z
    target = rtol * normb
    normr = np.linalg.norm(r)
    iterations = 0
    while normr > target:
        if iterations >= max_iterations:
            raise SolverError("conjugate gradients did not converge", residual=normr / normb, iterations=iterations)
        Ap = A @ p
        curvature = p @ Ap
        if curvature <= 0:
            raise SolverError("conjugate gradients broke down (non-positive curvature)", residual=normr / normb, iterations=iterations)
        alpha = gamma / curvature
        x += alpha * p
        r -= alpha * Ap
        normr = np.linalg.norm(r)
        iterations += 1
        z = preconditioner(r)
        gamma_old = gamma
        gamma = r @ z
        p = z + (gamma / gamma_old) * p
    logger.debug("PCG converged in %d iterations (residual %.2e)", iterations, normr / normb)
    return x, SolveInfo("pcg", iterations, normr / normb)


def _dense_cholesky(A):
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    try:
        return la.cho_factor(dense, lower=True)
    except la.LinAlgError as exc:
        raise SolverError(f"Cholesky factorization failed: {exc}") from exc


def solve_spd(A, b, x0=None, settings=None):
    """Solve an SPD system, dense below the dense threshold and by PCG above it.

    Returns: (x, SolveInfo)
    """
    settings = settings or get_settings()
    b = np.asarray(b, dtype=float)
    n = len(b)
    if n == 0:
        return np.zeros(0), SolveInfo("empty", 0, 0.0)
    if n <= settings.dense_threshold:
        x = la.cho_solve(_dense_cholesky(A), b)
        residual = relative_residual(A, x, b)
        if not np.isfinite(residual) or residual > DIRECT_RESIDUAL_LIMIT:
            raise SolverError("dense solve missed its tolerance", residual=residual)
        return x, SolveInfo("cholesky", 1, residual)
    return pcg(A, b, x0=x0, rtol=settings.rtol, max_iterations=settings.max_iterations)


class SpdSolver:
    """Factorize once, solve many times (time stepping, repeated liftings)."""

    def __init__(self, A, settings=None):
        settings = settings or get_settings()
        self.A = sp.csr_matrix(A)
        self.n = self.A.shape[0]
        if self.n <= settings.dense_threshold:
            factor = _dense_cholesky(self.A) if self.n else None
            self._solve = (lambda b: la.cho_solve(factor, b)) if self.n else (lambda b: np.zeros(0))
            self.method = "cholesky"
        else:
            self._solve = spla.factorized(self.A.tocsc())
            self.method = "sparse-lu"
        logger.debug("Factorized %d x %d system (%s)", self.n, self.n, self.method)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if not np.any(b):
            return np.zeros_like(b)
        x = self._solve(b)
        residual = relative_residual(self.A, x, b)
        if not np.isfinite(residual) or residual > DIRECT_RESIDUAL_LIMIT:
            raise SolverError(f"{self.method} solve missed its tolerance", residual=residual)
        return x
