"""
Quadrature rules on the reference simplices.

Tetrahedron and triangle rules are conical (collapsed) Gauss-Jacobi products:
n points per direction integrate total degree 2n-1 exactly and every weight is
positive. Points are returned in barycentric coordinates, weights sum to 1 so
that an integral over a physical simplex is measure * sum(w * f).
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

# n=3 -> degree 5 (covers the degree-4 requirement of every assembled form)
DEFAULT_POINTS = 3
# n=6 -> degree 11, used as the error-norm oracle
ORACLE_POINTS = 6


def _unit_interval_rule(n, alpha):
    """Gauss-Jacobi rule on [0, 1] for the weight (1 - a)^alpha."""
    if alpha == 0:
        t, w = roots_legendre(n)
    else:
        t, w = roots_jacobi(n, alpha, 0.0)
    return (1.0 + t) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def tetrahedron_rule(n=DEFAULT_POINTS):
    """Return (barycentric points (nq, 4), weights (nq,)) exact to degree 2n-1."""
    a, wa = _unit_interval_rule(n, 2)
    b, wb = _unit_interval_rule(n, 1)
    c, wc = _unit_interval_rule(n, 0)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    W = wa[:, None, None] * wb[None, :, None] * wc[None, None, :]
    x = A
    y = B * (1.0 - A)
    z = C * (1.0 - A) * (1.0 - B)
    points = np.stack([1.0 - x - y - z, x, y, z], axis=-1).reshape(-1, 4)
    weights = 6.0 * W.reshape(-1)
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


@lru_cache(maxsize=None)
def triangle_rule(n=DEFAULT_POINTS):
    """Return (barycentric points (nq, 3), weights (nq,)) exact to degree 2n-1."""
    a, wa = _unit_interval_rule(n, 1)
    b, wb = _unit_interval_rule(n, 0)
    A, B = np.meshgrid(a, b, indexing="ij")
    W = wa[:, None] * wb[None, :]
    x = A
    y = B * (1.0 - A)
    points = np.stack([1.0 - x - y, x, y], axis=-1).reshape(-1, 3)
    weights = 2.0 * W.reshape(-1)
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


@lru_cache(maxsize=None)
def edge_rule(n=2):
    """Gauss-Legendre on [0, 1]: (parameters (nq,), weights (nq,)) summing to 1."""
    t, w = roots_legendre(n)
    params = (1.0 + t) / 2.0
    weights = w / 2.0
    params.setflags(write=False)
    weights.setflags(write=False)
    return params, weights
