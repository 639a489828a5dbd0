"""Triangle quadrature rules."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

# degree-2 rule with nodes at the edge midpoints, barycentric coordinates
MIDPOINT_RULE = (
    np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]),
    np.full(3, 1.0 / 3.0),
)


@lru_cache(maxsize=None)
def collapsed_gauss(degree: int):
    """Conical product Gauss rule exact for polynomials of total ``degree``.

    Returns barycentric nodes ``(n, 3)`` and weights summing to one.
    """
    k = max(1, (degree + 2) // 2)
    # Gauss-Jacobi(1,0) absorbs the Duffy Jacobian in the collapsed direction
    s, ws = roots_jacobi(k, 0.0, 1.0)
    t, wt = np.polynomial.legendre.leggauss(k)
    s = 0.5 * (s + 1.0)
    t = 0.5 * (t + 1.0)
    ws = ws / 4.0
    wt = wt / 2.0
    x = np.outer(s, 1.0 - t).ravel()
    y = np.outer(s, t).ravel()
    w = np.outer(ws, wt).ravel()
    bary = np.stack([1.0 - x - y, x, y], axis=1)
    return bary, w / w.sum()
