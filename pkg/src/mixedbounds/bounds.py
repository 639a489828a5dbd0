"""Explicit constants and the guaranteed lower-bound transforms.

Every ``delta_*`` function returns a :class:`DeltaBound` whose ``ingredients``
record is enough to recompute ``delta_sq`` (see :meth:`DeltaBound.reevaluate`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mesh import Mesh, MeshError, inscribed_param_d, triangle_geometry

# first positive zero of the Bessel function J1
J11 = 3.8317059702075123156

PROBLEMS = ("laplace", "elliptic", "elasticity", "steklov")


@dataclass(frozen=True)
class DeltaBound:
    delta_sq: float
    problem: str
    ingredients: dict = field(default_factory=dict)

    @property
    def delta(self) -> float:
        return math.sqrt(self.delta_sq)

    def reevaluate(self) -> float:
        """Recompute ``delta_sq`` from the audit record alone."""
        g = self.ingredients
        if self.problem in ("laplace", "elliptic"):
            return g["h"] ** 2 / (g.get("a0", 1.0) * g["constant_value"] ** 2)
        if self.problem == "elasticity":
            return (g["korn"] * g["h_T"]) ** 2 / (g["coercivity"] * math.pi ** 2)
        if self.problem == "steklov":
            return (g["m"] - 1) * trace_const(g["facet_measure"], g["area_T"], g["h_T"], g["n"]) ** 2
        raise ValueError(self.problem)


@dataclass(frozen=True)
class BoundReport:
    level: int
    h: float
    lambda_h: float
    delta_sq: float
    lower: float
    upper: float | None = None
    gamma0: float = 0.0


def lb_transform(lambda_h: float, delta_sq: float) -> float:
    """``lambda_h / (1 + delta_sq lambda_h)``, a guaranteed lower bound."""
    if lambda_h < 0 or delta_sq < 0:
        raise ValueError("arguments must be nonnegative")
    if lambda_h == 0:
        return 0.0
    return lambda_h / (1.0 + delta_sq * lambda_h)


def lb_transform_shifted(lambda_h: float, delta_sq: float, gamma0: float) -> float:
    """Lower bound exploiting a reaction coefficient bounded below by ``gamma0``."""
    if gamma0 < 0 or delta_sq < 0:
        raise ValueError("arguments must be nonnegative")
    if lambda_h < gamma0:
        raise ValueError("lambda_h must not be smaller than gamma0")
    x = (lambda_h - gamma0) * delta_sq
    return (lambda_h + gamma0 * x) / (1.0 + x)


def delta_laplace(h: float, constant: str = "poincare_pi") -> DeltaBound:
    """``delta^2 = h^2 / pi^2``, or ``h^2 / j11^2`` on triangles."""
    if h <= 0:
        raise ValueError("h must be positive")
    if constant in ("poincare_pi", "pi"):
        value = math.pi
    elif constant in ("bessel_j11", "bessel"):
        value = J11
    else:
        raise ValueError(f"unknown constant choice {constant!r}")
    return DeltaBound(h * h / value ** 2, "laplace",
                      {"h": h, "constant": constant, "constant_value": value})


def delta_elliptic(h: float, a0: float, constant: str = "poincare_pi") -> DeltaBound:
    if a0 <= 0:
        raise ValueError("a0 must be positive")
    base = delta_laplace(h, constant)
    return DeltaBound(base.delta_sq / a0, "elliptic", {**base.ingredients, "a0": a0})


def cdiv_bound(d: float) -> float:
    """Bound on the right inverse of the divergence for a convex polygon with parameter ``d``."""
    if not 0 < d <= 1:
        raise ValueError("d must lie in (0, 1]")
    return math.sqrt(2.0 / d ** 2 * (1.0 + math.sqrt(1.0 - d * d)))


def korn_bound(d: float) -> float:
    """Korn constant bound ``sqrt(1 + 4/d^2 (1 + sqrt(1 - d^2)))`` for rot-free-mean fields."""
    if not 0 < d <= 1:
        raise ValueError("d must lie in (0, 1]")
    return math.sqrt(1.0 + 4.0 / d ** 2 * (1.0 + math.sqrt(1.0 - d * d)))


def triangle_korn(vertices) -> tuple[float, float, float]:
    """``(korn_bound(d), h_T, d)`` for a triangle with ``x0`` at its incenter."""
    g = triangle_geometry(vertices)
    d = inscribed_param_d(vertices, g.incenter)
    return korn_bound(d), g.diameter, d


def delta_elasticity(m: Mesh, mu: float, coercivity: float | None = None) -> DeltaBound:
    """``delta = max_T C_K(T) h_T / (sqrt(c) pi)``.

    ``c`` is a lower bound for the elasticity tensor,
    ``(C e, e) >= c |e|^2``; ``None`` takes ``c = 2 mu``. The shipped
    Cook's membrane reference table uses ``c = mu``, which is weaker and
    therefore still guaranteed.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    c = 2.0 * mu if coercivity is None else float(coercivity)
    if not 0 < c <= 2.0 * mu:
        raise ValueError("coercivity must lie in (0, 2 mu]")
    best = (-1.0, -1, 0.0, 0.0, 0.0)
    for t, tri in enumerate(m.points[m.cells]):
        ck, hT, d = triangle_korn(tri)
        if ck * hT > best[0]:
            best = (ck * hT, t, ck, hT, d)
    prod, t, ck, hT, d = best
    return DeltaBound(prod ** 2 / (c * math.pi ** 2), "elasticity",
                      {"mu": mu, "coercivity": c, "cell": t, "korn": ck, "h_T": hT, "d": d})


def trace_const(meas_F: float, meas_T: float, h_T: float, n: int = 2) -> float:
    """Trace inequality constant for a face ``F`` of a simplex ``T``."""
    if meas_F <= 0 or meas_T <= 0 or h_T <= 0:
        raise ValueError("measures and h_T must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    return math.sqrt(meas_F / meas_T) * h_T * math.sqrt((n + 2 * math.pi) / (n * math.pi ** 2))


def delta_steklov(m: Mesh, label: str = "steklov", facet_measure: str = "diameter",
                  faces: int = 3) -> DeltaBound:
    """Trace-based ``delta^2`` over the facets carrying ``label``.

    The inscribed simplex is the owning triangle itself. With
    ``facet_measure="diameter"`` the facet length is bounded by ``h_T``,
    which is how the shipped Steklov reference table was evaluated; ``"exact"``
    uses ``|F|`` and gives a sharper bound.
    """
    idx = m.facets(label)
    if len(idx) == 0:
        raise ValueError(f"mesh has no {label!r} facets")
    if facet_measure not in ("diameter", "exact"):
        raise ValueError("facet_measure must be 'diameter' or 'exact'")
    areas = m.areas()
    lengths = m.edge_lengths()
    diam = m.diameters()
    best = (-1.0, -1)
    for k in idx:
        t = m.boundary_cells[k]
        if areas[t] <= 0:
            raise MeshError(f"degenerate cell {t}")
        F = diam[t] if facet_measure == "diameter" else lengths[m.boundary_edges[k]]
        val = trace_const(F, areas[t], diam[t], 2)
        if val > best[0]:
            best = (val, k)
    k = best[1]
    t = int(m.boundary_cells[k])
    F = diam[t] if facet_measure == "diameter" else lengths[m.boundary_edges[k]]
    ing = {"facet": int(k), "cell": t, "facet_measure": float(F), "facet_measure_mode": facet_measure,
           "area_T": float(areas[t]), "h_T": float(diam[t]), "n": 2, "m": faces}
    return DeltaBound((faces - 1) * best[0] ** 2, "steklov", ing)


def assemble_report(levels: Sequence[tuple], problem: str, *, delta_sq: Sequence[float] | None = None,
                    constant: str = "poincare_pi", a0: float = 1.0, gamma0: float = 0.0) -> list[BoundReport]:
    """One :class:`BoundReport` per ``(h, lambda_h, upper)`` row.

    ``delta_sq`` is required for elasticity and Steklov, whose constants
    depend on the mesh rather than on ``h`` alone; for the scalar problems it
    is computed from ``h`` unless given.
    """
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}")
    if delta_sq is not None and len(delta_sq) != len(levels):
        raise ValueError("delta_sq and levels differ in length")
    if delta_sq is None and problem in ("elasticity", "steklov") and len(levels):
        raise ValueError(f"{problem} needs mesh-derived delta_sq values")
    out = []
    for k, row in enumerate(levels):
        h, lam = float(row[0]), float(row[1])
        upper = None if len(row) < 3 or row[2] is None else float(row[2])
        if delta_sq is not None:
            dsq = float(delta_sq[k])
        elif problem == "laplace":
            dsq = delta_laplace(h, constant).delta_sq
        else:
            dsq = delta_elliptic(h, a0, constant).delta_sq
        if problem == "elliptic" and gamma0 > 0:
            lower = lb_transform_shifted(lam, dsq, gamma0)
        else:
            lower = lb_transform(lam, dsq)
        if lower > lam * (1 + 1e-15):
            raise AssertionError("lower bound exceeds the discrete eigenvalue")
        out.append(BoundReport(k, h, lam, dsq, lower, upper, gamma0 if problem == "elliptic" else 0.0))
    return out
