"""Finite element spaces and matrix assembly.

Spaces: lowest-order Raviart-Thomas (one flux per edge), piecewise constants
on cells or boundary facets, and conforming P1 (scalar or 2-vector).

The global RT0 basis function of edge ``e`` restricted to a cell ``T`` is
``s (|e| / 2|T|) (x - p_e)`` with ``p_e`` the vertex opposite ``e`` and
``s = +1`` when the edge orientation (lower to higher vertex index) agrees
with the outward orientation of ``T``. Its normal component along the edge
orientation is one, so its total flux through ``e`` is ``|e|``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .quadrature import MIDPOINT_RULE, collapsed_gauss

SparseMatrix = sp.csr_matrix


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Cellwise constant diffusion ``A`` (stored as its inverse) and reaction ``gamma``."""

    A_inv: np.ndarray
    gamma: np.ndarray
    a0: float
    gamma0: float

    def __post_init__(self):
        A_inv = np.array(self.A_inv, dtype=float).reshape(-1, 2, 2)
        gamma = np.array(self.gamma, dtype=float).reshape(-1)
        if len(gamma) != len(A_inv):
            raise ValueError("A_inv and gamma must have one entry per cell")
        if not np.allclose(A_inv, A_inv.transpose(0, 2, 1), rtol=1e-14, atol=0):
            raise ValueError("A must be symmetric")
        eig_inv = np.linalg.eigvalsh(A_inv)
        if np.any(eig_inv <= 0):
            raise ValueError("A must be positive definite")
        if self.a0 <= 0:
            raise ValueError("a0 must be positive")
        # smallest eigenvalue of A is the reciprocal of the largest of A^-1
        if self.a0 > (1.0 / eig_inv[:, -1]).min() * (1 + 1e-14):
            raise ValueError("a0 exceeds the smallest eigenvalue of A")
        if np.any(gamma < 0) or self.gamma0 < 0:
            raise ValueError("gamma must be nonnegative")
        if self.gamma0 > gamma.min():
            raise ValueError("gamma0 exceeds min gamma")
        A_inv.setflags(write=False)
        gamma.setflags(write=False)
        object.__setattr__(self, "A_inv", A_inv)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "gamma0", float(self.gamma0))

    @property
    def A(self) -> np.ndarray:
        return np.linalg.inv(self.A_inv)

    @classmethod
    def constant(cls, m: Mesh, alpha: float = 1.0, gamma: float = 0.0) -> "CoefficientField":
        """``A = alpha I`` and constant ``gamma`` on every cell."""
        n = m.n_cells
        return cls(np.tile(np.eye(2) / alpha, (n, 1, 1)), np.full(n, float(gamma)),
                   a0=alpha, gamma0=gamma)

    @classmethod
    def scalar(cls, alpha, gamma, a0=None, gamma0=None) -> "CoefficientField":
        alpha = np.asarray(alpha, dtype=float)
        gamma = np.asarray(gamma, dtype=float)
        A_inv = np.eye(2)[None] / alpha[:, None, None]
        return cls(A_inv, gamma,
                   a0=float(alpha.min()) if a0 is None else a0,
                   gamma0=float(gamma.min()) if gamma0 is None else gamma0)


def square_fig3_coefficients(m: Mesh) -> CoefficientField:
    """``A = (2 + sign(x1 x2)) I`` and ``gamma = 4 + 1{|x2| > 1/2}`` from the region tags.

    Bit 1 of the region tag marks ``A = 3``, bit 0 marks ``gamma = 5``.
    Lower bounds ``a0 = 1`` and ``gamma0 = 4``.
    """
    r = m.regions
    alpha = np.where(r & 2, 3.0, 1.0)
    gamma = np.where(r & 1, 5.0, 4.0)
    return CoefficientField.scalar(alpha, gamma, a0=1.0, gamma0=4.0)


@dataclass(frozen=True, eq=False)
class DofMap:
    """Global numbering of a discrete space.

    ``entity_dofs`` lists per mesh entity (cell for RT0/P0, vertex for P1) its
    dof indices, ``-1`` where eliminated; ``signs`` carries the RT0
    orientation per cell and local edge, ones otherwise.
    """

    kind: str
    n_dofs: int
    entity_dofs: np.ndarray
    signs: np.ndarray


def rt0_signs(m: Mesh) -> np.ndarray:
    """Orientation sign per cell and local edge (edge ``i`` opposite vertex ``i``)."""
    v = m.cells
    a = v[:, [1, 2, 0]]
    b = v[:, [2, 0, 1]]
    return np.where(a < b, 1.0, -1.0)


def dofmap(m: Mesh, kind: str, label: str | None = None,
           eliminate: Sequence[str] = ("dirichlet",)) -> DofMap:
    if kind == "RT0":
        return DofMap(kind, m.n_edges, m.cell_edges, rt0_signs(m))
    if kind == "P0_cells":
        return DofMap(kind, m.n_cells, np.arange(m.n_cells)[:, None], np.ones((m.n_cells, 1)))
    if kind == "P0_bfacets":
        idx = m.facets(label)
        dofs = -np.ones(len(m.boundary), dtype=np.int64)
        dofs[idx] = np.arange(len(idx))
        return DofMap(kind, len(idx), dofs[:, None], np.ones((len(m.boundary), 1)))
    if kind in ("P1", "P1_vector"):
        fixed = np.zeros(m.n_points, dtype=bool)
        for lab in eliminate:
            fixed[m.boundary[m.facets(lab)].ravel()] = True
        ncomp = 2 if kind == "P1_vector" else 1
        dofs = -np.ones((m.n_points, ncomp), dtype=np.int64)
        free = np.flatnonzero(~fixed)
        dofs[free] = np.arange(len(free) * ncomp).reshape(-1, ncomp)
        return DofMap(kind, len(free) * ncomp, dofs, np.ones_like(dofs, dtype=float))
    raise ValueError(f"unknown space {kind!r}")


def _finalize(rows, cols, vals, shape, symmetric=False) -> SparseMatrix:
    A = sp.coo_matrix((np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=shape).tocsr()
    A.sum_duplicates()
    if symmetric:
        A = ((A + A.T) * 0.5).tocsr()
    A.eliminate_zeros()
    return A


def _cell_frame(m: Mesh):
    P = m.points[m.cells]                     # (nc, 3, 2)
    area = m.areas()
    L = m.edge_lengths()[m.cell_edges]        # (nc, 3)
    coef = rt0_signs(m) * L / (2.0 * area[:, None])
    return P, area, L, coef


def rt0_local_values(m: Mesh, bary: np.ndarray) -> np.ndarray:
    """Global RT0 basis values at barycentric points: shape ``(nc, nq, 3, 2)``."""
    P, area, L, coef = _cell_frame(m)
    x = np.einsum("qk,ckd->cqd", bary, P)
    return coef[:, None, :, None] * (x[:, :, None, :] - P[:, None, :, :])


def rt0_mass(m: Mesh, c: CoefficientField | None = None) -> SparseMatrix:
    """``M[e, f] = int (A^-1 phi_e) . phi_f``, exact for cellwise constant ``A``."""
    A_inv = np.tile(np.eye(2), (m.n_cells, 1, 1)) if c is None else c.A_inv
    bary, w = MIDPOINT_RULE
    phi = rt0_local_values(m, bary)
    area = m.areas()
    local = np.einsum("q,cqid,cde,cqje->cij", w, phi, A_inv, phi) * area[:, None, None]
    e = m.cell_edges
    rows = np.repeat(e[:, :, None], 3, axis=2)
    cols = np.repeat(e[:, None, :], 3, axis=1)
    return _finalize(rows, cols, local, (m.n_edges, m.n_edges), symmetric=True)


def div_matrix(m: Mesh) -> SparseMatrix:
    """``B[T, e] = int_T div phi_e = +-|e|``; shape ``(n_cells, n_edges)``."""
    L = m.edge_lengths()[m.cell_edges]
    vals = rt0_signs(m) * L
    rows = np.repeat(np.arange(m.n_cells)[:, None], 3, axis=1)
    return _finalize(rows, m.cell_edges, vals, (m.n_cells, m.n_edges))


def p0_mass(m: Mesh, weight=None) -> SparseMatrix:
    w = np.ones(m.n_cells) if weight is None else np.broadcast_to(np.asarray(weight, float), (m.n_cells,))
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return sp.diags(w * m.areas(), format="csr")


def boundary_trace_matrix(m: Mesh, label: str) -> SparseMatrix:
    """Outward normal flux of each RT0 basis function through each facet with ``label``.

    Shape ``(n_labelled_facets, n_edges)`` with ``N[F, e] = +-|F|`` when ``e`` is ``F``.
    """
    idx = m.facets(label)
    if len(idx) == 0:
        raise ValueError(f"mesh has no {label!r} facets")
    edges = m.boundary_edges[idx]
    cells = m.boundary_cells[idx]
    local = np.argmax(m.cell_edges[cells] == edges[:, None], axis=1)
    sign = rt0_signs(m)[cells, local]
    return _finalize(np.arange(len(idx)), edges, sign * m.edge_lengths()[edges],
                     (len(idx), m.n_edges))


def facet_mass(m: Mesh, label: str) -> SparseMatrix:
    """Diagonal ``|F|`` for the piecewise constants on facets with ``label``."""
    idx = m.facets(label)
    return sp.diags(m.edge_lengths()[m.boundary_edges[idx]], format="csr")


def rt0_interpolant(m: Mesh, field: Callable, degree: int = 4) -> np.ndarray:
    """Mean normal component of ``field`` along each oriented edge."""
    t, w = np.polynomial.legendre.leggauss(max(1, (degree + 2) // 2))
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    a = m.points[m.edges[:, 0]]
    b = m.points[m.edges[:, 1]]
    d = b - a
    normal = np.stack([d[:, 1], -d[:, 0]], axis=1) / np.hypot(*d.T)[:, None]
    out = np.zeros(m.n_edges)
    for tq, wq in zip(t, w):
        x = a + tq * d
        fx, fy = field(x[:, 0], x[:, 1])
        out += wq * (np.broadcast_to(fx, out.shape) * normal[:, 0]
                     + np.broadcast_to(fy, out.shape) * normal[:, 1])
    return out


def rt0_load(m: Mesh, field: Callable, c: CoefficientField | None = None,
             degree: int = 6) -> np.ndarray:
    """``r_e = int (A^-1 field) . phi_e`` by a rule exact to ``degree + 1``."""
    A_inv = np.tile(np.eye(2), (m.n_cells, 1, 1)) if c is None else c.A_inv
    bary, w = collapsed_gauss(degree + 1)
    phi = rt0_local_values(m, bary)
    x = np.einsum("qk,ckd->cqd", bary, m.points[m.cells])
    fx, fy = field(x[..., 0], x[..., 1])
    f = np.stack(np.broadcast_arrays(fx, fy), axis=-1)
    local = np.einsum("q,cqd,cde,cqie->ci", w, f, A_inv, phi) * m.areas()[:, None]
    return np.bincount(m.cell_edges.ravel(), weights=local.ravel(), minlength=m.n_edges)


def cell_averages(m: Mesh, func: Callable, degree: int = 6) -> np.ndarray:
    """Cellwise means of a scalar function (the P0 L2 projection)."""
    bary, w = collapsed_gauss(degree)
    x = np.einsum("qk,ckd->cqd", bary, m.points[m.cells])
    return np.broadcast_to(func(x[..., 0], x[..., 1]), x.shape[:2]) @ w


# ---------------------------------------------------------------- P1

def _p1_gradients(m: Mesh):
    P = m.points[m.cells]
    area = m.areas()
    nxt = P[:, [1, 2, 0]]
    prv = P[:, [2, 0, 1]]
    # grad lambda_i = rot(p_{i+2} - p_{i+1}) / 2|T|
    g = np.stack([nxt[..., 1] - prv[..., 1], prv[..., 0] - nxt[..., 0]], axis=-1)
    return g / (2.0 * area[:, None, None]), area


def _scatter_scalar(m, dm, local):
    dofs = dm.entity_dofs[m.cells, 0]
    rows = np.repeat(dofs[:, :, None], 3, axis=2)
    cols = np.repeat(dofs[:, None, :], 3, axis=1)
    keep = (rows >= 0) & (cols >= 0)
    return _finalize(rows[keep], cols[keep], local[keep], (dm.n_dofs, dm.n_dofs), symmetric=True)


_P1_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def p1_operator(m: Mesh, c: CoefficientField | None, kind: str, *, mu: float = 1.0,
                kappa: float = 1.0, reaction: bool = True,
                eliminate: Sequence[str] = ("dirichlet",)) -> SparseMatrix:
    """Conforming P1 matrices on the free dofs (vertices on ``eliminate`` facets removed).

    kinds: ``stiffness`` (``int A grad u . grad v + gamma u v``, the reaction
    term only when ``reaction``), ``mass``, ``boundary_mass`` (on steklov
    facets), ``elastic_stiffness`` (``int C eps(u) : eps(v)`` with
    ``C E = 2 mu E + kappa tr(E) I``) and ``vector_mass``.
    """
    vector = kind in ("elastic_stiffness", "vector_mass")
    dm = dofmap(m, "P1_vector" if vector else "P1", eliminate=eliminate)
    if dm.n_dofs == 0:
        raise ValueError("no free dofs left after eliminating constrained vertices")
    if kind == "stiffness":
        if c is None:
            c = CoefficientField.constant(m)
        g, area = _p1_gradients(m)
        local = np.einsum("cid,cde,cje->cij", g, c.A, g) * area[:, None, None]
        if reaction:
            local = local + (c.gamma * area)[:, None, None] * _P1_MASS
        return _scatter_scalar(m, dm, local)
    if kind == "mass":
        return _scatter_scalar(m, dm, m.areas()[:, None, None] * _P1_MASS)
    if kind == "boundary_mass":
        idx = m.facets("steklov")
        if len(idx) == 0:
            raise ValueError("mesh has no steklov facets")
        lengths = m.edge_lengths()[m.boundary_edges[idx]]
        dofs = dm.entity_dofs[m.boundary[idx], 0]
        local = lengths[:, None, None] * (np.ones((2, 2)) + np.eye(2)) / 6.0
        rows = np.repeat(dofs[:, :, None], 2, axis=2)
        cols = np.repeat(dofs[:, None, :], 2, axis=1)
        keep = (rows >= 0) & (cols >= 0)
        return _finalize(rows[keep], cols[keep], local[keep], (dm.n_dofs, dm.n_dofs), symmetric=True)
    if kind in ("elastic_stiffness", "vector_mass"):
        dofs = dm.entity_dofs[m.cells].reshape(m.n_cells, 6)   # (u0x,u0y,u1x,...)
        if kind == "vector_mass":
            local = np.kron(_P1_MASS, np.eye(2))[None] * m.areas()[:, None, None]
        else:
            g, area = _p1_gradients(m)
            Bm = np.zeros((m.n_cells, 3, 6))
            Bm[:, 0, 0::2] = g[..., 0]
            Bm[:, 1, 1::2] = g[..., 1]
            Bm[:, 2, 0::2] = g[..., 1]
            Bm[:, 2, 1::2] = g[..., 0]
            D = np.array([[2 * mu + kappa, kappa, 0.0],
                          [kappa, 2 * mu + kappa, 0.0],
                          [0.0, 0.0, mu]])
            local = np.einsum("cki,kl,clj->cij", Bm, D, Bm) * area[:, None, None]
        rows = np.repeat(dofs[:, :, None], 6, axis=2)
        cols = np.repeat(dofs[:, None, :], 6, axis=1)
        keep = (rows >= 0) & (cols >= 0)
        return _finalize(rows[keep], cols[keep], local[keep], (dm.n_dofs, dm.n_dofs), symmetric=True)
    raise ValueError(f"unknown P1 operator kind {kind!r}")


# ---------------------------------------------------------------- triplet dump

HEADER = "%%MatrixMarket-compatible"


def write_triplets(A, path) -> None:
    """Coordinate dump, 0-based ``i j value`` per line after a size line."""
    A = sp.coo_matrix(A)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{HEADER} coordinate real general, 0-based\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            fh.write(f"{i} {j} {v:.17g}\n")


def read_triplets(path) -> SparseMatrix:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("%")]
    nr, nc, nnz = (int(t) for t in lines[0].split())
    data = np.loadtxt(lines[1:], ndmin=2) if nnz else np.zeros((0, 3))
    if len(data) != nnz:
        raise ValueError(f"expected {nnz} entries, found {len(data)}")
    return sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                         shape=(nr, nc)).tocsr()
