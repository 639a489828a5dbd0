"""Generalized symmetric eigensolves and the problem drivers.

Mixed problems are reduced to the cell unknowns: with ``M_s`` the RT0 mass
and ``B`` the divergence matrix, the discrete eigenproblem reads
``(B M_s^-1 B^T + C) u = lambda M u``. The Schur operator is never formed on
large meshes; its inverse is applied through a sparse LU factorisation of the
saddle-point matrix ``[[M_s, B^T], [B, -C]]``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assemble import (CoefficientField, boundary_trace_matrix, div_matrix, facet_mass,
                       p0_mass, p1_operator, rt0_load, rt0_mass)
from .mesh import Mesh

log = logging.getLogger(__name__)

DEFAULT_SEED = 0x9E3779B97F4A7C15


class EigenSolverError(RuntimeError):
    """Non-convergence, residual above tolerance, or a singular pencil."""


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-9
    max_iterations: int | None = None
    J: int = 1
    seed: int = DEFAULT_SEED
    dense_limit: int = 2000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.J < 0:
            raise ValueError("J must be nonnegative")


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    dof_count: int
    finite_count: int
    eigenvectors: np.ndarray | None = None


def _as_operator(A):
    return A if isinstance(A, spla.LinearOperator) else spla.aslinearoperator(A)


def _to_dense(A) -> np.ndarray:
    if isinstance(A, np.ndarray):
        return A
    if sp.issparse(A):
        return A.toarray()
    return A @ np.eye(A.shape[1])


def _diag_or_none(A):
    if sp.issparse(A):
        A = sp.csr_matrix(A)
        if A.nnz == np.count_nonzero(A.diagonal()):
            return A.diagonal()
    return None


def _residuals(K, M, lam, X):
    KX = _as_operator(K).matmat(X)
    MX = _as_operator(M).matmat(X)
    R = KX - MX * lam[None, :]
    return np.linalg.norm(R, axis=0) / np.maximum(np.linalg.norm(KX, axis=0), np.finfo(float).tiny)


def _dense_pencil(K, M, which):
    """Finite eigenvalues of ``K x = lambda M x`` (symmetric, one of K, M definite)."""
    Kd, Md = _to_dense(K), _to_dense(M)
    n = Kd.shape[0]
    try:
        # K definite: M x = nu K x, lambda = 1 / nu, nu = 0 <-> infinite lambda
        nu, X = sla.eigh(Md, Kd)
        scale = max(np.abs(nu).max(), np.finfo(float).tiny)
        finite = nu > 1e-12 * scale
        lam = 1.0 / nu[finite]
        X = X[:, finite]
    except np.linalg.LinAlgError:
        try:
            lam, X = sla.eigh(Kd, Md)
        except np.linalg.LinAlgError:
            raise EigenSolverError("singular pencil: neither K nor M is definite") from None
    order = np.argsort(lam)
    lam, X = lam[order], X[:, order]
    if which == "largest":
        lam, X = lam[::-1], X[:, ::-1]
    return lam, X, n


def generalized_sym_eig(K, M, opts: SolveOptions = SolveOptions(), which: str = "smallest",
                        K_solve: Callable | None = None, M_solve: Callable | None = None,
                        method: str = "auto") -> SpectrumResult:
    """``J`` extreme finite eigenpairs of ``K x = lambda M x``.

    For ``which="smallest"`` ``K`` must be positive definite and ``M``
    semidefinite; the iteration runs on ``M x = nu K x`` for its largest
    ``nu = 1/lambda``. For ``which="largest"`` ``M`` must be definite.
    ``K``/``M`` may be sparse matrices, arrays or linear operators;
    ``K_solve``/``M_solve`` apply the inverse when it is not cheap to factor.
    """
    if which not in ("smallest", "largest"):
        raise ValueError("which must be 'smallest' or 'largest'")
    n = K.shape[0]
    if K.shape != (n, n) or M.shape != (n, n):
        raise ValueError("K and M must be square and of equal size")
    J = opts.J
    if method == "auto":
        method = "dense" if n <= opts.dense_limit or J >= n - 1 else "lanczos"

    if method == "dense":
        lam, X, _ = _dense_pencil(K, M, which)
        finite_count = len(lam)
        if finite_count < J:
            raise EigenSolverError(f"pencil has only {finite_count} finite eigenvalues, {J} requested")
        lam, X = lam[:J], X[:, :J]
    elif method == "lanczos":
        diag = _diag_or_none(M)
        finite_count = int(np.count_nonzero(diag)) if diag is not None else \
            int(np.count_nonzero(np.abs(sp.csr_matrix(M)).sum(axis=1))) if sp.issparse(M) else n
        if finite_count < J:
            raise EigenSolverError(f"pencil has only {finite_count} finite eigenvalues, {J} requested")
        v0 = np.random.default_rng(opts.seed).standard_normal(n)
        maxiter = opts.max_iterations
        try:
            if which == "smallest":
                if K_solve is None:
                    lu = spla.splu(sp.csc_matrix(K))
                    K_solve = lu.solve
                Kinv = spla.LinearOperator((n, n), matvec=K_solve, dtype=float)
                nu, X = spla.eigsh(_as_operator(M), k=J, M=_as_operator(K), Minv=Kinv,
                                   which="LA", v0=v0, maxiter=maxiter, tol=0)
                lam = 1.0 / nu
            else:
                if M_solve is None:
                    if diag is not None:
                        M_solve = lambda x: x / diag if x.ndim == 1 else x / diag[:, None]
                    else:
                        M_solve = spla.splu(sp.csc_matrix(M)).solve
                Minv = spla.LinearOperator((n, n), matvec=M_solve, dtype=float)
                lam, X = spla.eigsh(_as_operator(K), k=J, M=_as_operator(M), Minv=Minv,
                                    which="LA", v0=v0, maxiter=maxiter, tol=0)
        except spla.ArpackNoConvergence as exc:
            raise EigenSolverError(f"Lanczos iteration did not converge: {exc}") from None
        order = np.argsort(lam)
        if which == "largest":
            order = order[::-1]
        lam, X = lam[order], X[:, order]
    else:
        raise ValueError(f"unknown method {method!r}")

    res = _residuals(K, M, lam, X) if J else np.zeros(0)
    if np.any(res > opts.tol):
        raise EigenSolverError(f"residual {res.max():.3e} above tolerance {opts.tol:.1e}")
    log.debug("%s eig: n=%d J=%d max residual %.2e", method, n, J, res.max() if J else 0.0)
    return SpectrumResult(np.asarray(lam), res, n, finite_count, X)


# ---------------------------------------------------------------- drivers

class _SchurOperator:
    """``u -> B M_s^-1 B^T u + C u`` with its inverse via the saddle-point LU."""

    def __init__(self, Ms, B, C):
        self.Ms_lu = spla.splu(sp.csc_matrix(Ms))
        self.B = sp.csr_matrix(B)
        self.BT = self.B.T.tocsr()
        self.C = sp.csr_matrix(C)
        ne = Ms.shape[0]
        saddle = sp.bmat([[Ms, self.BT], [self.B, -self.C]], format="csc")
        self.saddle_lu = spla.splu(saddle)
        self.ne = ne
        n = B.shape[0]
        self.shape = (n, n)

    def matvec(self, u):
        return self.B @ self.Ms_lu.solve(self.BT @ u) + self.C @ u

    def solve(self, f):
        rhs = np.concatenate([np.zeros(self.ne), -f])
        return self.saddle_lu.solve(rhs)[self.ne:]

    def dense(self):
        X = self.Ms_lu.solve(self.BT.toarray())
        S = self.B @ X + self.C.toarray()
        return 0.5 * (S + S.T)

    def operator(self):
        return spla.LinearOperator(self.shape, matvec=self.matvec, dtype=float)


def mixed_eigs_scalar(m: Mesh, c: CoefficientField | None = None,
                      opts: SolveOptions = SolveOptions()) -> SpectrumResult:
    """Smallest discrete eigenvalues of the RT0-P0 mixed scheme for
    ``-div(A grad u) + gamma u = lambda u`` with homogeneous Dirichlet data."""
    if c is None:
        c = CoefficientField.constant(m)
    schur = _SchurOperator(rt0_mass(m, c), div_matrix(m), p0_mass(m, c.gamma))
    Ml = p0_mass(m)
    if m.n_cells <= opts.dense_limit:
        return generalized_sym_eig(schur.dense(), Ml, opts, method="dense")
    return generalized_sym_eig(schur.operator(), Ml, opts, K_solve=schur.solve, method="lanczos")


def steklov_operators(m: Mesh, label: str = "steklov"):
    """``K = (sigma, tau) + (div sigma, div tau)`` and ``R = (sigma.n, tau.n)`` on RT0."""
    B = div_matrix(m)
    M0inv = sp.diags(1.0 / m.areas())
    K = (rt0_mass(m) + B.T @ M0inv @ B).tocsr()
    K = ((K + K.T) * 0.5).tocsr()
    N = boundary_trace_matrix(m, label)
    R = (N.T @ sp.diags(1.0 / facet_mass(m, label).diagonal()) @ N).tocsr()
    return K, R


def steklov_eigs(m: Mesh, opts: SolveOptions = SolveOptions(), label: str = "steklov") -> SpectrumResult:
    """Smallest discrete Steklov eigenvalues of the RT0 dual mixed scheme.

    Solves ``K s = mu R s`` for the largest ``mu`` after condensing the
    interior edges and returns ``lambda = 1/mu`` ascending.
    """
    idx = m.facets(label)
    if len(idx) == 0:
        raise ValueError(f"mesh has no {label!r} facets")
    K, R = steklov_operators(m, label)
    bnd = m.boundary_edges[idx]
    inner = np.setdiff1d(np.arange(m.n_edges), bnd)
    Kbb = K[bnd][:, bnd]
    KbI = K[bnd][:, inner]
    KII_lu = spla.splu(sp.csc_matrix(K[inner][:, inner]))
    Rbb = sp.diags(R.diagonal()[bnd], format="csr")
    nb = len(bnd)
    if nb <= opts.dense_limit:
        S = Kbb.toarray() - KbI @ KII_lu.solve(KbI.T.toarray())
        S = 0.5 * (S + S.T)
        res = generalized_sym_eig(S, Rbb, opts, which="largest", method="dense")
    else:
        KIb = KbI.T.tocsr()
        op = spla.LinearOperator((nb, nb), dtype=float,
                                 matvec=lambda x: Kbb @ x - KbI @ KII_lu.solve(KIb @ x))
        res = generalized_sym_eig(op, Rbb, opts, which="largest", method="lanczos")
    lam = 1.0 / res.eigenvalues
    return SpectrumResult(lam, res.residuals, m.n_edges, nb, res.eigenvectors)


def p1_upper_eigs(m: Mesh, problem: str, c: CoefficientField | None = None,
                  opts: SolveOptions = SolveOptions(), mu: float = 1.0,
                  kappa: float = 1.0) -> SpectrumResult:
    """Conforming P1 eigenvalues, upper bounds by the Rayleigh-Ritz principle.

    ``problem`` is one of ``laplace``, ``elliptic``, ``steklov`` (for
    ``-Laplace w + w = 0`` with ``dw/dn = lambda w``) or ``elasticity``.
    """
    if problem == "laplace":
        K = p1_operator(m, CoefficientField.constant(m), "stiffness")
        M = p1_operator(m, None, "mass")
    elif problem == "elliptic":
        K = p1_operator(m, c, "stiffness")
        M = p1_operator(m, None, "mass")
    elif problem == "steklov":
        K = p1_operator(m, CoefficientField.constant(m, gamma=1.0), "stiffness")
        M = p1_operator(m, None, "boundary_mass")
    elif problem == "elasticity":
        K = p1_operator(m, None, "elastic_stiffness", mu=mu, kappa=kappa)
        M = p1_operator(m, None, "vector_mass")
    else:
        raise ValueError(f"unknown problem {problem!r}")
    return generalized_sym_eig(K, M, opts)


def discrete_gradient(m: Mesh, c: CoefficientField | None, v) -> np.ndarray:
    """RT0 coefficients of ``G_h v``: ``M_s g = -B^T v``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (m.n_cells,):
        raise ValueError("one value per cell required")
    lu = spla.splu(sp.csc_matrix(rt0_mass(m, c)))
    return lu.solve(-(div_matrix(m).T @ v))


def a_project_field(m: Mesh, c: CoefficientField | None, field: Callable,
                    quad_degree: int = 6) -> np.ndarray:
    """RT0 coefficients of the ``a``-orthogonal projection of a vector field.

    ``field(x, y)`` returns the two components; ``quad_degree`` is the
    polynomial degree integrated exactly against the linear basis.
    """
    r = rt0_load(m, field, c, degree=quad_degree)
    lu = spla.splu(sp.csc_matrix(rt0_mass(m, c)))
    return lu.solve(r)
