"""Finite-rank (Pincherle-Goursat) connectivity kernels.

A kernel J(r, r') = sum_k X_k(r) Y_k(r')^T acts on p-vector fields through
J.U = sum_k X_k <Y_k, U>. All of its nonzero spectrum is carried by the
N x N coordinate matrix M[j, k] = <Y_j, X_k>, which is what ``spectrum``
diagonalizes.

Factors are stored as node samples of shape (N, p, n_nodes). When they are
built from symbolic expressions the kernel can also be evaluated pointwise
and differentiated, which the Sobolev-type Frobenius norm needs.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import sympy

from .quadrature import QuadratureGrid

logger = logging.getLogger(__name__)

AXIS_NAMES = ("x", "y")


class SymbolicFactors:
    """An N x p table of sympy expressions in the spatial variables."""

    def __init__(self, exprs, variables):
        self.variables = tuple(variables)
        self.exprs = [[sympy.sympify(e) for e in row] for row in exprs]
        self.rank = len(self.exprs)
        self.populations = len(self.exprs[0]) if self.exprs else 0
        free = set()
        for row in self.exprs:
            free |= set().union(*(e.free_symbols for e in row))
        unknown = free - set(self.variables)
        if unknown:
            raise ValueError(f"factor expressions use unknown symbols {sorted(map(str, unknown))}")
        self._compiled = {}

    def _function(self, alpha):
        if alpha not in self._compiled:
            flat = []
            for row in self.exprs:
                for e in row:
                    d = e
                    for var, order in zip(self.variables, alpha):
                        if order:
                            d = sympy.diff(d, var, order)
                    flat.append(d)
            self._compiled[alpha] = sympy.lambdify(self.variables, flat, modules="numpy")
        return self._compiled[alpha]

    def sample(self, points, alpha=None):
        """Values of D^alpha of every factor at ``points`` (shape (n, d))."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        alpha = tuple(alpha) if alpha is not None else (0,) * len(self.variables)
        values = self._function(alpha)(*(points[:, i] for i in range(len(self.variables))))
        out = np.empty((self.rank * self.populations, points.shape[0]))
        for i, val in enumerate(values):
            out[i] = np.broadcast_to(np.asarray(val, dtype=float), points.shape[:1])
        return out.reshape(self.rank, self.populations, points.shape[0])


def multi_indices(dim: int, order: int):
    """All multi-indices alpha in N^dim with |alpha| <= order."""
    return [a for a in itertools.product(range(order + 1), repeat=dim) if sum(a) <= order]


@dataclass(frozen=True)
class SpectrumReport:
    """Eigen-decomposition of a PG kernel in factor coordinates.

    Column i of ``right`` holds the X-coordinates of e_i (e_i = sum_k right[k, i] X_k),
    column i of ``adjoint`` the Y-coordinates of the L2-adjoint eigenvector
    e*_i (e*_i = sum_k adjoint[k, i] Y_k). For simple eigenvalues
    ||e_i||_2 = 1 and <e_i, e*_i>_2 = 1.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    adjoint: np.ndarray
    simple: np.ndarray
    kernel: "PGKernel"

    def __len__(self):
        return self.eigenvalues.size

    def eigenfunction(self, i: int):
        """Node samples of e_i, shape (p, n_nodes)."""
        return np.tensordot(self.right[:, i], self.kernel.X, axes=1)

    def adjoint_eigenfunction(self, i: int):
        return np.tensordot(self.adjoint[:, i], self.kernel.Y, axes=1)

    def residual(self, i: int) -> float:
        """||J e_i - sigma_i e_i||_2 on the grid."""
        e = self.eigenfunction(i)
        r = self.kernel.apply(e) - self.eigenvalues[i] * e
        return self.kernel.norm(r)


class PGKernel:
    """Finite-rank kernel sum_k X_k(r) Y_k(r')^T on a quadrature grid.

    Parameters
    ----------
    X, Y : array_like, shape (N, p, n_nodes) or (N, n_nodes) when p = 1
        Node samples of the factors.
    grid : QuadratureGrid
    factors : tuple of SymbolicFactors, optional
        Analytic (X, Y) factors, needed for pointwise evaluation and for the
        Sobolev-type norms.
    """

    def __init__(self, X, Y, grid: QuadratureGrid, factors=None):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if X.ndim == 2:
            X = X[:, None, :]
        if Y.ndim == 2:
            Y = Y[:, None, :]
        if X.shape != Y.shape:
            raise ValueError(f"X and Y factor samples differ in shape: {X.shape} vs {Y.shape}")
        if X.shape[-1] != grid.size:
            raise ValueError(f"factor samples have {X.shape[-1]} nodes, grid has {grid.size}")
        self.X = X
        self.Y = Y
        self.grid = grid
        self.factors = factors
        self.X.setflags(write=False)
        self.Y.setflags(write=False)
        if not self.independent:
            logger.info(
                "X factors are linearly dependent on the grid (Gram rank %d < %d)",
                self.gram_rank,
                self.rank,
            )

    @classmethod
    def from_expressions(cls, x_exprs, y_exprs, grid: QuadratureGrid, variables=None):
        """Build a kernel from symbolic factors.

        Each entry of ``x_exprs``/``y_exprs`` is either an expression (p = 1)
        or a sequence of p expressions, in the symbols ``x`` (and ``y`` in 2D)
        unless ``variables`` says otherwise.
        """
        if variables is None:
            variables = sympy.symbols(AXIS_NAMES[: grid.dim])
        variables = tuple(variables)

        def table(exprs):
            rows = []
            for e in exprs:
                if isinstance(e, (list, tuple)):
                    rows.append(list(e))
                else:
                    rows.append([e])
            return rows

        fx = SymbolicFactors(table(x_exprs), variables)
        fy = SymbolicFactors(table(y_exprs), variables)
        if (fx.rank, fx.populations) != (fy.rank, fy.populations):
            raise ValueError("X and Y factor tables differ in shape")
        return cls(fx.sample(grid.nodes), fy.sample(grid.nodes), grid, factors=(fx, fy))

    @property
    def rank(self) -> int:
        return self.X.shape[0]

    @property
    def populations(self) -> int:
        return self.X.shape[1]

    @property
    def w(self):
        return self.grid.weights

    @cached_property
    def _wX(self):
        return self.X.reshape(self.rank, -1)

    @cached_property
    def _wY(self):
        return (self.Y * self.w).reshape(self.rank, -1)

    def project(self, U):
        """<Y_k, U> for every k; U has shape (..., p, n_nodes)."""
        U = np.asarray(U)
        if U.shape[-2:] != (self.populations, self.grid.size):
            raise ValueError(
                f"field of shape {U.shape} does not match ({self.populations}, {self.grid.size})"
            )
        return U.reshape(U.shape[:-2] + (-1,)) @ self._wY.T

    def apply(self, U):
        """J.U = sum_k X_k <Y_k, U>."""
        U = np.asarray(U, dtype=float) if not np.iscomplexobj(U) else np.asarray(U)
        if U.ndim == 1 and self.populations == 1:
            return self.apply(U[None, :])[0]
        c = self.project(U)
        return np.tensordot(c, self.X, axes=([-1], [0]))

    def adjoint_apply(self, U):
        """J*.U = sum_k Y_k <X_k, U>."""
        U = np.asarray(U)
        if U.ndim == 1 and self.populations == 1:
            return self.adjoint_apply(U[None, :])[0]
        flat = U.reshape(U.shape[:-2] + (-1,))
        c = flat @ (self.X * self.w).reshape(self.rank, -1).T
        return np.tensordot(c, self.Y, axes=([-1], [0]))

    def inner(self, f, g):
        return np.sum(np.asarray(f) * np.asarray(g) * self.w)

    def norm(self, f) -> float:
        f = np.asarray(f)
        return float(np.sqrt(np.abs(np.sum(f * np.conj(f) * self.w))))

    @cached_property
    def coordinate_matrix(self):
        """M[j, k] = <Y_j, X_k>."""
        return self._wY @ self._wX.T

    @cached_property
    def gram_x(self):
        return (self.X * self.w).reshape(self.rank, -1) @ self._wX.T

    @cached_property
    def gram_y(self):
        return self._wY @ self.Y.reshape(self.rank, -1).T

    @cached_property
    def gram_rank(self) -> int:
        s = np.linalg.svd(self.gram_x, compute_uv=False)
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.sum(s > s[0] * 1e-12))

    @property
    def independent(self) -> bool:
        return self.gram_rank == self.rank

    def evaluate(self, r, rp):
        """Pointwise kernel values J(r, r'), shape (n, p, p) for n point pairs."""
        if self.factors is None:
            raise ValueError("pointwise evaluation needs symbolic factors")
        fx, fy = self.factors
        xs = fx.sample(np.atleast_2d(r).reshape(-1, self.grid.dim))
        ys = fy.sample(np.atleast_2d(rp).reshape(-1, self.grid.dim))
        return np.einsum("kin,kjn->nij", xs, ys)

    def _sobolev_gram(self, which: int, m: int):
        if m == 0:
            return self.gram_x if which == 0 else self.gram_y
        if self.factors is None:
            raise ValueError("Sobolev norms of order m > 0 need analytic factor derivatives")
        f = self.factors[which]
        G = np.zeros((self.rank, self.rank))
        for alpha in multi_indices(self.grid.dim, m):
            D = f.sample(self.grid.nodes, alpha).reshape(self.rank, -1)
            G += (D * np.tile(self.w, self.populations)) @ D.T
        return G

    def sobolev_frobenius_norm(self, m: int = 0) -> float:
        """Frobenius norm of J with all mixed derivatives of order <= m in r and r'.

        The double integral factorizes as sum_kl Gx[k, l] Gy[k, l] with Gx, Gy
        the order-m Sobolev Gram matrices of the X and Y factors.
        """
        if m < 0:
            raise ValueError("m must be nonnegative")
        total = np.sum(self._sobolev_gram(0, m) * self._sobolev_gram(1, m))
        return float(np.sqrt(max(total, 0.0)))

    @cached_property
    def _range_basis(self):
        """Orthonormal basis (weighted samples) of span{X_k, Y_k}."""
        sw = np.sqrt(np.tile(self.w, self.populations))
        A = np.vstack([self.X.reshape(self.rank, -1), self.Y.reshape(self.rank, -1)]) * sw
        U, s, _ = np.linalg.svd(A.T, full_matrices=False)
        if s.size == 0 or s[0] == 0:
            return U[:, :0]
        return U[:, s > s[0] * 1e-12]

    def _range_matrix(self):
        """Matrix of J restricted to span{X, Y} in an orthonormal basis."""
        Q = self._range_basis
        sw = np.sqrt(np.tile(self.w, self.populations))
        Xt = self.X.reshape(self.rank, -1) * sw
        Yt = self.Y.reshape(self.rank, -1) * sw
        return (Q.T @ Xt.T) @ (Yt @ Q)

    def operator_norm(self) -> float:
        """L2 operator norm of J."""
        A = self._range_matrix()
        return float(np.linalg.norm(A, 2)) if A.size else 0.0

    def symmetric_part_radius(self) -> float:
        """Spectral radius of (J + J*)/2."""
        A = self._range_matrix()
        if A.size == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (A + A.T)))))

    def spectrum(self, simple_tol: float = 1e-8) -> SpectrumReport:
        """Eigenvalues of J (nonzero part) with right and L2-adjoint eigenvectors."""
        return _spectrum(self, simple_tol)


def _spectrum(kernel: PGKernel, simple_tol: float) -> SpectrumReport:
    M = kernel.coordinate_matrix
    sig, vl, vr = scipy.linalg.eig(M, left=True, right=True)
    order = np.lexsort((-sig.imag, -sig.real))
    sig, vl, vr = sig[order], vl[:, order], vr[:, order]

    scale = np.max(np.abs(sig)) if sig.size else 0.0
    tol = simple_tol * max(scale, np.finfo(float).tiny)
    n = sig.size
    simple = np.ones(n, dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(sig[i] - sig[j]) < tol:
                simple[i] = simple[j] = False

    real = np.abs(sig.imag) <= tol
    sig = np.where(real, sig.real + 0j, sig)
    vr = vr.astype(complex)
    vl = vl.astype(complex)
    for i in np.flatnonzero(real):
        vr[:, i] = vr[:, i].real
        vl[:, i] = vl[:, i].real

    # unit L2 norm of e_i, then a deterministic phase
    G = kernel.gram_x
    for i in range(n):
        nrm = np.sqrt(abs(np.conj(vr[:, i]) @ G @ vr[:, i]))
        if nrm > 0:
            vr[:, i] /= nrm
        k = np.argmax(np.abs(vr[:, i]))
        phase = vr[k, i] / abs(vr[k, i]) if abs(vr[k, i]) > 0 else 1.0
        vr[:, i] /= phase

    # <e_i, e*_j> = psi_j^H M phi_i; make it the identity on each cluster
    done = np.zeros(n, dtype=bool)
    for i in range(n):
        if done[i]:
            continue
        cluster = np.flatnonzero(np.abs(sig - sig[i]) < tol) if not simple[i] else np.array([i])
        done[cluster] = True
        P = np.conj(vl[:, cluster]).T @ M @ vr[:, cluster]
        if abs(sig[i]) <= tol or np.linalg.cond(P) > 1e12:
            continue
        vl[:, cluster] = vl[:, cluster] @ np.linalg.inv(P).conj().T

    if np.all(real):
        vr, vl, sig = vr.real, vl.real, sig.real
    return SpectrumReport(eigenvalues=sig, right=vr, adjoint=vl, simple=simple, kernel=kernel)
