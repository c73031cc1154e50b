"""Gauss-Legendre tensor grids and discrete inner products on boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor Gauss-Legendre rule on a box in one or two dimensions.

    ``nodes`` has shape (n_nodes, d); ``weights`` already contain the
    measure normalization, so that ``weights.sum() == normalization * volume``.
    """

    dim: int
    n: int
    bounds: tuple
    normalization: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def volume(self) -> float:
        """Lebesgue measure of the box (without normalization)."""
        return float(np.prod([b - a for a, b in self.bounds]))

    @property
    def coords(self):
        """Node coordinates split per axis, each of shape (n_nodes,)."""
        return tuple(self.nodes[:, i] for i in range(self.dim))

    def same_as(self, other: "QuadratureGrid") -> bool:
        return (
            self.dim == other.dim
            and self.n == other.n
            and tuple(self.bounds) == tuple(other.bounds)
            and self.normalization == other.normalization
        )


def build(dim: int, n: int, bounds, normalization: float = 1.0) -> QuadratureGrid:
    """Gauss-Legendre rule with ``n`` nodes per axis.

    ``bounds`` is a single (a, b) pair, reused on every axis, or one pair per
    axis.
    """
    if dim not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dim}")
    if n < 2:
        raise ValueError(f"need at least 2 nodes per axis, got {n}")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim == 1:
        bounds = np.tile(bounds, (dim, 1))
    if bounds.shape != (dim, 2):
        raise ValueError(f"expected {dim} intervals, got bounds of shape {bounds.shape}")
    if np.any(bounds[:, 1] <= bounds[:, 0]):
        raise ValueError("empty interval in bounds")

    t, wt = np.polynomial.legendre.leggauss(n)
    axes, axis_weights = [], []
    for a, b in bounds:
        half = 0.5 * (b - a)
        axes.append(0.5 * (a + b) + half * t)
        axis_weights.append(half * wt)

    if dim == 1:
        nodes = axes[0][:, None]
        weights = axis_weights[0]
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        nodes = np.column_stack([gx.ravel(), gy.ravel()])
        weights = np.outer(axis_weights[0], axis_weights[1]).ravel()

    nodes.setflags(write=False)
    weights = weights * normalization
    weights.setflags(write=False)
    return QuadratureGrid(
        dim=dim,
        n=n,
        bounds=tuple(tuple(map(float, b)) for b in bounds),
        normalization=float(normalization),
        nodes=nodes,
        weights=weights,
    )


def inner(f, g, grid: QuadratureGrid):
    """Discrete inner product sum_i w_i f(x_i) g(x_i).

    Samples may carry leading axes (for instance populations); the node axis
    is the last one and every other axis is summed as well.
    """
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape[-1] != grid.size or g.shape[-1] != grid.size:
        raise ValueError(
            f"samples have {f.shape[-1]} and {g.shape[-1]} nodes, grid has {grid.size}"
        )
    return np.sum(f * g * grid.weights)


def norm(f, grid: QuadratureGrid) -> float:
    """Discrete L2 norm."""
    return float(np.sqrt(np.abs(inner(f, np.conj(f), grid))))
