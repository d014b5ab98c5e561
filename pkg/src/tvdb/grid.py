"""Flat periodic strip geometry, field containers and discrete operators.

The strip is periodic in x and bounded in y by two flat boundary components
(``bottom`` at j = 0 and ``top`` at j = ny).  Bulk fields are node-centered
arrays of shape ``(nx, ny + 1)`` whose first and last rows are the traces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised when fields do not live on the same grid."""


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or self.nx < 4:
            raise ValueError(f"nx must be an integer >= 4, got {self.nx}")
        if int(self.ny) != self.ny or self.ny < 3:
            raise ValueError(f"ny must be an integer >= 3, got {self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("lx and ly must be positive")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def bulk_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny + 1)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.dy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates ``(X, Y)`` with ``indexing='ij'``."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def bulk_weights(self) -> np.ndarray:
        """Quadrature weight of every bulk node (trapezoid in y, rectangle in x)."""
        col = np.full(self.ny + 1, self.dx * self.dy)
        col[0] *= 0.5
        col[-1] *= 0.5
        return np.broadcast_to(col, self.bulk_shape)

    @property
    def boundary_weight(self) -> float:
        return self.dx


def _frozen(a, shape, name) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.shape != shape:
        raise ShapeError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """A pair ``[w, w_Gamma]`` with one boundary field per boundary component."""

    grid: GridSpec
    bulk: np.ndarray
    bottom: np.ndarray
    top: np.ndarray

    # let numpy scalars defer to our reflected operators
    __array_ufunc__ = None

    def __post_init__(self):
        object.__setattr__(self, "bulk", _frozen(self.bulk, self.grid.bulk_shape, "bulk"))
        object.__setattr__(self, "bottom", _frozen(self.bottom, (self.grid.nx,), "bottom"))
        object.__setattr__(self, "top", _frozen(self.top, (self.grid.nx,), "top"))

    # constructors

    @classmethod
    def zeros(cls, grid: GridSpec) -> "StateVector":
        return cls.constant(grid, 0.0)

    @classmethod
    def constant(cls, grid: GridSpec, c: float) -> "StateVector":
        return cls(grid, np.full(grid.bulk_shape, c), np.full(grid.nx, c), np.full(grid.nx, c))

    @classmethod
    def from_bulk(cls, grid: GridSpec, bulk) -> "StateVector":
        """State whose boundary fields coincide with the traces of ``bulk``."""
        bulk = np.asarray(bulk, dtype=float)
        return cls(grid, bulk, bulk[:, 0], bulk[:, -1])

    @classmethod
    def from_flat(cls, grid: GridSpec, flat) -> "StateVector":
        flat = np.asarray(flat, dtype=float)
        nb = grid.nx * (grid.ny + 1)
        return cls(grid, flat[:nb].reshape(grid.bulk_shape), flat[nb:nb + grid.nx], flat[nb + grid.nx:])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.bulk.ravel(), self.bottom, self.top])

    # trace helpers

    @property
    def trace_bottom(self) -> np.ndarray:
        return self.bulk[:, 0]

    @property
    def trace_top(self) -> np.ndarray:
        return self.bulk[:, -1]

    def is_trace_constrained(self) -> bool:
        return bool(np.array_equal(self.bottom, self.trace_bottom)
                    and np.array_equal(self.top, self.trace_top))

    def with_traces_as_boundary(self) -> "StateVector":
        return StateVector.from_bulk(self.grid, self.bulk)

    # arithmetic

    def _check(self, other: "StateVector"):
        if not isinstance(other, StateVector):
            return NotImplemented
        if other.grid != self.grid:
            raise ShapeError(f"grid mismatch: {self.grid} vs {other.grid}")
        return None

    def _map2(self, other, op):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return StateVector(self.grid, op(self.bulk, other.bulk), op(self.bottom, other.bottom),
                           op(self.top, other.top))

    def map(self, fn) -> "StateVector":
        return StateVector(self.grid, fn(self.bulk), fn(self.bottom), fn(self.top))

    def __add__(self, other):
        if np.isscalar(other):
            return self.map(lambda a: a + other)
        return self._map2(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        if np.isscalar(other):
            return self.map(lambda a: a - other)
        return self._map2(other, np.subtract)

    def __neg__(self):
        return self.map(np.negative)

    def __mul__(self, s):
        if not np.isscalar(s):
            return NotImplemented
        return self.map(lambda a: a * s)

    __rmul__ = __mul__

    def __truediv__(self, s):
        if not np.isscalar(s):
            return NotImplemented
        return self.map(lambda a: a / s)

    def max_abs(self) -> float:
        return float(max(np.abs(self.bulk).max(), np.abs(self.bottom).max(), np.abs(self.top).max()))

    def allclose(self, other: "StateVector", atol=1e-12) -> bool:
        return bool(np.allclose(self.flat(), other.flat(), rtol=0, atol=atol))

    def __repr__(self):
        return f"StateVector(nx={self.grid.nx}, ny={self.grid.ny}, max|.|={self.max_abs():.3g})"


def inner_product_H(a: StateVector, b: StateVector) -> float:
    """L2(Omega) x L2(Gamma) inner product by node quadrature."""
    if a.grid != b.grid:
        raise ShapeError("inner product of states on different grids")
    g = a.grid
    bulk = float(np.sum(g.bulk_weights() * a.bulk * b.bulk))
    bnd = g.boundary_weight * float(a.bottom @ b.bottom + a.top @ b.top)
    return bulk + bnd


def norm_H(a: StateVector) -> float:
    return float(np.sqrt(max(inner_product_H(a, a), 0.0)))


def forward_gradient(w: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Forward differences on the ``nx x ny`` cells; returns shape ``(2, nx, ny)``.

    x is periodic; cell (i, j) uses nodes in rows j and j + 1.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != grid.bulk_shape:
        raise ShapeError(f"bulk field has shape {w.shape}, expected {grid.bulk_shape}")
    gx = (np.roll(w[:, :-1], -1, axis=0) - w[:, :-1]) / grid.dx
    gy = (w[:, 1:] - w[:, :-1]) / grid.dy
    return np.stack([gx, gy])


def forward_gradient_adjoint(p: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Euclidean transpose of :func:`forward_gradient` (no quadrature weights)."""
    px, py = p
    out = np.zeros(grid.bulk_shape)
    out[:, :-1] += (np.roll(px, 1, axis=0) - px) / grid.dx
    out[:, :-1] -= py / grid.dy
    out[:, 1:] += py / grid.dy
    return out


def surface_gradient(g: np.ndarray, grid: GridSpec) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return (np.roll(g, -1) - g) / grid.dx


def surface_laplacian_symbol(grid: GridSpec) -> np.ndarray:
    """Eigenvalues of ``D^T D / dx^2`` for the periodic surface gradient, rfft ordering."""
    k = np.arange(grid.nx // 2 + 1)
    return (2.0 * np.sin(np.pi * k / grid.nx) / grid.dx) ** 2


def lattice_join(a: StateVector, b: StateVector) -> StateVector:
    return a._map2(b, np.maximum)


def lattice_meet(a: StateVector, b: StateVector) -> StateVector:
    return a._map2(b, np.minimum)


def positive_part(a: StateVector) -> StateVector:
    return a.map(lambda v: np.maximum(v, 0.0))


def random_state(grid: GridSpec, rng: np.random.Generator, scale: float = 1.0,
                 trace_constrained: bool = False) -> StateVector:
    bulk = scale * rng.standard_normal(grid.bulk_shape)
    if trace_constrained:
        return StateVector.from_bulk(grid, bulk)
    return StateVector(grid, bulk, scale * rng.standard_normal(grid.nx),
                       scale * rng.standard_normal(grid.nx))
