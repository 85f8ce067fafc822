"""Weighted product-space algebra over dense real blocks.

A point of the product space is an ordered tuple of ``n`` equal-shape
real blocks (vectors or matrices).  The space carries the weighted inner
product ``<<x, y>> = sum_i w_i <x_i, y_i>`` for positive weights summing
to one, under which copying a single block into all ``n`` slots is an
isometry and averaging the blocks is the orthogonal projection onto the
diagonal subspace (all blocks equal).
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Block",
    "ProductPoint",
    "Weights",
    "WEIGHT_SUM_TOL",
    "weighted_inner",
    "weighted_norm",
    "weighted_block_sum",
    "project_diagonal",
    "reflect_diagonal",
    "lift",
]

#: A block is a dense real vector or matrix; alias kept for signatures.
Block = np.ndarray

#: Absolute tolerance on |sum(w) - 1| when validating weights.
WEIGHT_SUM_TOL = 1e-12


def _as_block(a, what: str = "block") -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim not in (1, 2):
        raise ValueError(f"{what} must be a vector or a matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite entries")
    return arr


class ProductPoint:
    """Immutable element of the product space: ``n`` same-shape blocks.

    The blocks are stored stacked along axis 0 of a read-only float64
    array, so ``data.shape == (n,) + block_shape``.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, copy=True)
        if arr.ndim not in (2, 3):
            raise ValueError(
                "product point data must have shape (n, d) or (n, rows, cols), "
                f"got ndim={arr.ndim}"
            )
        if arr.shape[0] < 1:
            raise ValueError("product point needs at least one block")
        if not np.all(np.isfinite(arr)):
            raise ValueError("product point contains non-finite entries")
        arr.flags.writeable = False
        self.data = arr

    @classmethod
    def from_blocks(cls, blocks: Iterable[np.ndarray]) -> "ProductPoint":
        blocks = [_as_block(b) for b in blocks]
        if not blocks:
            raise ValueError("product point needs at least one block")
        shape = blocks[0].shape
        for i, b in enumerate(blocks[1:], start=1):
            if b.shape != shape:
                raise ValueError(
                    f"block {i} has shape {b.shape}, expected {shape}"
                )
        return cls(np.stack(blocks, axis=0))

    @classmethod
    def zeros(cls, n: int, block_shape: Sequence[int]) -> "ProductPoint":
        if n < 1:
            raise ValueError("need n >= 1 blocks")
        return cls(np.zeros((n, *block_shape)))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def block_shape(self) -> tuple:
        return self.data.shape[1:]

    def block(self, i: int) -> np.ndarray:
        """Read-only view of block ``i``."""
        return self.data[i]

    def copy(self) -> "ProductPoint":
        return ProductPoint(self.data)

    def _check_mate(self, other: "ProductPoint") -> None:
        if self.data.shape != other.data.shape:
            raise ValueError(
                f"product points have mismatched shapes {self.data.shape} "
                f"vs {other.data.shape}"
            )

    def __add__(self, other):
        if not isinstance(other, ProductPoint):
            return NotImplemented
        self._check_mate(other)
        return ProductPoint(self.data + other.data)

    def __sub__(self, other):
        if not isinstance(other, ProductPoint):
            return NotImplemented
        self._check_mate(other)
        return ProductPoint(self.data - other.data)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return ProductPoint(self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return ProductPoint(-self.data)

    def __repr__(self):
        return f"ProductPoint(n={self.n}, block_shape={self.block_shape})"


class Weights:
    """Positive block weights in ]0, 1] summing to one.

    Invalid weights are rejected instead of renormalized, so configured
    runs are bit-reproducible.
    """

    __slots__ = ("w",)

    def __init__(self, w):
        arr = np.array(w, dtype=np.float64, copy=True).reshape(-1)
        if arr.size < 1:
            raise ValueError("need at least one weight")
        if not np.all(np.isfinite(arr)):
            raise ValueError("weights contain non-finite entries")
        if np.any(arr <= 0.0) or np.any(arr > 1.0):
            raise ValueError("every weight must lie in ]0, 1]")
        total = float(np.sum(arr))
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(
                f"weights must sum to 1 within {WEIGHT_SUM_TOL:g}, got {total!r}"
            )
        arr.flags.writeable = False
        self.w = arr

    @classmethod
    def uniform(cls, n: int) -> "Weights":
        if n < 1:
            raise ValueError("need n >= 1")
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.w.size

    def __len__(self):
        return self.w.size

    def __repr__(self):
        return f"Weights({self.w.tolist()})"


def _check_point_weights(x: ProductPoint, w: Weights) -> None:
    if x.n != w.n:
        raise ValueError(f"point has {x.n} blocks but got {w.n} weights")


def weighted_inner(x: ProductPoint, y: ProductPoint, w: Weights) -> float:
    """Weighted inner product ``sum_i w_i <x_i, y_i>``.

    Per-block inner products are Euclidean (Frobenius for matrix
    blocks).  Reductions use numpy's pairwise summation so results are
    reproducible across block sizes.
    """
    x._check_mate(y)
    _check_point_weights(x, w)
    per_block = np.sum((x.data * y.data).reshape(x.n, -1), axis=1)
    return float(np.sum(w.w * per_block))


def weighted_norm(x: ProductPoint, w: Weights) -> float:
    """Norm induced by :func:`weighted_inner`."""
    return float(np.sqrt(max(weighted_inner(x, x, w), 0.0)))


def weighted_block_sum(x: ProductPoint, w: Weights) -> np.ndarray:
    """The single block ``sum_i w_i x_i``."""
    _check_point_weights(x, w)
    shape = (w.n,) + (1,) * len(x.block_shape)
    return np.sum(w.w.reshape(shape) * x.data, axis=0)


def lift(x: Block, n: int) -> ProductPoint:
    """Copy one block into all ``n`` slots.

    Since the weights sum to one this map is an isometry onto the
    diagonal subspace: ``weighted_norm(lift(x, n), w) == ||x||``.
    """
    if n < 1:
        raise ValueError("need n >= 1 copies")
    xb = _as_block(x)
    return ProductPoint(np.broadcast_to(xb, (n, *xb.shape)))


def project_diagonal(z: ProductPoint, w: Weights) -> ProductPoint:
    """Orthogonal projection onto the diagonal subspace.

    Every output block equals ``sum_i w_i z_i``; the map is linear,
    idempotent and self-adjoint in the weighted inner product.
    """
    return lift(weighted_block_sum(z, w), z.n)


def reflect_diagonal(z: ProductPoint, w: Weights) -> ProductPoint:
    """Reflection ``2 P - Id`` across the diagonal subspace."""
    return 2.0 * project_diagonal(z, w) - z
