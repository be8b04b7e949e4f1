"""Cubic partitions of [0,1]^d and the horizon-driven choice of bins per axis.

Cells have side 1/P per axis and are ordered lexicographically by their
per-axis index vector k in {1,...,P}^d.  The last cell on each axis is
right-closed, so the coordinate value 1.0 belongs to cell P.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


def choose_P(n: int, gamma: float, d: int) -> int:
    """Bins per axis for horizon n: ceil(n ** (1 / (2*gamma + d))).

    Rounding is integer-safe: when the float power lands within relative
    1e-12 of an exact integer root, that integer is used instead of the
    ceiling of a value polluted by floating error.
    """
    if not 0.0 < gamma <= 1.0:
        raise ConfigurationError("gamma must lie in (0, 1]")
    if d < 1:
        raise ConfigurationError("dimension must be positive")
    if n < 1:
        raise ConfigurationError("horizon must be at least 1")
    exponent = 2.0 * gamma + d
    p = n ** (1.0 / exponent)
    r = round(p)
    if r >= 1 and abs(r ** exponent - n) <= 1e-12 * n:
        return int(r)
    return int(math.ceil(p))


@dataclass(frozen=True)
class CubicPartition:
    """P^d hypercube cells of side 1/P covering [0,1]^d."""

    P: int
    d: int

    def __post_init__(self):
        if self.P < 1 or self.d < 1:
            raise ConfigurationError("P and d must be positive integers")

    @property
    def n_bins(self) -> int:
        return self.P ** self.d

    @property
    def diameter(self) -> float:
        """Euclidean diameter of every cell: sqrt(d) / P."""
        return math.sqrt(self.d) / self.P

    def bin_index(self, x) -> int:
        """Cell id in {1,...,P^d} containing x.

        Per axis k_l = min(floor(x_l * P) + 1, P); the min makes the last
        cell right-closed.  j = 1 + sum (k_l - 1) * P^(d-l), lexicographic
        in the index vector with axis 1 most significant.
        """
        P, d = self.P, self.d
        j = 0
        for l in range(d):
            xl = float(x[l])
            if not 0.0 <= xl <= 1.0:
                raise ValueError(f"coordinate {xl} outside [0, 1]")
            k = min(int(xl * P) + 1, P)
            j = j * P + (k - 1)
        return j + 1

    def bin_indices(self, X: np.ndarray) -> np.ndarray:
        """Vectorized bin_index over rows of an (n, d) array."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}, got {X.shape[1]}")
        if np.any(X < 0.0) or np.any(X > 1.0):
            raise ValueError("coordinates outside [0, 1]")
        k = np.minimum(np.floor(X * self.P).astype(np.int64), self.P - 1)
        j = np.zeros(len(X), dtype=np.int64)
        for l in range(self.d):
            j = j * self.P + k[:, l]
        return j + 1

    def bin_center(self, j: int):
        """Center point of cell j (inverse of bin_index on centers)."""
        if not 1 <= j <= self.n_bins:
            raise ValueError(f"bin id {j} outside 1..{self.n_bins}")
        rem = j - 1
        ks = []
        for l in range(self.d):
            w = self.P ** (self.d - 1 - l)
            ks.append(rem // w)
            rem %= w
        return tuple((k + 0.5) / self.P for k in ks)
