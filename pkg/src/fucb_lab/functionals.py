"""Empirical CDFs, distributional functionals, and the UCB index.

A functional maps a cdf on [a, b] to a real number and is assumed
sup-norm Lipschitz with a known constant C.  Arms are ranked by the
functional of their empirical outcome cdf plus an exploration bonus
C * sqrt(beta * log(N) / (2 * S)).
"""

from __future__ import annotations

import math
from bisect import bisect_right, insort
from dataclasses import dataclass
from typing import Iterable

from .errors import ConfigurationError, InsufficientDataError

MEAN = "mean"
QUANTILE = "quantile"
TRIMMED_MEAN = "trimmed_mean"

# Minimizes the constant in the uniform regret bound; valid choices are beta > 2.
BETA_DEFAULT = 2.0 + math.sqrt(2.0)


@dataclass(frozen=True)
class FunctionalSpec:
    """A functional kind plus its declared sup-norm Lipschitz constant."""

    kind: str
    lipschitz_c: float
    tau: float | None = None        # quantile level, in (0, 1)
    trim_lo: float = 0.0            # lower/upper trim fractions, in [0, 0.5), sum < 1
    trim_hi: float = 0.0

    def __post_init__(self):
        if self.kind not in (MEAN, QUANTILE, TRIMMED_MEAN):
            raise ConfigurationError(f"unknown functional kind {self.kind!r}")
        if not self.lipschitz_c > 0:
            raise ConfigurationError("lipschitz_c must be positive")
        if self.kind == QUANTILE:
            if self.tau is None or not 0.0 < self.tau < 1.0:
                raise ConfigurationError("quantile requires tau in (0, 1)")
        if self.kind == TRIMMED_MEAN:
            lo, hi = self.trim_lo, self.trim_hi
            if not (0.0 <= lo < 0.5 and 0.0 <= hi < 0.5 and lo + hi < 1.0):
                raise ConfigurationError("trim fractions must lie in [0, 0.5) with lo+hi < 1")


def mean_functional(a: float = 0.0, b: float = 1.0) -> FunctionalSpec:
    """Mean on [a, b]; C = b - a is the valid Lipschitz constant for bounded laws."""
    if not b > a:
        raise ConfigurationError("need b > a")
    return FunctionalSpec(MEAN, lipschitz_c=b - a)


def quantile_functional(tau: float, lipschitz_c: float) -> FunctionalSpec:
    return FunctionalSpec(QUANTILE, lipschitz_c=lipschitz_c, tau=tau)


def trimmed_mean_functional(lo: float, hi: float, lipschitz_c: float) -> FunctionalSpec:
    return FunctionalSpec(TRIMMED_MEAN, lipschitz_c=lipschitz_c, trim_lo=lo, trim_hi=hi)


class EmpiricalCdf:
    """Sorted outcome samples for one (bin, arm), with fixed support bounds.

    cdf(y) = #{s : s <= y} / m.  Insertion keeps the sample list sorted
    (binary search + shift), so order statistics are O(1) lookups.
    """

    __slots__ = ("a", "b", "samples")

    def __init__(self, bounds: tuple[float, float] = (0.0, 1.0),
                 samples: Iterable[float] = ()):
        a, b = bounds
        if not b > a:
            raise ConfigurationError("bounds must satisfy a < b")
        self.a = float(a)
        self.b = float(b)
        self.samples: list[float] = sorted(float(s) for s in samples)
        for s in self.samples:
            self._check_bounds(s)

    def _check_bounds(self, y: float):
        if not (self.a <= y <= self.b) or math.isnan(y):
            raise ValueError(f"sample {y} outside bounds [{self.a}, {self.b}]")

    def insert(self, y: float):
        y = float(y)
        self._check_bounds(y)
        insort(self.samples, y)

    def __len__(self) -> int:
        return len(self.samples)

    def cdf(self, y: float) -> float:
        m = len(self.samples)
        if m == 0:
            raise InsufficientDataError("empty sample set")
        return bisect_right(self.samples, y) / m

    def __repr__(self):
        return f"EmpiricalCdf(bounds=({self.a}, {self.b}), m={len(self.samples)})"


def eval_functional(f: FunctionalSpec, cdf: EmpiricalCdf) -> float:
    """Evaluate the functional at an empirical cdf.

    quantile(tau) is the left-continuous generalized inverse, i.e. the
    ceil(tau*m)-th order statistic; trimmed_mean(lo, hi) averages order
    statistics ceil(m*lo)+1 .. m-ceil(m*hi) (1-based).
    """
    samples = cdf.samples
    m = len(samples)
    if m == 0:
        raise InsufficientDataError("cannot evaluate a functional on an empty sample set")
    if f.kind == MEAN:
        return sum(samples) / m
    if f.kind == QUANTILE:
        k = math.ceil(f.tau * m)
        return samples[k - 1]
    # trimmed mean
    first = math.ceil(m * f.trim_lo)          # 0-based inclusive
    last = m - math.ceil(m * f.trim_hi)       # 0-based exclusive
    if last <= first:
        raise InsufficientDataError(
            f"trimming ({f.trim_lo}, {f.trim_hi}) removes all {m} samples")
    total = 0.0
    for i in range(first, last):
        total += samples[i]
    return total / (last - first)


def sup_distance(F: EmpiricalCdf, G: EmpiricalCdf) -> float:
    """Exact Kolmogorov distance between two empirical cdfs on the same bounds.

    The supremum of |F - G| is attained at a jump point, evaluated either at
    the point or just before it; a merged two-pointer scan visits all of them.
    """
    if (F.a, F.b) != (G.a, G.b):
        raise ConfigurationError("empirical cdfs have mismatched bounds")
    xs, ys = F.samples, G.samples
    m, k = len(xs), len(ys)
    if m == 0 or k == 0:
        raise InsufficientDataError("sup_distance requires nonempty samples")
    i = j = 0
    best = 0.0
    while i < m or j < k:
        if j >= k or (i < m and xs[i] <= ys[j]):
            v = xs[i]
        else:
            v = ys[j]
        # left limit at v (strictly below), then value at v (after both jumps)
        d_before = abs(i / m - j / k)
        while i < m and xs[i] == v:
            i += 1
        while j < k and ys[j] == v:
            j += 1
        d_at = abs(i / m - j / k)
        best = max(best, d_before, d_at)
    return best


def ucb_index(f: FunctionalSpec, cdf: EmpiricalCdf, n_bin: int, s_arm: int,
              beta: float = BETA_DEFAULT) -> float:
    """Optimistic index: functional estimate plus exploration bonus.

    n_bin is the arrival ordinal of the current subject in its bin; the index
    is only ever evaluated after per-bin initialization, so n_bin > K >= 2.
    """
    if beta <= 2.0:
        raise ConfigurationError("beta must exceed 2")
    if s_arm < 1:
        raise ValueError("s_arm must be at least 1")
    if n_bin < 2:
        raise ValueError("n_bin must be at least 2")
    value = eval_functional(f, cdf)
    return value + f.lipschitz_c * math.sqrt(beta * math.log(n_bin) / (2.0 * s_arm))
