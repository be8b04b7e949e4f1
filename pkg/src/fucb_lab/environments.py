"""Synthetic and adversarial outcome-kernel environments and their verifiers.

An environment bundles K conditional outcome kernels on a common support,
a covariate law on [0,1]^d, the functional the arms are ranked by, and the
declared smoothness/margin constants.  Every shipped kernel has a
closed-form functional value and samples by inverse transform from one
uniform draw, so regret can be computed against exact truth.

Environments are immutable after construction and freely shareable;
sampling draws from a caller-owned random stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, NoClosedFormError
from .functionals import (
    MEAN,
    QUANTILE,
    TRIMMED_MEAN,
    FunctionalSpec,
    mean_functional,
)

# Slope-family half-width used by the adversarial construction: 2/sqrt(17) < 1/2.
EPSILON_LB = 2.0 / math.sqrt(17.0)


# ---------------------------------------------------------------------------
# success-probability surfaces for two-point kernels


class ConstantFn:
    """p(x) = c."""

    def __init__(self, c: float):
        if not 0.0 <= c <= 1.0:
            raise ConfigurationError("constant success probability outside [0, 1]")
        self.c = float(c)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return np.full(len(X), self.c)


class AffineFn:
    """p(x) = intercept + slope * x_1 (first coordinate)."""

    def __init__(self, intercept: float, slope: float):
        for corner in (intercept, intercept + slope):
            if not 0.0 <= corner <= 1.0:
                raise ConfigurationError("affine success probability leaves [0, 1]")
        self.intercept = float(intercept)
        self.slope = float(slope)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + self.slope * X[:, 0]


class MarginSignedFn:
    """p(x) = 1/2 + sign * s(x)/2 with s(x) = sign(2x_1-1) |2x_1-1|^(1/alpha).

    Two arms with sign -1/+1 have functional gap |2x_1-1|^(1/alpha), whose
    law under uniform covariates is exactly P(0 < gap <= delta) = delta^alpha.
    """

    def __init__(self, alpha: float, sign: int):
        self.alpha = float(alpha)
        self.sign = int(sign)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        u = 2.0 * X[:, 0] - 1.0
        s = np.sign(u) * np.abs(u) ** (1.0 / self.alpha)
        return 0.5 + 0.5 * self.sign * s


class BumpWeightFn:
    """Mixture weight 1/2 + A_f(x) of the adversarial bump surface."""

    def __init__(self, instance: "AdversarialInstance"):
        self.instance = instance

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return 0.5 + self.instance.a_f(X)


# ---------------------------------------------------------------------------
# outcome kernels


class TwoPointKernel:
    """Conditional law on {lo, hi} with P(Y = hi | x) = p(x)."""

    def __init__(self, p_fn, lo: float, hi: float):
        if not hi > lo:
            raise ConfigurationError("need hi > lo")
        self.p_fn = p_fn
        self.lo = float(lo)
        self.hi = float(hi)

    def tvalues(self, f: FunctionalSpec, X: np.ndarray) -> np.ndarray:
        """Closed-form functional of the conditional law, vectorized over x."""
        p = self.p_fn(X)
        if f.kind == MEAN:
            return self.lo + (self.hi - self.lo) * p
        if f.kind == QUANTILE:
            return np.where(f.tau > 1.0 - p, self.hi, self.lo)
        if f.kind == TRIMMED_MEAN:
            # integral of the quantile function over [trim_lo, 1 - trim_hi]
            top = 1.0 - f.trim_hi
            w_lo = np.clip(np.minimum(1.0 - p, top) - f.trim_lo, 0.0, None)
            w_hi = np.clip(top - np.maximum(1.0 - p, f.trim_lo), 0.0, None)
            return (w_lo * self.lo + w_hi * self.hi) / (top - f.trim_lo)
        raise NoClosedFormError(f"no closed form for functional kind {f.kind!r}")

    def outcomes(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        """Inverse-transform sample: one uniform per draw."""
        return np.where(U > 1.0 - self.p_fn(X), self.hi, self.lo)

    def sup_dist(self, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
        """Kolmogorov distance between conditional cdfs at paired covariates."""
        return np.abs(self.p_fn(X1) - self.p_fn(X2))

    def support(self) -> tuple[float, float]:
        return self.lo, self.hi


# ---------------------------------------------------------------------------
# covariate laws


class UniformLaw:
    """Uniform distribution on [0,1]^d."""

    def __init__(self, d: int):
        if d < 1:
            raise ConfigurationError("dimension must be positive")
        self.d = d
        self.c_lower = 1.0
        self.c_upper = 1.0

    def sample_block(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.random((n, self.d))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.random(self.d)


class GridDensityLaw:
    """Piecewise-constant density on the cubic P-grid, sampled cell-then-uniform.

    values holds one density value per cell in lexicographic cell order; a valid
    density has nonnegative values averaging to 1 over the P^d cells.
    """

    def __init__(self, values: Sequence[float], P: int, d: int):
        vals = np.asarray(values, dtype=np.float64).reshape(-1)
        if len(vals) != P ** d:
            raise ConfigurationError(f"need {P ** d} cell densities, got {len(vals)}")
        if np.any(vals < 0.0):
            raise ConfigurationError("density values must be nonnegative")
        if abs(vals.mean() - 1.0) > 1e-9:
            raise ConfigurationError("cell densities must average to 1")
        self.values = vals
        self.P = P
        self.d = d
        self.c_lower = float(vals.min())
        self.c_upper = float(vals.max())
        self._cell_cdf = np.cumsum(vals / len(vals))

    def sample_block(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random((n, 1 + self.d))
        cells = np.searchsorted(self._cell_cdf, u[:, 0], side="right")
        cells = np.minimum(cells, len(self.values) - 1)
        # decode lexicographic cell id into per-axis indices
        X = np.empty((n, self.d))
        rem = cells
        for l in range(self.d):
            w = self.P ** (self.d - 1 - l)
            k = rem // w
            rem = rem % w
            X[:, l] = (k + u[:, 1 + l]) / self.P
        return X

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_block(1, rng)[0]


# ---------------------------------------------------------------------------
# environment


@dataclass
class Environment:
    """K outcome kernels + covariate law + functional + declared constants."""

    kernels: tuple
    covariate_law: object
    functional: FunctionalSpec
    bounds: tuple[float, float]
    gamma: float
    holder_L: float
    margin_alpha: float | None = None
    margin_C0: float | None = None
    density_floor: float | None = None

    @property
    def K(self) -> int:
        return len(self.kernels)

    @property
    def d(self) -> int:
        return self.covariate_law.d

    # sampling: covariate draw(s) first, then one uniform per arm, so the
    # stream layout is independent of which arm ends up being revealed.

    def sample(self, rng: np.random.Generator):
        """One subject: covariates and the full potential-outcome vector."""
        x = self.covariate_law.sample(rng)
        u = rng.random(self.K)
        X = x[None, :]
        y = np.array([k.outcomes(X, u[i : i + 1])[0] for i, k in enumerate(self.kernels)])
        return x, y

    def sample_block(self, n: int, rng: np.random.Generator):
        X = self.covariate_law.sample_block(n, rng)
        U = rng.random((n, self.K))
        Y = np.column_stack([k.outcomes(X, U[:, i]) for i, k in enumerate(self.kernels)])
        return X, Y

    def tvalues_block(self, X: np.ndarray) -> np.ndarray:
        return np.column_stack([k.tvalues(self.functional, X) for k in self.kernels])

    def true_functional(self, arm: int, x) -> float:
        """Exact T(F^arm(., x)); arm is 1-based."""
        if not 1 <= arm <= self.K:
            raise ValueError(f"arm {arm} outside 1..{self.K}")
        X = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return float(self.kernels[arm - 1].tvalues(self.functional, X)[0])

    def oracle_arm(self, x) -> int:
        """Smallest maximizer of the true conditional functional values."""
        X = np.atleast_2d(np.asarray(x, dtype=np.float64))
        vals = self.tvalues_block(X)[0]
        return int(np.argmax(vals)) + 1

    def gap(self, x) -> float:
        """Best minus second-best value; 0 when all arms tie."""
        X = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return float(self.gaps_block(X)[0])

    def gaps_block(self, X: np.ndarray) -> np.ndarray:
        vals = self.tvalues_block(X)
        vmax = vals.max(axis=1)
        worse = np.where(vals < vmax[:, None], vals, -np.inf)
        second = worse.max(axis=1)
        return np.where(np.isfinite(second), vmax - second, 0.0)


# ---------------------------------------------------------------------------
# line-segment family (lower-bound raw material)


@dataclass(frozen=True)
class PointMass:
    """Cdf descriptor: unit mass at a single point."""

    value: float


@dataclass(frozen=True)
class LineSegmentFamily:
    """Mixtures J_tau = tau*H1 + (1-tau)*H2 along which T grows at rate >= c_minus.

    Shipped instantiation: mean functional with H1, H2 point masses at the
    support endpoints, which makes every derived quantity closed-form.
    """

    h1: PointMass
    h2: PointMass
    functional: FunctionalSpec
    c_minus: float

    def __post_init__(self):
        if self.functional.kind != MEAN:
            raise ConfigurationError(
                "only the mean-family instantiation is supported; no concrete "
                "H1, H2 with a slope bound is available for other functionals")
        if not self.h1.value > self.h2.value:
            raise ConfigurationError("need h1 above h2 for an increasing segment")

    @property
    def epsilon(self) -> float:
        return EPSILON_LB

    def functional_value(self, tau):
        """T(J_tau); exact for the mean of a two-point mixture."""
        return tau * self.h1.value + (1.0 - tau) * self.h2.value

    def h(self, v):
        """v -> T(J_{1/2+v}) on [-epsilon, epsilon]; strictly increasing."""
        return self.functional_value(0.5 + v)

    def h_inv(self, u, tol: float = 1e-12):
        """Inverse of h; closed form when h is linear, else bisection."""
        if self._linear():
            return (u - self.h(0.0)) / (self.h1.value - self.h2.value)
        lo, hi = -self.epsilon, self.epsilon
        if not self.h(lo) <= u <= self.h(hi):
            raise ValueError(f"{u} outside the range of h")
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self.h(mid) < u:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def _linear(self) -> bool:
        return self.functional.kind == MEAN

    def kernel(self, weight_fn) -> TwoPointKernel:
        """Conditional law x -> J_{weight(x)} as a two-point kernel."""
        return TwoPointKernel(weight_fn, lo=self.h2.value, hi=self.h1.value)


def mean_line_segment_family(a: float = 0.0, b: float = 1.0) -> LineSegmentFamily:
    """H1 = point mass at b, H2 = point mass at a; c_minus = C = b - a."""
    return LineSegmentFamily(
        h1=PointMass(b), h2=PointMass(a),
        functional=mean_functional(a, b), c_minus=b - a)


# ---------------------------------------------------------------------------
# adversarial bump-surface instance


def bump(u: np.ndarray, gamma: float) -> np.ndarray:
    """Peak-one bump (1 - ||u||_inf)^gamma on [-1,1]^d."""
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    return (1.0 - np.abs(u).max(axis=1)) ** gamma


def bump_count(P: int, gamma: float, alpha: float, d: int) -> int:
    """Number of signed bumps: ceil(P^(d - gamma*alpha)), capped at P^d."""
    v = P ** (d - gamma * alpha)
    r = round(v)
    m = r if abs(r - v) <= 1e-9 * max(1.0, v) else math.ceil(v)
    return min(int(m), P ** d)


@dataclass(frozen=True)
class AdversarialInstance:
    """Two-arm instance: arm 1 is the fixed mixture J_{1/2}, arm 2 follows a
    surface of signed bumps that is Hoelder-tight and margin-tight."""

    P: int
    gamma: float
    alpha: float
    sigma: tuple[int, ...]
    family: LineSegmentFamily
    d: int = 1

    def __post_init__(self):
        m = bump_count(self.P, self.gamma, self.alpha, self.d)
        if len(self.sigma) != m:
            raise ConfigurationError(
                f"sigma has length {len(self.sigma)}, construction needs m={m}")
        if any(s not in (-1, 1) for s in self.sigma):
            raise ConfigurationError("sigma entries must be -1 or +1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError("gamma must lie in (0, 1]")

    @property
    def m(self) -> int:
        return len(self.sigma)

    @property
    def amplitude(self) -> float:
        """Peak height of each signed bump in functional units: c_- eps P^-gamma / 4."""
        return self.family.c_minus * self.family.epsilon * self.P ** (-self.gamma) / 4.0

    def _cells(self, X: np.ndarray):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        k = np.minimum((X * self.P).astype(np.int64), self.P - 1)
        j0 = np.zeros(len(X), dtype=np.int64)
        for l in range(self.d):
            j0 = j0 * self.P + k[:, l]
        centers = (k + 0.5) / self.P
        return X, j0, centers

    def bump_value(self, j: int, X) -> np.ndarray:
        """phi_j(x) = P^-gamma/4 * bump(2P(x - q_j)) on B_j, 0 elsewhere."""
        X, j0, centers = self._cells(X)
        phi = bump(2.0 * self.P * (X - centers), self.gamma)
        return np.where(j0 == j - 1, self.P ** (-self.gamma) / 4.0 * phi, 0.0)

    def f_sigma(self, X) -> np.ndarray:
        """Functional surface of arm 2: h(0) plus signed bumps on the first m bins."""
        X, j0, centers = self._cells(X)
        phi = bump(2.0 * self.P * (X - centers), self.gamma)
        sig = np.zeros(self.P ** self.d)
        sig[: self.m] = self.sigma
        ce = self.family.c_minus * self.family.epsilon
        return self.family.h(0.0) + ce * sig[j0] * (self.P ** (-self.gamma) / 4.0) * phi

    def a_f(self, X) -> np.ndarray:
        """A_f = h^{-1} o f_sigma, the arm-2 mixture offset in [-eps, eps]."""
        f = self.f_sigma(X)
        if self.family._linear():
            return (f - self.family.h(0.0)) / (self.family.h1.value - self.family.h2.value)
        return np.array([self.family.h_inv(v) for v in np.atleast_1d(f)])

    def environment(self) -> Environment:
        fam = self.family
        lo, hi = fam.h2.value, fam.h1.value
        return Environment(
            kernels=(fam.kernel(ConstantFn(0.5)), fam.kernel(BumpWeightFn(self))),
            covariate_law=UniformLaw(self.d),
            functional=fam.functional,
            bounds=(lo, hi),
            gamma=self.gamma,
            holder_L=fam.epsilon / 2.0,
            margin_alpha=self.alpha,
            margin_C0=8.0 * self.d * (fam.c_minus * fam.epsilon) ** (-self.alpha),
        )


def build_adversarial(P: int, sigma: Sequence[int], gamma: float, alpha: float,
                      family: LineSegmentFamily | None = None,
                      d: int = 1) -> AdversarialInstance:
    if family is None:
        family = mean_line_segment_family()
    return AdversarialInstance(P=P, gamma=gamma, alpha=alpha,
                               sigma=tuple(int(s) for s in sigma),
                               family=family, d=d)


def random_sigma(P: int, gamma: float, alpha: float, d: int,
                 rng: np.random.Generator) -> tuple[int, ...]:
    m = bump_count(P, gamma, alpha, d)
    return tuple(int(2 * b - 1) for b in rng.integers(0, 2, size=m))


# ---------------------------------------------------------------------------
# environment builders


def two_point_env(p_fns: Sequence, gamma: float, holder_L: float,
                  lo: float = 0.0, hi: float = 1.0, d: int = 1,
                  functional: FunctionalSpec | None = None,
                  covariate_law=None, **margin) -> Environment:
    if functional is None:
        functional = mean_functional(lo, hi)
    return Environment(
        kernels=tuple(TwoPointKernel(p, lo, hi) for p in p_fns),
        covariate_law=covariate_law if covariate_law is not None else UniformLaw(d),
        functional=functional,
        bounds=(lo, hi),
        gamma=gamma,
        holder_L=holder_L,
        **margin,
    )


def constant_gap_env(delta: float, d: int = 1) -> Environment:
    """Two arms with p = 1/2 -+ delta/2: the mean gap is delta at every x."""
    if not 0.0 < delta <= 1.0:
        raise ConfigurationError("delta must lie in (0, 1]")
    return two_point_env(
        [ConstantFn(0.5 - delta / 2.0), ConstantFn(0.5 + delta / 2.0)],
        gamma=1.0, holder_L=1.0, d=d)


def crossing_env(d: int = 1) -> Environment:
    """p1 = 1/2, p2(x) = x_1: the best arm flips at x_1 = 1/2."""
    return two_point_env([ConstantFn(0.5), AffineFn(0.0, 1.0)],
                         gamma=1.0, holder_L=1.0, d=d)


def build_margin_env(alpha: float, gamma: float = 1.0, d: int = 1) -> Environment:
    """Two-arm env satisfying the margin condition with equality: the gap law
    is P(0 < gap <= delta) = delta^alpha exactly under uniform covariates."""
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError("alpha must lie in (0, 1)")
    if alpha * gamma > 1.0:
        raise ConfigurationError("need alpha * gamma <= 1 for a Hoelder gap surface")
    return two_point_env(
        [MarginSignedFn(alpha, -1), MarginSignedFn(alpha, +1)],
        gamma=gamma, holder_L=1.0 / alpha, d=d,
        margin_alpha=alpha, margin_C0=1.0)


# ---------------------------------------------------------------------------
# verifiers


@dataclass(frozen=True)
class HolderReport:
    max_ratio: float
    declared_L: float
    n_pairs: int
    passed: bool


def verify_holder(env: Environment, pairs: int, rng: np.random.Generator,
                  declared_L: float | None = None) -> HolderReport:
    """Sample random covariate pairs; the max observed sup-distance ratio
    must not exceed the declared constant (up to 1e-9 relative slack)."""
    L = env.holder_L if declared_L is None else declared_L
    X1 = rng.random((pairs, env.d))
    X2 = rng.random((pairs, env.d))
    dist = np.linalg.norm(X1 - X2, axis=1) ** env.gamma
    keep = dist > 0.0
    max_ratio = 0.0
    for kernel in env.kernels:
        ratios = kernel.sup_dist(X1[keep], X2[keep]) / dist[keep]
        max_ratio = max(max_ratio, float(ratios.max()))
    return HolderReport(max_ratio=max_ratio, declared_L=L, n_pairs=pairs,
                        passed=max_ratio <= L * (1.0 + 1e-9))


@dataclass(frozen=True)
class MarginRow:
    delta: float
    empirical: float
    bound: float
    stderr: float
    passed: bool


@dataclass(frozen=True)
class MarginReport:
    rows: tuple[MarginRow, ...]
    alpha: float
    C0: float
    passed: bool


def verify_margin(env: Environment, alpha: float | None = None,
                  C0: float | None = None, delta_grid: Sequence[float] | None = None,
                  samples: int = 100_000,
                  rng: np.random.Generator | None = None) -> MarginReport:
    """Check empirical P(0 < gap <= delta) <= C0 * delta^alpha + 5 stderr per delta."""
    alpha = env.margin_alpha if alpha is None else alpha
    C0 = env.margin_C0 if C0 is None else C0
    if alpha is None or C0 is None:
        raise ConfigurationError("environment declares no margin constants")
    if delta_grid is None:
        delta_grid = [k / 10.0 for k in range(1, 10)]
    if rng is None:
        rng = np.random.Generator(np.random.Philox(key=0))
    X = env.covariate_law.sample_block(samples, rng)
    gaps = env.gaps_block(X)
    rows = []
    for delta in delta_grid:
        hit = np.logical_and(gaps > 0.0, gaps <= delta)
        p_hat = float(hit.mean())
        stderr = math.sqrt(p_hat * (1.0 - p_hat) / samples)
        bound = C0 * delta ** alpha
        rows.append(MarginRow(delta=delta, empirical=p_hat, bound=bound,
                              stderr=stderr, passed=p_hat <= bound + 5.0 * stderr))
    return MarginReport(rows=tuple(rows), alpha=alpha, C0=C0,
                        passed=all(r.passed for r in rows))


@dataclass(frozen=True)
class SlopeReport:
    min_increment_ratio: float
    c_minus: float
    grid: int
    passed: bool


def verify_family_slope(family: LineSegmentFamily, grid: int = 1001) -> SlopeReport:
    """Successive differences of T(J_tau) on a tau grid must grow at >= c_minus."""
    taus = np.linspace(0.0, 1.0, grid)
    vals = np.asarray(family.functional_value(taus), dtype=np.float64)
    dtau = np.diff(taus)
    incr = np.diff(vals)
    ok = bool(np.all(incr >= family.c_minus * dtau - 1e-12))
    ratio = float((incr / dtau).min())
    return SlopeReport(min_increment_ratio=ratio, c_minus=family.c_minus,
                       grid=grid, passed=ok)
