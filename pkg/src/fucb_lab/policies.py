"""Assignment policies: binned functional UCB, baselines, doubling wrapper.

Every policy follows the same two-call protocol per subject: assign(x, rng)
returns a 1-based arm, update(x, arm, y) feeds back the single revealed
outcome.  The UCB policy is deterministic; rng is threaded through the
interface for uniformity and consumed only by the random baseline.

A policy instance is single-threaded (assign/update strictly alternate);
distinct instances may run on distinct threads or processes.
"""

from __future__ import annotations

from dataclasses import dataclass

from ._core import KIND_MEAN, KIND_QUANTILE, KIND_TRIMMED, FUcbCore
from .errors import ConfigurationError
from .functionals import (
    BETA_DEFAULT,
    MEAN,
    QUANTILE,
    FunctionalSpec,
)
from .partition import CubicPartition, choose_P

_KIND_CODES = {MEAN: KIND_MEAN, QUANTILE: KIND_QUANTILE}


def _core_for(functional: FunctionalSpec, n_arms: int, beta: float) -> FUcbCore:
    code = _KIND_CODES.get(functional.kind, KIND_TRIMMED)
    if code == KIND_QUANTILE:
        p1, p2 = functional.tau, 0.0
    elif code == KIND_TRIMMED:
        p1, p2 = functional.trim_lo, functional.trim_hi
    else:
        p1 = p2 = 0.0
    return FUcbCore(n_arms, functional.lipschitz_c, beta, code, p1, p2)


class FUcbPolicy:
    """Functional UCB run independently on each cell of a cubic partition.

    Per-bin state: an arrival ordinal N_j starting at 1, and per-arm pull
    counts with outcome records.  The first K arrivals in a bin get arms
    1..K in order; afterwards the smallest arm maximizing
    estimate + C * sqrt(beta * log(N_j) / (2 * S)) is assigned.
    """

    def __init__(self, n_arms: int, functional: FunctionalSpec,
                 partition: CubicPartition, beta: float = BETA_DEFAULT,
                 outcome_bounds: tuple[float, float] = (0.0, 1.0)):
        if n_arms < 2:
            raise ConfigurationError("need at least two arms")
        if beta <= 2.0:
            raise ConfigurationError("beta must exceed 2")
        self.n_arms = n_arms
        self.functional = functional
        self.partition = partition
        self.beta = beta
        self.outcome_bounds = outcome_bounds
        self._core = _core_for(functional, n_arms, beta)

    def assign(self, x, rng=None) -> int:
        return self._core.assign(self.partition.bin_index(x))

    def update(self, x, arm: int, y: float):
        a, b = self.outcome_bounds
        if not a <= y <= b:
            raise ValueError(f"outcome {y} outside [{a}, {b}]")
        self._core.update(self.partition.bin_index(x), arm, y)

    # introspection

    def arrivals(self, j: int) -> int:
        """N_j: the arrival ordinal of the next subject in bin j."""
        return self._core.arrivals(j)

    def pulls(self, j: int, arm: int) -> int:
        return self._core.pulls(j, arm)

    def samples_of(self, j: int, arm: int):
        """Recorded outcomes for (bin, arm); None for the mean kind, which
        tracks running sums only."""
        return self._core.samples_of(j, arm)

    def outcome_sum(self, j: int, arm: int) -> float:
        return self._core.outcome_sum(j, arm)

    def occupied_bins(self):
        return self._core.occupied_bins()

    def total_pulls(self) -> int:
        return sum(self.pulls(j, i + 1)
                   for j in self.occupied_bins() for i in range(self.n_arms))


def make_fucb(n_arms: int, functional: FunctionalSpec, horizon: int,
              gamma: float, d: int, beta: float = BETA_DEFAULT,
              P: int | None = None,
              outcome_bounds: tuple[float, float] = (0.0, 1.0)) -> FUcbPolicy:
    """Horizon-aware constructor: P = ceil(horizon^(1/(2 gamma + d))) unless given."""
    if P is None:
        P = choose_P(horizon, gamma, d)
    return FUcbPolicy(n_arms, functional, CubicPartition(P=P, d=d),
                      beta=beta, outcome_bounds=outcome_bounds)


def make_covariate_ignoring(n_arms: int, functional: FunctionalSpec, d: int,
                            beta: float = BETA_DEFAULT,
                            outcome_bounds: tuple[float, float] = (0.0, 1.0)) -> FUcbPolicy:
    """The same state machine with a single bin covering [0,1]^d."""
    return FUcbPolicy(n_arms, functional, CubicPartition(P=1, d=d),
                      beta=beta, outcome_bounds=outcome_bounds)


class OraclePolicy:
    """Assigns the smallest maximizer of the true conditional functional."""

    def __init__(self, env):
        self.env = env

    def assign(self, x, rng=None) -> int:
        return self.env.oracle_arm(x)

    def update(self, x, arm, y):
        pass


class RandomPolicy:
    """Uniformly random arm from the caller's stream."""

    def __init__(self, n_arms: int):
        self.n_arms = n_arms

    def assign(self, x, rng) -> int:
        return int(rng.integers(1, self.n_arms + 1))

    def update(self, x, arm, y):
        pass


class DoublingPolicy:
    """Anytime wrapper: discard state and rebuild at steps 1, 2, 4, 8, ...

    factory(horizon) must return a fresh policy sized for that horizon
    (including its own partition choice); the policy built at step 2^m
    serves steps 2^m .. 2^(m+1)-1.
    """

    def __init__(self, factory):
        self.factory = factory
        self._t = 0
        self._inner = None

    def assign(self, x, rng=None) -> int:
        self._t += 1
        if self._t & (self._t - 1) == 0:  # power of two: restart
            self._inner = self.factory(self._t)
        return self._inner.assign(x, rng)

    def update(self, x, arm, y):
        self._inner.update(x, arm, y)

    @property
    def inner(self):
        return self._inner


# ---------------------------------------------------------------------------
# serializable policy descriptor (experiment configs, worker processes)

POLICY_KINDS = ("fucb", "fucb-nocov", "fucb-doubling", "oracle", "random")


@dataclass(frozen=True)
class PolicySpec:
    """How to build a policy for a given environment and horizon."""

    kind: str = "fucb"
    beta: float = BETA_DEFAULT
    functional: FunctionalSpec | None = None   # None: env's own functional
    P: int | None = None                       # None: auto via choose_P

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigurationError(f"unknown policy kind {self.kind!r}")

    def build(self, env, horizon: int):
        functional = self.functional if self.functional is not None else env.functional
        if self.kind == "oracle":
            return OraclePolicy(env)
        if self.kind == "random":
            return RandomPolicy(env.K)
        if self.kind == "fucb-nocov":
            return make_covariate_ignoring(env.K, functional, env.d,
                                           beta=self.beta, outcome_bounds=env.bounds)
        if self.kind == "fucb-doubling":
            def factory(h, _env=env, _f=functional):
                return make_fucb(_env.K, _f, h, _env.gamma, _env.d,
                                 beta=self.beta, P=self.P, outcome_bounds=_env.bounds)
            return DoublingPolicy(factory)
        return make_fucb(env.K, functional, horizon, env.gamma, env.d,
                         beta=self.beta, P=self.P, outcome_bounds=env.bounds)
