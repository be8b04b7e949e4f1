"""Pure-Python twin of the compiled UCB state machine.

Must stay operation-for-operation identical to _speedups.pyx: same
expressions, same evaluation order, same tie rule, so that both backends
produce bit-identical arm sequences.
"""

from __future__ import annotations

import math
from bisect import insort

_INF = math.inf


class _BinState:
    __slots__ = ("N", "S", "sums", "samples")

    def __init__(self, n_arms: int, store_samples: bool):
        self.N = 1                      # next arrival ordinal
        self.S = [0] * n_arms
        self.sums = [0.0] * n_arms
        self.samples = [[] for _ in range(n_arms)] if store_samples else None


class FUcbCore:
    """Per-bin arrival counters, per-(bin, arm) counts and outcome records."""

    backend = "python"

    def __init__(self, n_arms: int, lipschitz_c: float, beta: float,
                 kind: int, param1: float = 0.0, param2: float = 0.0):
        self.n_arms = n_arms
        self.lipschitz_c = lipschitz_c
        self.beta = beta
        self.kind = kind
        self.param1 = param1            # tau for quantile, trim_lo for trimmed
        self.param2 = param2            # trim_hi for trimmed
        self.store_samples = kind != 0
        self._bins: dict[int, _BinState] = {}

    def _state(self, j: int) -> _BinState:
        st = self._bins.get(j)
        if st is None:
            st = _BinState(self.n_arms, self.store_samples)
            self._bins[j] = st
        return st

    def _eval(self, st: _BinState, i: int) -> float:
        """Functional estimate for arm i (0-based); NaN when undefined."""
        m = st.S[i]
        if self.kind == 0:
            return st.sums[i] / m
        samples = st.samples[i]
        if self.kind == 1:
            k = math.ceil(self.param1 * m)
            return samples[k - 1]
        first = math.ceil(m * self.param1)
        last = m - math.ceil(m * self.param2)
        if last <= first:
            return math.nan
        total = 0.0
        for idx in range(first, last):
            total += samples[idx]
        return total / (last - first)

    def assign(self, j: int) -> int:
        """Arm for the next arrival in bin j (1-based); read-only."""
        st = self._state(j)
        if st.N <= self.n_arms:
            return st.N
        logn = math.log(st.N)
        best = 1
        best_index = -_INF
        for i in range(self.n_arms):
            if st.S[i] == 0:
                index = _INF            # unpulled arm: must explore
            else:
                value = self._eval(st, i)
                if value != value:      # undefined estimate: force exploration
                    index = _INF
                else:
                    index = value + self.lipschitz_c * math.sqrt(
                        self.beta * logn / (2.0 * st.S[i]))
            if index > best_index:
                best_index = index
                best = i + 1
        return best

    def update(self, j: int, arm: int, y: float):
        if not 1 <= arm <= self.n_arms:
            raise ValueError(f"arm {arm} outside 1..{self.n_arms}")
        st = self._state(j)
        st.N += 1
        i = arm - 1
        st.S[i] += 1
        st.sums[i] += y
        if self.store_samples:
            insort(st.samples[i], y)

    # introspection (tests and invariants)

    def arrivals(self, j: int) -> int:
        st = self._bins.get(j)
        return 1 if st is None else st.N

    def pulls(self, j: int, arm: int) -> int:
        st = self._bins.get(j)
        return 0 if st is None else st.S[arm - 1]

    def outcome_sum(self, j: int, arm: int) -> float:
        st = self._bins.get(j)
        return 0.0 if st is None else st.sums[arm - 1]

    def samples_of(self, j: int, arm: int):
        st = self._bins.get(j)
        if st is None or st.samples is None:
            return None
        return list(st.samples[arm - 1])

    def occupied_bins(self):
        return sorted(self._bins)


def run_episode_loop(core, J, Y, reg, subopt, arms_out=None):
    """Drive assign/update over precomputed per-step blocks.

    J: bin ids (n,); Y: potential outcomes (n, K); reg: instantaneous regret
    if arm chosen (n, K); subopt: 0/1 suboptimality mask (n, K).
    Returns (cumulative regret, suboptimal count).
    """
    n = len(J)
    J_l = [int(v) for v in J]
    Y_l = Y.tolist()
    reg_l = reg.tolist()
    sub_l = subopt.tolist()
    total = 0.0
    count = 0
    for t in range(n):
        j = J_l[t]
        a = core.assign(j)
        core.update(j, a, Y_l[t][a - 1])
        total += reg_l[t][a - 1]
        count += sub_l[t][a - 1]
        if arms_out is not None:
            arms_out[t] = a
    return total, count
