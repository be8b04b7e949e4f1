"""Episode execution, Monte-Carlo replication, rate fitting.

Reproducibility contract: every episode is driven by a Philox counter-based
stream keyed by splitmix64 mixing of (base_seed, horizon, replication), so
results are bit-identical regardless of grid order or parallelism degree.
The per-episode stream is consumed in a fixed block order: covariate draws,
then one uniform per (step, arm) for the potential outcomes, then any
policy randomization.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass

import numpy as np

from ._core import run_episode_loop
from .errors import ConfigurationError
from .policies import FUcbPolicy, PolicySpec

_MASK64 = (1 << 64) - 1


def splitmix64(z: int) -> int:
    """One round of the splitmix64 mixer (public-domain constants)."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(base_seed: int, *parts: int) -> int:
    """Fold integers into a 64-bit stream key; stable across releases."""
    h = base_seed & _MASK64
    for v in parts:
        h = splitmix64((h + (v & _MASK64)) & _MASK64)
    return h


def episode_seed(base_seed: int, n: int, replication: int) -> int:
    return mix_seed(base_seed, n, replication)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


@dataclass
class EpisodeResult:
    regret: float
    subopt: int
    n: int
    trajectory: list | None = None   # (t, bin, arm, instantaneous regret)


def episode_blocks(env, n: int, seed: int):
    """Materialize the per-step blocks an episode is driven by.

    Returns (X, Y, values, rng) where values[t, i] = T(F^i(., X_t)); the rng
    has consumed exactly the covariate and outcome blocks and is handed to
    the policy for any assignment randomization.
    """
    rng = make_rng(seed)
    X, Y = env.sample_block(n, rng)
    values = env.tvalues_block(X)
    return X, Y, values, rng


def run_episode(env, policy, n: int, seed: int,
                record_trajectory: bool = False) -> EpisodeResult:
    """Run one n-step episode; regret is accumulated against exact truth.

    A step counts as suboptimal when the assigned arm lies outside the
    argmax set of the true conditional functional values, so choosing
    either arm of an exact tie is not a mistake.
    """
    X, Y, values, rng = episode_blocks(env, n, seed)
    best = values.max(axis=1)
    reg = best[:, None] - values
    subopt = (values != best[:, None]).astype(np.uint8)

    if isinstance(policy, FUcbPolicy) and not record_trajectory:
        lo, hi = policy.outcome_bounds
        if n and (Y.min() < lo or Y.max() > hi):
            raise ValueError("sampled outcome outside the policy's outcome bounds")
        J = policy.partition.bin_indices(X)
        total, count = run_episode_loop(
            policy._core, J, np.ascontiguousarray(Y),
            np.ascontiguousarray(reg), np.ascontiguousarray(subopt))
        return EpisodeResult(regret=total, subopt=int(count), n=n)

    reg_l = reg.tolist()
    sub_l = subopt.tolist()
    total = 0.0
    count = 0
    trajectory = [] if record_trajectory else None
    for t in range(n):
        x = X[t]
        a = policy.assign(x, rng)
        policy.update(x, a, float(Y[t, a - 1]))
        total += reg_l[t][a - 1]
        count += sub_l[t][a - 1]
        if record_trajectory:
            trajectory.append((t + 1, _bin_of(policy, x), a, reg_l[t][a - 1]))
    return EpisodeResult(regret=total, subopt=count, n=n, trajectory=trajectory)


def _bin_of(policy, x) -> int:
    inner = getattr(policy, "inner", None)
    if inner is not None:
        policy = inner
    part = getattr(policy, "partition", None)
    return part.bin_index(x) if part is not None else 0


# ---------------------------------------------------------------------------
# replicated experiments


@dataclass(frozen=True)
class ExperimentRow:
    n: int
    mean_regret: float
    stderr_regret: float
    mean_subopt: float
    stderr_subopt: float
    reps: int


@dataclass(frozen=True)
class ExperimentTable:
    rows: tuple[ExperimentRow, ...]

    CSV_HEADER = "n,mean_regret,stderr_regret,mean_subopt,stderr_subopt,reps"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            lines.append(",".join([
                str(r.n), repr(r.mean_regret), repr(r.stderr_regret),
                repr(r.mean_subopt), repr(r.stderr_subopt), str(r.reps)]))
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())


class PartialResultError(RuntimeError):
    """An episode failed; .table holds the horizons completed before it."""

    def __init__(self, message: str, table: ExperimentTable):
        super().__init__(message)
        self.table = table


def _episode_job(args):
    env, policy_spec, n, seed = args
    policy = policy_spec.build(env, n)
    res = run_episode(env, policy, n, seed)
    return res.regret, res.subopt


def _aggregate(n_grid, replications, results) -> ExperimentTable:
    rows = []
    for i, n in enumerate(n_grid):
        chunk = results[i * replications:(i + 1) * replications]
        if len(chunk) < replications:
            break
        regs = np.array([c[0] for c in chunk])
        subs = np.array([c[1] for c in chunk], dtype=np.float64)
        if replications >= 2:
            se_r = float(regs.std(ddof=1) / math.sqrt(replications))
            se_s = float(subs.std(ddof=1) / math.sqrt(replications))
        else:
            se_r = se_s = 0.0
        rows.append(ExperimentRow(n=n, mean_regret=float(regs.mean()),
                                  stderr_regret=se_r,
                                  mean_subopt=float(subs.mean()),
                                  stderr_subopt=se_s, reps=replications))
    return ExperimentTable(rows=tuple(rows))


def run_experiment(env, policy_spec: PolicySpec, n_grid, replications: int,
                   base_seed: int, parallelism: int = 1) -> ExperimentTable:
    """Replicate episodes over a horizon grid; bit-identical for a fixed
    base_seed regardless of parallelism degree."""
    n_grid = list(n_grid)
    if not n_grid:
        raise ConfigurationError("n_grid must be nonempty")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigurationError("n_grid must be strictly increasing")
    if replications < 1:
        raise ConfigurationError("replications must be at least 1")
    jobs = [(env, policy_spec, n, episode_seed(base_seed, n, rep))
            for n in n_grid for rep in range(1, replications + 1)]
    results = []
    try:
        if parallelism <= 1:
            for job in jobs:
                results.append(_episode_job(job))
        else:
            ctx = multiprocessing.get_context(
                "fork" if "fork" in multiprocessing.get_all_start_methods() else "spawn")
            with ctx.Pool(parallelism) as pool:
                for out in pool.imap(_episode_job, jobs, chunksize=1):
                    results.append(out)
    except Exception as exc:  # noqa: BLE001 - partial results are part of the contract
        partial = _aggregate(n_grid, replications, results)
        raise PartialResultError(f"experiment aborted: {exc}", partial) from exc
    return _aggregate(n_grid, replications, results)


# ---------------------------------------------------------------------------
# rate fitting and the regret / suboptimal-count inequality


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_stderr: float
    n_rows: int


def fit_rate(table: ExperimentTable, column: str = "R",
             log_corrected: bool = False) -> RateFit:
    """Least squares of log(mean) on log(n) over rows with positive means.

    With log_corrected=True the mean is divided by sqrt(ln n) first, which
    removes the logarithmic factor the theory attaches to the power law.
    """
    if column not in ("R", "S"):
        raise ConfigurationError("column must be 'R' or 'S'")
    xs, ys = [], []
    for r in table.rows:
        mean = r.mean_regret if column == "R" else r.mean_subopt
        if mean <= 0.0:
            continue
        value = mean / math.sqrt(math.log(r.n)) if log_corrected else mean
        xs.append(math.log(r.n))
        ys.append(math.log(value))
    k = len(xs)
    if k < 3:
        raise ConfigurationError(f"need at least 3 usable rows, have {k}")
    x = np.array(xs)
    y = np.array(ys)
    xbar = x.mean()
    sxx = float(((x - xbar) ** 2).sum())
    slope = float(((x - xbar) * (y - y.mean())).sum() / sxx)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    sigma2 = float((resid ** 2).sum()) / (k - 2)
    return RateFit(slope=slope, intercept=intercept,
                   slope_stderr=math.sqrt(sigma2 / sxx), n_rows=k)


@dataclass(frozen=True)
class IsrRow:
    n: int
    mean_regret: float
    bound: float
    slack: float
    passed: bool


@dataclass(frozen=True)
class IsrReport:
    rows: tuple[IsrRow, ...]
    c_tilde: float
    passed: bool


def check_isr(table: ExperimentTable, alpha: float, C0: float) -> IsrReport:
    """Check mean R_n >= C~ n^(-1/alpha) (mean S_n)^(1+1/alpha) with 5-stderr slack.

    C~ = (1 - 1/D0) / (C0 D0)^(1/alpha) with D0 = max(2, 1/C0); the slack
    propagates the stderr of mean S_n through the bound by the delta method.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError("alpha must lie in (0, 1)")
    if C0 <= 0.0:
        raise ConfigurationError("C0 must be positive")
    D0 = max(2.0, 1.0 / C0)
    c_tilde = (1.0 - 1.0 / D0) / (C0 * D0) ** (1.0 / alpha)
    rows = []
    for r in table.rows:
        scale = c_tilde * r.n ** (-1.0 / alpha)
        bound = scale * r.mean_subopt ** (1.0 + 1.0 / alpha)
        if r.mean_subopt > 0.0:
            dbound = scale * (1.0 + 1.0 / alpha) * r.mean_subopt ** (1.0 / alpha)
        else:
            dbound = 0.0
        slack = 5.0 * math.sqrt(r.stderr_regret ** 2 + (dbound * r.stderr_subopt) ** 2)
        rows.append(IsrRow(n=r.n, mean_regret=r.mean_regret, bound=bound,
                           slack=slack, passed=r.mean_regret >= bound - slack))
    return IsrReport(rows=tuple(rows), c_tilde=c_tilde,
                     passed=all(r.passed for r in rows))
