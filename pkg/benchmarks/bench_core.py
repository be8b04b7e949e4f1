"""Benchmark the compiled UCB state machine against the pure-Python fallback.

Runs the same fixed-seed episode workload through both backends, checks the
traces agree exactly, and reports steps/second.

    python benchmarks/bench_core.py [--steps 200000] [--bins 40] [--arms 2]
"""

import argparse
import time

import numpy as np

from fucb_lab._core import _pure

try:
    from fucb_lab._core import _speedups
except ImportError:
    _speedups = None


def make_workload(steps, bins, arms, seed=42):
    rng = np.random.Generator(np.random.Philox(key=seed))
    J = rng.integers(1, bins + 1, steps).astype(np.int64)
    Y = rng.random((steps, arms))
    reg = rng.random((steps, arms))
    sub = (rng.random((steps, arms)) < 0.5).astype(np.uint8)
    return J, Y, reg, sub


def run(module, kind, params, workload, arms):
    J, Y, reg, sub = workload
    core = module.FUcbCore(arms, 1.0, 3.414213562373095, kind, *params)
    arms_out = np.zeros(len(J), dtype=np.int64)
    t0 = time.perf_counter()
    total, count = module.run_episode_loop(core, J, Y, reg, sub, arms_out)
    elapsed = time.perf_counter() - t0
    return elapsed, (total, count), arms_out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--bins", type=int, default=40)
    parser.add_argument("--arms", type=int, default=2)
    args = parser.parse_args()

    workload = make_workload(args.steps, args.bins, args.arms)
    configs = [("mean", 0, ()), ("quantile(0.5)", 1, (0.5,)),
               ("trimmed(0.1,0.1)", 2, (0.1, 0.1))]

    for label, kind, params in configs:
        t_py, res_py, arms_py = run(_pure, kind, params, workload, args.arms)
        line = f"{label:18s} python {args.steps / t_py:12,.0f} steps/s"
        if _speedups is not None:
            t_cy, res_cy, arms_cy = run(_speedups, kind, params, workload, args.arms)
            assert res_py == res_cy and (arms_py == arms_cy).all(), "backends diverged"
            line += (f"   cython {args.steps / t_cy:12,.0f} steps/s"
                     f"   speedup {t_py / t_cy:6.1f}x   traces identical")
        else:
            line += "   (compiled backend not built)"
        print(line)


if __name__ == "__main__":
    main()
