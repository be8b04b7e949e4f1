"""Command-line front end: run experiments, verify assumptions, demo bounds.

Experiment configs are JSON documents (schema below); unknown keys are
rejected so typos cannot silently change an experiment.

    {
      "environment": {"kind": "margin", "alpha": 0.5},
      "policy": {"kind": "fucb", "partition": "auto"},
      "n_grid": [1024, 2048, 4096],
      "replications": 50,
      "base_seed": 42,
      "output": "out.csv"
    }

Environment kinds: constant-gap (delta), crossing, margin (alpha, gamma, d),
adversarial (P, gamma, alpha, sigma | sigma_seed, d), two-point (p, lo, hi,
gamma, L, alpha, C0, d, density_floor).  Policy kinds: fucb, fucb-nocov,
fucb-doubling, oracle, random; partition is "auto" or {"P": int}; the
functional defaults to the environment's own (mean with C = b - a).

Exit codes: 0 success, 1 verifier failure, 2 config validation failure,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from . import environments as envs
from . import harness
from .errors import ConfigurationError
from .functionals import (
    BETA_DEFAULT,
    FunctionalSpec,
    quantile_functional,
    trimmed_mean_functional,
)
from .policies import POLICY_KINDS, PolicySpec


def _check_keys(d: dict, allowed, path: str):
    for k in d:
        if k not in allowed:
            raise ConfigurationError(f"unknown key '{path}.{k}'" if path else
                                     f"unknown key '{k}'")


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigurationError(f"missing required key '{path}.{key}'")
    return d[key]


@dataclass
class EnvBundle:
    env: envs.Environment
    canonical: dict
    instance: envs.AdversarialInstance | None = None
    family: envs.LineSegmentFamily | None = None


def _parse_p_fn(desc: dict, idx: int):
    path = f"environment.p[{idx}]"
    kind = _require(desc, "kind", path)
    if kind == "constant":
        _check_keys(desc, {"kind", "value"}, path)
        return envs.ConstantFn(_require(desc, "value", path)), dict(desc)
    if kind == "affine":
        _check_keys(desc, {"kind", "intercept", "slope"}, path)
        return envs.AffineFn(_require(desc, "intercept", path),
                             _require(desc, "slope", path)), dict(desc)
    raise ConfigurationError(f"unknown p-function kind '{kind}' at {path}")


def parse_environment(section: dict) -> EnvBundle:
    kind = _require(section, "kind", "environment")
    if kind == "constant-gap":
        _check_keys(section, {"kind", "delta", "d"}, "environment")
        delta = _require(section, "delta", "environment")
        d = int(section.get("d", 1))
        return EnvBundle(envs.constant_gap_env(delta, d=d),
                         {"kind": kind, "delta": delta, "d": d})
    if kind == "crossing":
        _check_keys(section, {"kind", "d"}, "environment")
        d = int(section.get("d", 1))
        return EnvBundle(envs.crossing_env(d=d), {"kind": kind, "d": d})
    if kind == "margin":
        _check_keys(section, {"kind", "alpha", "gamma", "d"}, "environment")
        alpha = _require(section, "alpha", "environment")
        gamma = float(section.get("gamma", 1.0))
        d = int(section.get("d", 1))
        return EnvBundle(envs.build_margin_env(alpha, gamma=gamma, d=d),
                         {"kind": kind, "alpha": alpha, "gamma": gamma, "d": d})
    if kind == "adversarial":
        _check_keys(section, {"kind", "P", "gamma", "alpha", "sigma",
                              "sigma_seed", "d"}, "environment")
        P = int(_require(section, "P", "environment"))
        gamma = float(_require(section, "gamma", "environment"))
        alpha = float(_require(section, "alpha", "environment"))
        d = int(section.get("d", 1))
        if ("sigma" in section) == ("sigma_seed" in section):
            raise ConfigurationError(
                "environment: give exactly one of 'sigma' and 'sigma_seed'")
        if "sigma" in section:
            sigma = tuple(int(s) for s in section["sigma"])
        else:
            sigma = envs.random_sigma(
                P, gamma, alpha, d,
                harness.make_rng(harness.mix_seed(int(section["sigma_seed"]))))
        inst = envs.build_adversarial(P, sigma, gamma, alpha, d=d)
        canonical = {"kind": kind, "P": P, "gamma": gamma, "alpha": alpha,
                     "sigma": list(sigma), "d": d}
        return EnvBundle(inst.environment(), canonical, instance=inst,
                         family=inst.family)
    if kind == "two-point":
        allowed = {"kind", "p", "lo", "hi", "gamma", "L", "alpha", "C0", "d",
                   "density_floor"}
        _check_keys(section, allowed, "environment")
        p_descs = _require(section, "p", "environment")
        parsed = [_parse_p_fn(p, i) for i, p in enumerate(p_descs)]
        lo = float(section.get("lo", 0.0))
        hi = float(section.get("hi", 1.0))
        gamma = float(_require(section, "gamma", "environment"))
        L = float(_require(section, "L", "environment"))
        d = int(section.get("d", 1))
        env = envs.two_point_env(
            [p for p, _ in parsed], gamma=gamma, holder_L=L, lo=lo, hi=hi, d=d,
            margin_alpha=section.get("alpha"), margin_C0=section.get("C0"),
            density_floor=section.get("density_floor"))
        canonical = {"kind": kind, "p": [c for _, c in parsed], "lo": lo,
                     "hi": hi, "gamma": gamma, "L": L, "d": d}
        for opt in ("alpha", "C0", "density_floor"):
            if section.get(opt) is not None:
                canonical[opt] = section[opt]
        return EnvBundle(env, canonical)
    raise ConfigurationError(f"unknown environment kind '{kind}'")


def parse_functional(section: dict | None, env: envs.Environment):
    if section is None:
        return None, None
    _check_keys(section, {"kind", "lipschitz_c", "tau", "lo", "hi"},
                "policy.functional")
    kind = _require(section, "kind", "policy.functional")
    c = section.get("lipschitz_c")
    if c is None:
        if kind == "mean":
            a, b = env.bounds
            c = b - a
        elif env.density_floor:
            c = 1.0 / env.density_floor
        else:
            raise ConfigurationError(
                "policy.functional.lipschitz_c: required for non-mean functionals "
                "unless the environment declares a density_floor")
    if kind == "mean":
        f = FunctionalSpec("mean", lipschitz_c=c)
    elif kind == "quantile":
        f = quantile_functional(_require(section, "tau", "policy.functional"), c)
    elif kind == "trimmed_mean":
        f = trimmed_mean_functional(section.get("lo", 0.0), section.get("hi", 0.0), c)
    else:
        raise ConfigurationError(f"unknown functional kind '{kind}'")
    canonical = {"kind": kind, "lipschitz_c": f.lipschitz_c}
    if kind == "quantile":
        canonical["tau"] = f.tau
    if kind == "trimmed_mean":
        canonical["lo"] = f.trim_lo
        canonical["hi"] = f.trim_hi
    return f, canonical


def parse_policy(section: dict, env: envs.Environment):
    _check_keys(section, {"kind", "beta", "functional", "partition"}, "policy")
    kind = section.get("kind", "fucb")
    if kind not in POLICY_KINDS:
        raise ConfigurationError(f"unknown policy kind '{kind}'")
    beta = float(section.get("beta", BETA_DEFAULT))
    if beta <= 2.0:
        raise ConfigurationError("policy.beta: must exceed 2")
    functional, f_canonical = parse_functional(section.get("functional"), env)
    part = section.get("partition", "auto")
    if part == "auto":
        P = None
    elif isinstance(part, dict):
        _check_keys(part, {"P"}, "policy.partition")
        P = int(_require(part, "P", "policy.partition"))
        if P < 1:
            raise ConfigurationError("policy.partition.P: must be positive")
    else:
        raise ConfigurationError("policy.partition must be 'auto' or {\"P\": int}")
    spec = PolicySpec(kind=kind, beta=beta, functional=functional, P=P)
    canonical = {"kind": kind, "beta": beta,
                 "partition": "auto" if P is None else {"P": P}}
    if f_canonical is not None:
        canonical["functional"] = f_canonical
    return spec, canonical


@dataclass
class ExperimentConfig:
    bundle: EnvBundle
    policy_spec: PolicySpec
    n_grid: list[int]
    replications: int
    base_seed: int
    output: str | None
    _canonical: dict

    def to_dict(self) -> dict:
        return self._canonical


def parse_config(doc: dict) -> ExperimentConfig:
    _check_keys(doc, {"environment", "policy", "n_grid", "replications",
                      "base_seed", "output"}, "")
    bundle = parse_environment(dict(_require(doc, "environment", "")))
    policy_spec, pol_canonical = parse_policy(dict(doc.get("policy", {})), bundle.env)
    n_grid = _require(doc, "n_grid", "")
    if (not isinstance(n_grid, list) or not n_grid
            or any(not isinstance(n, int) or n < 1 for n in n_grid)):
        raise ConfigurationError("n_grid: need a nonempty list of positive integers")
    if len(set(n_grid)) != len(n_grid):
        raise ConfigurationError("n_grid: duplicate horizon values")
    if sorted(n_grid) != n_grid:
        raise ConfigurationError("n_grid: horizons must be increasing")
    replications = int(doc.get("replications", 1))
    if replications < 1:
        raise ConfigurationError("replications: must be at least 1")
    base_seed = int(doc.get("base_seed", 0))
    output = doc.get("output")
    canonical = {
        "environment": bundle.canonical,
        "policy": pol_canonical,
        "n_grid": list(n_grid),
        "replications": replications,
        "base_seed": base_seed,
    }
    if output is not None:
        canonical["output"] = output
    return ExperimentConfig(bundle=bundle, policy_spec=policy_spec,
                            n_grid=list(n_grid), replications=replications,
                            base_seed=base_seed, output=output,
                            _canonical=canonical)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"config parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config root must be a JSON object")
    return parse_config(doc)


# ---------------------------------------------------------------------------
# subcommands


def _default_parallelism() -> int:
    env_val = os.environ.get("FUCB_LAB_THREADS")
    if env_val:
        return max(1, int(env_val))
    return 1


def _rate_line(label: str, table, column: str, log_corrected: bool = False) -> str:
    try:
        fit = harness.fit_rate(table, column, log_corrected=log_corrected)
    except ConfigurationError as exc:
        return f"{label}=undefined ({exc})"
    return f"{label}={fit.slope:.4f}±{fit.slope_stderr:.4f}"


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    reps = args.reps if args.reps is not None else config.replications
    seed = args.seed if args.seed is not None else config.base_seed
    out = args.out if args.out is not None else config.output
    parallel = args.parallel if args.parallel is not None else _default_parallelism()
    try:
        if args.trajectory:
            table, trajectories = _run_with_trajectories(config, reps, seed)
        else:
            table = harness.run_experiment(config.bundle.env, config.policy_spec,
                                           config.n_grid, reps, seed,
                                           parallelism=parallel)
            trajectories = None
        if out:
            table.write_csv(out)
            print(f"wrote {out}")
            if trajectories is not None:
                traj_path = out + ".traj.csv"
                _write_trajectories(traj_path, trajectories)
                print(f"wrote {traj_path}")
        else:
            sys.stdout.write(table.to_csv())
        print(_rate_line("rate_regret", table, "R"))
        print(_rate_line("rate_regret_logcorrected", table, "R", log_corrected=True))
        print(_rate_line("rate_subopt", table, "S"))
        return 0
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


def _run_with_trajectories(config: ExperimentConfig, reps: int, seed: int):
    results = []
    trajectories = []
    for n in config.n_grid:
        for rep in range(1, reps + 1):
            policy = config.policy_spec.build(config.bundle.env, n)
            res = harness.run_episode(config.bundle.env, policy, n,
                                      harness.episode_seed(seed, n, rep),
                                      record_trajectory=True)
            results.append((res.regret, res.subopt))
            trajectories.append((n, rep, res.trajectory))
    table = harness._aggregate(config.n_grid, reps, results)
    return table, trajectories


def _write_trajectories(path: str, trajectories):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,rep,t,bin,arm,inst_regret\n")
        for n, rep, steps in trajectories:
            for t, bin_id, arm, inst in steps:
                fh.write(f"{n},{rep},{t},{bin_id},{arm},{inst!r}\n")


def cmd_verify(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    bundle = config.bundle
    env = bundle.env
    seed = args.seed if args.seed is not None else config.base_seed
    all_ok = True

    hol = envs.verify_holder(env, pairs=100_000,
                             rng=harness.make_rng(harness.mix_seed(seed, 1)))
    print(f"holder: max_ratio={hol.max_ratio:.6g} declared_L={hol.declared_L:.6g} "
          f"{'PASS' if hol.passed else 'FAIL'}")
    all_ok &= hol.passed

    if env.margin_alpha is not None and env.margin_C0 is not None:
        grid = [k / 10.0 for k in range(1, 10)]
        if bundle.instance is not None:
            # exercise the regime where the signed bumps live
            amp = bundle.instance.amplitude
            grid = sorted(set(grid) | {amp * f for f in (0.25, 0.5, 0.75, 1.0)})
        mar = envs.verify_margin(env, delta_grid=grid, samples=200_000,
                                 rng=harness.make_rng(harness.mix_seed(seed, 2)))
        worst = min(mar.rows, key=lambda r: (r.bound + 5 * r.stderr) - r.empirical)
        print(f"margin: alpha={mar.alpha:.4g} C0={mar.C0:.4g} worst delta={worst.delta:.6g} "
              f"empirical={worst.empirical:.6g} bound={worst.bound:.6g} "
              f"{'PASS' if mar.passed else 'FAIL'}")
        all_ok &= mar.passed
    else:
        print("margin: skipped (environment declares no margin constants)")

    family = bundle.family if bundle.family is not None \
        else envs.mean_line_segment_family(*env.bounds)
    slope = envs.verify_family_slope(family)
    print(f"family-slope: min_ratio={slope.min_increment_ratio:.6g} "
          f"c_minus={slope.c_minus:.6g} {'PASS' if slope.passed else 'FAIL'}")
    all_ok &= slope.passed

    return 0 if all_ok else 1


def minimax_lb_curve(n: int, gamma: float, alpha: float, d: int, C0: float) -> float:
    """Minimax regret lower-bound curve n^(1-gamma(1+alpha)/(2gamma+d)) over
    64^(1+1/alpha) (C0+1)^(1/alpha)."""
    expo = 1.0 - gamma * (1.0 + alpha) / (2.0 * gamma + d)
    return n ** expo / (64.0 ** (1.0 + 1.0 / alpha) * (C0 + 1.0) ** (1.0 / alpha))


def cmd_demo_lb(args) -> int:
    try:
        if args.P < 1:
            raise ConfigurationError("P must be positive")
        rng = harness.make_rng(harness.mix_seed(args.sigma_seed))
        sigma = envs.random_sigma(args.P, args.gamma, args.alpha, args.d, rng)
        inst = envs.build_adversarial(args.P, sigma, args.gamma, args.alpha, d=args.d)
        n_grid = [int(v) for v in args.n_grid.split(",")]
        if sorted(set(n_grid)) != n_grid:
            raise ConfigurationError("n-grid must be strictly increasing")
    except (ConfigurationError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        env = inst.environment()
        parallel = args.parallel if args.parallel is not None else _default_parallelism()
        table = harness.run_experiment(env, PolicySpec(kind="fucb"), n_grid,
                                       args.reps, args.seed, parallelism=parallel)
        lines = ["n,mean_regret,stderr_regret,lower_bound"]
        for row in table.rows:
            bound = minimax_lb_curve(row.n, args.gamma, args.alpha, args.d,
                                     env.margin_C0)
            lines.append(f"{row.n},{row.mean_regret!r},{row.stderr_regret!r},{bound!r}")
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            print(f"wrote {args.out}")
        else:
            sys.stdout.write(text)
        print(f"sigma={''.join('+' if s > 0 else '-' for s in sigma)}")
        print(_rate_line("rate_regret", table, "R"))
        return 0
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fucb-lab",
        description="Functional UCB treatment-allocation simulation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config, emit CSV + summary")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None, help="override base_seed")
    p_run.add_argument("--reps", type=int, default=None, help="override replications")
    p_run.add_argument("--out", default=None, help="override output CSV path")
    p_run.add_argument("--parallel", type=int, default=None,
                       help="worker processes (default: FUCB_LAB_THREADS or 1)")
    p_run.add_argument("--trajectory", action="store_true",
                       help="also dump per-step records next to the CSV")
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify", help="run assumption verifiers on the config's environment")
    p_ver.add_argument("config")
    p_ver.add_argument("--seed", type=int, default=None)
    p_ver.set_defaults(func=cmd_verify)

    p_lb = sub.add_parser("demo-lb", help="UCB policy on a random adversarial instance "
                                          "vs the analytic lower-bound curve")
    p_lb.add_argument("--P", type=int, required=True, help="bins per axis of the construction")
    p_lb.add_argument("--gamma", type=float, default=1.0)
    p_lb.add_argument("--alpha", type=float, default=0.5)
    p_lb.add_argument("--d", type=int, default=1)
    p_lb.add_argument("--sigma-seed", type=int, default=0)
    p_lb.add_argument("--n-grid", default="1024,2048,4096,8192")
    p_lb.add_argument("--reps", type=int, default=20)
    p_lb.add_argument("--seed", type=int, default=0)
    p_lb.add_argument("--out", default=None)
    p_lb.add_argument("--parallel", type=int, default=None)
    p_lb.set_defaults(func=cmd_demo_lb)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
