"""Command-line front end.

Exit status: 0 when every check passes, 1 on a numeric mismatch, 2 on a usage
error (bad flags, unparsable literals, truncation overflow).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from fractions import Fraction

import numpy as np

from .distributions import (
    Poisson,
    TruncationBudget,
    TruncationError,
    describe,
    parse_distribution,
)
from .engine import DelegationPolicy, conjecture_report, evaluate
from .kernels import OracleScaleError
from .simulator import (
    COUNTEREXAMPLE_JOINT,
    SimulationConfig,
    joint_win_probability_exact,
    simulate,
    simulate_joint,
)
from .weighted import (
    ENUMERATION_CAP,
    WeightedProfile,
    unweighted_majority_prob,
    weight_dominance_check,
    weighted_majority_prob,
)

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2

# Published reference values (Poisson electorate, mean 20, p = 0.6, cap 2),
# keyed by m: (conventional, free, capped). Reference only, never an input.
TABLE1_N = 20
TABLE1_P = 0.6
TABLE1_CAP = 2
TABLE1_PUBLISHED = {
    1: (0.81413, 0.808443, 0.808443),
    2: (0.81413, 0.804256, 0.804256),
    5: (0.81413, 0.796578, 0.796616),
    10: (0.81413, 0.791246, 0.792627),
    300: (0.81413, 0.808516, 0.81413),
}
TABLE1_TOLERANCE = 5e-6


class UsageError(Exception):
    pass


def _emit(rows: list[dict], fmt: str, out, summary: str | None = None) -> None:
    if fmt == "json":
        payload = rows[0] if len(rows) == 1 and summary is None else {"rows": rows}
        if summary is not None:
            payload["summary"] = summary
        json.dump(payload, out, indent=2, default=_json_default)
        out.write("\n")
        return
    writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if summary is not None:
        out.write(f"# {summary}\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Fraction):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def table1_rows(budget: TruncationBudget | None = None) -> list[dict]:
    budget = budget or TruncationBudget()
    dist = Poisson(TABLE1_N)
    conv = evaluate(dist, TABLE1_P, DelegationPolicy.conventional(), budget)
    rows = []
    for m, (pub_conv, pub_free, pub_cap) in TABLE1_PUBLISHED.items():
        free = evaluate(dist, TABLE1_P, DelegationPolicy.free(m), budget)
        cap = evaluate(dist, TABLE1_P, DelegationPolicy.capped(m, TABLE1_CAP), budget)
        rows.append(
            {
                "n": TABLE1_N,
                "p": TABLE1_P,
                "m": m,
                "c": TABLE1_CAP,
                "conventional": conv.value,
                "free": free.value,
                "capped": cap.value,
                "published_conventional": pub_conv,
                "published_free": pub_free,
                "published_capped": pub_cap,
                "delta_conventional": conv.value - pub_conv,
                "delta_free": free.value - pub_free,
                "delta_capped": cap.value - pub_cap,
                "truncation_error": max(conv.truncation_error, free.truncation_error, cap.truncation_error),
                "tail_mass_bound": budget.tail_mass_bound,
            }
        )
    return rows


def cmd_table1(args, out) -> int:
    start = time.perf_counter()
    rows = table1_rows(_budget(args))
    worst = max(abs(r[f"delta_{col}"]) for r in rows for col in ("conventional", "free", "capped"))
    ok = worst <= TABLE1_TOLERANCE
    summary = f"max_abs_delta={worst:.3g} tolerance={TABLE1_TOLERANCE:g} ok={str(ok).lower()} seconds={time.perf_counter() - start:.2f}"
    _emit(rows, args.format or "csv", out, summary)
    return EXIT_OK if ok else EXIT_MISMATCH


def _budget(args) -> TruncationBudget:
    return TruncationBudget(tail_mass_bound=args.tail)


def _policy_from_flags(args) -> DelegationPolicy:
    if args.policy:
        return DelegationPolicy.parse(args.policy)
    if args.m is None:
        if args.c is not None:
            raise UsageError("--c needs --m")
        return DelegationPolicy.conventional()
    if args.c is None:
        return DelegationPolicy.free(args.m)
    return DelegationPolicy.capped(args.m, args.c)


def cmd_exact(args, out) -> int:
    result = evaluate(parse_distribution(args.dist), args.p, _policy_from_flags(args), _budget(args))
    row = result.to_dict()
    row["tail_mass_bound"] = args.tail
    _emit([row], args.format or "json", out)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    policy = DelegationPolicy.parse(args.policy) if args.policy else _policy_from_flags(args)
    config = SimulationConfig(
        parse_distribution(args.dist), args.p, policy, args.trials, args.seed, args.sampler
    )
    report = simulate(config, workers=args.workers)
    row = {"dist": describe(config.dist), "p": config.p, "policy": str(policy), "m": policy.m, "c": policy.c}
    row.update(report.to_dict())
    _emit([row], args.format or "json", out)
    return EXIT_OK


def sweep_rows(dist, p, m_max, c=None, budget=None) -> list[dict]:
    rows = []
    for m in range(m_max + 1):
        free = evaluate(dist, p, DelegationPolicy.free(m), budget)
        row = {"dist": describe(dist), "p": p, "m": m, "free": free.value}
        if c is not None:
            row["c"] = c
            row["capped"] = evaluate(dist, p, DelegationPolicy.capped(m, c), budget).value
        row["truncation_error"] = free.truncation_error
        rows.append(row)
    return rows


def sweep_summary(rows: list[dict]) -> dict:
    values = [r["free"] for r in rows]
    argmin = int(np.argmin(values))
    falls = any(b < a for a, b in zip(values, values[1:]))
    rises = any(b > a for a, b in zip(values, values[1:]))
    return {"argmin_m": rows[argmin]["m"], "min_free": values[argmin], "non_monotone": falls and rises}


def cmd_sweep_m(args, out) -> int:
    if args.m_max < 1:
        raise UsageError("--m-max must be at least 1")
    rows = sweep_rows(parse_distribution(args.dist), args.p, args.m_max, args.c, _budget(args))
    s = sweep_summary(rows)
    summary = f"argmin_m={s['argmin_m']} min_free={s['min_free']:.9g} non_monotone={str(s['non_monotone']).lower()}"
    _emit(rows, args.format or "csv", out, summary)
    return EXIT_OK


def cmd_weighted(args, out) -> int:
    if args.n < 1 or args.n > ENUMERATION_CAP:
        raise UsageError(f"--n must lie in 1..{ENUMERATION_CAP}")
    base = unweighted_majority_prob(args.n, args.p)
    if args.random is not None:
        rng = np.random.default_rng(args.seed)
        report = weight_dominance_check(args.n, args.p, rng.random((args.random, args.n)))
        row = report.to_dict()
        row["seed"] = args.seed
        _emit([row], args.format or "json", out)
        return EXIT_OK if report.violations == 0 else EXIT_MISMATCH
    if args.weights is None:
        raise UsageError("give --weights or --random")
    weights = tuple(Fraction(w) for w in args.weights.split(","))
    if len(weights) != args.n:
        raise UsageError(f"--weights has {len(weights)} entries, expected {args.n}")
    weighted = weighted_majority_prob(WeightedProfile(weights), args.p)
    row = {
        "n": args.n,
        "p": args.p,
        "weights": [str(w) for w in weights],
        "unweighted": base,
        "weighted": weighted,
        "gap": base - weighted,
    }
    _emit([row], args.format or "json", out)
    return EXIT_OK if base - weighted >= -1e-12 else EXIT_MISMATCH


def cmd_counterexample(args, out) -> int:
    conv = joint_win_probability_exact(COUNTEREXAMPLE_JOINT, 0)
    deleg = joint_win_probability_exact(COUNTEREXAMPLE_JOINT, 1)
    sim = simulate_joint(COUNTEREXAMPLE_JOINT, 1, args.trials, args.seed)
    row = {
        "joint": [[a, b, str(w)] for a, b, w in COUNTEREXAMPLE_JOINT.entries],
        "m": 1,
        "exact_conventional": str(conv),
        "exact_delegated": str(deleg),
        "simulated_delegated": sim.to_dict(),
    }
    _emit([row], "json", out)
    ok = deleg > conv and sim.ci95_low <= float(deleg) <= sim.ci95_high
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_conjecture(args, out) -> int:
    dists = [parse_distribution(d) for d in args.dist]
    rows = conjecture_report(dists, args.ps, range(1, args.m_max + 1), args.cs, _budget(args))
    violations = [r for r in rows if not r.holds]
    summary = f"cases={len(rows)} violations={len(violations)}"
    _emit([r._asdict() for r in rows], args.format or "csv", out, summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="votedelegation",
        description="Win probabilities under conventional voting, free and capped vote delegation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dist=True, fmt=True):
        if dist:
            p.add_argument("--dist", required=True, help="poisson:N | point:K | explicit:i=w,...")
            p.add_argument("--p", type=float, required=True, help="probability a voter prefers A")
        p.add_argument("--tail", type=float, default=1e-9, help="outer tail mass bound (default 1e-9)")
        if fmt:
            p.add_argument("--format", choices=("csv", "json"))

    t = sub.add_parser("table1", help="reproduce the n=20, p=0.6 reference table")
    common(t, dist=False)
    t.set_defaults(func=cmd_table1)

    e = sub.add_parser("exact", help="exact win probability for one policy")
    common(e)
    e.add_argument("--m", type=int)
    e.add_argument("--c", type=int)
    e.add_argument("--policy", help="conv | free:M | capped:M,C | capped-process:M,C")
    e.set_defaults(func=cmd_exact)

    s = sub.add_parser("simulate", help="seeded Monte Carlo estimate")
    common(s)
    s.add_argument("--m", type=int)
    s.add_argument("--c", type=int)
    s.add_argument("--policy", help="conv | free:M | capped:M,C | capped-process:M,C")
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--sampler", choices=("party", "voter"), default="party",
                   help="free delegation: binomial party share or per-voter assignment")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep-m", help="free (and capped) probability for m = 0..m_max")
    common(w)
    w.add_argument("--m-max", type=int, required=True)
    w.add_argument("--c", type=int)
    w.set_defaults(func=cmd_sweep_m)

    v = sub.add_parser("weighted", help="weighted vs unweighted majority")
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--p", type=float, required=True)
    v.add_argument("--weights", help="comma-separated weights (decimals or fractions)")
    v.add_argument("--random", type=int, metavar="K", help="check K random weight vectors")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--format", choices=("csv", "json"))
    v.set_defaults(func=cmd_weighted)

    x = sub.add_parser("counterexample", help="correlated-types example where delegation helps A")
    x.add_argument("--trials", type=int, default=1_000_000)
    x.add_argument("--seed", type=int, default=1)
    x.set_defaults(func=cmd_counterexample)

    j = sub.add_parser("conjecture", help="report free <= capped over a grid (never fails)")
    common(j, dist=False)
    j.add_argument("--dist", action="append", default=None)
    j.add_argument("--ps", type=float, nargs="+", default=[0.55, 0.6, 0.7, 0.9])
    j.add_argument("--m-max", type=int, default=20)
    j.add_argument("--cs", type=int, nargs="+", default=[2, 3, 5])
    j.set_defaults(func=cmd_conjecture)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "dist", None) is None and args.command == "conjecture":
        args.dist = ["poisson:5", "poisson:10", "poisson:20", "point:9"]
    try:
        return args.func(args, out)
    except (UsageError, ValueError, TruncationError, OracleScaleError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
