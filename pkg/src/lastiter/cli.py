"""Batch experiment runner.

Subcommands: lowerbound, verify, certify, walk, mc, sweep.  Common flags:
--out PATH (default stdout), --format csv|json, --seed N, --jobs N.  A flat
key=value config file can be passed with --config; explicit flags override
file values.  The default worker count honors the LASTITER_JOBS environment
variable.  Exit status: 0 when every embedded check passes, 1 with a
machine-readable failure report on stderr otherwise, 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import constructions as cons
from . import nearly_linear as nl
from . import walk as wk

JOBS_ENV = "LASTITER_JOBS"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return "" if v is None else str(v)


def _write_text(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _emit_json(obj, out: str | None) -> None:
    _write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", out)


def _emit_csv(header, rows, out: str | None) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _write_text("\n".join(lines) + "\n", out)


def _fail(report) -> int:
    sys.stderr.write(json.dumps({"failures": report}, sort_keys=True) + "\n")
    return 1


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _closed_form_record(family: str, d: int, T: int) -> dict:
    inst = cons.build_instance(family, d, T)
    final = cons.eval_f(inst, cons.closed_form_iterate(inst, T + 1))
    bound = cons.lower_bound_value(family, d, T)
    ok = final > bound if d >= 2 else final >= bound
    return {"family": family, "d": d, "T": T, "final_value": final,
            "bound": bound, "ratio": final / bound, "pass": bool(ok)}


def _verify_point(job) -> dict:
    family, d, T, tol, seed = job
    inst = cons.build_instance(family, d, T)
    trace = cons.run_on_instance(inst, seed=seed)
    rep = cons.verify_trajectory(inst, trace, tol=tol)
    rec = rep.to_dict()
    rec["ratio"] = rec["final_value"] / rec["bound"]
    bound_ok = rec["final_value"] > rec["bound"] if d >= 2 else rec["final_value"] >= rec["bound"]
    rec["pass"] = bool(rep.passed and bound_ok)
    return rec


def emit_curve(results: list[dict], x_axis: str = "d") -> tuple[list[str], list[tuple]]:
    """Rows (x, final_suboptimality, bound) sorted by the chosen axis."""
    if x_axis not in ("d", "T"):
        raise ValueError("x_axis must be 'd' or 'T'")
    if not results:
        raise ValueError("empty results; nothing to emit")
    rows = sorted((r[x_axis], r["final_value"], r["bound"]) for r in results)
    return [x_axis, "final_suboptimality", "bound"], rows


# --------------------------------------------------------------------------
# subcommand implementations

def cmd_lowerbound(args) -> int:
    rec = _closed_form_record(args.family, args.d, args.T)
    if args.format == "csv":
        header = ["family", "d", "T", "final_value", "bound", "ratio", "pass"]
        _emit_csv(header, [tuple(rec[h] for h in header)], args.out)
    else:
        _emit_json(rec, args.out)
    return 0 if rec["pass"] else _fail([rec])


def cmd_verify(args) -> int:
    if args.dump_trace:
        from .engine import trace_to_csv
        inst = cons.build_instance(args.family, args.d, args.T)
        trace_to_csv(cons.run_on_instance(inst, seed=args.seed), args.dump_trace)
    rec = _verify_point((args.family, args.d, args.T, args.tol, args.seed))
    if args.format == "csv":
        header = ["family", "d", "T", "max_deviation", "final_value", "bound", "pass"]
        _emit_csv(header, [tuple(rec[h] for h in header)], args.out)
    else:
        _emit_json(rec, args.out)
    return 0 if rec["pass"] else _fail([rec])


def cmd_certify(args) -> int:
    inst = cons.build_instance(args.family, args.d, args.T)
    checks = [cons.check_lipschitz(inst, samples=args.samples, seed=args.seed)]
    if inst.quadratic:
        checks.append(cons.check_strong_convexity(
            inst, alpha=1.0, samples=args.samples, seed=args.seed))
    rec = {"family": args.family, "d": args.d, "T": args.T,
           "checks": [c.to_dict() for c in checks],
           "pass": all(c.passed for c in checks)}
    _emit_json(rec, args.out)
    return 0 if rec["pass"] else _fail([rec])


def cmd_walk(args) -> int:
    f, df = wk.profile(args.profile, slope=args.slope)
    chain = wk.chain_from_function(f, args.n, subgradient=df)
    if args.method == "closed_form":
        res = wk.stationary_closed_form(chain)
    else:
        res = wk.stationary_solve(chain, method=args.method)
    sub = wk.stationary_suboptimality(chain, f, p=res.p)
    bound = wk.suboptimality_bound(args.n)
    summary = {"n": args.n, "profile": args.profile, "method": res.method,
               "residual": res.residual, "suboptimality": sub,
               "bound_value": bound, "pass": bool(sub <= bound)}
    if args.format == "csv":
        header = ["i", "x", "a_i", "p_i", "f_x"]
        rows = [(i, i / args.n, chain.left_probs[i], res.p[i], f(i / args.n))
                for i in range(args.n + 1)]
        _emit_csv(header, rows, args.out)
    else:
        _emit_json(summary, args.out)
    return 0 if summary["pass"] else _fail([summary])


def cmd_mc(args) -> int:
    inst = nl.build_nearly_linear(args.shape, args.diameter, args.grad_bound,
                                  args.epsilon, args.band_ratio)
    x0 = args.x0 if args.x0 is not None else inst.hi
    stats = nl.simulate_paths(inst, args.T, args.trials, x0, seed=args.seed)
    mean, se = nl.expected_suboptimality(stats)
    try:
        tail = nl.tail_estimate(stats, k_max=args.kmax)
        tail_rows, rate = tail.to_rows(), tail.rate
    except ValueError as exc:
        tail_rows, rate = [], None
        sys.stderr.write(f"tail fit unavailable: {exc}\n")
    if args.format == "csv":
        header = ["trial", "final_x", "final_suboptimality", "last_visit_t", "hit_S"]
        rows = [(i, stats.final_x[i], stats.final_subopt[i],
                 int(stats.last_visit[i]), int(stats.last_visit[i] >= 0))
                for i in range(stats.trials)]
        _emit_csv(header, rows, args.out)
    else:
        summary = {"shape": args.shape, "T": args.T, "trials": args.trials,
                   "seed": args.seed, "x0": x0, "mean": mean, "se": se,
                   "never_hit": stats.never_hit_count,
                   "tail": tail_rows, "fitted_rate": rate}
        _emit_json(summary, args.out)
    return 0


def cmd_sweep(args) -> int:
    families = list(cons.FAMILIES) if args.family == "all" else [args.family]
    jobs = []
    for family in families:
        for d in args.d:
            for T in args.T:
                if d <= T:
                    jobs.append((family, d, T, args.tol, args.seed))
    if not jobs:
        raise SystemExit("sweep grid is empty (no (d, T) pair with d <= T)")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_verify_point, jobs))
    else:
        results = [_verify_point(j) for j in jobs]

    header = ["family", "d", "T", "final_value", "bound", "ratio", "pass"]
    rows = [tuple(r[h] for h in header) for r in results]
    _emit_csv(header, rows, args.out)
    if args.curve_out:
        chead, crows = emit_curve(results, x_axis=args.x_axis)
        _emit_csv(chead, crows, args.curve_out)
    bad = [r for r in results if not r["pass"]]
    if bad:
        return _fail([{k: r[k] for k in ("family", "d", "T", "max_deviation", "pass")}
                      for r in bad])
    return 0


# --------------------------------------------------------------------------
# parser assembly and config handling

def _add_common(p, jobs=False):
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--seed", type=int, default=0)
    if jobs:
        default_jobs = int(os.environ.get(JOBS_ENV, "1"))
        p.add_argument("--jobs", type=int, default=default_jobs,
                       help=f"worker processes (default from ${JOBS_ENV} or 1)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lastiter",
        description="experiments on the final iterate of projected subgradient descent")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lowerbound", help="closed-form final value vs certified bound")
    p.add_argument("--family", choices=cons.FAMILIES, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--T", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_lowerbound)

    p = sub.add_parser("verify", help="engine trajectory vs closed form")
    p.add_argument("--family", choices=cons.FAMILIES, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--dump-trace", default=None, help="also write the trace CSV here")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("certify", help="sampled Lipschitz / strong convexity checks")
    p.add_argument("--family", choices=cons.FAMILIES, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--samples", type=int, default=10_000)
    _add_common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("walk", help="stationary analysis of the grid random walk")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--profile", choices=sorted(wk.PROFILES), default="quadratic")
    p.add_argument("--slope", type=float, default=0.5, help="slope for the linear profile")
    p.add_argument("--method",
                   choices=("closed_form", "linear_solve", "power_iteration"),
                   default="closed_form")
    _add_common(p)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("mc", help="Monte Carlo paths on a nearly linear instance")
    p.add_argument("--shape", choices=nl.SHAPES, default="abs")
    p.add_argument("--diameter", type=float, default=1.0)
    p.add_argument("--grad-bound", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--band-ratio", type=float, default=1.0)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--x0", type=float, default=None, help="start point (default: right endpoint)")
    p.add_argument("--kmax", type=int, default=20)
    _add_common(p)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("sweep", help="verify + bound over a (family, d, T) grid")
    p.add_argument("--family", choices=cons.FAMILIES + ("all",), required=True)
    p.add_argument("--d", type=_int_list, required=True, help="comma list, e.g. 1,2,4")
    p.add_argument("--T", type=_int_list, required=True, help="comma list, e.g. 64,1024")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--curve-out", default=None, help="also write (x, final, bound) rows")
    p.add_argument("--x-axis", choices=("d", "T"), default="d")
    _add_common(p, jobs=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def _load_config(path: str) -> list[str]:
    flags = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            if not _:
                raise SystemExit(f"bad config line (want key=value): {line!r}")
            flags.append(f"--{key.strip()}={value.strip()}")
    return flags


def _inject_config(argv: list[str]) -> list[str]:
    """Expand --config FILE into its key=value flags, placed before the
    explicit flags so the command line wins."""
    out, cfg = [], None
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--config":
            cfg = argv[i + 1]
            i += 2
        elif tok.startswith("--config="):
            cfg = tok.split("=", 1)[1]
            i += 1
        else:
            out.append(tok)
            i += 1
    if cfg is None or not out:
        return argv
    return [out[0]] + _load_config(cfg) + out[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _inject_config(argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
