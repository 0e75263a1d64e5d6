"""Command-line front end: generate, solve, decide, inspect, benchmark.

One binary with subcommands.  Config precedence is flags over an optional
JSON config file over built-in defaults.  Each run draws all randomness
from a single seed, split deterministically per component, so any trace
can be replayed from the flag set alone.

Exit codes: 0 success, 2 usage, 3 bad input, 4 internal contract violation.
Failures print a machine-readable error record to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from math import comb
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .decide import DEFAULT_CAP_MULTIPLE, decide_csp
from .errors import ContractError, InputError
from .exact import MAX_BRUTE_VARS, brute_opt, instance_hash, ratio_report
from .instances import (
    KcspInstance,
    Nae3Instance,
    densify_reduction,
    gen_planted_nae3,
    gen_random_nae3,
    read_instance,
    val_assignment,
    val_kcsp,
    write_instance,
)
from .relaxation import (
    DEFAULT_MAX_CELLS,
    build_sa_lp,
    lp_to_pd,
    relaxation_cells,
    solve_lp,
)
from .rounding import RoundingConfig, round_pd, scale_of

_TUNABLES = (
    "degree",
    "tau",
    "epsilon",
    "t_pairs",
    "r_max",
    "samples",
    "n_bruteforce",
    "seed",
    "budget",
)


def _component_seed(seed: int, component: int) -> int:
    """Child seed for one pipeline component, derived from the run seed."""
    child = np.random.SeedSequence(seed, spawn_key=(component,))
    return int(child.generate_state(1)[0])


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError(f"config file {path} must hold a JSON object")
    unknown = set(raw) - set(_TUNABLES)
    if unknown:
        raise InputError(f"config file {path} has unknown keys: {sorted(unknown)}")
    return raw


def _resolve(args: argparse.Namespace, config: dict[str, Any]) -> dict[str, Any]:
    """Merge tunables: explicit flag, else config file, else default."""
    defaults = {
        "degree": 3,
        "tau": None,
        "epsilon": None,
        "t_pairs": 2,
        "r_max": 4,
        "samples": 200,
        "n_bruteforce": 15,
        "seed": 0,
        "budget": DEFAULT_MAX_CELLS,
    }
    out = {}
    for key in _TUNABLES:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in config:
            out[key] = config[key]
        else:
            out[key] = defaults[key]
    return out


def _read_instance_file(path: str) -> Nae3Instance | KcspInstance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read instance file {path}: {exc}") from exc
    return read_instance(text)


def _write_out(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def effective_degree(n: int, requested: int, budget: int) -> int:
    """Largest degree at most `requested` whose table count fits the budget.

    Never goes below 3; a budget too small even for degree 3 surfaces later
    as a size error from the relaxation builder.
    """
    d = requested
    while d > 3 and relaxation_cells(n, d) > budget:
        d -= 1
    return d


def _rounding_config(n: int, knobs: dict[str, Any], seed: int) -> RoundingConfig:
    overrides: dict[str, Any] = {
        "t_pairs": int(knobs["t_pairs"]),
        "r_max": int(knobs["r_max"]),
        "samples_per_stage": int(knobs["samples"]),
        "n_bruteforce": int(knobs["n_bruteforce"]),
        "seed": seed,
    }
    if knobs["tau"] is not None:
        overrides["tau"] = float(knobs["tau"])
    if knobs["epsilon"] is not None:
        overrides["epsilon"] = float(knobs["epsilon"])
    return RoundingConfig.for_instance(n, **overrides)


def cmd_gen(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    knobs = _resolve(args, config)
    seed = int(knobs["seed"])
    if args.kind == "random":
        inst = gen_random_nae3(args.n, seed)
        _write_out(write_instance(inst), args.out)
        return 0
    if args.kind == "planted":
        if args.p is None:
            raise InputError("gen planted needs -p (corruption probability)")
        planted = gen_planted_nae3(args.n, args.p, seed)
        if args.out is None or args.out == "-":
            raise InputError("gen planted needs --out (a sidecar file is written next to it)")
        _write_out(write_instance(planted.instance), args.out)
        m = planted.instance.m
        sidecar = {
            "assignment": planted.planted.tolist(),
            "violated_count": planted.violated_count,
            "val": planted.violated_count / m if m else 0.0,
            "seed": seed,
        }
        Path(args.out + ".planted.json").write_text(json.dumps(sidecar, indent=2) + "\n")
        return 0
    # dense: pad a (possibly sparse) clause file with dummy variables
    if args.input is None:
        raise InputError("gen dense needs an input clause file")
    if args.eps is None:
        raise InputError("gen dense needs --eps")
    src = _read_instance_file(args.input)
    if not isinstance(src, Nae3Instance):
        raise InputError("gen dense expects a nae3 clause file")
    dense = densify_reduction(src.n, src.triples, src.neg, args.eps)
    _write_out(write_instance(dense), args.out)
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    knobs = _resolve(args, config)
    seed = int(knobs["seed"])
    inst = _read_instance_file(args.instance)
    if not isinstance(inst, Nae3Instance):
        raise InputError("solve expects a nae3 instance")
    if not inst.complete and not args.allow_incomplete:
        raise InputError(
            f"instance has {inst.m} of {comb(inst.n, 3)} triples; "
            "pass --allow-incomplete to solve it anyway"
        )
    requested = int(knobs["degree"])
    if requested < 3:
        raise InputError(f"solve needs degree at least 3, got {requested}")
    degree = effective_degree(inst.n, requested, int(knobs["budget"]))

    t0 = time.perf_counter()
    problem = build_sa_lp(inst, degree)
    solution = solve_lp(problem)
    lp_time = time.perf_counter() - t0
    mu = lp_to_pd(problem, solution)

    cfg = _rounding_config(inst.n, knobs, _component_seed(seed, 0))
    t1 = time.perf_counter()
    alpha, trace = round_pd(inst, mu, cfg)
    round_time = time.perf_counter() - t1

    extra = {
        "config": {
            "degree_requested": requested,
            "degree_effective": degree,
            "budget_cells": int(knobs["budget"]),
            "tau": cfg.tau,
            "epsilon": cfg.epsilon,
            "t_pairs": cfg.t_pairs,
            "r_max": cfg.r_max,
            "samples_per_stage": cfg.samples_per_stage,
            "n_bruteforce": cfg.n_bruteforce,
        },
        "lp_status": solution.status,
        "lp_residual": solution.residual,
        "lp_time_s": lp_time,
        "round_time_s": round_time,
        "stages": trace.depth,
        "branches": [s.branch for s in trace.stages],
    }
    if args.emit_trace:
        extra["trace"] = trace.to_dict()
    report = ratio_report(
        inst, solution.objective, {"rounded": alpha}, seed=seed, extra=extra
    )
    text = json.dumps(report, indent=2) + "\n"
    _write_out(text, args.report)
    if args.report not in (None, "-"):
        val = report["outputs"]["rounded"]["val"]
        print(f"lp {solution.objective:.6g}  rounded {val:.6g}  stages {trace.depth}")
    return 0


def _as_kcsp(inst: Nae3Instance | KcspInstance) -> KcspInstance:
    if isinstance(inst, KcspInstance):
        return inst
    if not inst.complete:
        raise InputError("decide needs a complete instance")
    return KcspInstance.from_nae(inst)


def cmd_decide(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    knobs = _resolve(args, config)
    seed = int(knobs["seed"])
    kcsp = _as_kcsp(_read_instance_file(args.instance))
    order_seed = _component_seed(seed, 1) if args.shuffle_order else None
    result = decide_csp(
        kcsp,
        seed=order_seed,
        incremental=not args.full_recheck,
        cap_multiple=args.cap_multiple,
    )
    verdict = "yes" if result.satisfiable else "no"
    if args.report:
        record = {
            "schema_version": 1,
            "toolkit_version": __version__,
            "instance_hash": instance_hash(kcsp),
            "n": kcsp.n,
            "k": kcsp.k,
            "satisfiable": result.satisfiable,
            "count": result.count,
            "survivor_counts": list(result.survivor_counts),
            "order": result.order.tolist(),
            "seed": seed,
        }
        _write_out(json.dumps(record, indent=2) + "\n", args.report)
        if args.report != "-":
            print(verdict)
    else:
        print(verdict)
    if args.emit_witness and result.satisfiable:
        witness = result.assignments[0]
        if val_kcsp(kcsp, witness) != 0.0:
            raise ContractError("witness failed verification before printing")
        print("".join(str(int(b)) for b in witness))
    return 0


def _exhaustive_kcsp(inst: KcspInstance) -> tuple[bool, int]:
    """Satisfiability and solution count by scanning all assignments."""
    if inst.n > MAX_BRUTE_VARS:
        raise InputError(f"exhaustive check capped at {MAX_BRUTE_VARS} variables, got {inst.n}")
    count = 0
    sat = False
    shifts = np.arange(inst.n - 1, -1, -1)
    for x in range(1 << inst.n):
        alpha = ((x >> shifts) & 1).astype(np.uint8)
        if val_kcsp(inst, alpha) == 0.0:
            count += 1
            sat = True
    return sat, count


def cmd_oracle(args: argparse.Namespace) -> int:
    inst = _read_instance_file(args.instance)
    if args.exhaustive and isinstance(inst, KcspInstance):
        sat, count = _exhaustive_kcsp(inst)
        print("yes" if sat else "no")
        print(f"count {count}")
        return 0
    if isinstance(inst, KcspInstance):
        raise InputError("oracle on a kcsp file needs --exhaustive")
    best, opt = brute_opt(inst)
    if args.exhaustive:
        print("yes" if opt == 0.0 else "no")
    print(f"opt {opt:.10g}")
    print("".join(str(int(b)) for b in best))
    return 0


def _bench_one(run: dict[str, Any], out_dir: Path) -> dict[str, Any]:
    """Execute one bench run and write its report; returns a summary row."""
    name = run["name"]
    kind = run.get("kind", "random")
    n = int(run["n"])
    seed = int(run.get("seed", 0))
    requested = int(run.get("degree", 3))
    budget = int(run.get("budget", DEFAULT_MAX_CELLS))
    t0 = time.perf_counter()
    if kind == "planted":
        inst = gen_planted_nae3(n, float(run["p"]), seed).instance
    elif kind == "random":
        inst = gen_random_nae3(n, seed)
    elif kind == "file":
        inst = _read_instance_file(run["path"])
        if not isinstance(inst, Nae3Instance):
            raise InputError(f"bench run {name}: expected a nae3 file")
    else:
        raise InputError(f"bench run {name}: unknown kind {kind!r}")

    degree = effective_degree(inst.n, requested, budget)
    problem = build_sa_lp(inst, degree)
    solution = solve_lp(problem)
    mu = lp_to_pd(problem, solution)
    overrides = {
        k: run[k]
        for k in ("tau", "epsilon", "t_pairs", "r_max", "samples_per_stage", "n_bruteforce")
        if k in run
    }
    cfg = RoundingConfig.for_instance(inst.n, seed=_component_seed(seed, 0), **overrides)
    alpha, trace = round_pd(inst, mu, cfg)
    wall = time.perf_counter() - t0

    extra = {
        "name": name,
        "kind": kind,
        "degree_requested": requested,
        "degree_effective": degree,
        "stages": trace.depth,
        "branches": [s.branch for s in trace.stages],
    }
    report = ratio_report(inst, solution.objective, {"rounded": alpha}, seed=seed, extra=extra)
    (out_dir / f"{name}.json").write_text(json.dumps(report, indent=2) + "\n")
    val = report["outputs"]["rounded"]["val"]
    # Ratio against the LP value floored at one violated constraint's weight,
    # so satisfiable instances with val 0 do not blow the statistic up.
    floor = max(solution.objective, 1.0 / inst.m)
    return {
        "name": name,
        "val": val,
        "lp_value": solution.objective,
        "ratio_floored": val / floor,
        "stages": trace.depth,
        "wall_time_s": wall,
    }


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        suite = json.loads(Path(args.suite).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read suite file {args.suite}: {exc}") from exc
    runs = suite.get("runs", [])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    failures = []
    for run in runs:
        try:
            rows.append(_bench_one(run, out_dir))
        except Exception as exc:  # noqa: BLE001 - partial failures are recorded
            failures.append({"name": run.get("name", "?"), "error": f"{type(exc).__name__}: {exc}"})
    aggregate = {
        "schema_version": 1,
        "toolkit_version": __version__,
        "runs": rows,
        "failures": failures,
        "median_ratio_floored": float(np.median([r["ratio_floored"] for r in rows])) if rows else None,
        "median_stages": float(np.median([r["stages"] for r in rows])) if rows else None,
        "median_wall_time_s": float(np.median([r["wall_time_s"] for r in rows])) if rows else None,
    }
    (out_dir / "aggregate.json").write_text(json.dumps(aggregate, indent=2) + "\n")
    print(f"{len(rows)} ok, {len(failures)} failed, reports in {out_dir}")
    return 4 if failures else 0


def _add_tunable_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with tunable defaults")
    p.add_argument("--seed", type=int, help="run seed (default 0)")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--degree", type=int, help="relaxation degree to request (default 3)")
    p.add_argument("--tau", type=float, help="fixing threshold scale (default: squared log)")
    p.add_argument("--epsilon", type=float, help="aggregate growth tolerance per conditioning")
    p.add_argument("--t-pairs", dest="t_pairs", type=int, help="pair budget reserved for conditioning")
    p.add_argument("--r-max", dest="r_max", type=int, help="extra conditioning coordinates to try")
    p.add_argument("--samples", type=int, help="conditioning samples per stage")
    p.add_argument("--n-bruteforce", dest="n_bruteforce", type=int, help="exact-completion cutoff")
    p.add_argument("--budget", type=int, help=f"table-cell budget (default {DEFAULT_MAX_CELLS})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="densecsp",
        description="Dense NAE-3-SAT relaxation, rounding, and complete k-CSP decision.",
    )
    parser.add_argument("--version", action="version", version=f"densecsp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate instance files")
    g.add_argument("kind", choices=("random", "planted", "dense"))
    g.add_argument("-n", type=int, help="number of variables (random, planted)")
    g.add_argument("-p", type=float, help="corruption probability (planted)")
    g.add_argument("--eps", type=float, help="completeness slack (dense)")
    g.add_argument("input", nargs="?", help="clause file to densify (dense)")
    g.add_argument("--out", "-o", help="output path, - for stdout")
    _add_tunable_flags(g)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="relax, round, and report")
    s.add_argument("instance", help="nae3 instance file")
    s.add_argument("--report", help="report path, - for stdout (default)")
    s.add_argument("--allow-incomplete", action="store_true")
    s.add_argument("--emit-trace", action="store_true", help="embed the per-stage trace")
    _add_solver_flags(s)
    _add_tunable_flags(s)
    s.set_defaults(func=cmd_solve)

    d = sub.add_parser("decide", help="satisfiability of a complete instance")
    d.add_argument("instance", help="kcsp file, or complete nae3 to convert")
    d.add_argument("--emit-witness", action="store_true")
    d.add_argument("--shuffle-order", action="store_true", help="seeded variable order")
    d.add_argument("--full-recheck", action="store_true", help="re-check all constraints each step")
    d.add_argument("--cap-multiple", type=float, default=DEFAULT_CAP_MULTIPLE)
    d.add_argument("--report", help="survivor statistics JSON path, - for stdout")
    _add_tunable_flags(d)
    d.set_defaults(func=cmd_decide)

    o = sub.add_parser("oracle", help="exact optimum by enumeration")
    o.add_argument("instance")
    o.add_argument("--exhaustive", action="store_true", help="print a yes/no verdict")
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", help="run a declared suite and aggregate")
    b.add_argument("suite", help="JSON suite spec with a runs array")
    b.add_argument("out_dir", help="directory for per-run reports")
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": 3}
        print(json.dumps(record), file=sys.stderr)
        return 3
    except ContractError as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": 4}
        print(json.dumps(record), file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
