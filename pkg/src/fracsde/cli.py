"""Command-line front end: seeded experiments emitting JSON and CSV reports.

Every subcommand resolves its parameters (an optional JSON config file plus
flags, flags winning), runs one experiment, and writes a report that embeds
the resolved config, the seed, the library version, and the wall-clock
runtime. All randomness goes through the counter-based generator, so a
repeated invocation with the same config reproduces every number; the
runtime field is the single exception and always sits at the top level of
the JSON document, where comparisons can drop it.

Exit codes: 0 on success, 2 when a statistical contract fails, 1 on usage
or internal errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .acceptance import run_criteria
from .errors import FracSdeError
from .fundamental import fundamental_weights
from .girsanov import girsanov_log_weight, importance_expectation, parse_drift, weight_mean_check
from .graphs import parse_graph
from .kernels import covariance_R, fbm_spec, kernel_K, kernel_L
from .paths import (
    TimeGrid,
    covariance_gap,
    discretize_kernel,
    ensemble_to_binary,
    ensemble_to_csv,
    fundamental_transform,
    sample_bm,
    volterra_paths,
)
from .systems import (
    clipped_terminal,
    conditional_independence_test,
    driftless_system,
    entropy_estimate,
    parse_initial,
    system_log_weights,
    truncation_convergence,
    uniform_drifts,
)

EXIT_PASS = 0
EXIT_USAGE = 1
EXIT_STAT_FAIL = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; the report contract
    reserves 2 for statistical failures, so remap usage errors to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit((EXIT_USAGE, f"{self.prog}: error: {message}"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted((_jsonable(v) for v in obj), key=repr)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _write_json(report: Dict, out: Optional[str]) -> None:
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _csv_writer(out: Optional[str]):
    if out:
        f = open(out, "w", encoding="utf-8", newline="")
        return csv.writer(f), f
    return csv.writer(sys.stdout), None


def _report(args, results: Dict, t0: float) -> Dict:
    # workers is execution mechanics, not an input: keeping it out of the
    # config block lets reports stay byte-identical across worker counts
    config = {k: _jsonable(v) for k, v in sorted(vars(args).items())
              if k not in ("func", "config", "out", "workers") and not k.startswith("_")}
    return {
        "config": config,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "runtime_seconds": time.time() - t0,
        "results": _jsonable(results),
    }


def _parse_vertices(text: str) -> tuple:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(int(tok))
        except ValueError:
            out.append(tok)
    if not out:
        raise ValueError("empty vertex set")
    return tuple(out)


def _quartile_indices(n: int) -> List[int]:
    raw = [max(1, round(n * f)) for f in (0.25, 0.5, 0.75, 1.0)]
    return sorted(set(raw))


def cmd_kernel_table(args) -> int:
    t0 = time.time()
    spec = fbm_spec(args.hurst)
    grid = TimeGrid(args.horizon, args.grid)
    rows = []
    for i, t in enumerate(grid.nodes[1:], start=1):
        for s in grid.nodes[1:i]:
            rows.append((t, s, kernel_K(spec, t, s), kernel_L(spec, t, s),
                         covariance_R(spec, t, s)))
    if args.format == "json":
        results = {"columns": ["t", "s", "kernel_k", "companion_l", "covariance_r"],
                   "rows": rows}
        _write_json(_report(args, results, t0), args.out)
    else:
        writer, f = _csv_writer(args.out)
        writer.writerow(["t", "s", "kernel_k", "companion_l", "covariance_r"])
        for row in rows:
            writer.writerow([repr(float(x)) for x in row])
        if f:
            f.close()
    return EXIT_PASS


def cmd_weights(args) -> int:
    t0 = time.time()
    fw = fundamental_weights(args.hurst, args.n, args.scale)
    if args.format == "json":
        results = {"scale": fw.scale, "scaled": fw.scaled, "unit_step": fw.unscaled,
                   "lnd_margins": list(fw.lnd_margins)}
        _write_json(_report(args, results, t0), args.out)
    else:
        writer, f = _csv_writer(args.out)
        writer.writerow(["index", "weight_scaled", "weight_unit_step"])
        for i in range(args.n):
            writer.writerow([i + 1, repr(float(fw.scaled[i])), repr(float(fw.unscaled[i]))])
        if f:
            f.close()
    return EXIT_PASS


def cmd_simulate(args) -> int:
    grid = TimeGrid(args.horizon, args.grid)
    bm = sample_bm(grid, args.paths, args.seed)
    if args.kind == "bm":
        ens = bm
    else:
        ens = volterra_paths(discretize_kernel(fbm_spec(args.hurst), grid), bm)
    if args.format == "binary":
        if not args.out:
            raise ValueError("binary output needs --out")
        with open(args.out, "wb") as f:
            f.write(ensemble_to_binary(ens))
    else:
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as f:
                ensemble_to_csv(ens, f)
        else:
            ensemble_to_csv(ens, sys.stdout)
    return EXIT_PASS


def cmd_transform_check(args) -> int:
    t0 = time.time()
    grid = TimeGrid(args.horizon, args.grid)
    dk = discretize_kernel(fbm_spec(args.hurst), grid)
    bm = sample_bm(grid, min(args.paths, 256), args.seed)
    back = fundamental_transform(dk, volterra_paths(dk, bm))
    roundtrip = float(np.max(np.abs(back.values - bm.values)))
    cov_gap = covariance_gap(dk)
    roundtrip_ok = roundtrip < 1e-10
    cov_ok = cov_gap < 2e-2 if args.grid >= 32 else None
    passed = roundtrip_ok and cov_ok is not False
    results = {"roundtrip_max_gap": roundtrip, "roundtrip_ok": roundtrip_ok,
               "covariance_gap": cov_gap, "covariance_gap_ok": cov_ok,
               "passed": passed}
    _write_json(_report(args, results, t0), args.out)
    return EXIT_PASS if passed else EXIT_STAT_FAIL


def cmd_girsanov(args) -> int:
    t0 = time.time()
    grid = TimeGrid(args.horizon, args.grid)
    drift = parse_drift(args.drift)
    if drift.uses_neighbors:
        raise ValueError("neighbor drifts need a graph; use mrf-test or entropy-check")
    init = parse_initial(args.initial)
    dk = discretize_kernel(fbm_spec(args.hurst), grid)
    z = volterra_paths(dk, sample_bm(grid, args.paths, args.seed))
    x0 = init.sample("0", args.paths, args.seed)
    res = girsanov_log_weight(dk, z, drift, x0=x0)
    checks = weight_mean_check(res, grid.dt, _quartile_indices(args.grid))
    terminal = x0 + z.values[:, -1]
    estimates = {}
    for name, phi in (("x_t", terminal), ("x_t_sq", terminal ** 2)):
        est = importance_expectation(res.log_weights, phi)
        estimates[name] = {
            "unnormalized": est.unnormalized,
            "unnormalized_stderr": est.unnormalized_stderr,
            "self_normalized": est.self_normalized,
            "self_normalized_stderr": est.self_normalized_stderr,
        }
    ess = importance_expectation(res.log_weights, terminal).ess
    passed = all(c.passed for c in checks)
    results = {
        "weight_means": [{"index": c.index, "mean": c.mean, "stderr": c.stderr,
                          "passed": c.passed} for c in checks],
        "estimates": estimates,
        "ess": ess,
        "novikov_blocks": res.novikov_blocks,
        "passed": passed,
    }
    _write_json(_report(args, results, t0), args.out)
    return EXIT_PASS if passed else EXIT_STAT_FAIL


def cmd_mrf_test(args) -> int:
    t0 = time.time()
    graph = parse_graph(args.graph)
    graph.require_finite()
    grid = TimeGrid(args.horizon, args.grid)
    init = parse_initial(args.initial)
    system = driftless_system(graph, args.hurst, grid, args.paths, args.seed, init)
    if args.drift:
        weights = system_log_weights(graph, uniform_drifts(parse_drift(args.drift)), system)
        log_w = weights.total
    else:
        log_w = np.zeros(system.m)
    rep = conditional_independence_test(
        system, log_w, _parse_vertices(args.set_a), _parse_vertices(args.set_b),
        _parse_vertices(args.separator), perms=args.perms, seed=args.seed)
    passed = rep.p_value > args.alpha
    results = {
        "set_a": rep.set_a, "set_b": rep.set_b, "separator": rep.separator,
        "statistic": rep.statistic, "p_value": rep.p_value,
        "paths": rep.m, "paths_used": rep.m_used, "ess": rep.ess,
        "perms": rep.perms, "alpha": args.alpha, "passed": passed,
    }
    _write_json(_report(args, results, t0), args.out)
    return EXIT_PASS if passed else EXIT_STAT_FAIL


def cmd_truncate_sweep(args) -> int:
    t0 = time.time()
    graph = parse_graph(args.graph)
    grid = TimeGrid(args.horizon, args.grid)
    init = parse_initial(args.initial)
    drifts = uniform_drifts(parse_drift(args.drift))
    n_list = [int(tok) for tok in args.n_list.split(",") if tok.strip()]
    region = _parse_vertices(args.set_a) if args.set_a else (graph.root,)
    psi = clipped_terminal(region[0])
    sweep = truncation_convergence(graph, drifts, psi, region, n_list,
                                   hurst=args.hurst, grid=grid, m=args.paths,
                                   seed=args.seed, init=init)
    trend_ok = None
    if len(sweep.diffs) >= 3:
        comb = float(np.hypot(sweep.diff_stderrs[-1], sweep.diff_stderrs[0]))
        trend_ok = sweep.diffs[-1] < sweep.diffs[0] + 3.0 * comb
    entries = [{"level": e.level, "n_vertices": e.n_vertices,
                "estimate": e.estimate, "stderr": e.stderr} for e in sweep.entries]
    if args.format == "csv":
        writer, f = _csv_writer(args.out)
        writer.writerow(["level", "n_vertices", "estimate", "stderr"])
        for e in sweep.entries:
            writer.writerow([e.level, e.n_vertices, repr(e.estimate), repr(e.stderr)])
        if f:
            f.close()
    else:
        results = {"entries": entries, "diffs": sweep.diffs,
                   "diff_stderrs": sweep.diff_stderrs, "trend_ok": trend_ok}
        _write_json(_report(args, results, t0), args.out)
    return EXIT_PASS if trend_ok is not False else EXIT_STAT_FAIL


def cmd_entropy_check(args) -> int:
    t0 = time.time()
    graph = parse_graph(args.graph)
    graph.require_finite()
    grid = TimeGrid(args.horizon, args.grid)
    init = parse_initial(args.initial)
    drifts = uniform_drifts(parse_drift(args.drift))
    system = driftless_system(graph, args.hurst, grid, args.paths, args.seed, init)
    weights = system_log_weights(graph, drifts, system)
    region = _parse_vertices(args.set_a)
    rep = entropy_estimate(system, weights, region, graph, drifts)
    results = {
        "region": rep.region, "h_hat": rep.h_hat, "stderr": rep.stderr,
        "growth_bound": rep.growth_bound, "second_moment": rep.second_moment,
        "c_t": rep.c_t, "bound": rep.bound, "passed": rep.passed,
    }
    _write_json(_report(args, results, t0), args.out)
    return EXIT_PASS if rep.passed else EXIT_STAT_FAIL


def cmd_selftest(args) -> int:
    t0 = time.time()
    keys = None
    if args.criteria:
        keys = [tok.strip() for tok in args.criteria.split(",") if tok.strip()]
    results = run_criteria(scale=args.paths_scale, keys=keys,
                           workers=args.workers, seed0=args.seed)
    for r in results:
        verdict = "PASS" if r.passed else "FAIL"
        print(f"{verdict} {r.key}: {r.title}")
    payload = {r.key: {"title": r.title, "passed": r.passed, "details": r.details}
               for r in results}
    payload["all_passed"] = all(r.passed for r in results)
    if args.out:
        _write_json(_report(args, payload, t0), args.out)
    return EXIT_PASS if payload["all_passed"] else EXIT_STAT_FAIL


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    table = {
        "hurst": (dict(type=float, default=0.5, help="Hurst index in (0, 1)")),
        "grid": (dict(type=int, default=32, metavar="N", help="number of uniform steps")),
        "horizon": (dict(type=float, default=1.0, help="terminal time T")),
        "paths": (dict(type=int, default=10000, metavar="M", help="Monte Carlo paths")),
        "seed": (dict(type=int, default=0, help="base seed for all lanes")),
        "drift": (dict(type=str, default=None,
                       help="drift spec: const:c | linear:a:b | tanh:a:s | neighbor:a:b:c")),
        "graph": (dict(type=str, default=None,
                       help="graph spec: path:k | cycle:k | tree:b:d | zline | @edgelist-file")),
        "initial": (dict(type=str, default="point:0",
                         help="initial law: point:loc | gauss:loc:scale")),
        "out": (dict(type=str, default=None, help="output file (default stdout)")),
    }
    for name in names:
        p.add_argument(f"--{name}", **table[name])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracsde",
                     description="Seeded fractional-SDE experiments with JSON/CSV reports.")
    parser.add_argument("--version", action="version", version=f"fracsde {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand")
    sub.required = True

    p = sub.add_parser("kernel-table", parents=[], help="Volterra kernel values on a grid")
    _add_common(p, "hurst", "grid", "horizon", "out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_kernel_table)

    p = sub.add_parser("weights", help="fundamental martingale weight vector")
    p.add_argument("--n", type=int, default=None, help="number of increments")
    p.add_argument("--scale", type=float, default=None, help="grid step (default 1/n)")
    _add_common(p, "hurst", "out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("simulate", help="sample a path ensemble")
    _add_common(p, "hurst", "grid", "horizon", "paths", "seed", "out")
    p.add_argument("--kind", choices=("volterra", "bm"), default="volterra")
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("transform-check", help="kernel transform round trip and covariance gap")
    _add_common(p, "hurst", "grid", "horizon", "paths", "seed", "out")
    p.set_defaults(func=cmd_transform_check)

    p = sub.add_parser("girsanov", help="importance weights for a drift on one process")
    _add_common(p, "hurst", "grid", "horizon", "paths", "seed", "initial", "out")
    p.add_argument("--drift", type=str, default=None,
                   help="drift spec: const:c | linear:a:b | tanh:a:s")
    p.set_defaults(func=cmd_girsanov)

    p = sub.add_parser("mrf-test", help="conditional-independence test on a graph system")
    _add_common(p, "hurst", "grid", "horizon", "paths", "seed", "drift", "initial", "out")
    p.add_argument("--graph", type=str, default=None,
                   help="graph spec: path:k | cycle:k | tree:b:d | @edgelist-file")
    p.add_argument("--set-a", type=str, default=None, help="vertex set A (comma separated)")
    p.add_argument("--set-b", type=str, default=None, help="vertex set B (comma separated)")
    p.add_argument("--separator", type=str, default=None,
                   help="separating vertex set (comma separated)")
    p.add_argument("--perms", type=int, default=500, help="permutations")
    p.add_argument("--alpha", type=float, default=0.05, help="rejection level")
    p.set_defaults(func=cmd_mrf_test)

    p = sub.add_parser("truncate-sweep", help="truncation-convergence sweep on an infinite graph")
    _add_common(p, "hurst", "grid", "horizon", "paths", "seed", "initial", "out")
    p.add_argument("--graph", type=str, default="zline",
                   help="graph spec (default zline)")
    p.add_argument("--drift", type=str, default=None, help="uniform drift spec")
    p.add_argument("--n-list", type=str, default="4,5,6,7",
                   help="comma separated truncation radii (each at least 4)")
    p.add_argument("--set-a", type=str, default=None,
                   help="observable vertex (default: the root)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_truncate_sweep)

    p = sub.add_parser("entropy-check", help="relative-entropy estimate against its bound")
    _add_common(p, "hurst", "grid", "horizon", "paths", "seed", "initial", "out")
    p.add_argument("--graph", type=str, default=None, help="graph spec")
    p.add_argument("--drift", type=str, default=None, help="uniform drift spec")
    p.add_argument("--set-a", type=str, default=None, help="region A (comma separated)")
    p.set_defaults(func=cmd_entropy_check)

    p = sub.add_parser("selftest", help="run the numbered acceptance checks")
    p.add_argument("--paths-scale", type=float, default=1.0,
                   help="Monte Carlo scale; below 1 the repetition-loop checks "
                        "switch to single-shot smoke versions")
    p.add_argument("--criteria", type=str, default=None,
                   help="comma separated subset, e.g. criterion-1,criterion-4")
    p.add_argument("--workers", type=int, default=1,
                   help="concurrent criteria (never changes any number)")
    _add_common(p, "seed", "out")
    p.set_defaults(func=cmd_selftest)

    for sp in sub.choices.values():
        sp.add_argument("--config", type=str, default=None,
                        help="JSON file of flag defaults; explicit flags win")
    return parser


# Flags that must be resolved (by flag or config file) before a subcommand runs.
_REQUIRED = {
    "weights": ("n",),
    "girsanov": ("drift",),
    "mrf-test": ("graph", "set_a", "set_b", "separator"),
    "truncate-sweep": ("drift",),
    "entropy-check": ("graph", "drift", "set_a"),
}


def _apply_config(parser: argparse.ArgumentParser, argv: List[str],
                  args: argparse.Namespace) -> argparse.Namespace:
    with open(args.config, "r", encoding="utf-8") as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    known = set(vars(args))
    bad = [k for k in cfg if k.replace("-", "_") not in known]
    if bad:
        raise ValueError(f"config keys not recognized: {sorted(bad)}")
    defaults = {k.replace("-", "_"): v for k, v in cfg.items()}
    parser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            args = _apply_config(parser, argv, args)
        for dest in _REQUIRED.get(args.subcommand, ()):
            if getattr(args, dest) is None:
                flag = "--" + dest.replace("_", "-")
                raise ValueError(f"{args.subcommand} needs {flag} (flag or config)")
        return args.func(args)
    except SystemExit as exc:
        if isinstance(exc.code, tuple):
            code, message = exc.code
            print(message, file=sys.stderr)
            return code
        return 0 if exc.code in (0, None) else EXIT_USAGE
    except FracSdeError as exc:
        print(f"fracsde: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"fracsde: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
