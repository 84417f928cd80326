"""Command-line entry point: generate, aggregate, disaggregate, evaluate, benchmark.

All tensors and matrices cross the process boundary in the plain-text
formats of :mod:`tensagg.fileio`; every run is reproducible from the
``--seed`` flag (or the config's seed).  Errors leave a machine-readable
JSON object on stderr and a nonzero exit code.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import baselines, bprema, fileio, prema
from .aggregation import AggregationOperator, ScenarioSpec
from .core import reconstruct
from .evaluation import (BenchmarkInstance, make_synthetic, nde, plot_benchmark,
                         rows_to_csv, run_benchmark)

SOLVER_NAMES = ("prema", "bprema", "mean", "ls", "cmtf", "cpd-oracle")


def _problem_spec(section, seed_override=None):
    """ScenarioSpec + dims/rank/noise from a config section of strings."""
    try:
        dims = tuple(int(x) for x in section["dims"].split())
        rank = int(section["rank"])
    except KeyError as exc:
        raise fileio.ConfigError(f"missing required key 'problem.{exc.args[0]}'") from exc
    if len(dims) != 3:
        raise fileio.ConfigError(f"dims must have 3 entries, got {section['dims']!r}")
    seed = int(section.get("seed", 0)) if seed_override is None else seed_override
    spec = ScenarioSpec(
        scenario=section.get("scenario", "A"),
        window=int(section.get("window", 4)),
        group_size_1=int(section.get("group_size_1", 4)),
        group_size_2=int(section.get("group_size_2", 1)),
        missing_t=float(section.get("missing_t", 0.0)),
        missing_c=float(section.get("missing_c", 0.0)),
        seed=seed,
    )
    noise = float(section.get("noise", 0.0))
    floor = int(section.get("slab_floor", rank))
    kind = section.get("kind", "sum")
    return dims, rank, spec, noise, floor, kind


def _write_problem(outdir, problem):
    os.makedirs(outdir, exist_ok=True)
    path = lambda name: os.path.join(outdir, name)
    fileio.write_tensor(path("truth.txt"), problem.x)
    fileio.write_tensor(path("view_t.txt"), problem.y_t, problem.mask_t)
    fileio.write_tensor(path("mask_t.txt"), problem.mask_t)
    fileio.write_tensor(path("view_c.txt"), problem.y_c, problem.mask_c)
    fileio.write_tensor(path("mask_c.txt"), problem.mask_c)
    fileio.write_matrix(path("op_u.txt"), problem.op.U)
    fileio.write_matrix(path("op_v.txt"), problem.op.V)
    fileio.write_matrix(path("op_w.txt"), problem.op.W)


def cmd_generate(args):
    cfg = fileio.read_config(args.config, required=("problem.dims", "problem.rank"))
    dims, rank, spec, noise, floor, kind = _problem_spec(cfg["problem"], args.seed)
    problem = make_synthetic(dims, rank, spec, noise=noise, kind=kind, slab_floor=floor)
    _write_problem(args.out, problem)
    print(f"wrote ground truth, views, masks and operators to {args.out}")
    return 0


def cmd_aggregate(args):
    cfg = fileio.read_config(args.config, required=("problem.dims", "problem.rank"))
    dims, rank, spec, _, floor, kind = _problem_spec(cfg["problem"], args.seed)
    x, _ = fileio.read_tensor(args.truth)
    if x.shape != dims:
        raise ValueError(f"truth tensor dims {x.shape} do not match config dims {dims}")
    from .aggregation import aggregate_views, scenario_operator
    op = scenario_operator(dims, spec, kind=kind)
    y_t, mask_t, y_c, mask_c = aggregate_views(x, op, spec, slab_floor=floor)
    os.makedirs(args.out, exist_ok=True)
    path = lambda name: os.path.join(args.out, name)
    fileio.write_tensor(path("view_t.txt"), y_t, mask_t)
    fileio.write_tensor(path("mask_t.txt"), mask_t)
    fileio.write_tensor(path("view_c.txt"), y_c, mask_c)
    fileio.write_tensor(path("mask_c.txt"), mask_c)
    fileio.write_matrix(path("op_u.txt"), op.U)
    fileio.write_matrix(path("op_v.txt"), op.V)
    fileio.write_matrix(path("op_w.txt"), op.W)
    print(f"wrote views, masks and operators to {args.out}")
    return 0


def _infer_kind(m):
    n = m.shape[1]
    if m.shape[0] == n and np.array_equal(m, np.eye(n)):
        return "identity"
    if np.all((m == 0) | (m == 1)):
        return "sum"
    if np.all(m >= 0) and np.allclose(m.sum(axis=1), 1.0):
        return "average"
    return "sum"


def _load_operator(args):
    mats = [fileio.read_matrix(p) for p in (args.op_u, args.op_v, args.op_w)]
    kinds = tuple(_infer_kind(m) for m in mats)
    overlaps = tuple(bool(np.any((m > 0).sum(axis=0) > 1)) for m in mats)
    return AggregationOperator(*mats, kinds=kinds, overlaps=overlaps)


def cmd_disaggregate(args):
    if args.solver not in SOLVER_NAMES:
        raise ValueError(f"unknown solver {args.solver!r}; valid names: "
                         + ", ".join(SOLVER_NAMES))
    blind = args.blind or args.solver == "bprema"
    if blind and args.op_u:
        print("warning: --blind given, ignoring the supplied operator files",
              file=sys.stderr)
    y_t, mask_t = fileio.read_tensor(args.view_t, args.mask_t)
    y_c, mask_c = fileio.read_tensor(args.view_c, args.mask_c)
    op = None
    if not blind:
        if not (args.op_u and args.op_v and args.op_w):
            raise ValueError("supply --op-u/--op-v/--op-w or use --blind")
        op = _load_operator(args)

    report = None
    if blind:
        cfg = bprema.BPremaConfig(rank=args.rank, mu=args.mu,
                                  max_iterations=args.iters, seed=args.seed)
        f, report = bprema.bprema_solve(y_t, mask_t, y_c, mask_c, cfg)
        estimate = reconstruct(f.fine())
    elif args.solver == "prema":
        cfg = prema.PremaConfig(rank=args.rank, max_iterations=args.iters,
                                seed=args.seed)
        f, report = prema.prema_solve(y_t, mask_t, y_c, mask_c, op, cfg)
        estimate = reconstruct(f)
    elif args.solver == "mean":
        estimate = baselines.mean_baseline(y_t, mask_t, y_c, mask_c, op)
    elif args.solver == "ls":
        estimate = baselines.ls_baseline(y_t, mask_t, y_c, mask_c, op,
                                         cg_iterations=max(args.iters, 100))
    elif args.solver == "cmtf":
        (a, b), report = baselines.cmtf_solve(y_t, mask_t, y_c, mask_c, op,
                                              args.rank, iterations=args.iters)
        from .core import fold
        estimate = fold(a @ b.T, 3, op.fine_dims)
    else:  # cpd-oracle
        if not args.truth:
            raise ValueError("cpd-oracle needs --truth")
        x, xmask = fileio.read_tensor(args.truth)
        estimate = baselines.cpd_oracle(x, xmask, args.rank, sweeps=args.iters,
                                        seed=args.seed)

    error = None
    if args.truth and args.solver != "cpd-oracle":
        x, _ = fileio.read_tensor(args.truth)
        error = nde(x, estimate)
        if report is not None:
            report.nde = error
    os.makedirs(args.out, exist_ok=True)
    est_path = os.path.join(args.out, "estimate.txt")
    fileio.write_tensor(est_path, estimate)
    if report is not None:
        report.to_csv(os.path.join(args.out, "report.csv"))
        with open(os.path.join(args.out, "summary.json"), "w") as fh:
            json.dump(report.summary(), fh, indent=2, default=str)
        for msg in report.warnings:
            print(f"warning: {msg}", file=sys.stderr)
    print(f"wrote estimate to {est_path}")
    if error is not None:
        print(f"NDE {error!r}")
    return 0


def cmd_evaluate(args):
    x, _ = fileio.read_tensor(args.truth)
    xhat, _ = fileio.read_tensor(args.estimate)
    print(f"NDE {nde(x, xhat)!r}")
    return 0


def cmd_benchmark(args):
    cfg = fileio.read_config(args.config, required=("suite.solvers",))
    suite = cfg["suite"]
    solver_list = []
    for name in suite["solvers"].split():
        if name not in SOLVER_NAMES:
            raise ValueError(f"unknown solver {name!r}; valid names: "
                             + ", ".join(SOLVER_NAMES))
        solver_list.append((name, {"iterations": int(suite.get("iterations", 200))}))
    instances = []
    for section, values in cfg.items():
        if not section.startswith("instance."):
            continue
        dims, rank, spec, noise, floor, kind = _problem_spec(values, args.seed)
        instances.append(BenchmarkInstance(section.split(".", 1)[1], dims, rank,
                                           spec, noise=noise, slab_floor=floor,
                                           kind=kind))
    if not instances:
        raise fileio.ConfigError(f"{args.config}: no [instance.*] sections found")
    rows = run_benchmark(instances, solver_list)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "results.csv")
    rows_to_csv(rows, csv_path)
    print(f"wrote {len(rows)} result rows to {csv_path}")
    if suite.get("plot"):
        svg_path = os.path.join(args.out, suite["plot"])
        plot_benchmark(rows, svg_path)
        print(f"wrote plot to {svg_path}")
    failures = [r for r in rows if r["status"] != "ok"]
    if failures:
        print(json.dumps({"error": f"{len(failures)} runs failed",
                          "rows": [f"{r['instance']}/{r['solver']}: {r['status']}"
                                   for r in failures]}), file=sys.stderr)
        return 2
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tensagg",
        description="Reconstruct a fine-resolution 3-way tensor from two "
                    "coarse aggregated views.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="synthesize a ground truth and its views")
    gen.add_argument("config")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=None)
    gen.set_defaults(func=cmd_generate)

    agg = sub.add_parser("aggregate", help="aggregate an existing fine tensor")
    agg.add_argument("config")
    agg.add_argument("--truth", required=True)
    agg.add_argument("--out", required=True)
    agg.add_argument("--seed", type=int, default=None)
    agg.set_defaults(func=cmd_aggregate)

    dis = sub.add_parser("disaggregate", help="recover the fine tensor from view files")
    dis.add_argument("--view-t", required=True)
    dis.add_argument("--view-c", required=True)
    dis.add_argument("--mask-t", default=None)
    dis.add_argument("--mask-c", default=None)
    dis.add_argument("--op-u", default=None)
    dis.add_argument("--op-v", default=None)
    dis.add_argument("--op-w", default=None)
    dis.add_argument("--blind", action="store_true",
                     help="unknown aggregation: use the blind solver")
    dis.add_argument("--solver", default="prema")
    dis.add_argument("--rank", type=int, default=5)
    dis.add_argument("--iters", type=int, default=200)
    dis.add_argument("--mu", type=float, default=100.0)
    dis.add_argument("--seed", type=int, default=0)
    dis.add_argument("--truth", default=None)
    dis.add_argument("--out", required=True)
    dis.set_defaults(func=cmd_disaggregate)

    ev = sub.add_parser("evaluate", help="normalized disaggregation error of an estimate")
    ev.add_argument("--truth", required=True)
    ev.add_argument("--estimate", required=True)
    ev.set_defaults(func=cmd_evaluate)

    bench = sub.add_parser("benchmark", help="sweep instances x solvers from a config")
    bench.add_argument("config")
    bench.add_argument("--out", required=True)
    bench.add_argument("--seed", type=int, default=None)
    bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:   # noqa: BLE001 - single CLI error funnel
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
