"""Command line entry points.

Subcommands: ``generate`` (sample a network), ``analyze`` (rigidity and
recoverability report as JSON), ``recover`` (one seeded trial with a trace
CSV), ``montecarlo`` (sweeps), and ``oracle`` (small brute-force checks).
The ``SPARSELOC_OUT_DIR`` environment variable overrides output
directories; nothing else is read from the environment.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .harness import (
    ScenarioConfig,
    build_network,
    monte_carlo_sweep,
    run_trial,
    uav13_network,
)
from .network import (
    BlockVector,
    load_network,
    save_network,
    validate_configuration,
)
from .oracle import (
    brute_force_block_spark,
    brute_force_l0_recover,
    brute_force_nsp,
)
from .recoverability import (
    NspSearch,
    l0_recovery_limit,
    max_certified_errors,
    max_colinear_count,
    nsp_check,
)
from .rigidity import analytic_null_basis, rigidity_matrix, rigidity_report


def _out_dir(flag_value: str | None, default: str = ".") -> str:
    env = os.environ.get("SPARSELOC_OUT_DIR")
    if env:
        return env
    if flag_value is not None:
        return flag_value
    return default


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _cmd_generate(args: argparse.Namespace) -> int:
    if args.preset is not None:
        if args.preset != "uav13":
            raise SystemExit(f"unknown preset {args.preset!r}")
        cfg, graph = uav13_network(args.seed)
    else:
        cfg, graph = build_network(
            {
                "agents": args.n,
                "dim": args.dim,
                "radius": args.radius,
                "box": args.box,
                "seed": args.seed,
            },
            kind=args.kind,
        )
    save_network(args.out, cfg, graph)
    report = rigidity_report(rigidity_matrix(cfg, graph, args.kind))
    _emit(
        {
            "path": args.out,
            "agents": cfg.num_agents,
            "dim": cfg.dim,
            "edges": graph.num_edges,
            "rigid": report.is_rigid,
        }
    )
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    cfg, graph = load_network(args.network)
    validation = validate_configuration(cfg, graph)
    payload: dict = {
        "kind": args.kind,
        "agents": cfg.num_agents,
        "dim": cfg.dim,
        "edges": graph.num_edges,
        "validation": {
            "ok": validation.ok,
            "issues": [
                {"code": issue.code, "message": issue.message}
                for issue in validation.issues
            ],
        },
    }
    if not validation.ok:
        _emit(payload)
        return 1
    report = rigidity_report(rigidity_matrix(cfg, graph, args.kind))
    payload["rigidity"] = {
        "rank": report.rank,
        "max_rank": report.max_rank,
        "nullity": report.nullity,
        "is_rigid": report.is_rigid,
        "lambda_tilde": report.lambda_tilde,
    }
    if args.kind == "distance" and cfg.dim == 3:
        s_tilde = max_colinear_count(cfg)
        payload["max_colinear"] = s_tilde
    else:
        s_tilde = None
    payload["l0_recovery_limit"] = l0_recovery_limit(
        cfg.num_agents, args.kind, cfg.dim, s_tilde=s_tilde
    )
    if report.is_rigid:
        level = max_certified_errors(
            cfg, graph, args.kind, q=args.q, max_s=args.max_s
        )
        payload["certified_level"] = level
        certs = []
        upper = level + 1
        if args.max_s is not None:
            upper = min(upper, args.max_s)
        for s in range(1, upper + 1):
            certs.append(nsp_check(cfg, args.kind, s, args.q).to_json())
        payload["certificates"] = certs
    else:
        payload["certified_level"] = None
        payload["certificates"] = []
    _emit(payload)
    return 0


def _cmd_recover(args: argparse.Namespace) -> int:
    network = load_network(args.network)
    scenario = ScenarioConfig.from_file(args.scenario)
    record, result = run_trial(
        scenario, args.trial, network=network, return_result=True
    )
    out_dir = _out_dir(args.out)
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, f"trace_{args.trial}.csv")
    result.save_trace_csv(trace_path)
    _emit(
        {
            "converged": result.converged,
            "iterations_used": result.iterations_used,
            "failure": result.failure,
            "support": list(result.support),
            "x_star": result.x_star.blocks.tolist(),
            "trial": {
                "index": record.index,
                "derived_seed": record.derived_seed,
                "true_set": list(record.true_set),
                "identified_set": list(record.identified_set),
                "relative_error": record.relative_error,
                "status": record.status,
            },
            "trace_csv": trace_path,
        }
    )
    return 0


def _cmd_montecarlo(args: argparse.Namespace) -> int:
    scenario = ScenarioConfig.from_file(args.scenario)
    out_dir = _out_dir(args.out, default="montecarlo_out")
    result = monte_carlo_sweep(
        scenario,
        args.sweep,
        trials=args.trials,
        jobs=args.jobs,
        out_dir=out_dir,
    )
    _emit(
        {
            "axis": result.axis,
            "out": out_dir,
            "points": [
                {"params": p.params, "aggregate": p.aggregate} for p in result.points
            ],
        }
    )
    return 0


def _cmd_oracle_spark(args: argparse.Namespace) -> int:
    cfg, graph = load_network(args.network)
    R = rigidity_matrix(cfg, graph, args.kind)
    outcome = brute_force_block_spark(R, cap=args.cap)
    _emit(
        {
            "block_spark": outcome.value,
            "instances_examined": outcome.instances_examined,
        }
    )
    return 0


def _cmd_oracle_l0(args: argparse.Namespace) -> int:
    cfg, graph = load_network(args.network)
    R = rigidity_matrix(cfg, graph, args.kind)
    rng = np.random.default_rng(args.seed)
    support = sorted(
        int(i) for i in rng.choice(cfg.num_agents, size=args.faults, replace=False)
    )
    x = BlockVector.zeros(cfg.num_agents, cfg.dim).blocks.copy()
    for i in support:
        x[i] = rng.standard_normal(cfg.dim)
    z = R.matrix @ x.ravel()
    outcome = brute_force_l0_recover(R, z, s_max=args.s_max)
    recovered = (
        None
        if outcome.value is None
        else [int(i) for i in np.flatnonzero(outcome.value.block_norms() > 1e-9)]
    )
    _emit(
        {
            "planted_support": support,
            "unique": outcome.unique,
            "recovered_support": recovered,
            "instances_examined": outcome.instances_examined,
        }
    )
    return 0


def _cmd_oracle_nsp(args: argparse.Namespace) -> int:
    cfg, graph = load_network(args.network)
    basis = analytic_null_basis(cfg, args.kind)
    worst = brute_force_nsp(
        basis, args.s, q=args.q, samples=args.samples, seed=args.seed
    )
    cert = nsp_check(cfg, args.kind, args.s, args.q, NspSearch())
    _emit(
        {
            "sampled_worst_ratio": worst.ratio,
            "sampled_worst_subset": list(worst.subset),
            "samples": worst.samples,
            "certificate_holds": cert.holds,
            "certificate_margin": cert.margin,
        }
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparseloc",
        description="Certify and recover block-sparse localization errors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="sample a random geometric network")
    gen.add_argument("--n", type=int, default=13, help="number of agents")
    gen.add_argument("--dim", type=int, default=3, choices=(2, 3))
    gen.add_argument("--radius", type=float, default=5.0)
    gen.add_argument("--box", type=float, default=10.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--kind", choices=("distance", "bearing"), default="distance")
    gen.add_argument("--preset", default=None, help="named network preset (uav13)")
    gen.add_argument("--out", required=True, help="output network JSON path")
    gen.set_defaults(func=_cmd_generate)

    ana = sub.add_parser("analyze", help="rigidity and recoverability report")
    ana.add_argument("network", help="network JSON path")
    ana.add_argument("--kind", choices=("distance", "bearing"), default="distance")
    ana.add_argument("--q", type=float, default=1.0)
    ana.add_argument("--max-s", type=int, default=None, dest="max_s")
    ana.set_defaults(func=_cmd_analyze)

    rec = sub.add_parser("recover", help="run one seeded recovery trial")
    rec.add_argument("network", help="network JSON path")
    rec.add_argument("scenario", help="scenario JSON path")
    rec.add_argument("--trial", type=int, default=0)
    rec.add_argument("--out", default=None, help="trace CSV directory")
    rec.set_defaults(func=_cmd_recover)

    mc = sub.add_parser("montecarlo", help="run a Monte Carlo sweep")
    mc.add_argument("scenario", help="scenario JSON path")
    mc.add_argument(
        "--sweep",
        required=True,
        choices=("fault_count", "fault_mode", "noise_grid", "scp_iterations"),
    )
    mc.add_argument("--trials", type=int, default=None)
    mc.add_argument("--jobs", type=int, default=1)
    mc.add_argument("--out", default=None, help="output directory for CSVs")
    mc.set_defaults(func=_cmd_montecarlo)

    orc = sub.add_parser("oracle", help="brute-force ground truth on small inputs")
    orc_sub = orc.add_subparsers(dest="oracle_command", required=True)

    spark = orc_sub.add_parser("spark", help="exhaustive block spark")
    spark.add_argument("network")
    spark.add_argument("--kind", choices=("distance", "bearing"), default="distance")
    spark.add_argument("--cap", type=int, default=None)
    spark.set_defaults(func=_cmd_oracle_spark)

    l0 = orc_sub.add_parser("l0", help="exhaustive sparsest fit for a planted fault")
    l0.add_argument("network")
    l0.add_argument("--kind", choices=("distance", "bearing"), default="distance")
    l0.add_argument("--faults", type=int, default=1)
    l0.add_argument("--s-max", type=int, default=2, dest="s_max")
    l0.add_argument("--seed", type=int, default=0)
    l0.set_defaults(func=_cmd_oracle_l0)

    nsp = orc_sub.add_parser("nsp", help="sampled worst kernel ratio vs certificate")
    nsp.add_argument("network")
    nsp.add_argument("--kind", choices=("distance", "bearing"), default="distance")
    nsp.add_argument("--s", type=int, default=1)
    nsp.add_argument("--q", type=float, default=1.0)
    nsp.add_argument("--samples", type=int, default=200_000)
    nsp.add_argument("--seed", type=int, default=0)
    nsp.set_defaults(func=_cmd_oracle_nsp)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
