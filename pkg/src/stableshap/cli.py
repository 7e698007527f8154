"""Command-line entry points: precompute-dj, run, report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import Dataset, FeatureMoments
from .experiments import ExperimentConfig, ExperimentReport, run_experiment
from .simdata import generate_sim_dataset
from .surrogates import compute_dj_exact, compute_dj_mc, dj_cache_key, save_dj


def _moments_from_args(args) -> FeatureMoments:
    if args.csv:
        dataset = Dataset.from_csv(args.csv, args.groups)
    else:
        sim = generate_sim_dataset(args.sim_n, seed=args.sim_seed)
        dataset = sim.dataset
    return FeatureMoments.from_dataset(dataset)


def _cmd_precompute_dj(args) -> int:
    moments = _moments_from_args(args)
    d = moments.d
    if args.n_perms:
        dj = compute_dj_mc(d, moments, n_perms=args.n_perms, seed=args.seed)
        key = dj_cache_key(d, moments, args.n_perms, args.seed)
    else:
        dj = compute_dj_exact(d, moments)
        key = dj_cache_key(d, moments, None, None)
    save_dj(dj, args.out, key)
    print(f"wrote D_j precompute ({'exact' if dj.exact else f'{dj.n_permutations} orderings'}) to {args.out}")
    return 0


def _config_from_args(args) -> ExperimentConfig:
    payload: dict = {}
    if args.config:
        payload = json.loads(Path(args.config).read_text())
    if args.csv:
        payload["dataset"] = {"kind": "csv", "path": args.csv, "groups": args.groups}
    elif args.sim_n is not None:
        payload["dataset"] = {"kind": "sim", "n": args.sim_n, "seed": args.sim_seed}
    if args.model:
        payload["model"] = (
            {"kind": "file", "path": args.model_path}
            if args.model == "file"
            else {"kind": args.model}
        )
    overrides = {
        "estimator": args.estimator,
        "mode": args.mode,
        "m_coalitions": args.m,
        "samples_per_coalition": args.samples_per_coalition,
        "n_repetitions": args.repetitions,
        "n_query_points": args.query_points,
        "master_seed": args.seed,
        "dj_cache_path": args.dj_cache,
    }
    payload.update({k: v for k, v in overrides.items() if v is not None})
    if args.variance_methods:
        payload["variance_methods"] = tuple(args.variance_methods.split(","))
    if args.checkpoints:
        payload["checkpoints"] = tuple(int(c) for c in args.checkpoints.split(","))
    return ExperimentConfig.from_dict(payload)


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    report = run_experiment(config, report_path=args.out)
    if args.csv_out:
        report.write_csv(args.csv_out)
    print(f"report written to {args.out}")
    for key, value in sorted(report.aggregates.items()):
        print(f"  {key}: {value}")
    return 0 if not report.errors else 1


def _cmd_report(args) -> int:
    report = ExperimentReport.read_json(args.report)
    cfg = report.config
    print(f"estimator={cfg['estimator']} mode={cfg['mode']} "
          f"points={len(report.points)} repetitions={cfg['n_repetitions']} "
          f"M={cfg['m_coalitions']}")
    if report.errors:
        print(f"failed points: {[e['index'] for e in report.errors]}")
    for key, value in sorted(report.aggregates.items()):
        print(f"  {key}: {value}")
    vr = [
        v
        for pt in report.points
        for v, ok in zip(pt["var_reduc"][-1], pt["var_reduc_defined"][-1])
        if ok
    ]
    if vr:
        q25, q50, q75 = np.percentile(vr, [25, 50, 75])
        print(f"  var_reduc quartiles: {q25:.3f} / {q50:.3f} / {q75:.3f}")
    if args.csv_out:
        report.write_csv(args.csv_out)
        print(f"flat aggregates written to {args.csv_out}")
    return 0 if not report.errors else 1


def _add_data_args(parser):
    parser.add_argument("--csv", help="CSV dataset path (header row, numeric body)")
    parser.add_argument("--groups", help="sidecar JSON with one-hot column groups")
    parser.add_argument("--sim-n", type=int, default=None, help="simulated background rows")
    parser.add_argument("--sim-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stableshap",
        description="Variance-stabilized Shapley value experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_dj = sub.add_parser("precompute-dj", help="build and cache the D_j matrices")
    _add_data_args(p_dj)
    p_dj.add_argument("--n-perms", type=int, default=0, help="Monte Carlo orderings (0 = exact)")
    p_dj.add_argument("--seed", type=int, default=0)
    p_dj.add_argument("--out", required=True)
    p_dj.set_defaults(func=_cmd_precompute_dj, sim_n=1000)

    p_run = sub.add_parser("run", help="run an experiment grid and write a report")
    _add_data_args(p_run)
    p_run.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p_run.add_argument("--model", choices=["logistic", "mlp", "forest", "true", "file"])
    p_run.add_argument("--model-path", help="model JSON (with --model file)")
    p_run.add_argument("--estimator", choices=["shapley_sampling", "kernelshap"])
    p_run.add_argument("--mode", choices=["independent", "correlated"])
    p_run.add_argument("--m", type=int, help="coalitions per estimate")
    p_run.add_argument("--samples-per-coalition", type=int)
    p_run.add_argument("--repetitions", type=int)
    p_run.add_argument("--query-points", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--variance-methods", help="comma-separated")
    p_run.add_argument("--checkpoints", help="comma-separated coalition counts")
    p_run.add_argument("--dj-cache", help="path for the D_j cache file")
    p_run.add_argument("--out", required=True, help="report JSON path")
    p_run.add_argument("--csv-out", help="also write flat CSV aggregates")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("report", help="summarize an existing report")
    p_rep.add_argument("--report", required=True)
    p_rep.add_argument("--csv-out")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
