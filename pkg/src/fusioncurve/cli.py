"""Command-line interface: simulate / fit / select / evaluate.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import io
from .basis import SplineConfig, build_basis
from .errors import ConfigurationError, DataError, FusionCurveError, NumericError
from .metrics import adjusted_rand_index, rmse, summarize_replicates
from .model import LongitudinalDataset
from .simgen import ScenarioSpec, generate
from .solver import SolverConfig, select

PLOT_GRID_SIZE = 200


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusioncurve",
        description="Cluster longitudinal curves with fused mean coefficients "
                    "and a shared low-rank covariance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    sim.add_argument("--scenario", type=int, required=True, choices=[1, 2, 3])
    sim.add_argument("--m", type=int, default=20)
    sim.add_argument("--sigma", type=float, default=0.2)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output directory")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", required=True, help="input data CSV")
    common.add_argument("--truth", help="optional truth JSON for evaluation")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--weights", default="equal",
                        choices=["equal", "lattice", "index"])
    common.add_argument("--knots", type=int, default=5,
                        help="number of interior knots")
    common.add_argument("--degree", type=int, default=3)
    common.add_argument("--k0", type=int, default=10,
                        help="number of initial k-means groups")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int,
                        default=None, help="worker processes for grid search "
                        "(default: FUSIONCURVE_JOBS or logical cores)")
    common.add_argument("--config", help="JSON file whose keys override flags")

    fit_p = sub.add_parser("fit", help="fit at fixed tuning parameters",
                           parents=[common])
    fit_p.add_argument("--tau", type=float, required=True)
    fit_p.add_argument("--P", type=int, required=True)
    fit_p.add_argument("--alpha", type=float, default=0.0)

    sel_p = sub.add_parser("select", help="grid search over tuning parameters",
                           parents=[common])
    sel_p.add_argument("--tau-grid", type=float, nargs="+")
    sel_p.add_argument("--P-grid", type=int, nargs="+")
    sel_p.add_argument("--alpha-grid", type=float, nargs="+")

    ev = sub.add_parser("evaluate", help="summarize replicate results")
    ev.add_argument("--results", nargs="+", required=True)
    ev.add_argument("--truths", nargs="+", required=True)
    ev.add_argument("--out", required=True, help="output summary CSV")
    return parser


def _apply_config_file(args: argparse.Namespace) -> None:
    if getattr(args, "config", None):
        overrides = json.loads(Path(args.config).read_text())
        for key, value in overrides.items():
            setattr(args, key.replace("-", "_"), value)


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = ScenarioSpec(scenario=args.scenario, m=args.m, sigma=args.sigma,
                        seed=args.seed)
    data, truth = generate(spec)
    io.write_dataset_csv(data, out / "data.csv")
    io.write_truth_json(truth, generator={
        "scenario": args.scenario, "m": args.m, "sigma": args.sigma,
        "lambda": list(spec.lam), "seed": args.seed,
    }, path=out / "truth.json")
    print(f"wrote {out / 'data.csv'} ({data.n} curves) and {out / 'truth.json'}")
    return 0


def _evaluation_block(result, data, truth_payload, basis):
    truth_partition = truth_payload["partition"]
    est_means = []
    true_means = []
    for i, c in enumerate(data.curves):
        est_means.append(basis.eval(c.times) @ result.params.beta[i])
        true_means.append(np.asarray(truth_payload["mean_values"][c.id]))
    return {
        "ARI": adjusted_rand_index(result.partition,
                                   {k: v for k, v in truth_partition.items()}),
        "K_hat": result.k_hat,
        "K_true": len(set(truth_partition.values())),
        "RMSE": rmse(est_means, true_means),
    }


def _run_fit_like(args, config: SolverConfig) -> int:
    data = io.read_dataset_csv(args.data)
    basis = build_basis(SplineConfig(degree=args.degree,
                                     num_interior_knots=args.knots))
    result = select(data, basis, args.weights, config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ids = data.ids
    group_beta = {}
    for cid, label in result.partition.items():
        group_beta.setdefault(label, result.params.beta[ids.index(cid)])

    payload = {
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "partition": result.partition,
        "k_hat": result.k_hat,
        "group_beta": {str(k): list(map(float, v))
                       for k, v in sorted(group_beta.items())},
        "sigma2": result.params.sigma2,
        "tuning": {k: (None if v is None else float(v) if k != "P" else int(v))
                   for k, v in result.tuning.items() if k != "weight_scheme"},
        "weight_scheme": args.weights,
        "bic": result.bic,
        "bic_table": result.diagnostics["bic_table"].to_dict("records"),
        "converged": result.converged,
        "iterations": result.iterations,
    }
    if result.params.theta is not None:
        payload["theta"] = [list(map(float, row)) for row in result.params.theta]
        payload["lambda"] = list(map(float, result.params.lam))

    truth_path = args.truth or (Path(args.data).parent / "truth.json")
    if Path(truth_path).exists():
        truth_payload = io.read_truth_json(truth_path)
        payload["evaluation"] = _evaluation_block(result, data, truth_payload,
                                                  basis)

    io.write_result_json(payload, out / "result.json")

    grid = np.linspace(0.0, 1.0, PLOT_GRID_SIZE)
    Bg = basis.eval(grid)
    mean_rows = []
    for label in sorted(group_beta):
        curve = Bg @ group_beta[label]
        mean_rows.extend({"group": label, "time": t, "value": v}
                         for t, v in zip(grid, curve))
    pd.DataFrame(mean_rows).to_csv(out / "group_means.csv", index=False)

    if result.params.theta is not None:
        eig_rows = []
        funcs = Bg @ result.params.theta
        for j in range(result.params.n_components):
            eig_rows.extend({"component": j + 1, "time": t, "value": v}
                            for t, v in zip(grid, funcs[:, j]))
        pd.DataFrame(eig_rows).to_csv(out / "eigenfunctions.csv", index=False)

    pd.DataFrame(
        [{"id": cid, "group": label} for cid, label in result.partition.items()]
    ).to_csv(out / "assignments.csv", index=False)

    print(f"selected tau={result.tuning['tau']:.4g} P={result.tuning['P']} "
          f"alpha={result.tuning['alpha']} -> K_hat={result.k_hat}, "
          f"BIC={result.bic:.2f}")
    return 0


def cmd_fit(args) -> int:
    config = SolverConfig(tau_grid=(args.tau,), P_grid=(args.P,),
                          alpha_grid=(args.alpha,), k0=args.k0,
                          seed=args.seed, jobs=args.jobs)
    return _run_fit_like(args, config)


def cmd_select(args) -> int:
    defaults = SolverConfig()
    config = SolverConfig(
        tau_grid=tuple(args.tau_grid) if args.tau_grid else defaults.tau_grid,
        P_grid=tuple(args.P_grid) if args.P_grid else defaults.P_grid,
        alpha_grid=tuple(args.alpha_grid) if args.alpha_grid
        else defaults.alpha_grid,
        k0=args.k0, seed=args.seed, jobs=args.jobs,
    )
    return _run_fit_like(args, config)


def cmd_evaluate(args) -> int:
    if len(args.results) != len(args.truths):
        raise DataError("need one truth file per result file")
    records = []
    for rp, tp in zip(args.results, args.truths):
        result = io.read_result_json(rp)
        truth = io.read_truth_json(tp)
        if set(result["partition"]) != set(truth["partition"]):
            raise DataError(f"curve ids differ between {rp} and {tp}")
        if "evaluation" in result:
            rmse_val = result["evaluation"]["RMSE"]
        else:
            rmse_val = np.nan
        records.append({
            "method": result.get("weight_scheme", "fit"),
            "K_hat": result["k_hat"],
            "ARI": adjusted_rand_index(result["partition"],
                                       truth["partition"]),
            "P": result["tuning"].get("P", 0) or 0,
            "RMSE": rmse_val,
        })
    summary = summarize_replicates(records)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write(f"# schema_version: {io.SCHEMA_VERSION}\n")
        summary.to_csv(fh, index=False)
    print(summary.to_string(index=False))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "select":
            return cmd_select(args)
        return cmd_evaluate(args)
    except (DataError, ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except FusionCurveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
