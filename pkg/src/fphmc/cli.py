"""Command-line surface: dataset ingestion, fitting, simulation, prediction.

Datasets are wide CSV files, one row per subject, with functional covariates
stored as prefixed columns ``<prefix>_1 .. <prefix>_m`` on a shared grid.

Exit codes: 0 success, 2 bad input, 3 non-convergence, 4 unstable bootstrap.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import pandas as pd

from . import basis as bs
from . import bootstrap as boot
from . import em
from . import sim
from .errors import (
    BootstrapUnstableError,
    ConvergenceError,
    InsufficientReplicatesError,
)

EXIT_BAD_INPUT = 2
EXIT_NO_CONVERGENCE = 3
EXIT_BOOTSTRAP_UNSTABLE = 4


class InputError(Exception):
    """Malformed dataset or flags; maps to exit code 2."""


# ---------------------------------------------------------------------------
# dataset ingestion


def _functional_columns(df, prefix):
    cols = []
    k = 1
    while f"{prefix}_{k}" in df.columns:
        cols.append(f"{prefix}_{k}")
        k += 1
    if not cols:
        raise InputError(f"no functional columns found with prefix {prefix!r}")
    stray = [c for c in df.columns if c.startswith(prefix + "_") and c not in cols]
    if stray:
        raise InputError(
            f"functional columns with prefix {prefix!r} are not contiguous: unexpected {stray[:3]}"
        )
    vals = df[cols].to_numpy()
    bad = ~np.isfinite(vals.astype(float, copy=False))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise InputError(f"non-numeric or missing value at row {r}, column {cols[c]}")
    return vals


def load_dataset(
    path,
    time_col,
    event_col,
    cure_scalars,
    latency_scalars,
    cure_func,
    latency_func,
    *,
    center_functional=True,
):
    """Read a wide CSV into a SurvivalDataset, validating as we go."""
    try:
        df = pd.read_csv(path)
    except Exception as err:
        raise InputError(f"cannot read {path}: {err}") from err
    for col in [time_col, event_col, *cure_scalars, *latency_scalars]:
        if col not in df.columns:
            raise InputError(f"missing column {col!r} in {path}")
    time = pd.to_numeric(df[time_col], errors="coerce").to_numpy(dtype=float)
    if np.any(~np.isfinite(time)) or np.any(time <= 0.0):
        row = int(np.argwhere(~np.isfinite(time) | (time <= 0.0))[0, 0])
        raise InputError(f"non-positive or missing time at row {row} (column {time_col!r})")
    event = pd.to_numeric(df[event_col], errors="coerce").to_numpy()
    if np.any(~np.isin(event, (0, 1))):
        row = int(np.argwhere(~np.isin(event, (0, 1)))[0, 0])
        raise InputError(f"event column {event_col!r} must be 0/1; bad value at row {row}")
    n = len(df)

    Z = np.column_stack([np.ones(n)] + [df[c].to_numpy(dtype=float) for c in cure_scalars])
    X = (
        np.column_stack([df[c].to_numpy(dtype=float) for c in latency_scalars])
        if latency_scalars
        else None
    )

    def read_curves(prefix):
        if prefix is None or prefix == "none":
            return None
        vals = _functional_columns(df, prefix).astype(float)
        if center_functional:
            vals = vals - vals.mean(axis=0)
        return bs.FunctionalCovariate(bs.make_grid(vals.shape[1]), vals)

    z_curves = read_curves(cure_func)
    x_curves = read_curves(latency_func)
    try:
        return em.SurvivalDataset(
            time=time,
            event=event.astype(int),
            Z=Z,
            X=X,
            z_curves=z_curves,
            x_curves=x_curves,
            z_names=("intercept", *cure_scalars),
            x_names=tuple(latency_scalars),
        )
    except ValueError as err:
        raise InputError(str(err)) from err


def write_dataset(dataset: em.SurvivalDataset, path, func_prefix="xs"):
    """Write a SurvivalDataset in the wide CSV layout (shared curves only)."""
    n = dataset.n
    data = {"id": np.arange(n), "time": dataset.time, "event": dataset.event}
    for j, name in enumerate(dataset.z_names[1:], start=1):
        data[name] = dataset.Z[:, j]
    if dataset.x_curves is not None:
        for j in range(dataset.x_curves.grid.m):
            data[f"{func_prefix}_{j + 1}"] = dataset.x_curves.values[:, j]
    pd.DataFrame(data).to_csv(path, index=False)


# ---------------------------------------------------------------------------
# report serialization


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def build_report(fit: em.FphmcFit, dataset: em.SurvivalDataset, args_echo, bands=None):
    """Structured fit report; round-trips losslessly through JSON."""
    report = {
        "config": args_echo,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "trace": [[ll, change] for ll, change in fit.trace],
        "latency": {
            "names": list(dataset.x_names),
            "beta": fit.latency.beta,
            "hazard_ratio": np.exp(fit.latency.beta),
            "theta_beta": fit.latency.theta_beta,
            "lambda_beta": fit.latency.lambda_beta,
        },
        "baseline": {
            "times": fit.baseline.times,
            "values": fit.baseline.values,
            "tail_time": fit.baseline.tail_time,
        },
        "weights": fit.weights,
    }
    if fit.incidence is not None:
        report["incidence"] = {
            "names": list(dataset.z_names),
            "b": fit.incidence.b,
            "odds_ratio": np.exp(fit.incidence.b),
            "theta_b": fit.incidence.theta_b,
            "lambda_b": fit.incidence.lambda_b,
        }
    if fit.designs.basis_z is not None:
        report["b_curve"] = {
            "grid": fit.designs.basis_z.grid.points,
            "values": em.coefficient_curve(fit.incidence.theta_b, fit.designs.basis_z),
        }
    if fit.designs.basis_x is not None:
        report["beta_curve"] = {
            "grid": fit.designs.basis_x.grid.points,
            "values": em.coefficient_curve(fit.latency.theta_beta, fit.designs.basis_x),
        }
    if bands is not None:
        report["bands"] = {
            name: {"lower": lo, "upper": hi} for name, (lo, hi) in bands.items()
        }
    return _jsonable(report)


def write_report(report, out_prefix):
    """Write report JSON plus companion curve CSVs; returns the JSON path."""
    json_path = f"{out_prefix}.json"
    with open(json_path, "w") as fh:
        json.dump(report, fh, indent=1)
    for key, fname in [("b_curve", "b_curve"), ("beta_curve", "beta_curve")]:
        if key in report:
            pd.DataFrame(
                {"s": report[key]["grid"], "estimate": report[key]["values"]}
            ).to_csv(f"{out_prefix}_{fname}.csv", index=False)
    base = report["baseline"]
    pd.DataFrame({"time": base["times"], "survival": base["values"]}).to_csv(
        f"{out_prefix}_baseline.csv", index=False
    )
    return json_path


def load_report(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except Exception as err:
        raise InputError(f"cannot read model report {path}: {err}") from err


# ---------------------------------------------------------------------------
# subcommands


def _add_fit_flags(p):
    p.add_argument("--data", required=True)
    p.add_argument("--time", default="time")
    p.add_argument("--event", default="event")
    p.add_argument("--cure-scalars", default="", help="comma-separated column names")
    p.add_argument("--latency-scalars", default="", help="comma-separated column names")
    p.add_argument("--cure-func", default="none", help="functional column prefix or 'none'")
    p.add_argument("--latency-func", default="none", help="functional column prefix or 'none'")
    p.add_argument("--k", type=int, default=10, help="number of B-spline basis functions")
    p.add_argument("--lambda", dest="lam", default="auto", help="'auto' or a fixed value")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", default="fphmc_fit")
    p.add_argument("--seed", type=int, default=0)


def _split(csv_arg):
    return [c for c in csv_arg.split(",") if c]


def _fit_config(args):
    lam = None if args.lam == "auto" else float(args.lam)
    return em.FitConfig(
        n_basis_incidence=args.k,
        n_basis_latency=args.k,
        lambda_b=lam,
        lambda_beta=lam,
        max_iter=args.max_iter,
        tol=args.tol,
    )


def _load_from_args(args):
    return load_dataset(
        args.data,
        args.time,
        args.event,
        _split(args.cure_scalars),
        _split(args.latency_scalars),
        args.cure_func,
        args.latency_func,
    )


def _args_echo(args):
    return {k: v for k, v in vars(args).items() if k != "func"}


def cmd_fit(args):
    dataset = _load_from_args(args)
    config = _fit_config(args)
    try:
        fit = em.fit_fphmc(dataset, config)
    except ConvergenceError as err:
        print(f"fit did not converge: {err}", file=sys.stderr)
        li = err.last_iterate
        if li is not None:
            print(f"last iterate: {li}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    report = build_report(fit, dataset, _args_echo(args))
    path = write_report(report, args.out)
    print(f"wrote {path}")
    return 0


def cmd_bootstrap(args):
    dataset = _load_from_args(args)
    config = _fit_config(args)
    try:
        fit = em.fit_fphmc(dataset, config)
    except ConvergenceError as err:
        print(f"fit did not converge: {err}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    try:
        result = boot.bootstrap_fit(dataset, config, args.b, args.seed, fit=fit)
        bands = boot.pointwise_ci(result, level=0.95)
    except (BootstrapUnstableError, InsufficientReplicatesError) as err:
        print(f"bootstrap unstable: {err}", file=sys.stderr)
        return EXIT_BOOTSTRAP_UNSTABLE
    report = build_report(fit, dataset, _args_echo(args), bands=bands)
    report["bootstrap"] = {
        "replicates": result.requested,
        "failures": result.failures,
        "seed": result.seed,
    }
    path = write_report(report, args.out)
    print(f"wrote {path}")
    return 0


def cmd_simulate(args):
    try:
        config = sim.scenario_config(args.scenario, args.n, seed=args.seed)
    except ValueError as err:
        print(str(err), file=sys.stderr)
        return EXIT_BAD_INPUT
    wrote = []
    if args.emit in ("data", "both"):
        dataset, _ = sim.gen_scenario(config)
        path = f"{args.out}_data.csv"
        write_dataset(dataset, path)
        wrote.append(path)
    if args.emit in ("report", "both"):
        report = sim.run_mc(config, args.reps)
        path = f"{args.out}_mc.csv"
        pd.DataFrame(report.rows()).to_csv(path, index=False)
        wrote.append(path)
    print("wrote " + ", ".join(wrote))
    return 0


def cmd_predict(args):
    report = load_report(args.model)
    dataset = load_dataset(
        args.data,
        report["config"]["time"],
        report["config"]["event"],
        _split(report["config"]["cure_scalars"]),
        _split(report["config"]["latency_scalars"]),
        report["config"]["cure_func"],
        report["config"]["latency_func"],
    )
    times = [float(t) for t in args.times.split(",")]
    config = em.FitConfig(
        n_basis_incidence=report["config"]["k"], n_basis_latency=report["config"]["k"]
    )
    designs = em.prepare_designs(dataset, config)

    if "incidence" in report:
        b = np.asarray(report["incidence"]["b"])
        theta_b = np.asarray(report["incidence"]["theta_b"])
        if b.size != designs.Z.shape[1]:
            raise InputError("model and data disagree on the cure scalar design")
        eta = designs.Z @ b
        if designs.Vz is not None:
            if theta_b.size != designs.Vz.shape[1]:
                raise InputError("model and data disagree on the cure functional design")
            eta = eta + designs.Vz @ theta_b
        pi = 1.0 / (1.0 + np.exp(-eta))
    else:
        pi = np.ones(dataset.n)

    gamma = np.concatenate(
        [np.asarray(report["latency"]["beta"]), np.asarray(report["latency"]["theta_beta"])]
    )
    U = em._latency_design(designs)
    if gamma.size != U.shape[1]:
        raise InputError("model and data disagree on the latency design")
    lp = U @ gamma
    base = report["baseline"]
    from .latency import StepSurvival

    s0 = StepSurvival(
        times=np.asarray(base["times"]),
        values=np.asarray(base["values"]),
        cumhaz=-np.log(np.maximum(np.asarray(base["values"]), 1e-300)),
        tail_time=base["tail_time"],
    )
    rows = []
    for t in times:
        s_u = s0.survival(t) ** np.exp(lp)
        overall = 1.0 - pi + pi * s_u
        for i in range(dataset.n):
            rows.append(
                {"id": i, "t": t, "pi": pi[i], "S_u": s_u[i], "S": overall[i]}
            )
    pd.DataFrame(rows).to_csv(args.out, index=False)
    print(f"wrote {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="fphmc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    pf = sub.add_parser("fit", help="fit the mixture cure model to a CSV dataset")
    _add_fit_flags(pf)
    pf.set_defaults(func=cmd_fit)

    pb = sub.add_parser("bootstrap", help="fit plus subject-bootstrap confidence bands")
    _add_fit_flags(pb)
    pb.add_argument("--b", type=int, required=True, help="number of bootstrap replicates")
    pb.set_defaults(func=cmd_bootstrap)

    ps = sub.add_parser("simulate", help="generate scenario datasets and MC reports")
    ps.add_argument("--scenario", required=True)
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--reps", type=int, default=100)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--emit", choices=("data", "report", "both"), default="report")
    ps.add_argument("--out", default="fphmc_sim")
    ps.set_defaults(func=cmd_simulate)

    pp = sub.add_parser("predict", help="per-subject survival predictions from a fit report")
    pp.add_argument("--model", required=True)
    pp.add_argument("--data", required=True)
    pp.add_argument("--times", required=True, help="comma-separated evaluation times")
    pp.add_argument("--out", default="fphmc_predictions.csv")
    pp.set_defaults(func=cmd_predict)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as err:
        print(f"input error: {err}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
