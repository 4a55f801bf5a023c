"""Command-line entry point: fit user data, reproduce simulations, report.

Exit codes: 0 success, 2 input/config error, 3 no feasible weight
combination. Diagnostics go to stderr; data products are written to files.
"""

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .datamodel import ModalityLayout, load_dataset, standardize
from .errors import AdapDiscomError, NoFeasibleCombination
from .moments import HuberPolicy, huber_moments, pairwise_covariance
from .simulation import (RESULT_COLUMNS, SCENARIOS, ScenarioSpec,
                         default_methods, paired_wins, run_experiment, summarize)
from .solver import SolverOptions
from .tuning import (ALL_METHODS, DEFAULT_WEIGHT_GRID, FAST_METHODS, TuneSpec,
                     transform_validation, tune, uses_huber)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_floats(text):
    return tuple(float(tok) for tok in str(text).split(",") if tok.strip())


def write_results_csv(rows, path, timing=False):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            out = []
            for col in RESULT_COLUMNS:
                if col == "wall_time" and not timing:
                    out.append("")
                else:
                    out.append(_fmt(row[col]))
            writer.writerow(out)


def read_results_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != RESULT_COLUMNS:
            raise AdapDiscomError(f"{path}: header {header} does not match "
                                  f"the results schema {list(RESULT_COLUMNS)}")
        rows = []
        for line in reader:
            if len(line) != len(RESULT_COLUMNS):
                raise AdapDiscomError(f"{path}: malformed row {line}")
            row = dict(zip(RESULT_COLUMNS, line))
            try:
                row["replicate"] = int(row["replicate"])
                row["n"] = int(row["n"])
                for col in ("mse", "r2", "bias", "f1"):
                    row[col] = float(row[col])
                row["wall_time"] = float(row["wall_time"]) if row["wall_time"] else 0.0
                row["failed"] = row["failed"] == "true"
            except ValueError as exc:
                raise AdapDiscomError(f"{path}: malformed row {line}") from exc
            rows.append(row)
    return rows


def write_summary_csv(summary, path):
    cols = ("scenario", "tau2", "method", "n_reps", "n_failed",
            "mse_mean", "mse_sd", "r2_mean", "r2_sd",
            "bias_mean", "bias_sd", "f1_mean", "f1_sd")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for entry in summary:
            writer.writerow([_fmt(entry[c]) for c in cols])


def write_ranking(rows, summary, path):
    """Methods ordered by mean MSE per (scenario, tau2), with paired wins."""
    groups = {}
    for entry in summary:
        groups.setdefault((entry["scenario"], entry["tau2"]), []).append(entry)
    lines = []
    for (scenario, tau2), entries in sorted(groups.items()):
        entries = sorted(entries, key=lambda e: (np.isnan(e["mse_mean"]), e["mse_mean"]))
        lines.append(f"scenario {scenario}  tau2 {tau2}")
        cell_rows = [r for r in rows
                     if r["scenario"] == scenario and r["tau2"] == tau2]
        for rank, entry in enumerate(entries, start=1):
            line = (f"  {rank}. {entry['method']:<24} "
                    f"mean mse {entry['mse_mean']:.6g} (sd {entry['mse_sd']:.3g}, "
                    f"reps {entry['n_reps']})")
            if rank < len(entries):
                nxt = entries[rank]["method"]
                wins, total = paired_wins(cell_rows, entry["method"], nxt)
                line += f"; beats {nxt} in {wins}/{total} paired replicates"
            lines.append(line)
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def _tuning_param_columns(method, K):
    if method in FAST_METHODS:
        return ["l0"]
    if method in ("adapdiscom", "adapdiscom-huber", "discom", "discom-huber"):
        return [f"alpha_{k + 1}" for k in range(K)] + ["alpha_c"]
    return []


def _tuning_row_values(method, params, K):
    if method in FAST_METHODS:
        return [params.get("l0", "")]
    if method in ("discom", "discom-huber"):
        return [params.get("alpha_i", "")] * K + [params.get("alpha_c", "")]
    if method in ("adapdiscom", "adapdiscom-huber"):
        alpha = params.get("alpha", ("",) * K)
        return list(alpha) + [params.get("alpha_c", "")]
    return []


def write_tuning_csv(result, K, path):
    param_cols = _tuning_param_columns(result.method, K)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method"] + param_cols
                        + ["lambda", "val_mse", "min_eig", "feasible"])
        for row in result.table:
            vals = _tuning_row_values(result.method, row.params, K)
            writer.writerow([result.method] + [_fmt(v) for v in vals]
                            + [_fmt(row.lam), _fmt(row.val_mse),
                               _fmt(row.min_eig), _fmt(row.feasible)])


def _dump_moments(m, outdir):
    np.savetxt(outdir / "sigma.csv", m.sigma, delimiter=",")
    np.savetxt(outdir / "counts.csv", m.counts, delimiter=",", fmt="%d")
    np.savetxt(outdir / "c.csv", m.c, delimiter=",")


def _huber_policy(args):
    return HuberPolicy(mode=args.huber_mode, H_fixed=args.huber_h,
                       c_sigma=args.huber_c_sigma, c_c=args.huber_c_c)


def _tune_spec_from_args(args, K):
    tau2 = None
    if args.tau2 is not None:
        vals = _parse_floats(args.tau2)
        tau2 = vals * K if len(vals) == 1 else vals
    return TuneSpec(
        method=args.method,
        weight_grid=_parse_floats(args.weight_grid),
        l0_points=args.l0_points,
        lambda_points=args.lambda_points,
        lambda_ratio=args.lambda_ratio,
        huber=_huber_policy(args),
        tau2=tau2,
        cocolasso_sign=+1 if args.cocolasso_plus else -1,
        solver=SolverOptions(tol=args.solver_tol, max_sweeps=args.max_sweeps,
                             allow_indefinite=args.allow_indefinite),
    )


def cmd_fit(args):
    layout = ModalityLayout.from_string(args.modalities)
    ds = load_dataset(args.data, layout, response=args.response or "last")

    if args.validation:
        val_ds = load_dataset(args.validation, layout,
                              response=args.response_validation or "last")
        if not val_ds.mask.all():
            raise AdapDiscomError("validation set must be completely observed")
        train_ds = ds
        val_X_raw, val_y_raw = val_ds.X, val_ds.y
    else:
        complete = ds.complete_rows()
        n_val = int(round(args.val_fraction * complete.size))
        if complete.size == 0 or n_val < 1:
            raise NoFeasibleCombination(
                "no complete rows available to hold out for validation; "
                "provide --validation")
        val_rows = complete[-n_val:]
        keep = np.setdiff1d(np.arange(ds.n), val_rows)
        train_ds = type(ds)(X=ds.X[keep], mask=ds.mask[keep], y=ds.y[keep],
                            layout=layout)
        val_X_raw, val_y_raw = ds.X[val_rows], ds.y[val_rows]

    train_std, report = standardize(train_ds)
    val_X = transform_validation(val_X_raw, report)
    val_y = val_y_raw - report.y_center

    spec = _tune_spec_from_args(args, layout.K)
    result = tune(train_std, val_X, val_y, spec)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "method": result.method,
        "best_params": result.best_params,
        "best_lambda": result.best_lambda,
        "validation_mse": result.validation_mse,
        "n_feasible": result.n_feasible,
        "fit": result.best_fit.to_dict(),
        "standardization": {
            "scales": report.scales.tolist(),
            "centers": report.centers.tolist(),
            "y_center": report.y_center,
            "degenerate_columns": list(report.degenerate_columns),
        },
    }
    (outdir / "fit.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    write_tuning_csv(result, layout.K, outdir / "tuning.csv")
    if args.dump_moments:
        if uses_huber(args.method):
            m = huber_moments(train_std, _huber_policy(args))
        else:
            m = pairwise_covariance(train_std)
        _dump_moments(m, outdir)
    print(f"wrote {outdir / 'fit.json'} (validation mse "
          f"{result.validation_mse:.6g}, lambda {result.best_lambda:.6g})",
          file=sys.stderr)
    return 0


def cmd_simulate(args):
    spec = ScenarioSpec(
        scenario=args.scenario,
        n=args.n,
        p=args.p,
        K=args.modality_count,
        tau2=_parse_floats(args.tau2) if args.tau2 and "," in str(args.tau2)
        else (float(args.tau2) if args.tau2 is not None else None),
        complete_fraction=args.complete_fraction,
        seed=args.seed,
        val_n=args.val_n,
        test_n=args.test_n,
    )
    methods = ([m.strip() for m in args.methods.split(",") if m.strip()]
               if args.methods else default_methods(spec.scenario))
    overrides = {
        "weight_grid": _parse_floats(args.weight_grid),
        "l0_points": args.l0_points,
        "lambda_points": args.lambda_points,
        "lambda_ratio": args.lambda_ratio,
        "huber": _huber_policy(args),
    }
    threads = args.threads if args.threads else (os.cpu_count() or 1)
    rows = run_experiment(spec, methods=methods, B=args.reps, seed=args.seed,
                          threads=threads, tune_overrides=overrides)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_results_csv(rows, outdir / "results.csv", timing=args.timing)
    write_summary_csv(summarize(rows), outdir / "summary.csv")
    print(f"wrote {outdir / 'results.csv'} ({len(rows)} rows)", file=sys.stderr)
    return 0


def cmd_report(args):
    rows = []
    for path in args.results:
        rows.extend(read_results_csv(path))
    summary = summarize(rows)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_summary_csv(summary, outdir / "summary.csv")
    write_ranking(rows, summary, outdir / "ranking.txt")
    print(f"wrote {outdir / 'summary.csv'} and {outdir / 'ranking.txt'}",
          file=sys.stderr)
    return 0


def _add_tuning_flags(sub):
    sub.add_argument("--weight-grid", default=",".join(str(g) for g in DEFAULT_WEIGHT_GRID),
                     help="comma-separated weight grid values in [0,1]")
    sub.add_argument("--l0-points", type=int, default=10)
    sub.add_argument("--lambda-points", type=int, default=30)
    sub.add_argument("--lambda-ratio", type=float, default=1e-2)
    sub.add_argument("--huber-mode", choices=("fixed", "adaptive"), default="fixed")
    sub.add_argument("--huber-h", type=float, default=1.345)
    sub.add_argument("--huber-c-sigma", type=float, default=1.0)
    sub.add_argument("--huber-c-c", type=float, default=1.0)
    sub.add_argument("--config", default=None,
                     help="JSON file whose keys mirror the flags; explicit flags win")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="adapdiscom",
        description="Sparse regression for block-missing multimodal data "
                    "with additive measurement error")
    subs = parser.add_subparsers(dest="command", required=True)

    fit = subs.add_parser("fit", help="tune and fit one method on a CSV dataset")
    fit.add_argument("--data", required=True, help="CSV with predictors "
                     "(response in the last column unless --response is given)")
    fit.add_argument("--modalities", required=True,
                     help="comma-separated block sizes, e.g. 100,100,100")
    fit.add_argument("--method", required=True, choices=ALL_METHODS)
    fit.add_argument("--response", default=None,
                     help="separate single-column response file")
    fit.add_argument("--validation", default=None,
                     help="complete validation CSV (same format as --data)")
    fit.add_argument("--response-validation", default=None,
                     help="separate response file for --validation")
    fit.add_argument("--val-fraction", type=float, default=0.2,
                     help="fraction of complete rows held out when no "
                          "--validation file is given")
    fit.add_argument("--tau2", default=None,
                     help="per-modality error variances for cocolasso")
    fit.add_argument("--cocolasso-plus", action="store_true",
                     help="use the additive (+) diagonal correction")
    fit.add_argument("--allow-indefinite", action="store_true",
                     help="fit even when the covariance estimate is indefinite")
    fit.add_argument("--solver-tol", type=float, default=1e-7)
    fit.add_argument("--max-sweeps", type=int, default=10000)
    fit.add_argument("--dump-moments", action="store_true",
                     help="also write sigma.csv, counts.csv and c.csv")
    fit.add_argument("--out", default=".")
    _add_tuning_flags(fit)
    fit.set_defaults(func=cmd_fit)

    sim = subs.add_parser("simulate", help="run a simulation scenario")
    sim.add_argument("--scenario", required=True, choices=SCENARIOS)
    sim.add_argument("--n", type=int, default=120, help="training sample size")
    sim.add_argument("--p", type=int, default=300, help="number of predictors")
    sim.add_argument("--modality-count", type=int, default=3)
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--tau2", default=None,
                     help="scalar knob or comma-separated per-modality variances")
    sim.add_argument("--complete-fraction", type=float, default=None,
                     help="fraction of complete training rows (scenario VII)")
    sim.add_argument("--methods", default=None,
                     help="comma-separated method list; default depends on scenario")
    sim.add_argument("--val-n", type=int, default=200)
    sim.add_argument("--test-n", type=int, default=400)
    sim.add_argument("--threads", type=int, default=0,
                     help="replicate parallelism; 0 = available cores")
    sim.add_argument("--timing", action="store_true",
                     help="record wall times (breaks byte-level determinism)")
    sim.add_argument("--out", default=".")
    _add_tuning_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    rep = subs.add_parser("report", help="merge results files and rank methods")
    rep.add_argument("results", nargs="+", help="one or more results.csv files")
    rep.add_argument("--out", default=".")
    rep.add_argument("--config", default=None)
    rep.set_defaults(func=cmd_report)
    return parser


def _apply_config(argv):
    """Expand --config right after the subcommand so explicit flags win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        return argv
    with open(argv[idx + 1]) as fh:
        cfg = json.load(fh)
    extra = []
    for key, value in cfg.items():
        flag = "--" + str(key).replace("_", "-")
        if isinstance(value, bool):
            if value:
                extra.append(flag)
        elif isinstance(value, (list, tuple)):
            extra.extend([flag, ",".join(str(v) for v in value)])
        else:
            extra.extend([flag, str(value)])
    return argv[:1] + extra + argv[1:]


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if argv and not argv[0].startswith("-"):
            argv = _apply_config(argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except NoFeasibleCombination as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except AdapDiscomError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
