"""Render per-metric boxplot figures from long-format results tables.

Input is the simulation results CSV (one row per replicate and method).
Each requested metric becomes one figure: boxplots grouped by method,
faceted by scenario (rows) and error-variance level (columns). A manifest
lists every file written.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRICS = ("mse", "r2", "bias", "f1")
KEY_COLUMNS = ("method", "scenario", "tau2", "failed")


class RenderError(Exception):
    pass


def load_rows(paths, metrics):
    """Rows from one or more results files; failed runs are dropped."""
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in (*KEY_COLUMNS, *metrics):
                if col not in header:
                    raise RenderError(f"{path}: missing column {col!r}")
            count = 0
            for raw in reader:
                count += 1
                if raw["failed"] == "true":
                    continue
                row = {k: raw[k] for k in ("method", "scenario", "tau2")}
                try:
                    for m in metrics:
                        row[m] = float(raw[m])
                except ValueError as exc:
                    raise RenderError(f"{path}: bad {m!r} value "
                                      f"{raw[m]!r}") from exc
                rows.append(row)
            if count == 0:
                raise RenderError(f"{path}: zero data rows")
    return rows


def _facets(rows):
    scenarios = sorted({r["scenario"] for r in rows})
    taus = sorted({r["tau2"] for r in rows})
    return scenarios, taus


def make_figure(rows, metric, path):
    scenarios, taus = _facets(rows)
    n_r, n_c = len(scenarios), len(taus)
    fig, axes = plt.subplots(n_r, n_c, squeeze=False,
                             figsize=(3.2 * n_c + 1.2, 2.6 * n_r + 0.8))
    for i, scen in enumerate(scenarios):
        for j, tau in enumerate(taus):
            ax = axes[i][j]
            cell = [r for r in rows
                    if r["scenario"] == scen and r["tau2"] == tau]
            methods = sorted({r["method"] for r in cell})
            if methods:
                data = [[r[metric] for r in cell if r["method"] == m]
                        for m in methods]
                ax.boxplot(data, tick_labels=methods)
                ax.tick_params(axis="x", rotation=60, labelsize=7)
            else:
                ax.set_axis_off()
            if i == 0:
                ax.set_title(f"tau2 = {tau}", fontsize=9)
            if j == 0:
                ax.set_ylabel(f"scenario {scen}\n{metric}", fontsize=9)
    fig.suptitle(f"{metric} by method", fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.96))
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render(inputs, metrics, outdir, fmt="png"):
    """Write one boxplot figure per metric plus ``manifest.json``.

    Returns the list of written figure filenames. Never mutates inputs;
    identical inputs produce identical manifests.
    """
    for m in metrics:
        if m not in METRICS:
            raise RenderError(f"unknown metric {m!r}; choose from {METRICS}")
    rows = load_rows(inputs, metrics)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in metrics:
        name = f"{metric}_boxplots.{fmt}"
        make_figure(rows, metric, outdir / name)
        written.append(name)
    manifest = {"metrics": list(metrics), "format": fmt, "files": written}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2),
                                          encoding="utf-8")
    return written


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="render",
        description="boxplot figures from simulation results tables")
    parser.add_argument("--input", action="append", required=True,
                        help="results CSV; repeat for multiple files")
    parser.add_argument("--metric", default="mse,r2,bias,f1",
                        help="comma-separated metrics to plot")
    parser.add_argument("--out", default="figs", help="output directory")
    parser.add_argument("--format", choices=("png", "svg"), default="png")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    metrics = tuple(m.strip() for m in args.metric.split(",") if m.strip())
    try:
        written = render(args.input, metrics, args.out, fmt=args.format)
    except (RenderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(written)} figures to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
