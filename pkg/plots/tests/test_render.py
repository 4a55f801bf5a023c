import json

import pytest

from adapdiscom_plots import RenderError, render
from adapdiscom_plots.render import main

HEADER = "replicate,method,scenario,tau2,n,mse,r2,bias,f1,wall_time,failed"


def write_results(path, methods=("a", "b", "c"), scenarios=("I", "III"),
                  reps=4):
    lines = [HEADER]
    for scen in scenarios:
        for rep in range(reps):
            for i, m in enumerate(methods):
                mse = 1.0 + 0.1 * i + 0.01 * rep
                lines.append(f"{rep},{m},{scen},0.2;0.5;0.6,40,{mse},"
                             f"{1 - mse / 10},{mse / 2},0.8,,false")
    path.write_text("\n".join(lines) + "\n")


def test_renders_mse_and_f1_with_manifest(tmp_path):
    results = tmp_path / "results.csv"
    write_results(results)
    out = tmp_path / "figs"
    written = render([results], ("mse", "f1"), out)
    assert written == ["mse_boxplots.png", "f1_boxplots.png"]
    for name in written:
        assert (out / name).stat().st_size > 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["files"] == written
    assert manifest["metrics"] == ["mse", "f1"]


def test_header_only_csv_fails_cleanly(tmp_path):
    results = tmp_path / "results.csv"
    results.write_text(HEADER + "\n")
    with pytest.raises(RenderError, match="zero data rows"):
        render([results], ("mse",), tmp_path / "figs")


def test_missing_column_named(tmp_path):
    results = tmp_path / "results.csv"
    results.write_text("method,scenario,tau2,failed\nx,I,0,false\n")
    with pytest.raises(RenderError, match="'mse'"):
        render([results], ("mse",), tmp_path / "figs")


def test_unknown_metric_rejected(tmp_path):
    results = tmp_path / "results.csv"
    write_results(results)
    with pytest.raises(RenderError, match="unknown metric"):
        render([results], ("accuracy",), tmp_path / "figs")


def test_single_method_single_scenario(tmp_path):
    results = tmp_path / "results.csv"
    write_results(results, methods=("only",), scenarios=("II",), reps=3)
    out = tmp_path / "figs"
    written = render([results], ("mse",), out)
    assert written == ["mse_boxplots.png"]


def test_manifest_deterministic(tmp_path):
    results = tmp_path / "results.csv"
    write_results(results)
    out1, out2 = tmp_path / "f1", tmp_path / "f2"
    render([results], ("mse", "f1"), out1)
    render([results], ("mse", "f1"), out2)
    assert (out1 / "manifest.json").read_bytes() == \
           (out2 / "manifest.json").read_bytes()


def test_failed_rows_excluded(tmp_path):
    results = tmp_path / "results.csv"
    lines = [HEADER,
             "0,a,I,0.0,40,1.0,0.9,0.5,0.8,,false",
             "1,a,I,0.0,40,nan,nan,nan,nan,,true"]
    results.write_text("\n".join(lines) + "\n")
    out = tmp_path / "figs"
    assert render([results], ("mse",), out) == ["mse_boxplots.png"]


class TestCli:
    def test_end_to_end(self, tmp_path):
        results = tmp_path / "results.csv"
        write_results(results)
        out = tmp_path / "figs"
        code = main(["--input", str(results), "--metric", "mse,f1",
                     "--out", str(out)])
        assert code == 0
        assert (out / "manifest.json").exists()

    def test_header_only_exit_code(self, tmp_path):
        results = tmp_path / "results.csv"
        results.write_text(HEADER + "\n")
        assert main(["--input", str(results), "--metric", "mse",
                     "--out", str(tmp_path / "figs")]) == 2

    def test_svg_format(self, tmp_path):
        results = tmp_path / "results.csv"
        write_results(results, methods=("a",), scenarios=("I",))
        out = tmp_path / "figs"
        assert main(["--input", str(results), "--metric", "bias",
                     "--out", str(out), "--format", "svg"]) == 0
        assert (out / "bias_boxplots.svg").exists()
