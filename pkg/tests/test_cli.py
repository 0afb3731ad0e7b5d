import json

import numpy as np
import pytest
from click.testing import CliRunner

from piezoscatter.cli import cli
from piezoscatter.repository.mesh import load_mesh
from piezoscatter.repository.results import (
    ArrayRepository,
    SweepRepository,
    TimeseriesRepository,
)
from tests.conftest import DATA_DIR

TET = str(DATA_DIR / "tet.mesh")
CONFIG = str(DATA_DIR / "sample.cfg")


@pytest.fixture
def runner():
    return CliRunner()


def test_make_mesh(runner, tmp_path):
    target = tmp_path / "cube.mesh"
    result = runner.invoke(cli, ["make-mesh", "cube", "--size", "2", "-o", str(target)])
    assert result.exit_code == 0, result.output
    assert load_mesh(target).n_vertices == 27
    assert "27 vertices" in result.output


def test_unknown_suite_is_input_error(runner):
    result = runner.invoke(cli, ["verify", "fluid"])
    assert result.exit_code == 2


def test_verify_writes_report(runner, tmp_path):
    target = tmp_path / "report.json"
    result = runner.invoke(cli, ["verify", "cq", "--seed", "0", "-o", str(target)])
    assert result.exit_code == 0, result.output
    report = json.loads(target.read_text())
    assert report["pass"] is True
    assert all(check["pass"] for check in report["checks"])
    assert "cq: pass" in result.output


@pytest.mark.parametrize("value", ["-1,0", "0,2", "one"])
def test_bad_laplace_parameter(runner, tmp_path, value):
    args = ["solve-laplace", "--config", CONFIG, "--mesh", TET, "--s", value]
    result = runner.invoke(cli, args + ["-o", str(tmp_path)])
    assert result.exit_code == 2


def test_missing_mesh(runner, tmp_path):
    args = ["solve-laplace", "--config", CONFIG, "--mesh", str(tmp_path / "x.mesh")]
    result = runner.invoke(cli, args + ["--s", "1,1"])
    assert result.exit_code == 2


def test_malformed_config(runner, tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("{not json")
    args = ["solve-laplace", "--config", str(config), "--mesh", TET, "--s", "1,1"]
    result = runner.invoke(cli, args + ["-o", str(tmp_path)])
    assert result.exit_code == 2
    assert "Error:" in result.stderr


def test_solve_and_reconstruct(runner, tmp_path):
    out = tmp_path / "run"
    matrix = tmp_path / "a.mtx"
    args = ["solve-laplace", "--config", CONFIG, "--mesh", TET, "--s", "1,1"]
    result = runner.invoke(
        cli, args + ["-o", str(out), "--dump-matrix", str(matrix)]
    )
    assert result.exit_code == 0, result.output
    assert "p[front]" in result.output
    assert (out / "solve.report.json").exists()
    assert matrix.read_text().startswith("%%MatrixMarket")
    archive = ArrayRepository().load(out / "solution.npz")
    assert archive["probe_pressure"].shape == (2,)
    assert archive["stress"].shape == (1, 3, 3)

    csv_path = tmp_path / "p.csv"
    result = runner.invoke(
        cli,
        [
            "reconstruct",
            "--config",
            CONFIG,
            "--mesh",
            TET,
            "--densities",
            str(out / "solution.npz"),
            "-o",
            str(csv_path),
        ],
    )
    assert result.exit_code == 0, result.output
    rows = TimeseriesRepository().load(csv_path)
    assert [r.probe for r in rows] == ["front", "back"]
    assert all(r.field == "p_hat" and r.t == 0.0 for r in rows)
    np.testing.assert_allclose(
        [complex(r.re, r.im) for r in rows], archive["probe_pressure"]
    )


def test_symbol_fit_needs_samples(runner, tmp_path):
    args = ["estimate-symbol", "inverse", "--config", CONFIG, "--mesh", TET]
    result = runner.invoke(
        cli, args + ["--samples", "3", "-o", str(tmp_path / "s.json")]
    )
    assert result.exit_code == 2
    assert "at least 8" in result.stderr


@pytest.mark.slow
def test_solve_time(runner, tmp_path):
    args = ["solve-time", "--config", CONFIG, "--mesh", TET]
    result = runner.invoke(
        cli, args + ["--dt", "0.25", "--steps", "16", "-o", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "time.report.json").read_text())
    assert report["n_steps"] == 16
    assert report["causality_residual"] < 1e-3
    rows = TimeseriesRepository().load(tmp_path / "probes.csv")
    assert len(rows) == 17 * 2


def test_sweep(runner, tmp_path):
    target = tmp_path / "sweep.csv"
    args = ["sweep", "--config", CONFIG, "--mesh", TET, "--samples", "3"]
    result = runner.invoke(cli, args + ["--omega-max", "4", "-o", str(target)])
    assert result.exit_code == 0, result.output
    rows = SweepRepository().load(target)
    assert len(rows) == 3
    assert rows[0].s.to_complex() == pytest.approx(1.0 + 1.0j)
    assert "growth exponent" in result.output
