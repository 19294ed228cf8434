"""CLI surface: exit codes, CSV determinism, overrides, sweep grammar."""

import json
import os

import numpy as np
import pytest

from microruin import cli, model


def run_cli(args):
    return cli.main(args)


@pytest.fixture
def fast_config_path(tmp_path):
    """Reference config with reduced sampling budgets for CLI tests."""
    cfg = model.default_config()
    data = cfg.to_dict()
    data["numerics"]["mc_samples"] = 20_000
    data["numerics"]["mc_paths"] = 2_000
    path = tmp_path / "config.json"
    with open(path, "w") as fh:
        json.dump(data, fh)
    return str(path)


class TestValidateCommand:
    def test_defaults_exit_zero(self, capsys):
        assert run_cli(["validate"]) == 0
        assert "config ok" in capsys.readouterr().out

    def test_invalid_field_exit_two_with_path(self, capsys):
        code = run_cli(["--set", "network.alpha_pathloss=2.0", "validate"])
        assert code == 2
        err = capsys.readouterr().err
        assert "network.alpha_pathloss" in err and "alpha must exceed 2" in err

    def test_bad_mix_exit_two(self):
        assert run_cli(["--set", 'financial.operator_mix={"1": 0.5}', "validate"]) == 2


class TestMomentsCommand:
    def test_writes_csv_and_manifest(self, tmp_path, fast_config_path):
        out = str(tmp_path / "o")
        assert run_cli(["--config", fast_config_path, "--out", out, "moments"]) == 0
        rows = open(os.path.join(out, "moments.csv")).read().splitlines()
        assert rows[0] == "interval,order,value"
        assert len(rows) == 5
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert "moments.csv" in manifest["outputs"]
        assert manifest["config_hash"]
        assert manifest["seed"] == 20260808

    def test_byte_identical_reruns(self, tmp_path, fast_config_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        run_cli(["--config", fast_config_path, "--out", out1, "moments"])
        run_cli(["--config", fast_config_path, "--out", out2, "moments"])
        a = open(os.path.join(out1, "moments.csv"), "rb").read()
        b = open(os.path.join(out2, "moments.csv"), "rb").read()
        assert a == b
        assert b"\r" not in a  # LF line endings

    def test_override_changes_output(self, tmp_path, fast_config_path):
        out = str(tmp_path / "o")
        run_cli(["--config", fast_config_path, "--out", out, "--set",
                 "network.alpha_pathloss=3.0", "moments"])
        rows = open(os.path.join(out, "moments.csv")).read().splitlines()
        ev = float(rows[1].split(",")[2])
        assert ev == pytest.approx(343.06, abs=0.5)  # alpha=3, ruin-scenario clamps


class TestPipelineCommands:
    def test_income_pdf_csv(self, tmp_path, fast_config_path):
        out = str(tmp_path / "o")
        assert run_cli(["--config", fast_config_path, "--out", out, "income-pdf",
                        "--points", "101"]) == 0
        rows = open(os.path.join(out, "income_pdf.csv")).read().splitlines()
        assert rows[0] == "v,pdf,cdf"
        assert len(rows) == 102
        last = rows[-1].split(",")
        assert float(last[2]) == pytest.approx(1.0, abs=1e-6)

    def test_compound_csv_masses_sum_to_one(self, tmp_path, fast_config_path):
        out = str(tmp_path / "o")
        assert run_cli(["--config", fast_config_path, "--out", out, "compound",
                        "--interval", "1"]) == 0
        rows = open(os.path.join(out, "compound.csv")).read().splitlines()[1:]
        total = sum(float(r.split(",")[3]) for r in rows)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_ruin_with_mc_columns(self, tmp_path, fast_config_path):
        out = str(tmp_path / "o")
        assert run_cli(["--config", fast_config_path, "--out", out, "ruin",
                        "--u", "100,200,300"]) == 0
        rows = open(os.path.join(out, "ruin.csv")).read().splitlines()
        assert rows[0] == "l,u,psi_numerical,psi_mc,ci_lo,ci_hi"
        assert len(rows) == 1 + 5 * 3
        psi = {}
        for r in rows[1:]:
            parts = r.split(",")
            psi[(int(parts[0]), float(parts[1]))] = float(parts[2])
        assert psi[(5, 100.0)] > psi[(5, 300.0)]
        assert psi[(5, 100.0)] >= psi[(1, 100.0)]

    def test_expected_surplus_rows(self, tmp_path):
        out = str(tmp_path / "o")
        assert run_cli(["--out", out, "expected-surplus", "--ev-grid", "0:0.2:0.1",
                        "--horizons", "1,2"]) == 0
        rows = open(os.path.join(out, "expected_surplus.csv")).read().splitlines()
        assert rows[0] == "n,e_v,u_bound"
        assert len(rows) == 1 + 2 * 3

    def test_simulate_mirror_outputs(self, tmp_path, fast_config_path):
        out = str(tmp_path / "o")
        assert run_cli(["--config", fast_config_path, "--out", out, "simulate",
                        "--what", "moments"]) == 0
        rows = open(os.path.join(out, "mc_moments.csv")).read().splitlines()
        assert rows[0] == "interval,order,value,se"
        assert run_cli(["--config", fast_config_path, "--out", out, "simulate",
                        "--what", "paths", "--u", "100,300"]) == 0
        rows = open(os.path.join(out, "mc_ruin.csv")).read().splitlines()
        assert rows[0] == "l,u,psi,ci_lo,ci_hi"


class TestSweepCommand:
    def test_sweep_grid_and_monotone_column(self, tmp_path, fast_config_path):
        out = str(tmp_path / "o")
        assert run_cli(["--config", fast_config_path, "--out", out, "sweep",
                        "--param", "network.alpha_pathloss=2.5:5:0.25",
                        "--jobs", "2"]) == 0
        rows = open(os.path.join(out, "sweep.csv")).read().splitlines()
        assert rows[0].startswith("value,moment_1")
        values = [float(r.split(",")[0]) for r in rows[1:]]
        evs = [float(r.split(",")[1]) for r in rows[1:]]
        np.testing.assert_allclose(values, np.arange(2.5, 5.01, 0.25))
        assert all(a > b for a, b in zip(evs, evs[1:]))  # decreasing in alpha
        # per-point artifacts written atomically with their own manifests
        point_dirs = [d for d in os.listdir(out) if d.startswith("sweep_")]
        assert len(point_dirs) == len(values)
        sample = os.path.join(out, point_dirs[0])
        assert set(os.listdir(sample)) == {"moments.csv", "manifest.json"}


class TestReproduceTables:
    def test_fig2_and_fig3(self, tmp_path, fast_config_path):
        out = str(tmp_path / "o")
        assert run_cli(["--config", fast_config_path, "--out", out,
                        "reproduce-tables", "--which", "fig2,fig3", "--fast"]) == 0
        fig2 = open(os.path.join(out, "fig2.csv")).read().splitlines()
        assert fig2[0] == "n,e_v,u_bound"
        fig3 = open(os.path.join(out, "fig3.csv")).read().splitlines()
        assert fig3[0] == "a_d,alpha,ev_num"

    def test_table_three_layout(self, tmp_path, fast_config_path):
        out = str(tmp_path / "o")
        assert run_cli(["--config", fast_config_path, "--out", out,
                        "reproduce-tables", "--which", "tableIII", "--fast"]) == 0
        rows = open(os.path.join(out, "tableIII.csv")).read().splitlines()
        assert rows[0] == "u,psi5_numerical,psi5_mc,ci_lo,ci_hi"
        us = [float(r.split(",")[0]) for r in rows[1:]]
        assert us == [100.0, 150.0, 200.0, 250.0, 300.0]


class TestAccuracyExitCode:
    def test_rejected_expansion_exits_three(self, tmp_path, fast_config_path):
        # Table-II-style clamps give a density the order-4 expansion cannot
        # sanitize within budget: the pipeline must exit 3, not crash
        out = str(tmp_path / "o")
        code = run_cli(["--config", fast_config_path, "--out", out, "--set",
                        "financial.c_min=0.1", "--set", "financial.c_max=100.0",
                        "ruin", "--no-mc"])
        assert code == 3
