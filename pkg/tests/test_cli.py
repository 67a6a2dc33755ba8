import json

import numpy as np
import pytest

from mps_ensembles.cli import main
from mps_ensembles.harness import read_csv


def run_cli(args):
    return main([str(a) for a in args])


class TestSweepCommand:
    def test_sweep_with_flags(self, tmp_path):
        out = tmp_path / "sweep"
        code = run_cli(["--seed", 3, "--out", out, "sweep", "--family", "rmps",
                        "--N", 8, "--chi", 4, "--realizations", 1])
        assert code == 0
        assert (out / "manifest.json").exists()
        assert len(read_csv(out / "spectra.csv")) == 16

    def test_sweep_with_config_file(self, tmp_path):
        cfg = {"family": "rmps", "N": 8, "chi_grid": [4], "realizations": 1,
               "seed": 5, "out_dir": str(tmp_path / "cfg_out")}
        cfg_path = tmp_path / "sweep.json"
        cfg_path.write_text(json.dumps(cfg))
        assert run_cli(["sweep", "--config", cfg_path]) == 0
        assert (tmp_path / "cfg_out" / "minfo.csv").exists()

    def test_determinism_through_cli(self, tmp_path):
        out = tmp_path / "det"
        args = ["--seed", 11, "--out", out, "sweep", "--family", "rmps",
                "--N", 8, "--chi", 4, "--realizations", 2]
        assert run_cli(args) == 0
        first = (out / "spectra.csv").read_bytes()
        assert run_cli(args) == 0
        assert (out / "spectra.csv").read_bytes() == first

    def test_config_error_exit_code(self, tmp_path):
        assert run_cli(["sweep", "--family", "rmps", "--chi", 0]) == 2

    def test_missing_family_exit_code(self):
        assert run_cli(["sweep"]) == 2

    def test_bad_config_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run_cli(["sweep", "--config", bad]) == 2


class TestAnalysisCommands:
    @pytest.fixture
    def dataset(self, tmp_path):
        out = tmp_path / "data"
        code = run_cli(["--seed", 2, "--out", out, "minfo", "--family", "rmps",
                        "--N", 10, "--chi", 2, "4", "8", "--r", 1,
                        "--realizations", 3])
        assert code == 0
        return out

    def test_fit_command(self, tmp_path, dataset, capsys):
        code = run_cli(["fit", "--data", dataset / "minfo.csv", "--chi-min", 2])
        assert code == 0
        fit = json.loads(capsys.readouterr().out)
        assert 0.5 < fit["alpha"] < 3.5

    def test_fit_insufficient_points(self, dataset):
        assert run_cli(["fit", "--data", dataset / "minfo.csv",
                        "--chi-min", 8]) == 2

    def test_order_param_command(self, tmp_path):
        out = tmp_path / "spec"
        assert run_cli(["--seed", 4, "--out", out, "spectrum", "--family",
                        "rmps", "--N", 10, "--chi", 8,
                        "--realizations", 2]) == 0
        dest = tmp_path / "op"
        assert run_cli(["order-param", "--data", out / "spectra.csv",
                        "--out", dest]) == 0
        rows = read_csv(dest / "order_param.csv")
        assert len(rows) == 1
        assert rows[0]["chi"] == "8"

    def test_figure_command(self, tmp_path):
        out = tmp_path / "spec2"
        assert run_cli(["--seed", 6, "--out", out, "spectrum", "--family",
                        "rmps", "--N", 10, "--chi", 4,
                        "--realizations", 1]) == 0
        dest = tmp_path / "figs"
        assert run_cli(["figure", "--figure", "fig2", "--spectra",
                        out / "spectra.csv", "--out", dest]) == 0
        assert (dest / "fig2_density_chi4.csv").exists()

    def test_figure_missing_data(self, tmp_path):
        assert run_cli(["figure", "--figure", "fig2",
                        "--out", tmp_path / "x"]) == 2


def test_oracle_check(capsys):
    assert run_cli(["oracle-check"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3


def test_budget_exceeded_exit_code(tmp_path):
    # chi above the dense spectral cap: the grid point fails, partial
    # results are preserved, and the CLI reports exit code 3.
    out = tmp_path / "big"
    code = run_cli(["--seed", 8, "--out", out, "spectrum", "--family", "rmps",
                    "--N", 16, "--chi", 128, "--realizations", 1])
    assert code == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["point_errors"]
