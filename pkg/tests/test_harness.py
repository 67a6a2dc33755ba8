import json

import numpy as np
import pytest

from mps_ensembles.errors import ConfigError
from mps_ensembles.harness import (SweepConfig, aggregate_minfo, alpha_vs_p,
                                   emit_figure_data, estimate_pc, fit_alpha,
                                   log_of_means_minfo, order_parameter_scan,
                                   read_csv, run_sweep)


def small_config(tmp_path, **overrides):
    base = dict(family="rmps", N=8, chi_grid=(4,), realizations=1,
                r_grid=(1,), seed=7, out_dir=str(tmp_path / "out"))
    base.update(overrides)
    return SweepConfig.from_dict(base)


def synthetic_minfo_rows(alpha, chis=(4, 8, 16, 32, 64), c=0.5, k=2, r=1,
                         p=0.0, jitter=0.0, n=1, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for chi in chis:
        for real in range(n):
            val = np.log1p(c * chi ** alpha) + jitter * rng.standard_normal()
            rows.append({"family": "synthetic", "N": 0, "chi": chi, "p": p,
                         "k": k, "r": r, "seed": real, "I_k": val})
    return rows


class TestRunSweep:
    def test_single_point_outputs(self, tmp_path):
        cfg = small_config(tmp_path)
        result = run_sweep(cfg)
        assert (result.out_dir / "spectra.csv").exists()
        assert (result.out_dir / "minfo.csv").exists()
        assert (result.out_dir / "minfo_traces.csv").exists()
        manifest = json.loads((result.out_dir / "manifest.json").read_text())
        assert manifest["config_hash"] == cfg.config_hash()
        assert result.n_minfo_rows == 1
        assert result.n_spectra_rows == 16  # chi^2 at the central site

    def test_rerun_bit_identical(self, tmp_path):
        cfg = small_config(tmp_path, out_dir=str(tmp_path / "a"))
        r1 = run_sweep(cfg)
        first = {name: (r1.out_dir / name).read_bytes()
                 for name in ("spectra.csv", "minfo.csv", "minfo_traces.csv",
                              "manifest.json")}
        r2 = run_sweep(cfg)
        for name, blob in first.items():
            assert (r2.out_dir / name).read_bytes() == blob, name

    def test_worker_count_does_not_change_output(self, tmp_path):
        cfg1 = small_config(tmp_path, out_dir=str(tmp_path / "w1"),
                            chi_grid=(2, 4), realizations=2, workers=1)
        cfg2 = small_config(tmp_path, out_dir=str(tmp_path / "w2"),
                            chi_grid=(2, 4), realizations=2, workers=2)
        r1, r2 = run_sweep(cfg1), run_sweep(cfg2)
        assert (r1.out_dir / "spectra.csv").read_bytes() == \
            (r2.out_dir / "spectra.csv").read_bytes()
        assert (r1.out_dir / "minfo.csv").read_bytes() == \
            (r2.out_dir / "minfo.csv").read_bytes()

    def test_monitored_p0_matches_brickwork(self, tmp_path):
        mon = small_config(tmp_path, family="monitored", p_grid=(0.0,),
                           chi_grid=(4,), depth=6, out_dir=str(tmp_path / "m"))
        bw = small_config(tmp_path, family="brickwork", chi_grid=(4,), depth=6,
                          out_dir=str(tmp_path / "bw"))
        rm, rb = run_sweep(mon), run_sweep(bw)
        col_m = [row["I_k"] for row in read_csv(rm.out_dir / "minfo.csv")]
        col_b = [row["I_k"] for row in read_csv(rb.out_dir / "minfo.csv")]
        assert col_m == col_b

    def test_cache_round_trip(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MPS_ENSEMBLES_CACHE", str(tmp_path / "cache"))
        cfg1 = small_config(tmp_path, out_dir=str(tmp_path / "c1"))
        cfg2 = small_config(tmp_path, out_dir=str(tmp_path / "c2"))
        r1 = run_sweep(cfg1)
        assert any((tmp_path / "cache").iterdir())
        r2 = run_sweep(cfg2)  # second run hits the cache
        assert (r1.out_dir / "minfo.csv").read_bytes() == \
            (r2.out_dir / "minfo.csv").read_bytes()

    def test_invalid_config(self, tmp_path):
        with pytest.raises(ConfigError):
            small_config(tmp_path, realizations=0)


class TestFitAlpha:
    def test_recovers_quadratic_growth(self):
        rows = synthetic_minfo_rows(2.0, chis=(8, 16, 32, 64, 128), c=1.0)
        fit = fit_alpha(rows, k=2, r=1, chi_min=8)
        assert abs(fit.alpha - 2.0) < 0.02

    @pytest.mark.parametrize("alpha", [1.0, 2.0])
    def test_exponent_recovery_two_decades(self, alpha):
        chis = tuple(int(2 ** n) for n in range(3, 10))
        rows = synthetic_minfo_rows(alpha, chis=chis, c=2.0)
        fit = fit_alpha(rows, k=2, r=1, chi_min=8)
        assert abs(fit.alpha - alpha) < 0.01 * max(alpha, 1.0)

    def test_flat_data_gives_zero_direct_slope(self):
        rows = synthetic_minfo_rows(0.0, chis=(8, 16, 32, 64), c=3.0)
        fit = fit_alpha(rows, k=2, r=1, chi_min=8)
        assert abs(fit.alpha) < 0.01
        assert abs(fit.alpha_direct) < 0.01

    def test_needs_three_points(self):
        rows = synthetic_minfo_rows(2.0, chis=(8, 16))
        with pytest.raises(ConfigError):
            fit_alpha(rows, k=2, r=1, chi_min=8)

    def test_chi_min_filters(self):
        rows = synthetic_minfo_rows(2.0, chis=(2, 4, 8, 16, 32))
        fit = fit_alpha(rows, k=2, r=1, chi_min=8)
        assert fit.n_points == 3

    def test_covariance_psd(self):
        rows = synthetic_minfo_rows(2.0, jitter=0.03, n=4, seed=2)
        fit = fit_alpha(rows, k=2, r=1, chi_min=4)
        cov = np.array(fit.covariance)
        assert np.all(np.linalg.eigvalsh(cov) >= -1e-12)

    def test_estimator_table(self):
        rows = synthetic_minfo_rows(2.0)
        stats = aggregate_minfo(rows, k=2, r=1)
        assert set(stats) == {4, 8, 16, 32, 64}


class TestAlphaVsP:
    def test_reduction_at_single_p(self):
        rows = synthetic_minfo_rows(2.0, p=0.0)
        table = alpha_vs_p(rows, k=2, r=1, chi_min_grid=[4, 8])
        direct = fit_alpha(rows, k=2, r=1, chi_min=4)
        first = [row for row in table if row["chi_min"] == 4][0]
        assert first["alpha"] == pytest.approx(direct.alpha)

    def test_area_law_data_gives_zero(self):
        rows = synthetic_minfo_rows(0.0, p=0.3, c=1.5)
        table = alpha_vs_p(rows, k=2, r=1, chi_min_grid=[4])
        assert abs(table[0]["alpha"]) < 0.01

    def test_decreasing_alpha_detected(self):
        rows = (synthetic_minfo_rows(2.0, p=0.05) +
                synthetic_minfo_rows(1.0, p=0.15) +
                synthetic_minfo_rows(0.0, p=0.3, c=1.5))
        table = alpha_vs_p(rows, k=2, r=1, chi_min_grid=[4])
        alphas = [row["alpha"] for row in sorted(table, key=lambda r: r["p"])]
        assert alphas[0] > alphas[1] > alphas[2]


def synthetic_spectra_rows(p, chi, moduli, seed=0):
    rows = []
    for m in moduli:
        rows.append({"re": m, "im": 0.0, "chi": chi, "p": p, "seed": seed,
                     "site": 0})
    return rows


class TestOrderParameter:
    def test_known_atom_at_zero(self):
        rng = np.random.default_rng(1)
        bulk = rng.uniform(0.3, 0.9, size=9000)
        moduli = np.concatenate([np.zeros(1000), bulk])
        rows = synthetic_spectra_rows(0.3, 16, moduli)
        table = order_parameter_scan(rows, rho_grid=np.linspace(0.01, 0.1, 10))
        assert table[0]["intercept"] == pytest.approx(0.10, abs=0.01)
        assert not table[0]["low_confidence"]

    def test_no_atom_extrapolates_to_zero(self):
        rng = np.random.default_rng(2)
        moduli = rng.uniform(0.2, 0.9, size=20000)
        rows = synthetic_spectra_rows(0.05, 16, moduli)
        table = order_parameter_scan(rows)
        assert abs(table[0]["intercept"]) < 0.01

    def test_low_confidence_flag(self):
        rows = synthetic_spectra_rows(0.1, 8, np.linspace(0.1, 0.9, 50))
        table = order_parameter_scan(rows)
        assert table[0]["low_confidence"]

    def test_pc_estimate(self):
        rows = []
        for p, atom in ((0.05, 0.0), (0.15, 0.0), (0.2, 0.3), (0.3, 0.5)):
            rng = np.random.default_rng(int(p * 100))
            bulk = rng.uniform(0.3, 0.9, size=11000)
            n_zero = int(atom * 11000)
            moduli = np.concatenate([np.zeros(n_zero), bulk[n_zero:]])
            rows.extend(synthetic_spectra_rows(p, 16, moduli))
        table = order_parameter_scan(rows)
        assert estimate_pc(table, 16) == pytest.approx(0.2)


class TestFigureBundles:
    def test_fig2_bundle(self, tmp_path):
        cfg = small_config(tmp_path, chi_grid=(4, 8), N=10)
        result = run_sweep(cfg)
        rows = read_csv(result.out_dir / "spectra.csv")
        written = emit_figure_data("fig2", tmp_path / "fig2", spectra_rows=rows)
        names = {p.name for p in written}
        assert "fig2_density_chi4.csv" in names
        assert "fig2_reference.csv" in names
        ref = read_csv([p for p in written if p.name == "fig2_reference.csv"][0])
        assert float(ref[0]["value"]) == pytest.approx(1 / np.sqrt(2))

    def test_figA1_bundle(self, tmp_path):
        written = emit_figure_data("figA1", tmp_path / "figA1")
        rows = read_csv(written[0])
        ks = {row["k"] for row in rows}
        assert ks == {"2", "3", "4"}
        tail = [float(r["dI_dlogchi"]) for r in rows if r["k"] == "2"][-1]
        assert abs(tail - 2.0) < 0.1

    def test_missing_columns_error(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            emit_figure_data("fig2", tmp_path, spectra_rows=[{"re": 1.0}])
        assert "im" in str(err.value)

    def test_empty_dataset_error(self, tmp_path):
        with pytest.raises(ConfigError):
            emit_figure_data("fig3", tmp_path, minfo_rows=[])

    def test_unknown_figure(self, tmp_path):
        with pytest.raises(ConfigError):
            emit_figure_data("fig9", tmp_path)

    def test_svg_rendering(self, tmp_path):
        written = emit_figure_data("figA1", tmp_path / "svg", plot=True)
        assert any(p.suffix == ".svg" for p in written)


class TestEstimators:
    def test_log_of_means_close_to_mean_of_logs_for_tight_data(self, tmp_path):
        cfg = small_config(tmp_path, chi_grid=(4,), realizations=4, N=10)
        result = run_sweep(cfg)
        minfo = read_csv(result.out_dir / "minfo.csv")
        traces = read_csv(result.out_dir / "minfo_traces.csv")
        mean_logs = aggregate_minfo(minfo, 2, 1)[4][0]
        log_means = log_of_means_minfo(traces, 2, 1)[4]
        assert abs(mean_logs - log_means) < 0.5


def test_spectra_window_pools_multiple_sites(tmp_path):
    cfg = small_config(tmp_path, N=12, chi_grid=(4,), spectra_window=3,
                       out_dir=str(tmp_path / "win"))
    result = run_sweep(cfg)
    rows = read_csv(result.out_dir / "spectra.csv")
    sites = {row["site"] for row in rows}
    assert sites == {"5", "6", "7"}
    assert len(rows) == 3 * 16


def test_fit_alpha_rejects_mixed_p():
    rows = (synthetic_minfo_rows(2.0, p=0.1) + synthetic_minfo_rows(1.0, p=0.2))
    with pytest.raises(ConfigError):
        fit_alpha(rows, k=2, r=1, chi_min=4)


def test_fit_alpha_on_analytic_ensemble_curve():
    # The averaged-ensemble mutual information at large chi fits to the
    # quadratic spreading exponent within 5 percent.
    from mps_ensembles.weingarten import rmps_averaged_Ik

    rows = []
    for chi in (64, 128, 256, 512, 1024):
        rows.append({"family": "rmps", "N": 0, "chi": chi, "p": 0.0, "k": 2,
                     "r": 1, "seed": 0, "I_k": rmps_averaged_Ik(2, 2, chi, 1)})
    fit = fit_alpha(rows, k=2, r=1, chi_min=64)
    assert abs(fit.alpha - 2.0) < 0.05 * 2.0
