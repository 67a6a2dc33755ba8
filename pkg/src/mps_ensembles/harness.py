"""Config-driven ensemble sweeps, exponent fits, and figure-ready exports.

A sweep walks a (chi, p) grid, runs seeded realizations of the requested
ensemble at every point, and writes three CSV tables plus a manifest:

* ``spectra.csv``  - central-site transfer eigenvalues, one row each
  (columns re, im, chi, p, seed, site);
* ``minfo.csv``    - per-realization mutual information rows
  (family, N, chi, p, k, r, seed, I_k);
* ``minfo_traces.csv`` - the raw replica traces behind each minfo row,
  so both ensemble estimators (mean of logs, log of means) can be formed.

Everything is deterministic given the config: realization substreams are
derived from (master seed, grid-point index, realization index), results
are merged in sorted key order regardless of worker scheduling, and
floats are written with 17 significant digits so re-runs are bit-identical.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__ as _pkg_version
from .circuits import CircuitSpec, build_rmps, run_brickwork, run_monitored
from .errors import BudgetExceededError, CapExceededError, ConfigError
from .replica import default_layout, replica_traces
from .rng import GATES, stream_fingerprint, substream
from .serialize import load_mps, save_mps
from .spectra import (RadialDensity, TransferSpectrum, density_difference,
                      radial_density, site_tensor_in_gauge, spectrum)
from .weingarten import ik_slope_scan, rmps_averaged_Ik

SCHEMA_VERSION = 1
CACHE_ENV_VAR = "MPS_ENSEMBLES_CACHE"

SPECTRA_COLUMNS = ("re", "im", "chi", "p", "seed", "site")
MINFO_COLUMNS = ("family", "N", "chi", "p", "k", "r", "seed", "I_k")
TRACE_COLUMNS = ("family", "N", "chi", "p", "k", "r", "seed", "tr_ab", "tr_a", "tr_b")

FIGURES = ("fig2", "fig3", "fig4", "figA1", "figB1", "figC1")


@dataclass
class SweepConfig:
    """Grid description for one ensemble sweep."""

    family: str
    N: int
    chi_grid: tuple[int, ...]
    p_grid: tuple[float, ...] = (0.0,)
    r_grid: tuple[int, ...] = (1,)
    k: int = 2
    d: int = 2
    realizations: int = 1
    depth: int | None = None          # None means 4 * chi per point
    seed: int = 0
    truncation_mode: str = "per_layer"
    ti_gate_mode: str = "fresh_per_layer"
    rank_tol: float = 1e-12
    spectra_window: int = 1           # central sites pooled per realization
    workers: int = 1
    measure_spectra: bool = True
    measure_minfo: bool = True
    out_dir: str = "sweep_out"

    def validate(self) -> "SweepConfig":
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if not self.chi_grid or any(c < 1 for c in self.chi_grid):
            raise ConfigError("chi grid must be non-empty and positive")
        if any(not 0.0 <= p <= 1.0 for p in self.p_grid):
            raise ConfigError("p grid entries must lie in [0, 1]")
        if any(r < 0 for r in self.r_grid):
            raise ConfigError("r grid entries must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.depth is not None and self.depth < 0:
            raise ConfigError("depth must be >= 0")
        if self.spectra_window < 1:
            raise ConfigError("spectra_window must be >= 1")
        # Delegate family/d/N checks to CircuitSpec.
        self.point_spec(0).validate()
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        data = dict(data)
        for key in ("chi_grid", "p_grid", "r_grid"):
            if key in data:
                data[key] = tuple(data[key])
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad sweep config: {exc}") from exc
        return cfg.validate()

    def grid_points(self) -> list[tuple[int, float]]:
        pts = [(chi, p) for chi in self.chi_grid for p in self.p_grid]
        if self.family != "monitored":
            pts = [(chi, 0.0) for chi in self.chi_grid]
            # Deduplicate while keeping order.
            seen, unique = set(), []
            for pt in pts:
                if pt not in seen:
                    seen.add(pt)
                    unique.append(pt)
            pts = unique
        return pts

    def point_spec(self, point_index: int) -> CircuitSpec:
        chi, p = self.grid_points()[point_index]
        depth = self.depth if self.depth is not None else 4 * chi
        return CircuitSpec(family=self.family, N=self.N, d=self.d, chi=chi,
                           p=p if self.family == "monitored" else 0.0,
                           depth=depth, seed=point_seed(self.seed, point_index),
                           truncation_mode=self.truncation_mode,
                           ti_gate_mode=self.ti_gate_mode,
                           rank_tol=self.rank_tol)

    def canonical_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def point_seed(master_seed: int, point_index: int) -> int:
    return stream_fingerprint(master_seed, point_index)


@dataclass
class EnsembleResult:
    """Paths and row counts of one completed sweep."""

    out_dir: Path
    manifest: dict
    n_spectra_rows: int
    n_minfo_rows: int
    point_errors: dict = field(default_factory=dict)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _cache_path(spec: CircuitSpec, realization: int) -> Path | None:
    root = os.environ.get(CACHE_ENV_VAR)
    if not root:
        return None
    key = hashlib.sha256(f"{spec.to_json()}|{realization}".encode()).hexdigest()[:32]
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path / f"state_{key}.mps"


def realize_state(spec: CircuitSpec, realization: int):
    """Final state of one realization, via the cache when enabled."""
    cache = _cache_path(spec, realization)
    if cache is not None and cache.exists():
        state, _ = load_mps(cache)
        state.rank_tol = spec.rank_tol
        return state
    if spec.family == "rmps":
        rng = substream(spec.seed, realization, GATES)
        state = build_rmps(spec.N, spec.chi, spec.d, rng, rank_tol=spec.rank_tol)
    elif spec.family == "monitored":
        state, _ = run_monitored(spec, realization=realization)
    else:
        state = run_brickwork(spec, realization=realization)
    if cache is not None:
        save_mps(state, cache, provenance={"circuit_spec": json.loads(spec.to_json()),
                                           "realization": realization})
    return state


def _spectrum_gauge(family: str) -> str:
    # RMPS tensors are right-isometric as built; probing them untouched
    # realizes the random-channel ensemble exactly. Circuit states are
    # probed in left-canonical gauge.
    return "right_canonical" if family == "rmps" else "left_canonical"


def _spectra_sites(N: int, window: int) -> list[int]:
    half = window // 2
    return [N // 2 - half + i for i in range(window)]


def _run_task(args):
    (config_dict, point_index, realization) = args
    config = SweepConfig.from_dict(config_dict)
    spec = config.point_spec(point_index)
    seed_id = stream_fingerprint(spec.seed, realization)
    spectra_rows, minfo_rows, trace_rows = [], [], []
    state = realize_state(spec, realization)
    if config.measure_spectra:
        gauge = _spectrum_gauge(config.family)
        for site in _spectra_sites(spec.N, config.spectra_window):
            tensor = site_tensor_in_gauge(state, site, gauge)
            if tensor.shape[0] != tensor.shape[2]:
                continue  # skip edge sites with rectangular bonds
            sp = spectrum(tensor, gauge=gauge, site=site, spec=spec)
            for lam in sp.eigenvalues:
                spectra_rows.append((lam.real, lam.imag, spec.chi, spec.p,
                                     seed_id, site))
    if config.measure_minfo:
        for r in config.r_grid:
            layout = default_layout(spec.N, r)
            tr_ab, tr_a, tr_b = replica_traces(state, layout, config.k)
            value = float(np.log(tr_ab / (tr_a * tr_b)) / (config.k - 1))
            minfo_rows.append((config.family, spec.N, spec.chi, spec.p, config.k,
                               r, seed_id, value))
            trace_rows.append((config.family, spec.N, spec.chi, spec.p, config.k,
                               r, seed_id, tr_ab, tr_a, tr_b))
    return point_index, realization, spectra_rows, minfo_rows, trace_rows


def run_sweep(config: SweepConfig) -> EnsembleResult:
    """Run the sweep and write spectra/minfo CSVs plus a manifest.

    Budget overruns are recorded per grid point and leave the other
    points' results intact.
    """
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = config.grid_points()
    tasks = [(asdict(config), ip, real)
             for ip in range(len(points))
             for real in range(config.realizations)]

    results = {}
    point_errors: dict[int, str] = {}

    def _store(res):
        ip, real, s_rows, m_rows, t_rows = res
        results[(ip, real)] = (s_rows, m_rows, t_rows)

    if config.workers == 1:
        for task in tasks:
            try:
                _store(_run_task(task))
            except (BudgetExceededError, CapExceededError) as exc:
                point_errors[task[1]] = str(exc)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(_run_task, task): task for task in tasks}
            for fut in concurrent.futures.as_completed(futures):
                task = futures[fut]
                try:
                    _store(fut.result())
                except (BudgetExceededError, CapExceededError) as exc:
                    point_errors[task[1]] = str(exc)

    spectra_rows, minfo_rows, trace_rows = [], [], []
    for key in sorted(results):
        s_rows, m_rows, t_rows = results[key]
        spectra_rows.extend(s_rows)
        minfo_rows.extend(m_rows)
        trace_rows.extend(t_rows)

    if config.measure_spectra:
        write_csv(out / "spectra.csv", SPECTRA_COLUMNS, spectra_rows)
    if config.measure_minfo:
        write_csv(out / "minfo.csv", MINFO_COLUMNS, minfo_rows)
        write_csv(out / "minfo_traces.csv", TRACE_COLUMNS, trace_rows)

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": _pkg_version,
        "config": json.loads(config.canonical_json()),
        "config_hash": config.config_hash(),
        "grid_points": [{"index": i, "chi": chi, "p": p,
                         "seed": point_seed(config.seed, i)}
                        for i, (chi, p) in enumerate(points)],
        "rows": {"spectra": len(spectra_rows), "minfo": len(minfo_rows)},
        "point_errors": {str(k): v for k, v in sorted(point_errors.items())},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return EnsembleResult(out_dir=out, manifest=manifest,
                          n_spectra_rows=len(spectra_rows),
                          n_minfo_rows=len(minfo_rows),
                          point_errors=point_errors)


# -- estimators -----------------------------------------------------------


@dataclass
class FitResult:
    """Least-squares exponent fit of mutual information against chi."""

    alpha: float
    intercept: float
    covariance: list
    chi_min: int
    residual_norm: float
    n_points: int
    estimator: str
    alpha_direct: float
    alpha_stderr: float

    def as_dict(self) -> dict:
        return asdict(self)


def aggregate_minfo(rows: list[dict], k: int, r: int) -> dict[int, tuple[float, float, int]]:
    """Per-chi mean, standard error, and count of I_k values."""
    buckets: dict[int, list[float]] = {}
    for row in rows:
        if int(row["k"]) != k or int(row["r"]) != r:
            continue
        buckets.setdefault(int(row["chi"]), []).append(float(row["I_k"]))
    out = {}
    for chi, vals in buckets.items():
        arr = np.array(vals)
        se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
        out[chi] = (float(arr.mean()), se, arr.size)
    return out


def log_of_means_minfo(trace_rows: list[dict], k: int, r: int) -> dict[int, float]:
    """The estimator log E[tr] per chi, matching the averaged-ensemble value."""
    buckets: dict[int, list[tuple[float, float, float]]] = {}
    for row in trace_rows:
        if int(row["k"]) != k or int(row["r"]) != r:
            continue
        buckets.setdefault(int(row["chi"]), []).append(
            (float(row["tr_ab"]), float(row["tr_a"]), float(row["tr_b"])))
    out = {}
    for chi, triples in buckets.items():
        arr = np.array(triples)
        means = arr.mean(axis=0)
        out[chi] = float((np.log(means[0]) - np.log(means[1]) - np.log(means[2]))
                         / (k - 1))
    return out


def _weighted_line_fit(x: np.ndarray, y: np.ndarray, se: np.ndarray):
    if np.any(se > 0.0):
        w = 1.0 / np.where(se > 0.0, se, se[se > 0.0].min())
        coeffs, cov = np.polyfit(x, y, 1, w=w, cov="unscaled")
    else:
        coeffs, cov = np.polyfit(x, y, 1, cov=True)
    resid = y - np.polyval(coeffs, x)
    return coeffs, cov, float(np.linalg.norm(resid))


def fit_alpha(minfo_rows: list[dict], k: int, r: int, chi_min: int,
              estimator: str = "exp") -> FitResult:
    """Spreading exponent from I_k(chi) at fixed separation.

    The primary estimator regresses ``log(e^I - 1)`` against ``log chi``;
    the direct slope of I against ``log chi`` is reported alongside.

    Raises:
        ConfigError: with fewer than 3 usable chi points above chi_min.
    """
    if estimator not in ("exp", "direct"):
        raise ConfigError(f"unknown estimator {estimator!r}")
    p_values = {float(row["p"]) for row in minfo_rows}
    if len(p_values) > 1:
        raise ConfigError(
            f"fit_alpha expects a single measurement rate, got {sorted(p_values)}; "
            "use alpha_vs_p for p grids"
        )
    stats = {chi: v for chi, v in aggregate_minfo(minfo_rows, k, r).items()
             if chi >= chi_min}
    usable = {chi: v for chi, v in stats.items() if np.expm1(v[0]) > 0.0}
    if len(usable) < 3:
        raise ConfigError(
            f"fit_alpha needs >= 3 chi points above chi_min={chi_min}, "
            f"got {len(usable)}"
        )
    chis = np.array(sorted(usable))
    means = np.array([usable[c][0] for c in chis])
    ses = np.array([usable[c][1] for c in chis])
    x = np.log(chis.astype(float))

    y_exp = np.log(np.expm1(means))
    se_exp = ses * np.exp(means) / np.expm1(means)
    coeffs_exp, cov_exp, resid_exp = _weighted_line_fit(x, y_exp, se_exp)
    coeffs_dir, cov_dir, resid_dir = _weighted_line_fit(x, means, ses)

    if estimator == "exp":
        coeffs, cov, resid = coeffs_exp, cov_exp, resid_exp
    else:
        coeffs, cov, resid = coeffs_dir, cov_dir, resid_dir
    return FitResult(alpha=float(coeffs[0]), intercept=float(coeffs[1]),
                     covariance=np.asarray(cov).tolist(), chi_min=int(chi_min),
                     residual_norm=resid, n_points=int(len(chis)),
                     estimator=estimator, alpha_direct=float(coeffs_dir[0]),
                     alpha_stderr=float(np.sqrt(max(np.asarray(cov)[0, 0], 0.0))))


def alpha_vs_p(minfo_rows: list[dict], k: int, r: int,
               chi_min_grid) -> list[dict]:
    """Spreading exponent per (p, chi_min); skips underpopulated cells."""
    by_p: dict[float, list[dict]] = {}
    for row in minfo_rows:
        by_p.setdefault(float(row["p"]), []).append(row)
    table = []
    for p in sorted(by_p):
        for chi_min in chi_min_grid:
            try:
                fit = fit_alpha(by_p[p], k, r, chi_min)
            except ConfigError:
                continue
            table.append({"p": p, "chi_min": int(chi_min), "alpha": fit.alpha,
                          "alpha_stderr": fit.alpha_stderr,
                          "alpha_direct": fit.alpha_direct,
                          "n_points": fit.n_points})
    if not table:
        raise ConfigError("alpha_vs_p: no (p, chi_min) cell had enough chi points")
    return table


# -- order parameter ------------------------------------------------------


def _pooled_moduli(spectra_rows: list[dict]) -> dict[tuple[float, int], np.ndarray]:
    groups: dict[tuple[float, int], list[float]] = {}
    for row in spectra_rows:
        lam = complex(float(row["re"]), float(row["im"]))
        key = (float(row["p"]), int(row["chi"]))
        groups.setdefault(key, []).append(abs(lam))
    return {key: np.sort(np.array(vals)) for key, vals in groups.items()}


def cumulative_small_eig(moduli: np.ndarray, rho_grid: np.ndarray) -> np.ndarray:
    nonunit = moduli[moduli <= 1.0 - 1e-6]
    if nonunit.size == 0:
        raise ConfigError("no non-unit eigenvalues pooled")
    return np.searchsorted(nonunit, rho_grid, side="left") / nonunit.size


def order_parameter_scan(spectra_rows: list[dict], rho_grid=None,
                         n_fit: int = 5, min_pooled: int = 10_000) -> list[dict]:
    """Extrapolated fraction of vanishing transfer eigenvalues per (p, chi).

    Fits the cumulative fraction P(|lambda| < rho) linearly over the
    smallest ``n_fit`` grid radii and reports the rho -> 0 intercept with
    its standard error. Cells with fewer than ``min_pooled`` pooled
    eigenvalues are flagged low-confidence.
    """
    if rho_grid is None:
        rho_grid = np.linspace(0.01, 0.10, 10)
    rho_grid = np.asarray(rho_grid, dtype=float)
    if rho_grid.size < 2 or np.any(rho_grid <= 0.0):
        raise ConfigError("rho grid must have >= 2 positive entries")
    rho_grid = np.sort(rho_grid)
    n_fit = min(n_fit, rho_grid.size)
    table = []
    for (p, chi), moduli in sorted(_pooled_moduli(spectra_rows).items()):
        nonunit = moduli[moduli <= 1.0 - 1e-6]
        cum = cumulative_small_eig(moduli, rho_grid)
        x, y = rho_grid[:n_fit], cum[:n_fit]
        coeffs, cov = np.polyfit(x, y, 1, cov="unscaled")
        # Counting noise on each cumulative point, used as the intercept scale.
        counts = np.maximum(y * nonunit.size, 1.0)
        se = float(np.sqrt(counts.max()) / nonunit.size)
        table.append({
            "p": p, "chi": chi,
            "intercept": float(coeffs[1]),
            "intercept_stderr": se,
            "slope": float(coeffs[0]),
            "n_pooled": int(nonunit.size),
            "low_confidence": bool(nonunit.size < min_pooled),
            "cumulative": {float(r): float(c) for r, c in zip(rho_grid, cum)},
        })
    return table


def estimate_pc(order_table: list[dict], chi: int) -> float | None:
    """Smallest p whose extrapolated value clears 3x the lowest-p baseline."""
    rows = sorted((row for row in order_table if row["chi"] == chi),
                  key=lambda r: r["p"])
    if len(rows) < 2:
        return None
    base = rows[0]
    floor = 3.0 * max(base["intercept"], base["intercept_stderr"], 0.0)
    for row in rows[1:]:
        if row["intercept"] > floor:
            return row["p"]
    return None


# -- figure bundles -------------------------------------------------------


def _require_columns(rows: list[dict], needed, what: str):
    if not rows:
        raise ConfigError(f"{what}: dataset is empty; missing columns {sorted(needed)}")
    missing = [c for c in needed if c not in rows[0]]
    if missing:
        raise ConfigError(f"{what}: missing columns {missing}")


def _density_from_rows(rows: list[dict], bins: int = 100) -> RadialDensity:
    lams = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
    spec = TransferSpectrum(eigenvalues=lams, chi=0)
    keep = TransferSpectrum(eigenvalues=spec.nonunit_eigenvalues(), chi=0,
                            unit_eigenvalues_removed=True)
    return radial_density([keep], bins=bins)


def emit_figure_data(figure: str, out_dir, spectra_rows: list[dict] | None = None,
                     minfo_rows: list[dict] | None = None,
                     extra_spectra: dict[str, list[dict]] | None = None,
                     k: int = 2, d: int = 2, plot: bool = False) -> list[Path]:
    """Write the CSV bundle (and optionally an SVG) for one figure.

    Args:
        figure: one of fig2, fig3, fig4, figA1, figB1, figC1.
        out_dir: output directory for the bundle.
        spectra_rows / minfo_rows: primary dataset tables, when required.
        extra_spectra: for figC1, spectra of the comparison families keyed
            by family name.

    Raises:
        ConfigError: when the dataset misses required columns.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if figure == "fig2":
        _require_columns(spectra_rows or [], SPECTRA_COLUMNS, "fig2")
        by_chi: dict[int, list[dict]] = {}
        for row in spectra_rows:
            by_chi.setdefault(int(row["chi"]), []).append(row)
        for chi, rows in sorted(by_chi.items()):
            dens = _density_from_rows(rows)
            path = out / f"fig2_density_chi{chi}.csv"
            write_csv(path, ("bin_left", "bin_right", "density"),
                      list(zip(dens.bin_edges[:-1], dens.bin_edges[1:], dens.density)))
            written.append(path)
        ref = out / "fig2_reference.csv"
        write_csv(ref, ("name", "value"), [("support_radius", 1.0 / np.sqrt(d))])
        written.append(ref)

    elif figure == "fig3":
        _require_columns(minfo_rows or [], MINFO_COLUMNS, "fig3")
        rs = sorted({int(r["r"]) for r in minfo_rows})
        rows_out = []
        for r in rs:
            for chi, (mean, se, n) in sorted(aggregate_minfo(minfo_rows, k, r).items()):
                rows_out.append((chi, r, mean, se, np.expm1(mean), n))
        path = out / "fig3_minfo.csv"
        write_csv(path, ("chi", "r", "I_mean", "I_stderr", "exp_I_minus_1", "n"),
                  rows_out)
        written.append(path)
        fits = []
        for r in rs:
            try:
                fit = fit_alpha(minfo_rows, k, r, chi_min=min(
                    int(row["chi"]) for row in minfo_rows))
                fits.append((r, fit.alpha, fit.alpha_stderr, fit.alpha_direct))
            except ConfigError:
                continue
        path = out / "fig3_alpha.csv"
        write_csv(path, ("r", "alpha", "alpha_stderr", "alpha_direct"), fits)
        written.append(path)

    elif figure == "fig4":
        _require_columns(spectra_rows or [], SPECTRA_COLUMNS, "fig4")
        groups: dict[tuple[float, int], list[dict]] = {}
        for row in spectra_rows:
            groups.setdefault((float(row["p"]), int(row["chi"])), []).append(row)
        dens_rows, cum_rows = [], []
        rho_grid = np.linspace(0.01, 0.2, 20)
        for (p, chi), rows in sorted(groups.items()):
            dens = _density_from_rows(rows)
            for left, right, val in zip(dens.bin_edges[:-1], dens.bin_edges[1:],
                                        dens.density):
                dens_rows.append((p, chi, left, right, val))
            moduli = np.sort(np.abs(np.array(
                [complex(float(r["re"]), float(r["im"])) for r in rows])))
            cum = cumulative_small_eig(moduli, rho_grid)
            for rho, val in zip(rho_grid, cum):
                cum_rows.append((p, chi, rho, val))
        path = out / "fig4_density.csv"
        write_csv(path, ("p", "chi", "bin_left", "bin_right", "density"), dens_rows)
        written.append(path)
        path = out / "fig4_cumulative.csv"
        write_csv(path, ("p", "chi", "rho", "P"), cum_rows)
        written.append(path)

    elif figure == "figA1":
        chis = [2 ** n for n in range(1, 11)]
        rows_out = []
        for kk in (2, 3, 4):
            slopes = ik_slope_scan(kk, d, chis, r=1)
            for chi, slope in zip(chis[1:-1], slopes):
                rows_out.append((kk, chi, slope))
        path = out / "figA1_slopes.csv"
        write_csv(path, ("k", "chi", "dI_dlogchi"), rows_out)
        written.append(path)
        ik_rows = [(kk, d, chi, r, rmps_averaged_Ik(kk, d, chi, r))
                   for kk in (2, 3, 4) for chi in chis for r in (1, 2, 3)]
        path = out / "figA1_ik.csv"
        write_csv(path, ("k", "d", "chi", "r", "I_k"), ik_rows)
        written.append(path)

    elif figure == "figB1":
        _require_columns(minfo_rows or [], MINFO_COLUMNS, "figB1")
        chis = sorted({int(row["chi"]) for row in minfo_rows})
        table = alpha_vs_p(minfo_rows, k, min(int(row["r"]) for row in minfo_rows),
                           chi_min_grid=chis[:-2] if len(chis) > 2 else chis[:1])
        path = out / "figB1_alpha.csv"
        write_csv(path, ("p", "chi_min", "alpha", "alpha_stderr"),
                  [(row["p"], row["chi_min"], row["alpha"], row["alpha_stderr"])
                   for row in table])
        written.append(path)

    elif figure == "figC1":
        _require_columns(spectra_rows or [], SPECTRA_COLUMNS, "figC1 (rmps spectra)")
        if not extra_spectra:
            raise ConfigError("figC1: missing comparison spectra (extra_spectra)")
        by_chi: dict[int, list[dict]] = {}
        for row in spectra_rows:
            by_chi.setdefault(int(row["chi"]), []).append(row)
        for family, rows in extra_spectra.items():
            _require_columns(rows, SPECTRA_COLUMNS, f"figC1 ({family} spectra)")
            other_by_chi: dict[int, list[dict]] = {}
            for row in rows:
                other_by_chi.setdefault(int(row["chi"]), []).append(row)
            for chi in sorted(set(by_chi) & set(other_by_chi)):
                diff = density_difference(_density_from_rows(by_chi[chi]),
                                          _density_from_rows(other_by_chi[chi]))
                path = out / f"figC1_diff_{family}_chi{chi}.csv"
                write_csv(path, ("bin_left", "bin_right", "rmps_minus_other"),
                          list(zip(diff.bin_edges[:-1], diff.bin_edges[1:],
                                   diff.density)))
                written.append(path)
    else:
        raise ConfigError(f"unknown figure {figure!r}; choose from {FIGURES}")

    if plot:
        written.append(_render_svg(figure, out, written))
    return written


def _render_svg(figure: str, out: Path, csv_paths: list[Path]) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.2))
    for path in csv_paths:
        if path.suffix != ".csv":
            continue
        rows = read_csv(path)
        if not rows:
            continue
        cols = list(rows[0])
        if len(cols) < 2:
            continue
        x = [float(r[cols[0]]) for r in rows if _is_number(r[cols[0]])]
        y = [float(r[cols[-1]]) for r in rows if _is_number(r[cols[-1]])]
        if len(x) == len(y) and x:
            ax.plot(x, y, lw=1, label=path.stem[:40])
    ax.set_title(figure)
    ax.legend(fontsize=5, loc="best")
    svg = out / f"{figure}.svg"
    fig.savefig(svg, format="svg")
    plt.close(fig)
    return svg


def _is_number(s) -> bool:
    try:
        float(s)
        return True
    except (TypeError, ValueError):
        return False
