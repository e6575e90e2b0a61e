"""Suite runner: deterministic cells, CSV/JSON outputs, plot data.

Execution model
---------------
A *cell* is one (scenario, trial) pair.  Its seed derives from the master
seed and the scenario values (smoothness, offset smoothness, h) plus the
trial index -- never from the sample size, the suite, or the method -- so
error curves across n are computed on nested datasets, adaptive and
nonadaptive suites with equal master seeds see identical data, and every
method within a cell faces the same draw.

Cells are pure functions of (config, cell record).  They may run serially
or in a process pool (SATL_WORKERS); results are sorted on a full setting
key before row ids are assigned, so output bytes do not depend on the
worker count.  Raw and aggregated CSVs and the rates JSON are
byte-identical across reruns; metadata records wall time and is exempt.

Raw rows number settings x trials x methods.  A failed fit keeps its row
with a status tag and empty result fields; the run continues and the CLI
exits nonzero.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from satl.adaptivity import build_grid, select_lepski, select_train_validate
from satl.baselines import fit_fbe_transfer, fit_misspecified_matern
from satl.datagen import Dataset, derive_seed, make_dataset, make_transfer_scenario, sample_gp
from satl.evaluation import ErrorReport, aggregate_trials, fit_rate, simpson_l2_error
from satl.experiments.config import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
)
from satl.kernels import GaussianKernel, MaternKernel
from satl.krr import RegSchedule, fit, schedule_lambda
from satl.transfer import fit_satl

RAW_COLUMNS = (
    "row", "suite", "method", "n_target", "n_source", "nu_target", "nu_offset",
    "h", "trial", "seed", "status", "alpha_src", "alpha_off", "lambda_src",
    "lambda_off", "l2_error", "sq_error",
)

AGG_COLUMNS = (
    "suite", "method", "n_target", "n_source", "nu_target", "nu_offset", "h",
    "count", "mean_l2", "sd_l2", "se_l2", "mean_sq", "sd_sq", "se_sq",
)

CSV_VERSION = "satl-results v1"

RAW_CSV = "raw_results.csv"
AGG_CSV = "aggregated.csv"
RATES_JSON = "rates.json"
META_JSON = "metadata.json"

# Trial index reserved for the C-selection pilot stream; keeps its draws
# disjoint from every experiment trial.
CV_TRIAL = 1_000_003

SEED_SCHEME = (
    "cell seed = derive_seed(master_seed, round(1000 nu_target), "
    "round(1000 nu_offset), round(1000 h), trial); absent scenario values "
    "encode as 0; sample size, suite, and method never enter the key"
)


def _truth_alpha(nu):
    # generator nu = alpha + 0.01 by convention; round away fp residue
    return round(nu * 100.0 - 1.0) / 100.0


def _cell_seed(master_seed, nu_target, nu_offset, h, trial):
    def enc(v):
        return 0 if v is None else int(round(float(v) * 1000.0))

    return derive_seed(int(master_seed), enc(nu_target), enc(nu_offset), enc(h),
                       int(trial))


def _scenario_key(nu_target, nu_offset, h):
    key = f"nu_target={float(nu_target):g}"
    if nu_offset is not None:
        key += f",nu_offset={float(nu_offset):g},h={float(h):g}"
    return key


def _scenarios(cfg):
    if cfg.suite in ("tl_fixed_target", "tl_growing_target"):
        return [
            {"nu_target": cfg.nu_target, "nu_offset": nu_o, "h": h}
            for nu_o in cfg.nu_offset_values
            for h in cfg.h_values
        ]
    return [{"nu_target": nu, "nu_offset": None, "h": None} for nu in cfg.nu_values]


def _sweep(cfg):
    """(n_target, n_source) pairs for the configured suite."""
    if cfg.suite == "tl_growing_target":
        return [(nt, int(round(nt ** 1.5))) for nt in cfg.n_target_grid]
    if cfg.suite == "tl_fixed_target":
        return [(cfg.n_target_fixed, ns) for ns in cfg.n_source_grid]
    return [(n, None) for n in cfg.n_grid]


def _adapt(data, grid, kernel, cfg):
    if cfg.adapt_method == "lepski":
        return select_lepski(data, grid, kernel, c0=cfg.lepski_c0)
    return select_train_validate(data, grid, kernel,
                                 split_fraction=cfg.split_fraction)


def _blank_row(cfg, cell, method, n_target, n_source):
    return {
        "row": None,
        "suite": cfg.suite,
        "method": method,
        "n_target": int(n_target),
        "n_source": None if n_source is None else int(n_source),
        "nu_target": float(cell["nu_target"]),
        "nu_offset": None if cell["nu_offset"] is None else float(cell["nu_offset"]),
        "h": None if cell["h"] is None else float(cell["h"]),
        "trial": int(cell["trial"]),
        "seed": int(cell["seed"]),
        "status": "ok",
        "alpha_src": None,
        "alpha_off": None,
        "lambda_src": None,
        "lambda_off": None,
        "l2_error": None,
        "sq_error": None,
    }


def _single_task_rows(cfg, cell, methods, C):
    nu = cell["nu_target"]
    seed = cell["seed"]
    kernel = GaussianKernel(cfg.bandwidth)
    truth = sample_gp(MaternKernel(nu, cfg.rho), cfg.grid_size, seed)
    alpha_true = _truth_alpha(nu)
    rows = []
    for n, _ in _sweep(cfg):
        data = make_dataset(truth, n, cfg.sigma, seed, "target")
        for method in methods:
            row = _blank_row(cfg, cell, method, n, None)
            try:
                if method == "krr":
                    lam = schedule_lambda(
                        RegSchedule("gaussian_exponential", C, alpha_true, 1), n)
                    model = fit(kernel, data, lam)
                    row["alpha_src"] = alpha_true
                    row["lambda_src"] = lam
                elif method == "krr_adaptive":
                    grid = build_grid(candidates=cfg.candidates, C=C)
                    sel, model = _adapt(data, grid, kernel, cfg)
                    row["alpha_src"] = sel.alpha
                    row["lambda_src"] = sel.lam
                else:
                    raise ValueError(f"unknown single-task method {method!r}")
                rep = simpson_l2_error(model, truth, cfg.quad_points)
                row["l2_error"], row["sq_error"] = rep.l2_error, rep.sq_error
            except Exception as exc:  # keep the row, tag it, move on
                row["status"] = f"error:{type(exc).__name__}"
            rows.append(row)
    return rows


def _transfer_rows(cfg, cell, methods, C):
    seed = cell["seed"]
    kernel = GaussianKernel(cfg.bandwidth)
    scen = make_transfer_scenario(cell["nu_target"], cell["nu_offset"], cell["h"],
                                  cfg.grid_size, seed, cfg.rho)
    rows = []
    for n_t, n_s in _sweep(cfg):
        target = make_dataset(scen.target_fn, n_t, cfg.sigma, seed, "target")
        source = make_dataset(scen.source_fn, n_s, cfg.sigma, seed, "source")
        for method in methods:
            row = _blank_row(cfg, cell, method, n_t, n_s)
            try:
                if method == "satl":
                    grid_s = build_grid(n=n_s, Q=cfg.q1, N=cfg.n1, C=C)
                    grid_d = build_grid(n=n_t, Q=cfg.q2, N=cfg.n2, C=C)
                    model = fit_satl(source, target, grid_s, grid_d, kernel,
                                     cfg.adapt_method, c0=cfg.lepski_c0,
                                     split_fraction=cfg.split_fraction)
                    row["alpha_src"] = model.selection_source.alpha
                    row["lambda_src"] = model.selection_source.lam
                    row["alpha_off"] = model.selection_offset.alpha
                    row["lambda_off"] = model.selection_offset.lam
                elif method == "krr_adaptive":
                    grid = build_grid(candidates=cfg.candidates, C=C)
                    sel, model = _adapt(target, grid, kernel, cfg)
                    row["alpha_src"] = sel.alpha
                    row["lambda_src"] = sel.lam
                elif method == "fbe_transfer":
                    model = fit_fbe_transfer(source, target)
                    # truncation orders stand in for the smoothness columns
                    row["alpha_src"] = float(model.m1)
                    row["alpha_off"] = float(model.m2)
                else:
                    raise ValueError(f"unknown transfer method {method!r}")
                rep = simpson_l2_error(model, scen.target_fn, cfg.quad_points)
                row["l2_error"], row["sq_error"] = rep.l2_error, rep.sq_error
            except Exception as exc:
                row["status"] = f"error:{type(exc).__name__}"
            rows.append(row)
    return rows


def _saturation_rows(cfg, cell, methods, C):
    nu = cell["nu_target"]
    seed = cell["seed"]
    m0 = _truth_alpha(nu)
    truth = sample_gp(MaternKernel(nu, cfg.rho), cfg.grid_size, seed)
    rows = []
    for n, _ in _sweep(cfg):
        data = make_dataset(truth, n, cfg.sigma, seed, "target")
        for method, nu_imp in zip(methods, cfg.imposed_nus):
            row = _blank_row(cfg, cell, method, n, None)
            try:
                model = fit_misspecified_matern(data, nu_imp, m0, C=C, rho=cfg.rho)
                row["alpha_src"] = float(nu_imp)
                row["lambda_src"] = model.lam
                rep = simpson_l2_error(model, truth, cfg.quad_points)
                row["l2_error"], row["sq_error"] = rep.l2_error, rep.sq_error
            except Exception as exc:
                row["status"] = f"error:{type(exc).__name__}"
            rows.append(row)
    return rows


def _run_cell(cfg_payload, cell):
    """Compute every (n, method) row for one cell.  Pure and picklable."""
    cfg = config_from_dict(cfg_payload)
    methods = cfg.resolved_methods()
    C = float(cell["C"])
    try:
        if cfg.suite in ("target_only_nonadaptive", "target_only_adaptive"):
            return _single_task_rows(cfg, cell, methods, C)
        if cfg.suite in ("tl_fixed_target", "tl_growing_target"):
            return _transfer_rows(cfg, cell, methods, C)
        return _saturation_rows(cfg, cell, methods, C)
    except Exception as exc:  # scenario-level failure: tag every row
        rows = []
        for n_t, n_s in _sweep(cfg):
            for method in methods:
                row = _blank_row(cfg, cell, method, n_t, n_s)
                row["status"] = f"error:{type(exc).__name__}"
                rows.append(row)
        return rows


def _run_cell_args(args):
    return _run_cell(*args)


def _build_cells(cfg, scenarios, c_map):
    cells = []
    for sc in scenarios:
        key = _scenario_key(sc["nu_target"], sc["nu_offset"], sc["h"])
        for trial in range(cfg.trials):
            cells.append({
                "nu_target": sc["nu_target"],
                "nu_offset": sc["nu_offset"],
                "h": sc["h"],
                "trial": trial,
                "seed": _cell_seed(cfg.master_seed, sc["nu_target"],
                                   sc["nu_offset"], sc["h"], trial),
                "C": c_map[key],
            })
    return cells


def _resolve_workers(cfg, workers):
    if workers is not None:
        return max(1, int(workers))
    if cfg.workers > 0:
        return cfg.workers
    env = os.environ.get("SATL_WORKERS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SATL_WORKERS must be an integer, got {env!r}") from exc
    return 1


def _execute(cfg, scenarios, c_map, workers):
    cells = _build_cells(cfg, scenarios, c_map)
    payload = config_to_dict(cfg)
    if workers <= 1:
        results = [_run_cell(payload, cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_args,
                                    [(payload, cell) for cell in cells]))
    return [row for rows in results for row in rows]


def _row_sort_key(row):
    return (
        row["suite"], row["method"], row["n_target"],
        -1 if row["n_source"] is None else row["n_source"],
        row["nu_target"],
        -1.0 if row["nu_offset"] is None else row["nu_offset"],
        -1.0 if row["h"] is None else row["h"],
        row["trial"],
    )


# ---------------------------------------------------------------------------
# C selection


def _cv_folds(n, k):
    idx = np.arange(n)
    return [(idx[idx % k != j], idx[idx % k == j]) for j in range(k)]


def _select_c_cv_detailed(cfg, nu, K=5):
    if cfg.suite not in ("target_only_nonadaptive", "target_only_adaptive"):
        raise ConfigError("select_C_cv supports the single-task suites only")
    if K < 2:
        raise ConfigError("K must be >= 2")
    n_max = max(cfg.n_grid)
    if n_max < K:
        raise ConfigError("largest n must be >= K for K-fold CV")
    seed = _cell_seed(cfg.master_seed, nu, None, None, CV_TRIAL)
    kernel = GaussianKernel(cfg.bandwidth)
    truth = sample_gp(MaternKernel(nu, cfg.rho), cfg.grid_size, seed)
    data = make_dataset(truth, n_max, cfg.sigma, seed, "target")
    alpha_true = _truth_alpha(nu)
    folds = _cv_folds(data.n, K)

    scores = []
    for C in sorted(set(float(c) for c in cfg.c_grid)):
        total = 0.0
        for tr, va in folds:
            train = Dataset(x=data.x[tr], y=data.y[tr], domain="target",
                            sigma=cfg.sigma, seed=seed)
            if cfg.suite == "target_only_nonadaptive":
                lam = schedule_lambda(
                    RegSchedule("gaussian_exponential", C, alpha_true, 1), train.n)
                model = fit(kernel, train, lam)
            else:
                grid = build_grid(candidates=cfg.candidates, C=C)
                _, model = _adapt(train, grid, kernel, cfg)
            preds = model.predict(data.x[va])
            total += float(np.sum((preds - data.y[va]) ** 2))
        scores.append({"C": C, "cv_mse": total / data.n})

    best = min(scores, key=lambda s: (s["cv_mse"], s["C"]))
    detail = {"nu": float(nu), "n": int(n_max), "K": int(K),
              "seed": int(seed), "scores": scores}
    return float(best["C"]), detail


def select_C_cv(cfg, nu=None, K=5):
    """Pick the schedule constant by K-fold CV at the largest sweep size.

    The pilot dataset comes from a reserved trial stream, so experiment
    draws are never reused for selection.  Ties break toward the smaller
    C.  Returns the selected constant.
    """
    if nu is None:
        nu = cfg.nu_values[0]
    C, _ = _select_c_cv_detailed(cfg, float(nu), K=K)
    return C


# ---------------------------------------------------------------------------
# output writing


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_raw_csv(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RAW_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in RAW_COLUMNS])


def _ok_rows(rows):
    return [r for r in rows if r["status"] == "ok"]


def _aggregate(cfg, rows):
    records = [
        ErrorReport(l2_error=r["l2_error"], sq_error=r["sq_error"],
                    grid_points=cfg.quad_points, seed=r["seed"], n=r["n_target"],
                    smoothness=r["nu_target"], method=r["method"],
                    extra=(r["n_source"], r["nu_offset"], r["h"]))
        for r in _ok_rows(rows)
    ]
    return aggregate_trials(records)


def _write_aggregated(path, cfg, summaries):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGG_COLUMNS)
        for s in summaries:
            n_source, nu_offset, h = s.extra
            writer.writerow([
                cfg.suite, s.method, _fmt(s.n), _fmt(n_source), _fmt(s.smoothness),
                _fmt(nu_offset), _fmt(h), _fmt(s.count), _fmt(s.mean_l2),
                _fmt(s.sd_l2), _fmt(s.se_l2), _fmt(s.mean_sq), _fmt(s.sd_sq),
                _fmt(s.se_sq),
            ])


def _rate_x(cfg, row):
    return row["n_source"] if cfg.suite == "tl_fixed_target" else row["n_target"]


def _theoretical_slopes(cfg, nu_target):
    """(l2, sq) reference slopes, known for the single-task suites only."""
    if cfg.suite in ("target_only_nonadaptive", "target_only_adaptive"):
        alpha = _truth_alpha(nu_target)
        return -alpha / (2 * alpha + 1), -2 * alpha / (2 * alpha + 1)
    return None, None


def _compute_rates(cfg, rows):
    groups = {}
    for r in _ok_rows(rows):
        key = (r["method"], r["nu_target"], r["nu_offset"], r["h"])
        groups.setdefault(key, {}).setdefault(_rate_x(cfg, r), []).append(r)

    def none_key(v):
        return -1.0 if v is None else float(v)

    rates = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], none_key(k[2]), none_key(k[3]))):
        method, nu_t, nu_o, h = key
        by_x = groups[key]
        theo_l2, theo_sq = _theoretical_slopes(cfg, nu_t)
        for column, theo in (("l2_error", theo_l2), ("sq_error", theo_sq)):
            pairs = [(x, float(np.mean([r[column] for r in by_x[x]])))
                     for x in sorted(by_x)]
            pairs = [(x, m) for x, m in pairs if m > 0]
            if len(pairs) < 2:
                continue
            for transform in ("log_n", "log_n_over_log_n"):
                rf = fit_rate(pairs, transform=transform, theoretical_slope=theo)
                rates.append({
                    "suite": cfg.suite, "method": method, "nu_target": nu_t,
                    "nu_offset": nu_o, "h": h, "column": column,
                    "transform": transform, "slope": rf.slope,
                    "intercept": rf.intercept, "r_squared": rf.r_squared,
                    "theoretical_slope": rf.theoretical_slope,
                    "pairs": [[x, m] for x, m in rf.pairs],
                })
    return rates


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class ResultsBundle:
    """Paths and in-memory copies of one suite run's outputs."""

    out_dir: str
    raw_csv: str
    aggregated_csv: str
    rates_json: str
    metadata_json: str
    rows: tuple
    rates: tuple
    metadata: dict
    n_failed: int


def _best_c_orchestration(cfg, scenarios, workers):
    """Run the sweep once per C and keep the best curve per setting.

    'Best' means the smallest mean squared error at the largest abscissa
    of the sweep; ties break toward the smaller C.
    """
    c_values = sorted(set(float(c) for c in cfg.c_grid))
    per_c = {}
    for C in c_values:
        c_map = {_scenario_key(sc["nu_target"], sc["nu_offset"], sc["h"]): C
                 for sc in scenarios}
        per_c[C] = _execute(cfg, scenarios, c_map, workers)

    x_max = max(_rate_x(cfg, r) for r in per_c[c_values[0]])
    chosen = {}
    for sc in scenarios:
        skey = _scenario_key(sc["nu_target"], sc["nu_offset"], sc["h"])
        for method in cfg.resolved_methods():
            best_c, best_score = None, math.inf
            for C in c_values:
                errs = [r["sq_error"] for r in _ok_rows(per_c[C])
                        if r["method"] == method
                        and _scenario_key(r["nu_target"], r["nu_offset"], r["h"]) == skey
                        and _rate_x(cfg, r) == x_max]
                if not errs:
                    continue
                score = float(np.mean(errs))
                if score < best_score:
                    best_c, best_score = C, score
            if best_c is None:
                best_c = c_values[0]
            chosen[f"{skey}|{method}"] = best_c

    rows = []
    for sc in scenarios:
        skey = _scenario_key(sc["nu_target"], sc["nu_offset"], sc["h"])
        for method in cfg.resolved_methods():
            C = chosen[f"{skey}|{method}"]
            rows.extend(
                r for r in per_c[C]
                if r["method"] == method
                and _scenario_key(r["nu_target"], r["nu_offset"], r["h"]) == skey
            )
    return rows, chosen


def run_suite(cfg, workers=None, out_dir=None):
    """Execute the configured suite and write the results bundle.

    Returns a ResultsBundle; raw/aggregated CSVs and the rates JSON are
    byte-deterministic functions of the config (worker count excluded).
    """
    t0 = time.perf_counter()
    workers = _resolve_workers(cfg, workers)
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenarios = _scenarios(cfg)

    c_details = {}
    if cfg.c_mode == "cv":
        c_map = {}
        for sc in scenarios:
            key = _scenario_key(sc["nu_target"], sc["nu_offset"], sc["h"])
            C, detail = _select_c_cv_detailed(cfg, sc["nu_target"])
            c_map[key] = C
            c_details[key] = detail
        rows = _execute(cfg, scenarios, c_map, workers)
    elif cfg.c_mode == "best":
        rows, c_map = _best_c_orchestration(cfg, scenarios, workers)
    else:
        c_map = {_scenario_key(sc["nu_target"], sc["nu_offset"], sc["h"]): cfg.C
                 for sc in scenarios}
        rows = _execute(cfg, scenarios, c_map, workers)

    rows.sort(key=_row_sort_key)
    for i, row in enumerate(rows):
        row["row"] = i
    n_failed = sum(1 for r in rows if r["status"] != "ok")

    summaries = _aggregate(cfg, rows)
    rates = _compute_rates(cfg, rows)

    raw_path = out / RAW_CSV
    agg_path = out / AGG_CSV
    rates_path = out / RATES_JSON
    meta_path = out / META_JSON
    _write_raw_csv(raw_path, rows)
    _write_aggregated(agg_path, cfg, summaries)
    _write_json(rates_path, {"version": CSV_VERSION, "rates": rates})

    metadata = {
        "version": CSV_VERSION,
        "config": config_to_dict(cfg),
        "methods": list(cfg.resolved_methods()),
        "seed_scheme": SEED_SCHEME,
        "c_mode": cfg.c_mode,
        "c_resolved": c_map,
        "c_details": c_details,
        "n_rows": len(rows),
        "n_failed": n_failed,
        "workers": workers,
        "package_version": _package_version(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": _scipy_version(),
        "wall_time_s": time.perf_counter() - t0,
    }
    _write_json(meta_path, metadata)

    print(f"suite={cfg.suite} rows={len(rows)} failed={n_failed} out={out}")
    return ResultsBundle(
        out_dir=str(out), raw_csv=str(raw_path), aggregated_csv=str(agg_path),
        rates_json=str(rates_path), metadata_json=str(meta_path),
        rows=tuple(rows), rates=tuple(rates), metadata=metadata,
        n_failed=n_failed,
    )


def _package_version():
    import satl

    return satl.__version__


def _scipy_version():
    import scipy

    return scipy.__version__


# ---------------------------------------------------------------------------
# plot data


def _read_csv(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return list(reader)


def emit_plot_data(bundle_dir, kind):
    """Write one figure-ready TSV (x, mean, se, series) from a bundle.

    kind 'error_decay' covers the single-task and saturation suites with
    x = n; kind 'tl_curves' covers the transfer suites with x = n_source
    (fixed-target) or n_target (growing-target) and one series per
    (method, nu_offset, h).  A bundle whose suite does not match the kind
    yields a header-only file.  Returns the output path.
    """
    if kind not in ("error_decay", "tl_curves"):
        raise ConfigError(f"unknown plot kind {kind!r}")
    bundle = Path(bundle_dir)
    agg = _read_csv(bundle / AGG_CSV)
    with open(bundle / META_JSON) as fh:
        suite = json.load(fh)["config"]["suite"]

    records = []
    if kind == "error_decay" and suite in (
            "target_only_nonadaptive", "target_only_adaptive", "saturation_demo"):
        for row in agg:
            series = f"{row['method']}|nu={row['nu_target']}"
            records.append((series, float(row["n_target"]), row["n_target"],
                            row["mean_sq"], row["se_sq"]))
    elif kind == "tl_curves" and suite in ("tl_fixed_target", "tl_growing_target"):
        x_col = "n_source" if suite == "tl_fixed_target" else "n_target"
        for row in agg:
            series = f"{row['method']}|nu_offset={row['nu_offset']}|h={row['h']}"
            records.append((series, float(row[x_col]), row[x_col],
                            row["mean_sq"], row["se_sq"]))

    records.sort(key=lambda r: (r[0], r[1]))
    out_path = bundle / f"plot_{kind}.tsv"
    with open(out_path, "w") as fh:
        fh.write("x\tmean\tse\tseries\n")
        for series, _, x_str, mean, se in records:
            fh.write(f"{x_str}\t{mean}\t{se}\t{series}\n")
    return str(out_path)


# ---------------------------------------------------------------------------
# cell rerun


def rerun_cell(bundle_dir, row_id):
    """Recompute one raw row from the stored config and compare.

    Returns (stored, recomputed, match); match compares the formatted
    status and error fields, which byte-determinism makes exact.
    """
    bundle = Path(bundle_dir)
    with open(bundle / META_JSON) as fh:
        metadata = json.load(fh)
    cfg = config_from_dict(metadata["config"])
    raw = _read_csv(bundle / RAW_CSV)
    stored = next((r for r in raw if r["row"] == str(int(row_id))), None)
    if stored is None:
        raise ConfigError(f"row {row_id} not found in {bundle / RAW_CSV}")

    nu_offset = float(stored["nu_offset"]) if stored["nu_offset"] else None
    h = float(stored["h"]) if stored["h"] else None
    skey = _scenario_key(float(stored["nu_target"]), nu_offset, h)
    c_resolved = metadata["c_resolved"]
    C = c_resolved.get(skey, c_resolved.get(f"{skey}|{stored['method']}"))
    if C is None:
        raise ConfigError(f"no stored C for scenario {skey!r}")

    cell = {
        "nu_target": float(stored["nu_target"]),
        "nu_offset": nu_offset,
        "h": h,
        "trial": int(stored["trial"]),
        "seed": _cell_seed(cfg.master_seed, float(stored["nu_target"]),
                           nu_offset, h, int(stored["trial"])),
        "C": float(C),
    }
    if cell["seed"] != int(stored["seed"]):
        raise ConfigError(
            f"stored seed {stored['seed']} does not match the derived seed "
            f"{cell['seed']}; bundle and config disagree")

    rows = _run_cell(config_to_dict(cfg), cell)
    n_source = int(stored["n_source"]) if stored["n_source"] else None
    match_row = next(
        (r for r in rows
         if r["method"] == stored["method"] and r["n_target"] == int(stored["n_target"])
         and r["n_source"] == n_source),
        None)
    if match_row is None:
        raise ConfigError("recomputation produced no row for the stored setting")

    recomputed = {c: _fmt(match_row[c]) for c in RAW_COLUMNS if c != "row"}
    stored_cmp = {c: stored[c] for c in RAW_COLUMNS if c != "row"}
    compare = ("status", "l2_error", "sq_error", "alpha_src", "alpha_off",
               "lambda_src", "lambda_off")
    match = all(recomputed[c] == stored_cmp[c] for c in compare)
    return stored_cmp, recomputed, match
