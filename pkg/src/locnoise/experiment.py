"""Synthetic experiment sweeps: configuration, seeding, execution and summaries.

Every random draw is seeded from ``SeedSequence(config.seed, spawn_key=...)``
keyed by the coordinates it belongs to, so any record can be recomputed in
isolation and the output does not depend on worker count or scheduling.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .anchors import AnchorSet, draw_anchors
from .dataset import (
    GaussianMixtureSpec,
    LabeledDataset,
    NoiseSpec,
    Standardizer,
    gen_mixture,
    inject_noise,
    load_csv,
    save_csv,
    symmetric_xor,
)
from .errors import LocNoiseError, ValidationError
from .hypothesis import test_multi
from .kernel_basis import BasisSpec, KernelSpec
from .local_mle import FitOptions, select_bandwidth_details
from .parametric import fit_global_logistic, test_parametric

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
WORKERS_ENV = "LOCNOISE_WORKERS"

RESULT_COLUMNS = [
    "schema_version", "dataset", "N", "noise_kind", "alpha", "beta", "tau", "noise",
    "k", "delta", "run", "draw", "method", "h", "status", "error", "eta_bar", "var_bar",
    "z", "p_value", "var_sum", "cov_sum", "relax_term", "seconds",
]

# spawn-key tags for the seed lineage
_TAG_DATA, _TAG_NOISE, _TAG_SUBSAMPLE, _TAG_ANCHORS = range(4)


def _code(x: float) -> int:
    return int(round(float(x) * 1_000_000))


@dataclass
class ExperimentConfig:
    mixture: GaussianMixtureSpec | None = field(default_factory=symmetric_xor)
    input_csv: str | None = None
    anchors_file: str | None = None
    noise: list = field(
        default_factory=lambda: [
            NoiseSpec.ccn(0.0, 0.0), NoiseSpec.ccn(0.0, 0.1),
            NoiseSpec.ccn(0.2, 0.1), NoiseSpec.ccn(0.3, 0.1),
        ]
    )
    n_grid: list = field(default_factory=lambda: [200, 500, 1000])
    k_grid: list = field(default_factory=lambda: [1, 2, 4, 8, 16])
    delta_grid: list = field(default_factory=lambda: [0.0, 0.05, 0.10, 0.20])
    runs: int = 100
    draws: int = 10
    bandwidth: float | None = None
    bandwidth_grid: list | None = None
    subsample: int = 100
    order: int = 1
    method: str = "both"
    seed: int = 0
    box: list = field(default_factory=lambda: [-4.0, 4.0])
    standardize: bool = False
    mode: str = "exact"
    convention: str = "paper"
    fit_options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        self.noise = [n if isinstance(n, NoiseSpec) else NoiseSpec.from_dict(n) for n in self.noise]
        if isinstance(self.mixture, (dict, str)):
            self.mixture = GaussianMixtureSpec.from_dict(self.mixture)
        if isinstance(self.fit_options, dict):
            self.fit_options = FitOptions.from_dict(self.fit_options)
        self.validate()

    def validate(self):
        for name in ("noise", "n_grid", "k_grid", "delta_grid"):
            if not getattr(self, name):
                raise ValidationError(f"{name} must be non-empty", name)
        if self.runs < 1:
            raise ValidationError("runs must be >= 1", "runs")
        if self.draws < 1:
            raise ValidationError("draws must be >= 1", "draws")
        if self.method not in ("nonparametric", "parametric", "both"):
            raise ValidationError(f"unknown method {self.method!r}", "method")
        if self.mixture is None and self.input_csv is None:
            raise ValidationError("either mixture or input_csv is required", "mixture")
        if self.mixture is None and self.anchors_file is None:
            raise ValidationError("input_csv runs need anchors_file (or a mixture to draw anchors from)",
                                  "anchors_file")
        if any(k < 1 for k in self.k_grid):
            raise ValidationError("k values must be >= 1", "k_grid")
        if any(not 0 <= d <= 0.5 for d in self.delta_grid):
            raise ValidationError("delta values must lie in [0, 0.5]", "delta_grid")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValidationError("bandwidth must be positive", "bandwidth")
        if self.mixture is None and self.anchors_file is None and any(d > 0 for d in self.delta_grid):
            # drawing relaxed anchors needs the oracle posterior
            raise ValidationError("relaxed anchors need a mixture spec", "delta_grid")

    @property
    def methods(self) -> list:
        return ["nonparametric", "parametric"] if self.method == "both" else [self.method]

    @property
    def dataset_name(self) -> str:
        return Path(self.input_csv).stem if self.input_csv is not None else self.mixture.name

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mixture"] = None if self.mixture is None else self.mixture.to_dict()
        d["noise"] = [n.to_dict() for n in self.noise]
        d["fit_options"] = self.fit_options.to_dict()
        return d

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}", sorted(unknown)[0])
        if "mixture" in d and d["mixture"] is None and d.get("input_csv") is None:
            raise ValidationError("either mixture or input_csv is required", "mixture")
        if d.get("input_csv") is not None and "mixture" not in d:
            d["mixture"] = None
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    # -- seed lineage ------------------------------------------------------

    def seed_for(self, *key) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in key))

    def data_seed(self, N, run):
        return self.seed_for(_TAG_DATA, N, run)

    def noise_seed(self, N, run, noise: NoiseSpec):
        return self.seed_for(_TAG_NOISE, N, run, _code(noise.alpha), _code(noise.beta), noise.kind == "UN")

    def subsample_seed(self, N, run, noise: NoiseSpec):
        return self.seed_for(_TAG_SUBSAMPLE, N, run, _code(noise.alpha), _code(noise.beta), noise.kind == "UN")

    def anchor_seed(self, N, run, k, delta, draw):
        return self.seed_for(_TAG_ANCHORS, N, run, k, _code(delta), draw)


# ---------------------------------------------------------------------------
# data


def clean_dataset(config: ExperimentConfig, N: int, run: int) -> LabeledDataset:
    if config.input_csv is None:
        return gen_mixture(config.mixture, N, config.data_seed(N, run))
    full = load_csv(config.input_csv)
    if N > full.n:
        raise ValidationError(f"N={N} exceeds the {full.n} rows of {config.input_csv}", "n_grid")
    rng = np.random.default_rng(config.data_seed(N, run))
    return full.subset(np.sort(rng.choice(full.n, size=N, replace=False)))


def training_dataset(config, N, run, noise: NoiseSpec, clean=None) -> LabeledDataset:
    clean = clean_dataset(config, N, run) if clean is None else clean
    if noise.is_clean:
        return clean
    return inject_noise(clean, noise, config.noise_seed(N, run, noise))


def anchors_for(config, N, run, k, delta, draw) -> AnchorSet:
    """Draw ``k`` anchors from the mixture, or a seeded k-subset of ``anchors_file``."""
    seed = config.anchor_seed(N, run, k, delta, draw)
    if config.anchors_file is None:
        return draw_anchors(config.mixture, config.box, delta, k, seed)
    pool = _load_anchor_pool(config.anchors_file)
    if k > pool.k:
        raise ValidationError(f"k={k} exceeds the {pool.k} anchors in {config.anchors_file}", "k_grid")
    idx = np.sort(np.random.default_rng(seed).choice(pool.k, size=k, replace=False))
    eta = None if pool.true_posteriors is None or delta > 0 else pool.true_posteriors[idx]
    return AnchorSet(pool.points[idx], delta, "relaxed" if delta > 0 else "strict", eta)


@lru_cache(maxsize=8)
def _load_anchor_pool(path) -> AnchorSet:
    if str(path).endswith(".json"):
        return AnchorSet.from_json(path)
    return AnchorSet.from_csv(path)


def choose_kernel(config, ds, N, run, noise):
    """Fixed bandwidth if configured, else subsampled LOO-CV on the training set."""
    if config.bandwidth is not None:
        return KernelSpec(config.bandwidth)
    sub = min(config.subsample, ds.n)
    seed = config.subsample_seed(N, run, noise)
    sel = select_bandwidth_details(ds, config.bandwidth_grid, BasisSpec(config.order, ds.d), sub, seed, config.fit_options)
    return sel.kernel


# ---------------------------------------------------------------------------
# execution


def _record(config, N, noise, k, delta, run, draw, method, h):
    return {
        "schema_version": SCHEMA_VERSION,
        "dataset": config.dataset_name,
        "N": N,
        "noise_kind": noise.kind,
        "alpha": noise.alpha,
        "beta": noise.beta,
        "tau": "" if noise.tau is None else noise.tau,
        "noise": noise.label,
        "k": k,
        "delta": delta,
        "run": run,
        "draw": draw,
        "method": method,
        "h": "" if h is None else h,
        "status": "ok",
        "error": "",
        "eta_bar": "",
        "var_bar": "",
        "z": "",
        "p_value": "",
        "var_sum": "",
        "cov_sum": "",
        "relax_term": "",
        "seconds": 0.0,
    }


def _run_test(config, method, ds, anchors, kernel, gfit):
    if config.standardize:
        st = Standardizer.fit(ds)
        ds = st.apply(ds)
        anchors = AnchorSet(st.transform(anchors.points), anchors.delta, anchors.kind, anchors.true_posteriors)
    if method == "nonparametric":
        return test_multi(ds, anchors, kernel, BasisSpec(config.order, ds.d), config.fit_options,
                          config.mode, config.convention)
    return test_parametric(ds, anchors, anchors.delta, config.fit_options, config.mode, config.convention, gfit)


def run_unit(config: ExperimentConfig, N: int, run: int) -> list:
    """All records for one (N, run): every noise condition, k, delta, draw and method."""
    clean = clean_dataset(config, N, run)
    anchor_cache = {}
    records = []
    for noise in config.noise:
        ds = training_dataset(config, N, run, noise, clean)
        fit_ds = Standardizer.fit(ds).apply(ds) if config.standardize else ds
        kernel = kernel_err = None
        gfit = gfit_err = None
        if "nonparametric" in config.methods:
            try:
                kernel = choose_kernel(config, fit_ds, N, run, noise)
            except LocNoiseError as exc:
                kernel_err = f"bandwidth: {exc}"
        if "parametric" in config.methods:
            try:
                gfit = fit_global_logistic(fit_ds, config.fit_options)
            except LocNoiseError as exc:
                gfit_err = f"global fit: {exc}"
        for k in config.k_grid:
            for delta in config.delta_grid:
                for draw in range(config.draws):
                    key = (k, delta, draw)
                    if key not in anchor_cache:
                        try:
                            anchor_cache[key] = anchors_for(config, N, run, k, delta, draw)
                        except LocNoiseError as exc:
                            anchor_cache[key] = exc
                    anchors = anchor_cache[key]
                    for method in config.methods:
                        h = kernel.h if (method == "nonparametric" and kernel is not None) else None
                        rec = _record(config, N, noise, k, delta, run, draw, method, h)
                        pre_err = kernel_err if method == "nonparametric" else gfit_err
                        if isinstance(anchors, Exception):
                            pre_err = f"anchors: {anchors}"
                        if pre_err:
                            rec["status"] = "error"
                            rec["error"] = pre_err
                            records.append(rec)
                            continue
                        t0 = time.perf_counter()
                        try:
                            rep = _run_test(config, method, ds, anchors, kernel, gfit)
                        except LocNoiseError as exc:
                            rec["status"] = "error"
                            rec["error"] = f"{type(exc).__name__}: {exc}"
                        else:
                            rec.update(
                                eta_bar=rep.eta_bar,
                                var_bar=rep.var_bar,
                                z=rep.z,
                                p_value=rep.p_value,
                                var_sum=rep.variance_terms["var_sum"],
                                cov_sum=rep.variance_terms["cov_sum"],
                                relax_term=rep.variance_terms["relax_term"],
                            )
                        rec["seconds"] = time.perf_counter() - t0
                        records.append(rec)
    return records


def rerun_record(config: ExperimentConfig, record: dict):
    """Recompute a single record's test report from its coordinates alone."""
    N, run = int(record["N"]), int(record["run"])
    k, delta, draw = int(record["k"]), float(record["delta"]), int(record["draw"])
    if record["noise_kind"] == "UN":
        noise = NoiseSpec.un(float(record["tau"]))
    else:
        noise = NoiseSpec.ccn(float(record["alpha"]), float(record["beta"]))
    ds = training_dataset(config, N, run, noise)
    fit_ds = Standardizer.fit(ds).apply(ds) if config.standardize else ds
    anchors = anchors_for(config, N, run, k, delta, draw)
    method = record["method"]
    kernel = choose_kernel(config, fit_ds, N, run, noise) if method == "nonparametric" else None
    gfit = fit_global_logistic(fit_ds, config.fit_options) if method == "parametric" else None
    return _run_test(config, method, ds, anchors, kernel, gfit)


# ---------------------------------------------------------------------------
# sweep with manifest-based resume


def _units(config):
    return [(N, run) for N in config.n_grid for run in range(config.runs)]


def _sort_key(rec):
    return (
        int(rec["N"]), int(rec["run"]), str(rec["noise"]), int(rec["k"]),
        float(rec["delta"]), int(rec["draw"]), str(rec["method"]),
    )


def _write_rows(path, rows, mode="w"):
    with open(path, mode, newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        if mode == "w":
            w.writeheader()
        for r in rows:
            w.writerow(r)


def read_results(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        unknown = set(reader.fieldnames or []) - set(RESULT_COLUMNS)
        missing = set(RESULT_COLUMNS) - set(reader.fieldnames or [])
        if unknown or missing:
            raise ValidationError(
                f"results schema mismatch: unknown {sorted(unknown)}, missing {sorted(missing)}", "columns"
            )
        return list(reader)


def worker_count(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, default)))
    except ValueError:
        return default


def _unit_job(args):
    cfg_dict, N, run = args
    return N, run, run_unit(ExperimentConfig.from_dict(cfg_dict), N, run)


def sweep(config: ExperimentConfig, out_dir, workers: int | None = None) -> dict:
    """Run every (N, run) unit not already listed in the manifest.

    Completed units are appended to ``results.csv`` and then recorded in
    ``manifest.json``; rows of units missing from the manifest are treated
    as an interrupted write and dropped on resume.  Writes ``summary.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / "results.csv"
    manifest_path = out / "manifest.json"
    cfg_dict = json.loads(json.dumps(config.to_dict()))
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if manifest.get("config") != cfg_dict:
            raise ValidationError(f"{manifest_path} was written for a different config", "config")
    else:
        manifest = {"schema_version": SCHEMA_VERSION, "config": cfg_dict, "completed": []}
    done = {(u["N"], u["run"]) for u in manifest["completed"]}
    if results_path.exists():
        kept = [r for r in read_results(results_path) if (int(r["N"]), int(r["run"])) in done]
        _write_rows(results_path, kept)
    else:
        _write_rows(results_path, [])
    todo = [u for u in _units(config) if u not in done]
    workers = worker_count() if workers is None else max(1, workers)

    def sink(N, run, rows):
        _write_rows(results_path, rows, mode="a")
        manifest["completed"].append(
            {"N": N, "run": run, "data_seed": {"entropy": config.seed, "spawn_key": [_TAG_DATA, N, run]}}
        )
        tmp = manifest_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
        tmp.replace(manifest_path)
        log.info("completed N=%d run=%d (%d records)", N, run, len(rows))

    if workers == 1:
        for N, run in todo:
            sink(N, run, run_unit(config, N, run))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for N, run, rows in pool.map(_unit_job, [(cfg_dict, N, run) for N, run in todo]):
                sink(N, run, rows)

    rows = sorted(read_results(results_path), key=_sort_key)
    _write_rows(results_path, rows)
    summary = summarize(rows)
    (out / "summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    return summary


# ---------------------------------------------------------------------------
# summaries and plot data

CELL_KEYS = ("dataset", "N", "noise", "k", "delta", "method")


def summarize(rows) -> dict:
    """Per-cell p-value quartiles and rejection rates at 0.05 and 0.10."""
    cells = {}
    for r in rows:
        key = tuple(str(r[c]) for c in CELL_KEYS)
        cells.setdefault(key, []).append(r)
    out = []
    for key, rs in sorted(cells.items(), key=lambda kv: (kv[0][0], int(kv[0][1]), kv[0][2], int(kv[0][3]), float(kv[0][4]), kv[0][5])):
        p = np.array([float(r["p_value"]) for r in rs if r["status"] == "ok"])
        cell = dict(zip(CELL_KEYS, key))
        cell.update(N=int(cell["N"]), k=int(cell["k"]), delta=float(cell["delta"]))
        cell["n_records"] = len(rs)
        cell["n_failed"] = len(rs) - int(p.size)
        if p.size:
            q = np.quantile(p, [0.0, 0.25, 0.5, 0.75, 1.0])
            cell.update(
                p_min=float(q[0]), p_q1=float(q[1]), p_median=float(q[2]), p_q3=float(q[3]), p_max=float(q[4]),
                reject_05=float(np.mean(p <= 0.05)), reject_10=float(np.mean(p <= 0.10)),
            )
        out.append(cell)
    return {"schema_version": SCHEMA_VERSION, "cells": out}


PLOT_COLUMNS = ["panel", "N", "delta", "k", "method", "noise", "condition", "dataset", "run", "draw", "status", "p_value"]


def plotdata(rows) -> list:
    """Long-format rows keyed for box plots: one panel per (N, delta)."""
    out = []
    for r in rows:
        N, delta = int(r["N"]), float(r["delta"])
        clean = float(r["alpha"]) == 0.0 and float(r["beta"]) == 0.0
        out.append({
            "panel": f"N={N}|delta={delta:g}",
            "N": N,
            "delta": delta,
            "k": int(r["k"]),
            "method": r["method"],
            "noise": r["noise"],
            "condition": "clean" if clean else "noisy",
            "dataset": r["dataset"],
            "run": int(r["run"]),
            "draw": int(r["draw"]),
            "status": r["status"],
            "p_value": r["p_value"],
        })
    return out


def write_plotdata(results_path, out_path) -> int:
    rows = plotdata(read_results(results_path))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=PLOT_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return len(rows)


# ---------------------------------------------------------------------------
# simulate


def simulate(config: ExperimentConfig, out_dir) -> dict:
    """Write clean and noise-injected training CSVs for every (N, run)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for N in config.n_grid:
        for run in range(config.runs):
            clean = clean_dataset(config, N, run)
            name = f"{config.dataset_name}_N{N}_run{run:03d}"
            path = out / f"{name}_clean.csv"
            save_csv(clean, path)
            files.append({"path": path.name, "N": N, "run": run, "noise": "clean",
                          "seed": {"entropy": config.seed, "spawn_key": [_TAG_DATA, N, run]}})
            for noise in config.noise:
                if noise.is_clean:
                    continue
                ds = training_dataset(config, N, run, noise, clean)
                tag = noise.label.replace("(", "_").replace(")", "").replace(",", "_")
                path = out / f"{name}_{tag}.csv"
                save_csv(ds, path)
                files.append({"path": path.name, "N": N, "run": run, "noise": noise.to_dict(),
                              "seed": {"entropy": config.seed,
                                       "spawn_key": list(config.noise_seed(N, run, noise).spawn_key)}})
    manifest = {"schema_version": SCHEMA_VERSION, "config": config.to_dict(), "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return manifest


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
