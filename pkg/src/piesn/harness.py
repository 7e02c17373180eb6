"""Experiment driver: evaluation metrics, single runs and reservoir-size x noise sweeps."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .config import ExperimentSpec, spec_to_ini
from .data import Dataset, add_noise, generate_dataset, load_dataset, save_dataset
from .dynamics import PhysicsModel, get_model
from .errors import DimensionError
from .reservoir import Reservoir, ReservoirConfig, build_reservoir
from .training import (
    Readout,
    evaluate_loss,
    prepare_training_data,
    save_model,
    save_trace,
    train,
)

__all__ = [
    "EvalReport",
    "CellResult",
    "rmse",
    "evaluate",
    "run_single",
    "run_experiment",
    "write_trajectory",
    "AGGREGATE_NAME",
    "REPORT_NAME",
]

log = logging.getLogger(__name__)

AGGREGATE_NAME = "rmse_vs_size.csv"
REPORT_NAME = "report.csv"
MANIFEST_NAME = "manifest.json"


def rmse(a, b) -> float:
    """Root mean squared difference of two equally long series."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise DimensionError(f"rmse needs equal non-empty shapes, got {a.shape} and {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass(frozen=True)
class EvalReport:
    """Reconstruction quality over the post-washout training window.

    ``rmse_observed`` compares the readout's measured-state prediction with
    the clean signal; ``rmse_measured`` does the same for the raw
    measurements, so ``rmse_observed < rmse_measured`` means denoising.
    """

    n_units: int
    snr_db: float | None
    rmse_hidden: float
    nrmse_hidden: float
    rmse_observed: tuple[float, ...]
    rmse_measured: tuple[float, ...]
    e_d: float
    e_p: float
    e_tot: float
    eval_rows: int
    seconds: float = 0.0
    config: dict | None = None

    def metrics(self) -> dict:
        """Everything except wall-clock time and the config echo."""
        out = asdict(self)
        out.pop("seconds")
        out.pop("config")
        return out


def evaluate(readout: Readout, reservoir: Reservoir, dataset: Dataset, model: PhysicsModel,
             washout: int, seconds: float = 0.0, config: dict | None = None) -> EvalReport:
    """Score a trained readout against the clean reference stored in ``dataset``."""
    data = prepare_training_data(reservoir, dataset, washout, readout.input_shift, readout.input_scale)
    y = readout(data.features)
    ref = dataset.clean_full[1:][washout:]
    nz = model.observed_dim
    hidden_true, hidden_pred = ref[:, nz:], y[:, nz:]
    err_h = rmse(hidden_pred, hidden_true) if model.hidden_dim else 0.0
    spread = float(np.std(hidden_true)) if model.hidden_dim else 1.0
    loss = evaluate_loss(readout, data.features, data.targets, dataset.dt, model)
    return EvalReport(
        n_units=reservoir.n_units,
        snr_db=dataset.snr_db,
        rmse_hidden=err_h,
        nrmse_hidden=err_h / spread if spread > 0 else math.inf,
        rmse_observed=tuple(rmse(y[:, i], ref[:, i]) for i in range(nz)),
        rmse_measured=tuple(rmse(data.targets[:, i], ref[:, i]) for i in range(nz)),
        e_d=loss.e_d,
        e_p=loss.e_p,
        e_tot=loss.e_tot,
        eval_rows=len(ref),
        seconds=seconds,
        config=config,
    )


def write_trajectory(path, readout: Readout, reservoir: Reservoir, dataset: Dataset, model: PhysicsModel,
                     washout: int, tail_fraction: float = 0.1) -> None:
    """Plot-ready series for the last ``tail_fraction`` of the training window.

    Time is multiplied by the model's largest Lyapunov exponent when known.
    """
    data = prepare_training_data(reservoir, dataset, washout, readout.input_shift, readout.input_scale)
    y = readout(data.features)
    times = np.arange(washout + 1, dataset.n_samples)  # sample index of each readout row
    start = int(math.ceil((1.0 - tail_fraction) * dataset.n_samples))
    keep = times >= start
    t = times[keep] * dataset.dt
    scale = model.lambda_max
    cols = {("lyapunov_time" if scale else "t"): t * (scale or 1.0)}
    nz = model.observed_dim
    clean = dataset.clean_full[times[keep]]
    for k, name in enumerate(model.hidden_names):
        cols[f"{name}_true"] = clean[:, nz + k]
        cols[f"{name}_pred"] = y[keep, nz + k]
    first = model.state_names[0]
    cols[f"{first}_true"] = clean[:, 0]
    if dataset.observed_noisy is not None:
        cols[f"{first}_meas"] = dataset.observed_noisy[times[keep], 0]
    cols[f"{first}_pred"] = y[keep, 0]
    _write_columns(path, cols)


def _write_columns(path, cols: dict[str, np.ndarray]) -> None:
    names = list(cols)
    body = np.column_stack([cols[n] for n in names])
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        np.savetxt(fh, body, fmt="%.17g", delimiter=",")


@dataclass
class CellResult:
    size_index: int
    noise_index: int
    n_units: int
    snr_db: float | None
    seeds: dict
    status: str
    report: EvalReport | None = None
    error: str = ""
    files: dict | None = None


def _snr_label(snr) -> str:
    return "none" if snr is None else f"{snr:g}"


def _cell_dir(out_dir: Path, n_units: int, snr) -> Path:
    return out_dir / "cells" / f"n{n_units}_snr{_snr_label(snr)}"


def _limit_threads(threads: int | None):
    from contextlib import nullcontext

    if not threads:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def run_single(spec: ExperimentSpec, dataset: Dataset, n_units: int, seeds: dict, cell_dir: Path,
               model: PhysicsModel | None = None) -> EvalReport:
    """Train and evaluate one reservoir on ``dataset``; writes model, trace and trajectory files."""
    model = model or get_model(spec.model)
    t0 = time.perf_counter()
    rcfg = ReservoirConfig(n_units=n_units, input_dim=model.observed_dim, sigma_in=spec.sigma_in,
                           spectral_radius=spec.spectral_radius, avg_degree=spec.avg_degree,
                           seed=seeds["reservoir_seed"])
    tcfg = replace(spec.train, seed=seeds["train_seed"])
    reservoir = build_reservoir(rcfg)
    readout, trace = train(reservoir, dataset, model, tcfg)
    seconds = time.perf_counter() - t0
    cell_dir.mkdir(parents=True, exist_ok=True)
    echo = {"reservoir": asdict(rcfg), "training": asdict(tcfg), "seeds": dict(seeds)}
    report = evaluate(readout, reservoir, dataset, model, tcfg.washout, seconds=seconds, config=echo)
    save_model(cell_dir / "model.txt", reservoir, readout, tcfg, model.name,
               extra={"snr_db": _snr_label(dataset.snr_db), **seeds})
    save_trace(cell_dir / "trace.csv", trace)
    write_trajectory(cell_dir / "trajectory.csv", readout, reservoir, dataset, model, tcfg.washout)
    write_report_rows(cell_dir / "report.csv", [report])
    return report


REPORT_COLUMNS = ["n_units", "snr_db", "status", "rmse_hidden", "nrmse_hidden", "rmse_observed",
                  "rmse_measured", "e_d", "e_p", "e_tot", "eval_rows", "seconds",
                  "reservoir_seed", "noise_seed", "train_seed", "error"]


def _fmt(v) -> str:
    return "%.17g" % v


def write_report_rows(path, reports, cells=None) -> None:
    """One CSV row per cell; multi-channel fields are ``;``-joined."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        items = cells if cells is not None else [None] * len(reports)
        for rep, cell in zip(reports, items):
            seeds = (cell.seeds if cell else (rep.config or {}).get("seeds", {})) or {}
            status = cell.status if cell else "ok"
            n_units = cell.n_units if cell else rep.n_units
            snr = cell.snr_db if cell else rep.snr_db
            if rep is None:
                row = [n_units, _snr_label(snr), status] + ["nan"] * 8
            else:
                row = [n_units, _snr_label(snr), status, _fmt(rep.rmse_hidden), _fmt(rep.nrmse_hidden),
                       ";".join(_fmt(v) for v in rep.rmse_observed),
                       ";".join(_fmt(v) for v in rep.rmse_measured),
                       _fmt(rep.e_d), _fmt(rep.e_p), _fmt(rep.e_tot), rep.eval_rows, f"{rep.seconds:.3f}"]
            row += [seeds.get("reservoir_seed", ""), seeds.get("noise_seed", ""), seeds.get("train_seed", ""),
                    cell.error if cell else ""]
            writer.writerow(row)


def _run_cell(args) -> CellResult:
    spec, i, j, dataset_path = args
    n_units, snr = spec.sizes[i], spec.snr_db[j]
    seeds = spec.cell_seeds(i, j)
    cell_dir = _cell_dir(spec.out_dir, n_units, snr)
    result = CellResult(i, j, n_units, snr, seeds, status="ok")
    try:
        dataset = load_dataset(dataset_path)
        result.report = run_single(spec, dataset, n_units, seeds, cell_dir)
        result.files = {name: str(Path("cells") / cell_dir.name / name)
                        for name in ("model.txt", "trace.csv", "trajectory.csv", "report.csv")}
    except Exception as exc:  # recorded per cell; the sweep carries on
        log.warning("cell n_units=%d snr=%s failed: %s", n_units, _snr_label(snr), exc)
        result.status = "failed"
        result.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return result


def prepare_datasets(spec: ExperimentSpec, model: PhysicsModel | None = None) -> list[Path]:
    """Generate the clean trajectory once and one noisy copy per SNR entry."""
    model = model or get_model(spec.model)
    ddir = spec.out_dir / "datasets"
    ddir.mkdir(parents=True, exist_ok=True)
    clean = generate_dataset(model, spec.y0, spec.dt, spec.n_samples, spec.spinup, seed=spec.master_seed)
    paths = []
    for j, snr in enumerate(spec.snr_db):
        path = ddir / f"snr_{_snr_label(snr)}.csv"
        ds = clean if snr is None else add_noise(clean, snr, seed=spec.cell_seeds(0, j)["noise_seed"])
        save_dataset(ds, path)
        paths.append(path)
    return paths


def run_experiment(spec: ExperimentSpec, workers: int = 1, threads: int | None = None) -> list[CellResult]:
    """Run every (size, noise) cell and write per-cell files plus the aggregate CSVs.

    A failing cell is reported with ``status="failed"``; the others still run.
    """
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    (spec.out_dir / "config.ini").write_text(spec_to_ini(spec))
    with _limit_threads(threads):
        paths = prepare_datasets(spec)
        jobs = [(spec, i, j, paths[j]) for i in range(len(spec.sizes)) for j in range(len(spec.snr_db))]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init, initargs=(threads,)) as pool:
                results = list(pool.map(_run_cell, jobs))
        else:
            results = [_run_cell(job) for job in jobs]

    _write_aggregate(spec.out_dir / AGGREGATE_NAME, results)
    write_report_rows(spec.out_dir / REPORT_NAME, [r.report for r in results], cells=results)
    manifest = {
        "model": spec.model,
        "master_seed": spec.master_seed,
        "threads": threads,
        "aggregate": AGGREGATE_NAME,
        "report": REPORT_NAME,
        "datasets": {_snr_label(s): str(p.relative_to(spec.out_dir)) for s, p in zip(spec.snr_db, paths)},
        "rmse_rows": "post-washout training window",
        "cells": [
            {"n_units": r.n_units, "snr_db": r.snr_db, "status": r.status, "seeds": r.seeds,
             "files": r.files or {}, "error": r.error}
            for r in results
        ],
    }
    (spec.out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")
    return results


def _worker_init(threads):
    if threads:
        os.environ["OMP_NUM_THREADS"] = str(threads)
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=threads)


def _write_aggregate(path, results: list[CellResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_units", "snr_db", "rmse_hidden"])
        for r in results:
            value = _fmt(r.report.rmse_hidden) if r.report is not None else "nan"
            writer.writerow([r.n_units, _snr_label(r.snr_db), value])


def read_aggregate(path) -> list[tuple[int, float | None, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [(int(r["n_units"]), None if r["snr_db"] == "none" else float(r["snr_db"]), float(r["rmse_hidden"]))
            for r in rows]
