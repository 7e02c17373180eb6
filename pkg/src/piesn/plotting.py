"""Figures rendered from a sweep directory (``piesn report``)."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "savefig.dpi": 150,
}
TRUE_STYLE = dict(color="black", lw=1.2)
PRED_STYLE = dict(color="tab:red", ls="--", lw=1.0)


def _read_columns(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows).reshape(-1, len(names))
    return {n: data[:, i] for i, n in enumerate(names)}


def _time_axis(cols):
    if "lyapunov_time" in cols:
        return cols["lyapunov_time"], r"$\lambda_{\max} t$"
    return cols["t"], "t"


def _hidden_names(cols) -> list[str]:
    return [n[: -len("_pred")] for n in cols if n.endswith("_pred")]


def plot_reconstruction(trajectories: dict[int, dict[str, np.ndarray]], path) -> Path:
    """Hidden-state reconstruction for several reservoir sizes, one panel each."""
    sizes = sorted(trajectories)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(sizes), 1, figsize=(6, 1.8 * len(sizes) + 0.4), sharex=True, squeeze=False)
        for ax, n in zip(axes[:, 0], sizes):
            cols = trajectories[n]
            t, xlabel = _time_axis(cols)
            hidden = _hidden_names(cols)[0]
            ax.plot(t, cols[f"{hidden}_true"], label="reference", **TRUE_STYLE)
            ax.plot(t, cols[f"{hidden}_pred"], label=f"PI-ESN, {n} units", **PRED_STYLE)
            ax.set_ylabel(hidden)
            ax.legend(loc="upper right")
        axes[-1, 0].set_xlabel(xlabel)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_noisy(trajectories: dict[str, dict[str, np.ndarray]], path) -> Path:
    """Left column: hidden reconstruction; right column: measured-state prediction vs noisy data."""
    labels = list(trajectories)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(labels), 2, figsize=(9, 1.9 * len(labels) + 0.4), squeeze=False)
        for row, label in enumerate(labels):
            cols = trajectories[label]
            t, xlabel = _time_axis(cols)
            names = _hidden_names(cols)
            hidden, first = names[0], names[-1]
            ax = axes[row, 0]
            ax.plot(t, cols[f"{hidden}_true"], label="reference", **TRUE_STYLE)
            ax.plot(t, cols[f"{hidden}_pred"], label="PI-ESN", **PRED_STYLE)
            ax.set_ylabel(f"{hidden} ({label})")
            ax = axes[row, 1]
            if f"{first}_meas" in cols:
                ax.plot(t, cols[f"{first}_meas"], color="0.7", lw=0.6, label="measured")
            ax.plot(t, cols[f"{first}_true"], label="reference", **TRUE_STYLE)
            ax.plot(t, cols[f"{first}_pred"], label="PI-ESN", **PRED_STYLE)
            ax.set_ylabel(first)
        for ax in axes[-1]:
            ax.set_xlabel(xlabel)
        axes[0, 0].legend(loc="upper right")
        axes[0, 1].legend(loc="upper right")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_rmse_vs_size(rows, path) -> Path:
    """``rows`` are ``(n_units, snr_db or None, rmse_hidden)`` tuples."""
    by_snr: dict = {}
    for n, snr, value in rows:
        by_snr.setdefault(snr, []).append((n, value))
    markers = iter("osd^v<>")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for snr in sorted(by_snr, key=lambda s: np.inf if s is None else -s):
            pts = sorted(by_snr[snr])
            label = "no noise" if snr is None else f"SNR = {snr:g} dB"
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=next(markers), label=label)
        ax.set_xlabel("reservoir units")
        ax.set_ylabel("RMSE of hidden state")
        ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def render_report(run_dir, out_dir, fmt: str = "png") -> list[Path]:
    """Render every figure the sweep in ``run_dir`` has data for."""
    from .harness import read_aggregate

    run_dir, out_dir = Path(run_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    ok = [c for c in manifest["cells"] if c["status"] == "ok"]
    written = []

    clean = {c["n_units"]: _read_columns(run_dir / c["files"]["trajectory.csv"]) for c in ok if c["snr_db"] is None}
    if clean:
        written.append(plot_reconstruction(clean, out_dir / f"reconstruction.{fmt}"))

    largest = max((c["n_units"] for c in ok), default=None)
    noisy = {
        f"{c['snr_db']:g} dB": _read_columns(run_dir / c["files"]["trajectory.csv"])
        for c in sorted(ok, key=lambda c: c["snr_db"] or 0)
        if c["snr_db"] is not None and c["n_units"] == largest
    }
    if noisy:
        written.append(plot_noisy(noisy, out_dir / f"noisy_reconstruction.{fmt}"))

    rows = [r for r in read_aggregate(run_dir / manifest["aggregate"]) if np.isfinite(r[2])]
    if len({r[0] for r in rows}) > 1:
        written.append(plot_rmse_vs_size(rows, out_dir / f"rmse_vs_size.{fmt}"))
    return written
