"""Training datasets: generation, additive measurement noise and CSV persistence.

CSV layout::

    # dt=0.01 n=20000 ny=3 nz=2 snr_db=none seed=0
    t,phi1,phi2,phi3,phi1_meas,phi2_meas
    0,...

The measured columns hold the noisy series when noise was injected and the
clean observed series otherwise. Floats are written with 17 significant
digits so that a save/load round trip is exact.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dynamics import PhysicsModel, euler_integrate
from .errors import FormatError

__all__ = ["Dataset", "generate_dataset", "add_noise", "save_dataset", "load_dataset"]

DEFAULT_Y0 = (-10.0, -4.45, 35.1)
MEAS_SUFFIX = "_meas"


@dataclass(frozen=True, eq=False)
class Dataset:
    """A sampled trajectory plus what a sensor would have recorded of it.

    ``clean_full`` is the reference used for evaluation only; training code
    reads :attr:`measured` and never touches the hidden columns.
    """

    dt: float
    clean_full: np.ndarray
    n_observed: int
    state_names: tuple[str, ...]
    observed_noisy: np.ndarray | None = None
    snr_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.clean_full.ndim != 2 or self.clean_full.shape[0] < 2:
            raise ValueError("a dataset needs at least two samples")
        if len(self.state_names) != self.clean_full.shape[1]:
            raise ValueError("state_names does not match the state dimension")
        if self.observed_noisy is not None and self.observed_noisy.shape != self.observed.shape:
            raise ValueError(
                f"noisy observations have shape {self.observed_noisy.shape}, "
                f"expected {self.observed.shape}"
            )
        self.clean_full.setflags(write=False)
        if self.observed_noisy is not None:
            self.observed_noisy.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return self.clean_full.shape[0]

    @property
    def state_dim(self) -> int:
        return self.clean_full.shape[1]

    @property
    def observed(self) -> np.ndarray:
        return self.clean_full[:, : self.n_observed]

    @property
    def hidden(self) -> np.ndarray:
        return self.clean_full[:, self.n_observed :]

    @property
    def measured(self) -> np.ndarray:
        """What training sees: noisy observations if present, else clean ones."""
        return self.observed if self.observed_noisy is None else self.observed_noisy

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.observed_noisy is None) != (other.observed_noisy is None):
            return False
        return (
            self.dt == other.dt
            and self.n_observed == other.n_observed
            and self.state_names == other.state_names
            and _same_optional(self.snr_db, other.snr_db)
            and self.seed == other.seed
            and np.array_equal(self.clean_full, other.clean_full)
            and (
                self.observed_noisy is None
                or np.array_equal(self.observed_noisy, other.observed_noisy)
            )
        )

    __hash__ = None


def _same_optional(a, b) -> bool:
    return (a is None and b is None) or (a is not None and b is not None and a == b)


def generate_dataset(
    model: PhysicsModel,
    y0: Sequence[float] = DEFAULT_Y0,
    dt: float = 0.01,
    n_samples: int = 20000,
    spinup_steps: int = 1000,
    seed: int = 0,
) -> Dataset:
    """Integrate ``model`` with forward Euler and keep the samples after spin-up."""
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    if spinup_steps < 0:
        raise ValueError("spinup_steps must be non-negative")
    traj = euler_integrate(model, y0, dt, spinup_steps + n_samples - 1)
    return Dataset(
        dt=float(dt),
        clean_full=np.ascontiguousarray(traj[spinup_steps:]),
        n_observed=model.n_observed,
        state_names=model.state_names,
        seed=seed,
    )


def add_noise(dataset: Dataset, snr_db: float, seed: int) -> Dataset:
    """Add white Gaussian noise to each observed channel at the requested SNR.

    Channel ``i`` receives noise of variance ``P_i / 10**(snr_db / 10)`` where
    ``P_i`` is the mean square of the clean channel.
    """
    if not math.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    clean = dataset.observed
    power = np.mean(clean**2, axis=0)
    std = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    noisy = clean + rng.standard_normal(clean.shape) * std
    return replace(dataset, observed_noisy=noisy, snr_db=float(snr_db), seed=seed)


def empirical_snr_db(clean: np.ndarray, noisy: np.ndarray) -> np.ndarray:
    """Per-channel SNR in dB of ``noisy`` relative to ``clean``."""
    noise = noisy - clean
    return 10.0 * np.log10(np.mean(clean**2, axis=0) / np.mean(noise**2, axis=0))


def _fmt(v: float) -> str:
    return "%.17g" % v


def save_dataset(dataset: Dataset, path) -> None:
    snr = "none" if dataset.snr_db is None else _fmt(dataset.snr_db)
    header = (
        f"# dt={_fmt(dataset.dt)} n={dataset.n_samples} ny={dataset.state_dim} "
        f"nz={dataset.n_observed} snr_db={snr} seed={dataset.seed}"
    )
    names = ["t", *dataset.state_names, *(n + MEAS_SUFFIX for n in dataset.state_names[: dataset.n_observed])]
    body = np.column_stack([dataset.time, dataset.clean_full, dataset.measured])
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w") as fh:
        fh.write(header + "\n")
        fh.write(",".join(names) + "\n")
        np.savetxt(fh, body, fmt="%.17g", delimiter=",")
    os.replace(tmp, path)


def _parse_header(line: str, path) -> dict[str, str]:
    if not line.startswith("#"):
        raise FormatError("missing '# dt=... n=...' header", line=1, path=path)
    fields = {}
    for token in line[1:].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise FormatError(f"malformed header token {token!r}", line=1, path=path)
        fields[key] = value
    missing = {"dt", "n", "ny", "nz", "snr_db", "seed"} - fields.keys()
    if missing:
        raise FormatError(f"header lacks {sorted(missing)}", line=1, path=path)
    return fields


def load_dataset(path) -> Dataset:
    """Read a dataset written by :func:`save_dataset`.

    Raises:
        FormatError: on a malformed header, a column-count mismatch or a
            non-numeric cell, naming the first offending line.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError("empty file", line=1, path=path)
    fields = _parse_header(lines[0], path)
    try:
        dt = float(fields["dt"])
        n = int(fields["n"])
        ny = int(fields["ny"])
        nz = int(fields["nz"])
        seed = int(fields["seed"])
        snr_db = None if fields["snr_db"] == "none" else float(fields["snr_db"])
    except ValueError as exc:
        raise FormatError(f"bad header value: {exc}", line=1, path=path) from None
    if not (dt > 0 and n >= 2 and ny >= 1 and 1 <= nz <= ny):
        raise FormatError("inconsistent header values", line=1, path=path)

    width = 1 + ny + nz
    if len(lines) < 2:
        raise FormatError("missing column names", line=2, path=path)
    names = lines[1].split(",")
    if len(names) != width:
        raise FormatError(f"expected {width} column names, got {len(names)}", line=2, path=path)

    rows = lines[2:]
    if len(rows) != n:
        # point at the first row past the declared count, or the first missing one
        raise FormatError(f"header declares {n} rows, found {len(rows)}", line=3 + min(n, len(rows)), path=path)
    data = np.empty((n, width))
    for i, row in enumerate(rows):
        cells = row.split(",")
        if len(cells) != width:
            raise FormatError(f"expected {width} columns, got {len(cells)}", line=i + 3, path=path)
        try:
            data[i] = [float(c) for c in cells]
        except ValueError:
            raise FormatError(f"non-numeric cell in {row!r}", line=i + 3, path=path) from None

    clean = np.ascontiguousarray(data[:, 1 : 1 + ny])
    meas = np.ascontiguousarray(data[:, 1 + ny :])
    noisy = None
    if snr_db is not None:
        noisy = meas
    elif not np.array_equal(meas, clean[:, :nz]):
        raise FormatError("snr_db=none but measured columns differ from clean ones", path=path)
    return Dataset(
        dt=dt,
        clean_full=clean,
        n_observed=nz,
        state_names=tuple(names[1 : 1 + ny]),
        observed_noisy=noisy,
        snr_db=snr_db,
        seed=seed,
    )
