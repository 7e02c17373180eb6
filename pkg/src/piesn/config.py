"""Experiment configuration: INI-style files, ``section.key=value`` overrides and seed derivation."""

from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .data import DEFAULT_Y0
from .training import TrainConfig

__all__ = ["ConfigError", "ExperimentSpec", "PRESETS", "derive_seed", "load_spec", "spec_to_ini"]


class ConfigError(ValueError):
    """Invalid configuration file or override (a usage error, not a runtime failure)."""


def derive_seed(master: int, *index: int) -> int:
    """Deterministic 32-bit seed from a master seed and a tuple of grid indices."""
    return int(np.random.SeedSequence([master, *index]).generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class ExperimentSpec:
    model: str = "lorenz"
    master_seed: int = 0
    sizes: tuple[int, ...] = (50, 600)
    snr_db: tuple[float | None, ...] = (None,)
    dt: float = 0.01
    n_samples: int = 20000
    y0: tuple[float, ...] = DEFAULT_Y0
    spinup: int = 1000
    n_units: int = 600  # single-run size used by ``train``
    sigma_in: float = 1.0
    spectral_radius: float = 1.0
    avg_degree: int = 20
    train: TrainConfig = field(default_factory=TrainConfig)
    out_dir: Path = Path("piesn-out")

    def cell_seeds(self, size_index: int, noise_index: int) -> dict[str, int]:
        """Seeds of one sweep cell; every value depends only on the master seed and indices."""
        return {
            "reservoir_seed": derive_seed(self.master_seed, 0, size_index),
            "noise_seed": derive_seed(self.master_seed, 1, noise_index),
            "train_seed": derive_seed(self.master_seed, 2, size_index, noise_index),
        }


# section -> {key: ExperimentSpec attribute}
_LAYOUT = {
    "experiment": {"model": "model", "seed": "master_seed", "sizes": "sizes", "snr_db": "snr_db"},
    "dataset": {"dt": "dt", "n_samples": "n_samples", "y0": "y0", "spinup": "spinup"},
    "reservoir": {"n_units": "n_units", "sigma_in": "sigma_in", "spectral_radius": "spectral_radius",
                  "avg_degree": "avg_degree"},
}
_TRAIN_KEYS = {f.name: f.type for f in fields(TrainConfig)}

PRESETS = {
    # last 10% of the window at 50 and 600 units, clean data
    "reconstruction": {"experiment.sizes": "50, 600", "experiment.snr_db": "none"},
    # 600 units trained on noisy measurements
    "noise": {"experiment.sizes": "600", "experiment.snr_db": "20, 40"},
    "size-sweep": {"experiment.sizes": "50, 100, 200, 300, 600", "experiment.snr_db": "none, 40, 20"},
}


def _parse_snr(text: str) -> float | None:
    text = text.strip().lower()
    if text in ("none", "clean", "inf", ""):
        return None
    return float(text)


def _convert(attr: str, raw: str):
    raw = raw.strip()
    if attr == "sizes":
        return tuple(int(s) for s in raw.replace(",", " ").split())
    if attr == "snr_db":
        return tuple(_parse_snr(s) for s in raw.split(","))
    if attr == "y0":
        return tuple(float(s) for s in raw.replace(",", " ").split())
    if attr == "model":
        return raw
    if attr in ("master_seed", "n_samples", "spinup", "n_units", "avg_degree"):
        return int(raw)
    return float(raw)


def _convert_train(key: str, raw: str):
    typ = _TRAIN_KEYS[key]
    raw = raw.strip()
    if typ == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if typ == "int":
        return int(raw)
    if typ == "float":
        return float(raw)
    return raw


def _apply(values: dict, train_values: dict, section: str, key: str, raw: str) -> None:
    section, key = section.strip().lower(), key.strip().lower()
    try:
        if section == "training":
            if key not in _TRAIN_KEYS:
                raise ConfigError(f"unknown key training.{key}")
            train_values[key] = _convert_train(key, raw)
            return
        if section not in _LAYOUT or key not in _LAYOUT[section]:
            raise ConfigError(f"unknown key {section}.{key}")
        attr = _LAYOUT[section][key]
        values[attr] = _convert(attr, raw)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})") from None


def load_spec(path=None, overrides=(), seed: int | None = None, out_dir=None, preset: str | None = None,
              base: ExperimentSpec | None = None) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from defaults, a preset, a file and overrides (in that order).

    ``overrides`` are ``"section.key=value"`` strings.
    """
    values: dict = {}
    train_values: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        for dotted, raw in PRESETS[preset].items():
            section, _, key = dotted.partition(".")
            _apply(values, train_values, section, key, raw)
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        for section in parser.sections():
            for key, raw in parser.items(section):
                _apply(values, train_values, section, key, raw)
    for item in overrides:
        dotted, sep, raw = item.partition("=")
        section, dot, key = dotted.partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        _apply(values, train_values, section, key, raw)
    if seed is not None:
        values["master_seed"] = seed
    if out_dir is not None:
        values["out_dir"] = Path(out_dir)

    spec = base or ExperimentSpec()
    try:
        train_cfg = replace(spec.train, **train_values)
        spec = replace(spec, **values, train=train_cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    _validate(spec)
    return spec


def _validate(spec: ExperimentSpec) -> None:
    if not spec.sizes or any(n < 1 for n in spec.sizes):
        raise ConfigError("experiment.sizes must list positive integers")
    if not spec.snr_db:
        raise ConfigError("experiment.snr_db must list at least one entry (use 'none' for clean)")
    if not spec.dt > 0 or spec.n_samples < 2 or spec.spinup < 0:
        raise ConfigError("dataset needs dt > 0, n_samples >= 2 and spinup >= 0")
    if spec.train.washout >= spec.n_samples - 2:
        raise ConfigError("training.washout must be smaller than dataset.n_samples - 2")
    if any(spec.avg_degree > n for n in (*spec.sizes, spec.n_units)):
        raise ConfigError("reservoir.avg_degree exceeds a reservoir size")
    from .dynamics import get_model

    try:
        model = get_model(spec.model)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    if len(spec.y0) != model.state_dim:
        raise ConfigError(f"dataset.y0 needs {model.state_dim} components")


def _snr_text(v) -> str:
    return "none" if v is None else repr(float(v))


def spec_to_ini(spec: ExperimentSpec, seeds: dict | None = None) -> str:
    """Render the effective configuration, loadable again with :func:`load_spec`."""
    parser = configparser.ConfigParser(interpolation=None)
    parser["experiment"] = {
        "model": spec.model,
        "seed": str(spec.master_seed),
        "sizes": ", ".join(str(n) for n in spec.sizes),
        "snr_db": ", ".join(_snr_text(s) for s in spec.snr_db),
    }
    parser["dataset"] = {
        "dt": repr(spec.dt),
        "n_samples": str(spec.n_samples),
        "y0": ", ".join(repr(v) for v in spec.y0),
        "spinup": str(spec.spinup),
    }
    parser["reservoir"] = {
        "n_units": str(spec.n_units),
        "sigma_in": repr(spec.sigma_in),
        "spectral_radius": repr(spec.spectral_radius),
        "avg_degree": str(spec.avg_degree),
    }
    parser["training"] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in asdict(spec.train).items()}
    buf = io.StringIO()
    parser.write(buf)
    text = buf.getvalue()
    if seeds:
        # derived seeds are informational; they are recomputed from the master seed
        text += "".join(f"# {name} = {value}\n" for name, value in seeds.items())
    return text
