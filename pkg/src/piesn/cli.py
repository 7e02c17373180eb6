"""Command-line interface: ``piesn {generate,train,evaluate,sweep,report}``.

Exit status is 0 on success, 2 for usage errors (bad flags, missing files,
invalid configuration) and 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentSpec, PRESETS, load_spec, spec_to_ini
from .errors import PiesnError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
OUT_DIR_ENV = "PIESN_OUT_DIR"

log = logging.getLogger("piesn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, threads: bool = True) -> None:
    p.add_argument("--config", type=Path, help="INI-style file with [experiment]/[dataset]/[reservoir]/[training]")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one configuration value (repeatable)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out-dir", type=Path, help=f"output directory (default: ${OUT_DIR_ENV} or ./piesn-out)")
    if threads:
        p.add_argument("--threads", type=int, help="BLAS threads per process")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="piesn", description="Physics-informed echo state networks for hidden-state reconstruction.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="integrate the model and write a dataset CSV")
    _common(p, threads=False)
    p.add_argument("--snr-db", type=float, help="add measurement noise at this SNR")
    p.add_argument("--output", type=Path, help="dataset path (default: OUT_DIR/dataset.csv)")

    p = sub.add_parser("train", help="train one PI-ESN readout on a dataset")
    _common(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--n-units", type=int, help="reservoir size (overrides reservoir.n_units)")

    p = sub.add_parser("evaluate", help="score a saved model on a dataset")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--threads", type=int)

    p = sub.add_parser("sweep", help="train over reservoir sizes x noise levels")
    _common(p)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--workers", type=int, default=1, help="parallel cell processes")

    p = sub.add_parser("report", help="render figures from a sweep directory")
    p.add_argument("--run-dir", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, help="where to write figures (default: RUN_DIR/figures)")
    p.add_argument("--format", default="png", choices=["png", "pdf", "svg"])
    return parser


def _out_dir(arg) -> Path:
    return Path(arg or os.environ.get(OUT_DIR_ENV) or "piesn-out")


def _require_file(path: Path, what: str) -> None:
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")


def _spec_from(args, **extra) -> ExperimentSpec:
    if args.config is not None:
        _require_file(args.config, "config file")
    return load_spec(args.config, args.overrides, seed=args.seed, out_dir=_out_dir(args.out_dir), **extra)


def _emit_config(spec: ExperimentSpec, out_dir: Path, seeds: dict | None = None) -> None:
    text = spec_to_ini(spec, seeds)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.ini").write_text(text)
    print(text, end="")


def _cmd_generate(args) -> int:
    from .data import add_noise, generate_dataset, save_dataset
    from .dynamics import get_model

    spec = _spec_from(args)
    seeds = spec.cell_seeds(0, 0)
    _emit_config(spec, spec.out_dir, {"noise_seed": seeds["noise_seed"]} if args.snr_db is not None else None)
    model = get_model(spec.model)
    ds = generate_dataset(model, spec.y0, spec.dt, spec.n_samples, spec.spinup, seed=spec.master_seed)
    if args.snr_db is not None:
        ds = add_noise(ds, args.snr_db, seed=seeds["noise_seed"])
    path = args.output or spec.out_dir / "dataset.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, path)
    print(f"wrote {ds.n_samples} samples to {path}")
    return EXIT_OK


def _print_report(report) -> None:
    print(json.dumps(report.metrics(), indent=2))


def _cmd_train(args) -> int:
    from .data import load_dataset
    from .dynamics import get_model
    from .harness import run_single

    _require_file(args.data, "dataset")
    spec = _spec_from(args)
    if args.n_units is not None:
        spec = replace(spec, n_units=args.n_units)
    seeds = spec.cell_seeds(0, 0)
    _emit_config(spec, spec.out_dir, seeds)
    dataset = load_dataset(args.data)
    model = get_model(spec.model)
    with _threads(args.threads):
        report = run_single(spec, dataset, spec.n_units, seeds, spec.out_dir, model)
    _print_report(report)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from .data import load_dataset
    from .dynamics import get_model
    from .harness import evaluate, write_report_rows
    from .training import load_model

    _require_file(args.model, "model file")
    _require_file(args.data, "dataset")
    reservoir, readout, tcfg, model_name, _ = load_model(args.model)
    dataset = load_dataset(args.data)
    with _threads(args.threads):
        report = evaluate(readout, reservoir, dataset, get_model(model_name), tcfg.washout)
    out = _out_dir(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_rows(out / "evaluation.csv", [report])
    print(f"# model={args.model} data={args.data} washout={tcfg.washout} "
          f"reservoir_seed={reservoir.config.seed} train_seed={tcfg.seed}")
    _print_report(report)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .harness import run_experiment

    spec = _spec_from(args, preset=args.preset)
    _emit_config(spec, spec.out_dir)
    cells = run_experiment(spec, workers=max(1, args.workers), threads=args.threads)
    for c in cells:
        value = f"{c.report.rmse_hidden:.6g}" if c.report else "nan"
        snr = "none" if c.snr_db is None else f"{c.snr_db:g}"
        print(f"n_units={c.n_units} snr_db={snr} status={c.status} rmse_hidden={value} "
              f"seeds={c.seeds}" + (f" error={c.error}" if c.error else ""))
    return EXIT_OK


def _cmd_report(args) -> int:
    from .plotting import render_report

    if not (args.run_dir / "manifest.json").is_file():
        raise UsageError(f"no manifest.json in {args.run_dir}; run `piesn sweep` first")
    out = args.out_dir or args.run_dir / "figures"
    for path in render_report(args.run_dir, out, fmt=args.format):
        print(f"wrote {path}")
    return EXIT_OK


def _threads(n):
    from .harness import _limit_threads

    return _limit_threads(n)


COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"piesn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"piesn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PiesnError, ArithmeticError, ValueError, OSError) as exc:
        print(f"piesn: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
