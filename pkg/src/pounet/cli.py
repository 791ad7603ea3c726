"""Command-line front end.

Subcommands::

    pounet gen-data  --config cfg.ini [--out DIR] [--seed S]
    pounet train     --config cfg.ini [--out DIR] [--seed S] [--profile paper|ci]
    pounet sweep     --config cfg.ini [--out DIR] [--seed S] [--jobs N] [--profile paper|ci]
    pounet report    --out DIR
    pounet theorem1  [--config cfg.ini] --out DIR

Exit codes: 0 on success, 1 for configuration problems (reported with
file and line), 2 when a training run fails.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench
from .experiments import (
    ConfigError,
    emit_convergence_table,
    expand_cells,
    load_config,
    resolve_config,
    run_experiment,
)
from .optim import TrainingError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pounet",
        description="Partition-of-unity network training and benchmark harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, config_required=True, with_config=True):
        cmd = sub.add_parser(name, help=help_text)
        if with_config:
            cmd.add_argument("--config", required=config_required, help="experiment config file")
        cmd.add_argument("--out", default=None, help="output directory")
        return cmd

    gen = add("gen-data", "write the dataset a config describes")
    gen.add_argument("--seed", type=int, default=None, help="override the config seed")

    train = add("train", "train a single experiment cell (one run)")
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--profile", choices=("paper", "ci"), default="paper")

    sweep = add("sweep", "run a full experiment sweep")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--jobs", type=int, default=1, help="parallel runs")
    sweep.add_argument("--profile", choices=("paper", "ci"), default="paper")

    add("report", "aggregate completed runs into a convergence table", with_config=False)
    add("theorem1", "tabulate the frozen-partition error scaling", config_required=False)
    return parser


def _load(args) -> "ExperimentConfig":
    cfg = load_config(args.config, profile=getattr(args, "profile", "paper"))
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        cfg.seed = args.seed
    return cfg


def _out_dir(args, cfg) -> str:
    return args.out if args.out is not None else (cfg.out or "results")


def _cmd_gen_data(args) -> int:
    from .experiments import _make_run_dataset  # internal reuse

    cfg = _load(args)
    out = Path(_out_dir(args, cfg))
    out.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "theorem1":
        import numpy as np

        xs = np.linspace(0.0, 1.0, cfg.n_grid)[:, None]
        from .model import Dataset

        data = Dataset.from_arrays(xs, np.sin(2.0 * np.pi * xs[:, 0]))
    else:
        cells = expand_cells(cfg)
        data = _make_run_dataset(cfg, cells[0], cfg.seed)
    path = out / "dataset.csv"
    bench.save_dataset_csv(data, path)
    print(f"wrote {path} ({data.n_data} points)")
    return 0


def _cmd_train(args) -> int:
    cfg = _load(args)
    if cfg.kind != "theorem1":
        cells = expand_cells(cfg)
        if len(cells) != 1:
            raise ConfigError(
                f"{args.config}: 'train' needs a single sweep cell, "
                f"this config expands to {len(cells)}; use 'sweep'"
            )
        cfg.n_runs = 1
    n_failed = run_experiment(cfg, out_dir=args.out, jobs=1)
    print(f"wrote {_out_dir(args, cfg)}")
    return 2 if n_failed else 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    n_failed = run_experiment(cfg, out_dir=args.out, jobs=args.jobs)
    out = _out_dir(args, cfg)
    if n_failed:
        print(f"{n_failed} run(s) failed; partial results in {out}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


def _cmd_report(args) -> int:
    if args.out is None:
        raise ConfigError("report needs --out pointing at a completed run directory")
    path = emit_convergence_table(args.out)
    print(f"wrote {path}")
    return 0


def _cmd_theorem1(args) -> int:
    if args.config is not None:
        cfg = load_config(args.config)
        if cfg.kind != "theorem1":
            raise ConfigError(f"{args.config}: theorem1 subcommand needs kind = theorem1")
    else:
        cfg = resolve_config({"experiment": {"kind": ("theorem1", 0)}}, "<default>")
    n_failed = run_experiment(cfg, out_dir=args.out, jobs=1)
    out = Path(_out_dir(args, cfg))
    for line in (out / "theorem1_slopes.csv").read_text().splitlines():
        print(line)
    return 2 if n_failed else 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
    "theorem1": _cmd_theorem1,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; fold those into the config-error code
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
