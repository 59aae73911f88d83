#!/usr/bin/env python3
"""
Command-line front end.

    dopawp gen-data --system lorenz --out data/lorenz.csv
    dopawp train --preset rossler-dopamine2-scaled --seeds 5 --out runs
    dopawp landscape --model runs/xor-dopamine2/seed-0 --split test
    dopawp timing --optimizers dopamine2,adam --seq-lens 16..1024
    dopawp compare runs/rossler-wp-scaled runs/rossler-dopamine2-scaled
    dopawp sweep --preset rossler-ablation-init-scaled --out runs

Exit code 2 signals an invalid configuration; every other outcome, diverged
seeds and failed timing points included, exits with 0.
"""
import argparse
import logging
import sys
from pathlib import Path

from .chaos import (
    DEFAULT_DT,
    lorenz_trajectory,
    min_max_bounds,
    rossler_trajectory,
    write_trajectory_csv,
)
from .config import load_config, preset, preset_names
from .enums import CIMethod, Integrator, LorenzForm, RunStatus, TimingPhase
from .errors import ConfigError
from .experiment import compare, landscape_batch, load_run, run_experiment
from .landscape import DEFAULT_RANGE0, DEFAULT_RANGE1, DEFAULT_STEPS, FULL_STEPS, loss_landscape
from .nn import RnnSpec, init_network
from .sweep import best_point, parse_grid, run_sweep, write_sweep_summary
from .timing import time_optimizer, write_timing_csv
from .training import report_loss
from .util import make_rng, parse_seq_lens

DOPAWP_VERSION = "0.1.0"

LOGGER = logging.getLogger(__name__)

CONFIG_ERROR_EXIT_CODE = 2


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(filename)s [%(levelname)s] %(message)s",
    )
    try:
        args.command(args)
    except ConfigError as error:
        LOGGER.error("%s", error)
        return CONFIG_ERROR_EXIT_CODE
    return 0


def _trajectory(system, n_steps, dt=DEFAULT_DT, integrator=Integrator.EULER, form=LorenzForm.STANDARD):
    if system == "lorenz":
        return lorenz_trajectory(n_steps=n_steps, dt=dt, integrator=integrator, form=form)
    return rossler_trajectory(n_steps=n_steps, dt=dt, integrator=integrator)


def gen_data(args):
    trajectory = _trajectory(args.system, args.steps, args.dt, args.integrator, args.form)
    bounds = min_max_bounds(trajectory.states) if args.normalize else None
    out = args.out or Path(f"{args.system}.csv")
    write_trajectory_csv(trajectory, out, bounds=bounds)
    print(out)


def train(args):
    if args.config:
        config = load_config(args.config, section=args.section)
    else:
        config = preset(args.preset)
    overrides = list(args.set)
    if args.seeds is not None:
        overrides.append(f"n_seeds={args.seeds}")
    if args.base_seed is not None:
        overrides.append(f"base_seed={args.base_seed}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    if args.out is not None:
        overrides.append(f"output_dir={args.out}")
    config = config.with_overrides(overrides)
    records = run_experiment(config)
    for record in records:
        if record.status == RunStatus.OK:
            print(f"seed {record.seed}: final loss {record.final_loss:.6g} ({record.run_dir})")
        else:
            print(f"seed {record.seed}: diverged at epoch {record.diverged_at} ({record.run_dir})")


def landscape(args):
    config, metadata, net = load_run(args.model)
    batch = landscape_batch(config, metadata["seed"], args.split)
    steps = FULL_STEPS if args.full else args.steps
    grid = loss_landscape(
        net,
        batch,
        loss=report_loss,
        range0=tuple(args.range0),
        range1=tuple(args.range1),
        steps0=steps,
        steps1=steps,
        seed=args.seed,
        filter_normalized=args.filter_normalize,
        workers=args.workers,
    )
    out = args.out or Path(args.model) / f"landscape-{args.split}.csv"
    grid.write_csv(out)
    LOGGER.info("Landscape minimum at cell %s, center at %s", grid.minimum_cell(), grid.center_cell())
    print(out)


def timing(args):
    seq_lens = parse_seq_lens(args.seq_lens)
    series_length = max(args.series_length, max(seq_lens) + args.samples + 1)
    trajectory = _trajectory(args.system, series_length)
    low, span = min_max_bounds(trajectory.states)
    normalized = (trajectory.states - low) / span
    net = init_network(RnnSpec(hidden_dim=args.hidden_dim), make_rng(args.seed))
    records = []
    for optimizer in args.optimizers.split(","):
        records.extend(
            time_optimizer(
                optimizer.strip(),
                net,
                normalized,
                seq_lens,
                n_trials=args.trials,
                phase=args.phase,
                warmup=args.warmup,
                n_samples=args.samples,
                memory_cap_bytes=args.memory_cap,
                seed=args.seed,
            )
        )
    write_timing_csv(records, args.out)
    print(args.out)


def sweep(args):
    config = preset(args.preset)
    overrides = list(args.set)
    if args.seeds is not None:
        overrides.append(f"n_seeds={args.seeds}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    if args.out is not None:
        overrides.append(f"output_dir={args.out}")
    config = config.with_overrides(overrides)
    grid = parse_grid(args.grid) if args.grid else None
    points = run_sweep(config, grid)
    summary = args.summary or Path(config.output_dir) / f"{config.name}-sweep.csv"
    write_sweep_summary(points, summary, method=args.ci)
    best = best_point(points)
    LOGGER.info("Best point: %s", best.config.name)
    print(summary)


def compare_runs(args):
    summaries = compare(args.run_dirs, output=args.out, method=args.ci)
    for optimizer, summary in summaries.items():
        flag = " (single run)" if summary.degenerate else ""
        print(
            f"{optimizer}: {summary.mean:.6g} [{summary.ci_low:.6g}, {summary.ci_high:.6g}]"
            f" n={summary.n_runs}{flag}"
        )


def list_presets(args):
    for name in preset_names():
        print(name)


def _coerced(enum_cls):
    def parse(value):
        try:
            return enum_cls.coerce(value)
        except ValueError as error:
            raise argparse.ArgumentTypeError(str(error)) from error

    return parse


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        prog="dopawp",
        description="Derivative-free training of neural networks by weight perturbation",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=DOPAWP_VERSION)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, command, help_text):
        sub = subparsers.add_parser(
            name,
            help=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
            allow_abbrev=False,
        )
        sub.set_defaults(command=command)
        return sub

    sub = add("gen-data", gen_data, "write a Lorenz or Rössler trajectory as CSV")
    sub.add_argument("--system", choices=("lorenz", "rossler"), default="lorenz")
    sub.add_argument("--steps", type=int, default=5000)
    sub.add_argument("--dt", type=float, default=0.01)
    sub.add_argument("--integrator", type=_coerced(Integrator), default=Integrator.EULER)
    sub.add_argument("--form", type=_coerced(LorenzForm), default=LorenzForm.STANDARD)
    sub.add_argument("--normalize", action="store_true", help="record min-max bounds")
    sub.add_argument("--out", type=Path)

    sub = add("train", train, "run every seed of an experiment")
    source = sub.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", help="name of a built-in preset")
    source.add_argument("--config", type=Path, help="INI file")
    sub.add_argument("--section", help="section of --config to run")
    sub.add_argument("--seeds", type=int, help="number of seeds")
    sub.add_argument("--base-seed", type=int)
    sub.add_argument("--workers", type=int)
    sub.add_argument("--out", help="output directory")
    sub.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key"
    )

    sub = add("landscape", landscape, "random-direction loss landscape of a trained run")
    sub.add_argument("--model", required=True, type=Path, help="run directory")
    sub.add_argument("--split", choices=("train", "test"), default="train")
    sub.add_argument("--steps", type=int, default=DEFAULT_STEPS, help="grid points per axis")
    sub.add_argument("--full", action="store_true", help=f"{FULL_STEPS} points per axis")
    sub.add_argument("--range0", type=float, nargs=2, default=DEFAULT_RANGE0)
    sub.add_argument("--range1", type=float, nargs=2, default=DEFAULT_RANGE1)
    sub.add_argument("--seed", type=int, default=0, help="seed of the directions")
    sub.add_argument("--filter-normalize", action="store_true")
    sub.add_argument("--workers", type=int, default=1)
    sub.add_argument("--out", type=Path)

    sub = add("timing", timing, "time optimizer iterations against the window length")
    sub.add_argument("--optimizers", default="dopamine2,adam")
    sub.add_argument("--system", choices=("lorenz", "rossler"), default="rossler")
    sub.add_argument(
        "--series-length", type=int, default=50000, help="points generated, at least the longest window"
    )
    sub.add_argument("--seq-lens", default="16..1024", help='e.g. "16..1024" or "16,32,64"')
    sub.add_argument("--trials", type=int, default=5)
    sub.add_argument("--warmup", type=int, default=1)
    sub.add_argument("--phase", type=_coerced(TimingPhase), default=TimingPhase.UPDATE)
    sub.add_argument("--memory-cap", type=int, help="BPTT history limit in bytes")
    sub.add_argument("--hidden-dim", type=int, default=512)
    sub.add_argument("--samples", type=int, default=8, help="windows per batch")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", type=Path, default=Path("timing.csv"))

    sub = add("compare", compare_runs, "mean final loss and 95%% CI per optimizer")
    sub.add_argument("run_dirs", nargs="+", type=Path)
    sub.add_argument("--ci", type=_coerced(CIMethod), default=CIMethod.NORMAL)
    sub.add_argument("--out", type=Path, default=Path("summary.csv"))

    sub = add("sweep", sweep, "run a preset over a grid of hyperparameters")
    sub.add_argument("--preset", required=True, help="name of a built-in preset")
    sub.add_argument(
        "--grid",
        action="append",
        default=[],
        metavar="KEY=V1,V2",
        help="grid axis; defaults to the built-in grid of the preset",
    )
    sub.add_argument("--seeds", type=int, help="number of seeds per point")
    sub.add_argument("--workers", type=int)
    sub.add_argument("--out", help="output directory")
    sub.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key"
    )
    sub.add_argument("--ci", type=_coerced(CIMethod), default=CIMethod.NORMAL)
    sub.add_argument("--summary", type=Path, help="summary CSV path")

    add("presets", list_presets, "list the built-in presets")
    return parser.parse_args(argv)


if __name__ == "__main__":
    sys.exit(main())
