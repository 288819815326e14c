"""Helpers shared by the subcommands."""

import argparse
import dataclasses
import pathlib

from ..config import RunConfig, load_run_config
from ..tensor_core import AbundanceSet


def common_parser() -> argparse.ArgumentParser:
    """Returns the parent parser holding the flags every subcommand accepts."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--seed", type=int, default=None, help="Seed overriding every configured seed.")
    parser.add_argument("--config", type=pathlib.Path, default=None, help="Run configuration file.")
    parser.add_argument(
        "--out-dir", type=pathlib.Path, default=pathlib.Path("."), help="Output folder. Defaults to '.'."
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="Log progress (-v) or diagnostics (-vv)."
    )
    return parser


def load_config(opts) -> RunConfig:
    """Loads the run configuration and applies ``--seed``."""
    config = load_run_config(opts.config)
    if opts.seed is None:
        return config
    return dataclasses.replace(
        config,
        msr=dataclasses.replace(config.msr, seed=opts.seed),
        hsr=dataclasses.replace(config.hsr, seed=opts.seed),
        pm=dataclasses.replace(config.pm, seed=opts.seed),
    )


def data_seed(opts) -> int:
    """Seed of synthetic data generation."""
    return 0 if opts.seed is None else opts.seed


def output_dir(opts) -> pathlib.Path:
    """Returns the output folder, created if needed."""
    opts.out_dir.mkdir(parents=True, exist_ok=True)
    return opts.out_dir


def read_abundances(cube_path: pathlib.Path, endmembers_path: pathlib.Path) -> AbundanceSet:
    """Reads an abundance stack and its endmember matrix."""
    from ..tensor_io import read_matrix, read_tensor

    return AbundanceSet.from_cube(read_tensor(cube_path), read_matrix(endmembers_path), tolerance=float("inf"))
