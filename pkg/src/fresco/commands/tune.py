"""Grid-search the unmixing regularization weights on the observed data."""

import pathlib

from . import Command
from ._common import load_config, output_dir


def setup_parser(parser, completions=False):
    parser.add_argument("--hsi", type=pathlib.Path, required=True, help="Observed HSI (FCUB).")
    parser.add_argument("--msi", type=pathlib.Path, required=True, help="Observed MSI (FCUB).")
    parser.add_argument("--pm", type=pathlib.Path, required=True, help="Spectral response matrix (text).")
    parser.add_argument("--points", type=int, default=5, help="Grid points per weight. Defaults to 5.")
    parser.add_argument("--low", type=float, default=1e-4, help="Smallest weight. Defaults to 1e-4.")
    parser.add_argument("--high", type=float, default=1e-2, help="Largest weight. Defaults to 1e-2.")


def command(opts, parser=None, extra_arg_groups=None):
    import dataclasses

    from ..tensor_io import read_matrix, read_tensor
    from ..unmixing import default_lambda_grid, tune_lambdas

    config = load_config(opts)
    grid = default_lambda_grid(opts.points, opts.low, opts.high)
    selected = tune_lambdas(read_tensor(opts.hsi), read_tensor(opts.msi), read_matrix(opts.pm), config.msr, grid)

    output = output_dir(opts) / "tuned.cfg"
    output.write_text(dataclasses.replace(config, msr=selected).to_text(), encoding="utf-8")
    print(
        f"Selected lambda_lr={selected.lambda_lr:g} lambda_tv={selected.lambda_tv:g} "
        f"lambda_sto={selected.lambda_sto:g} over {len(grid)} cells."
    )
    print(f"Configuration written to {output}")


class TuneCommand(Command):
    @classmethod
    def name(cls):
        return "tune"


def register_plugin():
    return TuneCommand
