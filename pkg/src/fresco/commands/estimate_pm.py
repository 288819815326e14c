"""Estimate the spectral response matrix from an unregistered pair."""

import pathlib

from . import Command
from ._common import load_config, output_dir


def setup_parser(parser, completions=False):
    parser.add_argument("--hsi", type=pathlib.Path, required=True, help="Observed HSI (FCUB).")
    parser.add_argument("--msi", type=pathlib.Path, required=True, help="Observed MSI (FCUB).")
    parser.add_argument(
        "--omega",
        type=str,
        default=None,
        help="Forced zeros: 'banded', 'none' or a file of 'row col' pairs. Defaults to pm.omega.",
    )
    parser.add_argument(
        "-o", "--output", type=pathlib.Path, default=None, help="Estimate file, defaults to <out-dir>/pm_est.txt."
    )


def command(opts, parser=None, extra_arg_groups=None):
    import dataclasses

    from ..pm_estimator import estimate_pm
    from ..tensor_io import read_tensor, write_matrix

    config = load_config(opts)
    if opts.omega is not None:
        config = dataclasses.replace(config, omega=opts.omega)

    hsi = read_tensor(opts.hsi)
    msi = read_tensor(opts.msi)
    P = estimate_pm(hsi, msi, config.estimator_config(hsi.bands, msi.bands))

    output = opts.output or output_dir(opts) / "pm_est.txt"
    write_matrix(output, P)
    print(f"Spectral response ({P.shape[0]}x{P.shape[1]}) written to {output}")


class EstimatePmCommand(Command):
    @classmethod
    def name(cls):
        return "estimate-pm"


def register_plugin():
    return EstimatePmCommand
