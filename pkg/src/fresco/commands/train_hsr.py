"""Train the abundance translator on HSI and MSI abundance maps."""

import pathlib

from . import Command
from ._common import load_config, output_dir, read_abundances


def setup_parser(parser, completions=False):
    parser.add_argument(
        "--hsi-abundances", type=pathlib.Path, required=True, help="HSI abundance stack (FCUB, material last)."
    )
    parser.add_argument(
        "--msi-abundances", type=pathlib.Path, required=True, help="MSI abundance stack (FCUB, material last)."
    )
    parser.add_argument("--endmembers", type=pathlib.Path, required=True, help="Endmember matrix (text).")
    parser.add_argument(
        "--individual",
        action="store_true",
        default=False,
        help="Train one translator per material instead of a shared one.",
    )
    parser.add_argument("--progress", action="store_true", default=False, help="Show a progress bar.")


def command(opts, parser=None, extra_arg_groups=None):
    from ..adversarial import train_hsr
    from ..tensor_io import save_checkpoint

    config = load_config(opts)
    hsi_ab = read_abundances(opts.hsi_abundances, opts.endmembers)
    msi_ab = read_abundances(opts.msi_abundances, opts.endmembers)
    state = train_hsr(hsi_ab, msi_ab, config.hsr, config.net, shared=not opts.individual, progress=opts.progress)

    output = output_dir(opts) / "translator.frts"
    save_checkpoint(output, state)
    d_loss, f_loss, inverse, scale = state.history[-1]
    print(
        f"Trained for {state.iteration} iterations: d_loss={d_loss:.4f} f_loss={f_loss:.4f} "
        f"inverse={inverse:.4f} scale={scale:.4f}"
    )
    print(f"Checkpoint written to {output}")


class TrainHsrCommand(Command):
    @classmethod
    def name(cls):
        return "train-hsr"


def register_plugin():
    return TrainHsrCommand
