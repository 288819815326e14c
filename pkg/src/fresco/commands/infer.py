"""Super-resolve HSI abundances with a trained translator."""

import pathlib

from . import Command
from ._common import output_dir, read_abundances


def setup_parser(parser, completions=False):
    parser.add_argument("--checkpoint", type=pathlib.Path, required=True, help="Translator checkpoint (FRTS).")
    parser.add_argument(
        "--hsi-abundances", type=pathlib.Path, required=True, help="HSI abundance stack (FCUB, material last)."
    )
    parser.add_argument("--endmembers", type=pathlib.Path, required=True, help="Endmember matrix (text).")
    parser.add_argument("--stride", type=int, default=1, help="Sliding window stride. Defaults to 1.")


def command(opts, parser=None, extra_arg_groups=None):
    from ..adversarial import reconstruct_hsri, super_resolve_abundances
    from ..tensor_io import load_checkpoint, write_tensor

    state = load_checkpoint(opts.checkpoint)
    sr_abundances = super_resolve_abundances(state, read_abundances(opts.hsi_abundances, opts.endmembers), opts.stride)

    out_dir = output_dir(opts)
    write_tensor(out_dir / "sr_abundances.fcub", sr_abundances.as_cube())
    write_tensor(out_dir / "hsri.fcub", reconstruct_hsri(sr_abundances))
    rows, cols = sr_abundances.spatial_shape
    print(f"Super-resolved {sr_abundances.R} abundance maps to {rows}x{cols}.")
    print(f"  sr_abundances: {out_dir / 'sr_abundances.fcub'}")
    print(f"  hsri: {out_dir / 'hsri.fcub'}")


class InferCommand(Command):
    @classmethod
    def name(cls):
        return "infer"


def register_plugin():
    return InferCommand
