"""Export three bands of a cube as an 8-bit PPM image."""

import pathlib

from . import Command
from ._common import output_dir


def setup_parser(parser, completions=False):
    parser.add_argument("--input", type=pathlib.Path, required=True, help="Cube to preview (FCUB).")
    parser.add_argument(
        "--bands", type=int, nargs=3, default=(0, 1, 2), metavar=("R", "G", "B"), help="Bands shown as RGB."
    )
    parser.add_argument(
        "-o", "--output", type=pathlib.Path, default=None, help="Image file, defaults to <out-dir>/<input>.ppm."
    )


def command(opts, parser=None, extra_arg_groups=None):
    from ..tensor_io import read_tensor, write_ppm

    output = opts.output or output_dir(opts) / f"{opts.input.stem}.ppm"
    write_ppm(output, read_tensor(opts.input), tuple(opts.bands))
    print(f"Preview written to {output}")


class PreviewCommand(Command):
    @classmethod
    def name(cls):
        return "preview"


def register_plugin():
    return PreviewCommand
