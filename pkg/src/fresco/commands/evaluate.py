"""Compare an estimated cube with its reference."""

import pathlib

from . import Command
from ._common import load_config


def setup_parser(parser, completions=False):
    parser.add_argument("--ref", type=pathlib.Path, required=True, help="Reference cube (FCUB).")
    parser.add_argument("--est", type=pathlib.Path, required=True, help="Estimated cube (FCUB).")
    parser.add_argument(
        "--ratio", type=float, default=None, help="ERGAS resolution ratio, defaults to scene.scale."
    )
    parser.add_argument("--peak", type=float, default=None, help="Peak value, defaults to the reference maximum.")
    parser.add_argument("--json", action="store_true", default=False, help="Also print a JSON report.")


def command(opts, parser=None, extra_arg_groups=None):
    from ..metrics import evaluate
    from ..tensor_io import read_tensor

    ratio = opts.ratio if opts.ratio is not None else load_config(opts).scene.scale
    report = evaluate(read_tensor(opts.ref), read_tensor(opts.est), ratio, opts.peak)
    print(report.to_text())
    if opts.json:
        print(report.to_json())


class EvalCommand(Command):
    @classmethod
    def name(cls):
        return "eval"


def register_plugin():
    return EvalCommand
