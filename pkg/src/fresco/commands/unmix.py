"""Unmix an unregistered pair and reconstruct the MSI-region super-resolution image."""

import pathlib

from . import Command
from ._common import load_config, output_dir


def setup_parser(parser, completions=False):
    parser.add_argument("--hsi", type=pathlib.Path, required=True, help="Observed HSI (FCUB).")
    parser.add_argument("--msi", type=pathlib.Path, required=True, help="Observed MSI (FCUB).")
    parser.add_argument("--pm", type=pathlib.Path, required=True, help="Spectral response matrix (text).")


def write_solution(solution, out_dir) -> dict:
    """Writes the abundances, endmembers and MSI-region reconstruction of a solution."""
    from ..tensor_core import AbundanceSet
    from ..tensor_io import write_matrix, write_tensor
    from ..unmixing import reconstruct_msri

    files = {
        "hsi_abundances": out_dir / "hsi_abundances.fcub",
        "msi_abundances": out_dir / "msi_abundances.fcub",
        "endmembers": out_dir / "endmembers.txt",
        "msri": out_dir / "msri.fcub",
    }
    msi_ab = AbundanceSet(solution.msi_abundances, solution.hsi.endmembers, tolerance=float("inf"))
    write_tensor(files["hsi_abundances"], solution.hsi.as_cube())
    write_tensor(files["msi_abundances"], msi_ab.as_cube())
    write_matrix(files["endmembers"], solution.hsi.endmembers)
    write_tensor(files["msri"], reconstruct_msri(solution))
    return files


def command(opts, parser=None, extra_arg_groups=None):
    from ..tensor_io import read_matrix, read_tensor
    from ..unmixing import solve_msr

    config = load_config(opts)
    solution = solve_msr(read_tensor(opts.hsi), read_tensor(opts.msi), read_matrix(opts.pm), config.msr)
    files = write_solution(solution, output_dir(opts))

    status = "converged" if solution.converged else "reached the iteration cap"
    print(f"Unmixing {status} after {solution.iters_used} iterations (objective {solution.objective_trace[-1]:.6e}).")
    for role, path in files.items():
        print(f"  {role}: {path}")


class UnmixCommand(Command):
    @classmethod
    def name(cls):
        return "unmix"


def register_plugin():
    return UnmixCommand
