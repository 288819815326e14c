"""Run the full fusion sequence: estimate-pm, unmix, train-hsr, infer and eval.

Without ``--hsi``/``--msi`` a synthetic scene is generated first and both
super-resolution images are scored against its ground truths.
"""

import pathlib

from . import Command
from ._common import data_seed, load_config, output_dir


def setup_parser(parser, completions=False):
    parser.add_argument("--hsi", type=pathlib.Path, default=None, help="Observed HSI (FCUB).")
    parser.add_argument("--msi", type=pathlib.Path, default=None, help="Observed MSI (FCUB).")
    parser.add_argument(
        "--pm", type=pathlib.Path, default=None, help="Known spectral response. Estimated when omitted."
    )
    parser.add_argument("--sri-msi", type=pathlib.Path, default=None, help="MSI-region ground truth (FCUB).")
    parser.add_argument("--sri-hsi", type=pathlib.Path, default=None, help="HSI-region ground truth (FCUB).")
    parser.add_argument(
        "--individual",
        action="store_true",
        default=False,
        help="Train one translator per material instead of a shared one.",
    )
    parser.add_argument("--progress", action="store_true", default=False, help="Show a progress bar.")


def run_pipeline(config, seed: int, out_dir: pathlib.Path, inputs: dict, shared: bool = True, progress: bool = False):
    """Runs every stage and returns the metric reports by stage.

    Args:
        config (:class:`fresco.config.RunConfig`): Run configuration.
        seed (int): Seed of the synthetic scene, when one is generated.
        out_dir (pathlib.Path): Folder receiving every intermediate file.
        inputs (dict[str, pathlib.Path | None]): ``hsi``, ``msi``, ``pm``,
            ``sri_msi`` and ``sri_hsi`` paths; missing observations trigger a
            synthetic scene.
        shared (bool, optional): Train a shared translator. Defaults to True.
        progress (bool, optional): Show a training progress bar. Defaults to False.

    Raises:
        ConfigError: If only one observation is given.

    Returns:
        dict[str, :class:`fresco.metrics.MetricReport`]: Reports keyed ``msr``
        and ``hsr`` for every available ground truth.
    """
    import dataclasses

    from ..adversarial import reconstruct_hsri, super_resolve_abundances, train_hsr
    from ..exceptions import ConfigError
    from ..metrics import evaluate
    from ..pm_estimator import estimate_pm
    from ..tensor_core import AbundanceSet
    from ..tensor_io import read_matrix, read_tensor, save_checkpoint, write_matrix, write_tensor
    from ..unmixing import reconstruct_msri, solve_msr
    from .gen_data import generate
    from .unmix import write_solution

    inputs = dict(inputs)
    if (inputs.get("hsi") is None) != (inputs.get("msi") is None):
        raise ConfigError("Give both --hsi and --msi, or neither to use a synthetic scene.")
    if inputs.get("hsi") is None:
        scene_config = dataclasses.replace(config, scene=dataclasses.replace(config.scene, kind="scene"))
        generated = generate(scene_config, seed, out_dir)
        inputs.update({role: generated[role] for role in ("hsi", "msi", "sri_msi", "sri_hsi")})

    hsi = read_tensor(inputs["hsi"])
    msi = read_tensor(inputs["msi"])
    if inputs.get("pm") is not None:
        P = read_matrix(inputs["pm"])
    else:
        P = estimate_pm(hsi, msi, config.estimator_config(hsi.bands, msi.bands))
        write_matrix(out_dir / "pm_est.txt", P)

    solution = solve_msr(hsi, msi, P, config.msr)
    write_solution(solution, out_dir)
    msi_ab = AbundanceSet(solution.msi_abundances, solution.hsi.endmembers, tolerance=float("inf"))

    state = train_hsr(solution.hsi, msi_ab, config.hsr, config.net, shared=shared, progress=progress)
    save_checkpoint(out_dir / "translator.frts", state)
    sr_abundances = super_resolve_abundances(state, solution.hsi)
    hsri = reconstruct_hsri(sr_abundances)
    write_tensor(out_dir / "sr_abundances.fcub", sr_abundances.as_cube())
    write_tensor(out_dir / "hsri.fcub", hsri)

    reports = {}
    ratio = config.scene.scale
    if inputs.get("sri_msi") is not None:
        reports["msr"] = evaluate(read_tensor(inputs["sri_msi"]), reconstruct_msri(solution), ratio)
    if inputs.get("sri_hsi") is not None:
        reports["hsr"] = evaluate(read_tensor(inputs["sri_hsi"]), hsri, ratio)
    return reports


def command(opts, parser=None, extra_arg_groups=None):
    config = load_config(opts)
    out_dir = output_dir(opts)
    inputs = {
        "hsi": opts.hsi,
        "msi": opts.msi,
        "pm": opts.pm,
        "sri_msi": opts.sri_msi,
        "sri_hsi": opts.sri_hsi,
    }
    reports = run_pipeline(config, data_seed(opts), out_dir, inputs, not opts.individual, opts.progress)

    lines = [f"{stage}: {report.to_text()}" for stage, report in reports.items()]
    if not lines:
        lines = ["No ground truth given; metrics skipped."]
    (out_dir / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        print(line)


class PipelineCommand(Command):
    @classmethod
    def name(cls):
        return "pipeline"


def register_plugin():
    return PipelineCommand
