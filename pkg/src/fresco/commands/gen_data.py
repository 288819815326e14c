"""Generate a synthetic unregistered HSI/MSI pair with its ground truth."""

import numpy as np

from . import Command
from ._common import data_seed, load_config, output_dir


def setup_parser(parser, completions=False):
    parser.add_argument(
        "--kind",
        choices=("scene", "ll1", "patch"),
        default=None,
        help="Generator, defaults to scene.kind of the run configuration.",
    )


def generate(config, seed: int, out_dir) -> dict:
    """Writes the observations and ground truths of one synthetic scene.

    Args:
        config (:class:`fresco.config.RunConfig`): Run configuration.
        seed (int): Generation seed.
        out_dir (pathlib.Path): Output folder.

    Returns:
        dict[str, pathlib.Path]: Written files by role.
    """
    from ..degradation import make_unregistered_pair, synth_ll1_scene, synth_patch_model, synth_source_cube
    from ..tensor_core import assemble_lmm, factors_to_abundances, mode3_apply
    from ..tensor_io import write_matrix, write_tensor

    scene = config.scene
    files = {}

    def save(role, cube, name):
        files[role] = out_dir / name
        write_tensor(files[role], cube)

    if scene.kind == "scene":
        source = assemble_lmm(
            synth_source_cube(seed, scene.source_rows, scene.source_cols, scene.bands, scene.materials)
        )
        spec = scene.scene_spec(source, noise_seed=seed)
        pair = make_unregistered_pair(spec)
        P = spec.degradation.P
        save("msi", pair.msi, "msi.fcub")
        save("hsi", pair.hsi, "hsi.fcub")
        save("sri_msi", pair.sri_msi, "sri_msi.fcub")
        save("sri_hsi", pair.sri_hsi, "sri_hsi.fcub")
    elif scene.kind == "ll1":
        generated = synth_ll1_scene(seed, scene.ll1_dims(), config.msr.L_H, config.msr.L_M, scene.materials)
        P = generated.degradation.P
        sri_msi = generated.sri_msi()
        save("msi", mode3_apply(sri_msi, P), "msi.fcub")
        save("hsi", generated.hsi_model.assemble(), "hsi.fcub")
        save("sri_msi", sri_msi, "sri_msi.fcub")
        save("hsi_abundances", factors_to_abundances(generated.hsi_model).as_cube(), "hsi_abundances.fcub")
        save("msi_abundances", factors_to_abundances(generated.msi_model).as_cube(), "msi_abundances.fcub")
        files["endmembers"] = out_dir / "endmembers.txt"
        write_matrix(files["endmembers"], np.stack([factor.c for factor in generated.hsi_model.factors]))
    else:
        model = synth_patch_model(seed, scene.latent_dim, scene.materials, config.net.patch_side, scene.scale)
        hsi_ab, msi_ab = model.abundance_maps(scene.hsi_size // scene.scale, seed, bands=scene.bands)
        P = scene.degradation().P
        save("hsi", assemble_lmm(hsi_ab), "hsi.fcub")
        save("sri_hsi", assemble_lmm(msi_ab), "sri_hsi.fcub")
        save("hsi_abundances", hsi_ab.as_cube(), "hsi_abundances.fcub")
        save("msi_abundances", msi_ab.as_cube(), "msi_abundances.fcub")
        files["endmembers"] = out_dir / "endmembers.txt"
        write_matrix(files["endmembers"], hsi_ab.endmembers)

    files["pm"] = out_dir / "pm.txt"
    write_matrix(files["pm"], P)
    return files


def command(opts, parser=None, extra_arg_groups=None):
    import dataclasses

    config = load_config(opts)
    if opts.kind is not None:
        config = dataclasses.replace(config, scene=dataclasses.replace(config.scene, kind=opts.kind))

    files = generate(config, data_seed(opts), output_dir(opts))
    print(f"Generated '{config.scene.kind}' data:")
    for role, path in files.items():
        print(f"  {role}: {path}")


class GenDataCommand(Command):
    @classmethod
    def name(cls):
        return "gen-data"


def register_plugin():
    return GenDataCommand
