from pathlib import Path

import numpy as np
from pytest import fixture

from fresco.adversarial import HsrConfig
from fresco.degradation import SceneDims, synth_ll1_scene, synth_patch_model
from fresco.networks import NetSpec
from fresco.tensor_core import AbundanceSet, SpectralCube
from fresco.tensor_io import write_tensor
from fresco.unmixing import MsrConfig


@fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@fixture
def random_cube(rng: np.random.Generator) -> SpectralCube:
    return SpectralCube(rng.uniform(0.1, 1.0, (16, 16, 6)))


@fixture
def random_abundances(rng: np.random.Generator) -> AbundanceSet:
    maps = rng.uniform(0.0, 1.0, (3, 3, 3))
    return AbundanceSet(maps, rng.uniform(0.0, 1.0, (3, 4)))


@fixture
def cube_file(tmp_path: Path, random_cube: SpectralCube) -> Path:
    path = tmp_path / "cube.fcub"
    write_tensor(path, random_cube)
    return path


@fixture
def small_dims() -> SceneDims:
    return SceneDims(I_H=6, J_H=6, K_H=8, I_M=12, J_M=12, K_M=3)


@fixture
def small_ll1_scene(small_dims: SceneDims):
    return synth_ll1_scene(seed=3, dims=small_dims, L_H=2, L_M=2, R=2)


@fixture
def small_msr_config() -> MsrConfig:
    return MsrConfig(R=2, L_H=2, L_M=2, max_iters=40)


@fixture
def tiny_netspec() -> NetSpec:
    return NetSpec(scale=2, patch_side=4, R=2, base_width=2, depth=1, res_blocks=1)


@fixture
def tiny_hsr_config() -> HsrConfig:
    return HsrConfig(batch=2, t_max=4, log_every=1)


@fixture
def latent_model():
    return synth_patch_model(seed=5, d=4, R=3, B_H=8, s=4)


@fixture
def small_run_config(tmp_path: Path) -> Path:
    path = tmp_path / "synth_small.cfg"
    path.write_text(
        "\n".join(
            [
                "# small synthetic run",
                "msr.R = 2",
                "msr.max_iters = 20",
                "hsr.t_max = 4",
                "hsr.batch = 2",
                "scene.materials = 2",
                "scene.source_rows = 40",
                "scene.source_cols = 40",
                "scene.bands = 8",
                "scene.msi_bands = 2",
                "scene.scale = 2",
                "scene.msi_row = 4",
                "scene.msi_col = 4",
                "scene.msi_size = 16",
                "scene.hsi_row = 4",
                "scene.hsi_col = 4",
                "scene.hsi_size = 16",
                "scene.shift_t = 4",
                "net.R = 2",
                "net.scale = 2",
                "net.patch_side = 4",
                "net.base_width = 2",
                "net.depth = 1",
                "net.res_blocks = 1",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    return path
