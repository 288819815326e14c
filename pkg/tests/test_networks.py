"""Tests for the translator, inverse mapper and discriminator networks."""

import pytest
import torch

from fresco.exceptions import InvalidSpecError
from fresco.networks import DTYPE, NetSpec, build_networks


@pytest.mark.parametrize("scale, patch_side, depth", [(2, 4, 1), (4, 8, 2), (4, 8, 4)])
def test_network_shapes(scale: int, patch_side: int, depth: int) -> None:
    """Tests the patch shapes produced by each network.

    Args:
        scale (int): Upscaling factor.
        patch_side (int): HSI patch side.
        depth (int): Translator encoder stages.
    """
    spec = NetSpec(scale=scale, patch_side=patch_side, R=3, base_width=2, depth=depth, res_blocks=1)
    f, g, d = build_networks(spec, seed=0)
    patches = torch.rand(4, 1, patch_side, patch_side, dtype=DTYPE)

    upscaled = f(patches)

    assert upscaled.shape == (4, 1, spec.msi_side, spec.msi_side)
    assert g(upscaled).shape == (4, 1, patch_side, patch_side)
    probabilities = d(upscaled)
    assert probabilities.shape == (4, 3)
    assert bool(((probabilities > 0) & (probabilities < 1)).all())


def test_networks_are_seeded(tiny_netspec: NetSpec) -> None:
    """Tests that one seed gives identical weights and another does not.

    Args:
        tiny_netspec (:class:`NetSpec`): Small architecture.
    """
    first, _, _ = build_networks(tiny_netspec, seed=3)
    second, _, _ = build_networks(tiny_netspec, seed=3)
    other, _, _ = build_networks(tiny_netspec, seed=4)

    for name, value in first.state_dict().items():
        assert torch.equal(value, second.state_dict()[name])
    assert not all(torch.equal(value, other.state_dict()[name]) for name, value in first.state_dict().items())


def test_networks_start_in_training_mode(tiny_netspec: NetSpec) -> None:
    """Tests that the shape probe restores training mode.

    Args:
        tiny_netspec (:class:`NetSpec`): Small architecture.
    """
    assert all(net.training for net in build_networks(tiny_netspec, seed=0))


@pytest.mark.parametrize(
    "fields, message",
    [
        ({"scale": 2, "patch_side": 4, "depth": 4}, "not divisible"),
        ({"patch_side": 1, "scale": 2, "depth": 1}, "at least 2"),
        ({"R": 0}, "net.R must be positive"),
        ({"depth": -1}, "nonnegative"),
    ],
)
def test_invalid_netspec(fields: dict, message: str) -> None:
    """Tests the architecture checks.

    Args:
        fields (dict): Invalid fields.
        message (str): Expected error fragment.
    """
    with pytest.raises(InvalidSpecError, match=message):
        NetSpec(**fields)
