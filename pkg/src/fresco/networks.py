"""Translator, inverse mapper and multi-head discriminator networks.

Every network works on single-channel abundance patches in float64. Channel
widths are expressed relative to ``NetSpec.base_width``; the full-scale
architecture uses a base width of 64.
"""

import dataclasses
import logging

import torch
from torch import nn

from .exceptions import InvalidSpecError

logger = logging.getLogger(__name__)

DTYPE = torch.float64


@dataclasses.dataclass(frozen=True)
class NetSpec:
    """Architecture of the three networks.

    Attributes:
        scale (int): Upscaling factor ``s``.
        patch_side (int): HSI patch side ``B_H``.
        R (int): Number of materials (discriminator heads).
        base_width (int): Channel width of the first stage.
        depth (int): Number of translator encoder stages.
        batch_norm (bool): Use batch normalization inside conv blocks.
        slope (float): Negative slope of the leaky rectifiers.
        res_blocks (int): Residual blocks of the inverse mapper.
    """

    scale: int = 4
    patch_side: int = 8
    R: int = 3
    base_width: int = 8
    depth: int = 4
    batch_norm: bool = True
    slope: float = 0.2
    res_blocks: int = 2

    def __post_init__(self):
        self.validate()

    @property
    def msi_side(self) -> int:
        """int: MSI patch side ``B_M = s B_H``."""
        return self.scale * self.patch_side

    def validate(self):
        """Checks the architecture can be built.

        Raises:
            InvalidSpecError: If a size is not positive or the MSI patch side is
                not divisible by ``2**depth``.
        """
        for name in ("scale", "patch_side", "R", "base_width"):
            if getattr(self, name) < 1:
                raise InvalidSpecError(f"net.{name} must be positive, got {getattr(self, name)}.")
        if self.depth < 0 or self.res_blocks < 0:
            raise InvalidSpecError("net.depth and net.res_blocks must be nonnegative.")
        if self.msi_side % (2**self.depth):
            raise InvalidSpecError(
                f"MSI patch side {self.msi_side} is not divisible by 2**depth = {2**self.depth}."
            )
        if self.patch_side < 2:
            raise InvalidSpecError(f"net.patch_side must be at least 2, got {self.patch_side}.")


def _conv_block(in_channels: int, out_channels: int, spec: NetSpec, **kwargs) -> list[nn.Module]:
    layers = [nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1, **kwargs)]
    if spec.batch_norm:
        layers.append(nn.BatchNorm2d(out_channels))
    layers.append(nn.LeakyReLU(spec.slope))
    return layers


class _DoubleConv(nn.Sequential):
    def __init__(self, in_channels: int, out_channels: int, spec: NetSpec):
        super().__init__(*_conv_block(in_channels, out_channels, spec), *_conv_block(out_channels, out_channels, spec))


class _DecoderStage(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, spec: NetSpec):
        super().__init__()
        self.upsample = nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False)
        self.reduce = nn.Conv2d(in_channels, out_channels, kernel_size=1)
        self.convs = _DoubleConv(2 * out_channels, out_channels, spec)

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        x = self.reduce(self.upsample(x))
        return self.convs(torch.cat([skip, x], dim=1))


class Translator(nn.Module):
    """U-Net super-resolution network ``f``: ``B_H x B_H`` to ``B_M x B_M`` patches.

    Args:
        spec (:class:`NetSpec`): Architecture.
    """

    def __init__(self, spec: NetSpec):
        super().__init__()
        width = spec.base_width
        self.spec = spec
        self.upsample = nn.Upsample(scale_factor=spec.scale, mode="bilinear", align_corners=False)
        self.lift = nn.Sequential(nn.Conv2d(1, width, kernel_size=1), nn.LeakyReLU(spec.slope))
        self.stem = _DoubleConv(width, width, spec)
        self.encoders = nn.ModuleList(
            nn.Sequential(nn.MaxPool2d(2), _DoubleConv(width * 2**i, width * 2 ** (i + 1), spec))
            for i in range(spec.depth)
        )
        self.decoders = nn.ModuleList(
            _DecoderStage(width * 2 ** (i + 1), width * 2**i, spec) for i in reversed(range(spec.depth))
        )
        self.head = nn.Sequential(nn.Conv2d(width, 1, kernel_size=1), nn.LeakyReLU(spec.slope))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.stem(self.lift(self.upsample(x)))
        skips = []
        for encoder in self.encoders:
            skips.append(x)
            x = encoder(x)
        for decoder, skip in zip(self.decoders, reversed(skips)):
            x = decoder(x, skip)
        return self.head(x)


class _ResidualBlock(nn.Module):
    def __init__(self, channels: int, spec: NetSpec):
        super().__init__()
        layers = [nn.Conv2d(channels, channels, kernel_size=3, padding=1, padding_mode="reflect")]
        if spec.batch_norm:
            layers.append(nn.BatchNorm2d(channels))
        layers += [nn.LeakyReLU(spec.slope), nn.Conv2d(channels, channels, kernel_size=3, padding=1)]
        if spec.batch_norm:
            layers.append(nn.BatchNorm2d(channels))
        self.body = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class InverseMapper(nn.Module):
    """Residual downsampler ``g``: ``B_M x B_M`` to ``B_H x B_H`` patches."""

    def __init__(self, spec: NetSpec):
        super().__init__()
        width = spec.base_width
        self.body = nn.Sequential(
            nn.Conv2d(1, width, kernel_size=1),
            nn.LeakyReLU(spec.slope),
            *(_ResidualBlock(width, spec) for _ in range(spec.res_blocks)),
            nn.Conv2d(width, width, kernel_size=3, stride=spec.scale, padding=1, padding_mode="reflect"),
            nn.LeakyReLU(spec.slope),
            nn.Conv2d(width, 1, kernel_size=3, padding=1),
            nn.LeakyReLU(spec.slope),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)


class MultiHeadDiscriminator(nn.Module):
    """Strided conv stack with one logistic output per material.

    ``forward`` maps ``N x 1 x B_M x B_M`` patches to ``N x R`` probabilities;
    head ``r`` plays the role of the material-``r`` discriminator.
    """

    def __init__(self, spec: NetSpec):
        super().__init__()
        w = spec.base_width
        plain = dataclasses.replace(spec, batch_norm=False)
        self.body = nn.Sequential(
            *_conv_block(1, w, plain),
            *_conv_block(w, w, spec, stride=2),
            *_conv_block(w, 2 * w, spec),
            *_conv_block(2 * w, 2 * w, spec, stride=2),
            *_conv_block(2 * w, 4 * w, spec),
            *_conv_block(4 * w, 4 * w, spec, stride=2),
            *_conv_block(4 * w, 8 * w, plain),
            nn.Conv2d(8 * w, spec.R, kernel_size=1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.body(x).mean(dim=(2, 3)))


def build_networks(spec: NetSpec, seed: int) -> tuple[Translator, InverseMapper, MultiHeadDiscriminator]:
    """Builds and shape-checks ``(f, g, d)`` with seeded float64 weights.

    Raises:
        InvalidSpecError: If a network does not produce the expected shapes.
    """
    torch.manual_seed(seed)
    f = Translator(spec).to(DTYPE)
    g = InverseMapper(spec).to(DTYPE)
    d = MultiHeadDiscriminator(spec).to(DTYPE)

    probe = torch.zeros(2, 1, spec.patch_side, spec.patch_side, dtype=DTYPE)
    for net in (f, g, d):
        net.eval()
    with torch.no_grad():
        upscaled = f(probe)
        checks = {
            "translator": (tuple(upscaled.shape), (2, 1, spec.msi_side, spec.msi_side)),
            "inverse": (tuple(g(upscaled).shape), (2, 1, spec.patch_side, spec.patch_side)),
            "discriminator": (tuple(d(upscaled).shape), (2, spec.R)),
        }
    for net in (f, g, d):
        net.train()
    for name, (got, expected) in checks.items():
        if got != expected:
            raise InvalidSpecError(f"The {name} produces {got}, expected {expected}.")

    logger.debug(
        "Built networks with %d/%d/%d parameters.",
        *(sum(parameter.numel() for parameter in net.parameters()) for net in (f, g, d)),
    )
    return f, g, d
