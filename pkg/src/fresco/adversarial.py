"""Adversarial abundance translation (hyperspectral super-resolution).

A shared translator ``f`` maps low-resolution HSI abundance patches onto the
MSI resolution. A multi-head discriminator ``d`` tells translated patches of
material ``r`` apart from MSI patches of the same material, and an inverse
mapper ``g`` keeps ``f`` invertible and mean preserving.

Patch batches are ``R x n x side x side`` stacks with one slice per material.
"""

import contextlib
import dataclasses
import logging

from typing import Callable, Protocol, runtime_checkable

import numpy as np
import torch
from torch import nn
from tqdm import tqdm

from .exceptions import ConfigError, InvalidSpecError, NumericAbortError
from .networks import DTYPE, NetSpec, build_networks
from .patches import draw_patch_locations, extract_patch_stack, slide_stitch
from .tensor_core import AbundanceSet, SpectralCube, assemble_lmm

logger = logging.getLogger(__name__)

PROBABILITY_CLAMP = 1e-7

Stack = torch.Tensor
StackMap = Callable[[Stack], Stack]


@dataclasses.dataclass(frozen=True)
class HsrConfig:
    """Training parameters of :func:`train_hsr`.

    Attributes:
        lambda_inv (float): Weight of the inverse penalty.
        lambda_scale (float): Weight of the patch-mean penalty.
        batch (int): Patches per material and step.
        t_max (int): Number of training iterations, even.
        lr0 (float): Initial learning rate.
        beta1 (float): First moment decay of the optimizers.
        beta2 (float): Second moment decay of the optimizers.
        rotate (bool): Draw patches with random rotations.
        log_every (int): Iterations between progress log records.
        seed (int): Seed of the weights and of the patch draws.
    """

    lambda_inv: float = 10.0
    lambda_scale: float = 15.0
    batch: int = 8
    t_max: int = 4000
    lr0: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    rotate: bool = True
    log_every: int = 100
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Raises :class:`ConfigError` when a field is out of range."""
        if self.lambda_inv < 0 or self.lambda_scale < 0:
            raise ConfigError("hsr.lambda_inv and hsr.lambda_scale must be nonnegative.")
        if self.t_max < 2 or self.t_max % 2:
            raise ConfigError(f"hsr.t_max must be a positive even number, got {self.t_max}.")
        if self.batch < 1:
            raise ConfigError(f"hsr.batch must be positive, got {self.batch}.")
        if self.lr0 <= 0:
            raise ConfigError(f"hsr.lr0 must be positive, got {self.lr0}.")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("hsr.beta1 and hsr.beta2 must lie in [0, 1).")
        if self.log_every < 1:
            raise ConfigError(f"hsr.log_every must be positive, got {self.log_every}.")


def learning_rate(t: int, config: HsrConfig) -> float:
    """Learning rate of iteration ``t``.

    Constant over the first half, then ``lr0 (1 - (t - T/2) / (2 T))``.

    Example:
        >>> learning_rate(4000, HsrConfig(t_max=4000, lr0=1e-4))
        7.5e-05
    """
    half = config.t_max / 2
    if t < half:
        return config.lr0
    return config.lr0 * (1.0 - (t - half) / (2.0 * config.t_max))


@runtime_checkable
class PatchSampler(Protocol):
    """Source of unpaired HSI and MSI abundance patch batches."""

    def hsi_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Returns ``R x n x B_H x B_H`` co-located HSI patches."""

    def msi_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Returns ``R x n x B_M x B_M`` co-located MSI patches."""


@dataclasses.dataclass(frozen=True)
class MapPatchSampler:
    """Draws patches at random centers and rotations from abundance maps."""

    hsi_maps: np.ndarray
    msi_maps: np.ndarray
    patch_side: int
    scale: int
    rotate: bool = True

    def hsi_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        locations = draw_patch_locations(self.hsi_maps.shape[1:], n, self.patch_side, rng, self.rotate)
        return extract_patch_stack(self.hsi_maps, locations, self.patch_side)

    def msi_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        side = self.patch_side * self.scale
        locations = draw_patch_locations(self.msi_maps.shape[1:], n, side, rng, self.rotate)
        return extract_patch_stack(self.msi_maps, locations, side)


class PerMaterial(nn.Module):
    """Applies one shared network, or one network per material, to a patch stack."""

    def __init__(self, nets):
        super().__init__()
        self.nets = nn.ModuleList(nets)

    @property
    def shared(self) -> bool:
        """bool: True when every material uses the same network."""
        return len(self.nets) == 1

    def net_for(self, material: int) -> nn.Module:
        """Returns the network applied to ``material``."""
        return self.nets[0] if self.shared else self.nets[material]

    def forward(self, stack: Stack) -> Stack:
        R, n = stack.shape[:2]
        if self.shared:
            out = self.nets[0](stack.reshape(R * n, 1, *stack.shape[2:]))
            return out.reshape(R, n, *out.shape[2:])
        return torch.stack([net(stack[r].unsqueeze(1)).squeeze(1) for r, net in enumerate(self.nets)])


def head_probabilities(d: Callable[[torch.Tensor], torch.Tensor], stack: Stack) -> torch.Tensor:
    """Runs ``d`` on every patch and keeps head ``r`` for material ``r``, clamped.

    Returns:
        torch.Tensor: ``R x n`` probabilities in ``[1e-7, 1 - 1e-7]``.
    """
    R, n = stack.shape[:2]
    out = d(stack.reshape(R * n, 1, *stack.shape[2:])).reshape(R, n, -1)
    heads = torch.arange(R)
    return out[heads, :, heads].clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)


def discriminator_loss(d, real: Stack, fake: Stack) -> torch.Tensor:
    """``-sum_r [mean log d_r(real_r) + mean log(1 - d_r(fake_r))]``."""
    real_term = torch.log(head_probabilities(d, real)).mean(dim=1)
    fake_term = torch.log(1.0 - head_probabilities(d, fake)).mean(dim=1)
    return -(real_term + fake_term).sum()


def generator_loss(d, fake: Stack) -> torch.Tensor:
    """Non-saturating translator loss ``-sum_r mean log d_r(fake_r)``."""
    return -torch.log(head_probabilities(d, fake)).mean(dim=1).sum()


def loss_dm(f: StackMap, d, msi_batch: Stack, hsi_batch: Stack) -> tuple[torch.Tensor, torch.Tensor]:
    """Distribution matching losses of the discriminator and of the translator.

    Args:
        f (Callable): Stack translator.
        d (Callable): Multi-head discriminator on ``N x 1 x B_M x B_M`` patches.
        msi_batch (torch.Tensor): Real ``R x n x B_M x B_M`` MSI patches.
        hsi_batch (torch.Tensor): ``R x n x B_H x B_H`` HSI patches.

    Returns:
        tuple[torch.Tensor, torch.Tensor]: ``(d_loss, f_loss)``.
    """
    fake = f(hsi_batch)
    return discriminator_loss(d, msi_batch, fake), generator_loss(d, fake)


def _inverse_penalty(hsi: Stack, hsi_cycle: Stack, msi: Stack, msi_cycle: Stack) -> torch.Tensor:
    hsi_term = ((hsi_cycle - hsi) ** 2).sum(dim=(2, 3)).mean(dim=1)
    msi_term = ((msi_cycle - msi) ** 2).sum(dim=(2, 3)).mean(dim=1)
    return (hsi_term + msi_term).sum()


def _scale_penalty(hsi: Stack, translated: Stack, msi: Stack, reduced: Stack) -> torch.Tensor:
    hsi_term = ((translated.mean(dim=(2, 3)) - hsi.mean(dim=(2, 3))) ** 2).mean(dim=1)
    msi_term = ((reduced.mean(dim=(2, 3)) - msi.mean(dim=(2, 3))) ** 2).mean(dim=1)
    return (hsi_term + msi_term).sum()


def loss_inv(f: StackMap, g: StackMap, hsi_batch: Stack, msi_batch: Stack) -> torch.Tensor:
    """``sum_r [mean ||g(f(h)) - h||_F^2 + mean ||f(g(m)) - m||_F^2]``."""
    return _inverse_penalty(hsi_batch, g(f(hsi_batch)), msi_batch, f(g(msi_batch)))


def loss_scale(f: StackMap, g: StackMap, hsi_batch: Stack, msi_batch: Stack) -> torch.Tensor:
    """``sum_r [mean (mu(f(h)) - mu(h))^2 + mean (mu(g(m)) - mu(m))^2]`` over patch means ``mu``."""
    return _scale_penalty(hsi_batch, f(hsi_batch), msi_batch, g(msi_batch))


@runtime_checkable
class PatchTranslator(Protocol):
    """Anything that super-resolves abundance windows of one material."""

    scale: int
    patch_side: int

    def translate(self, material: int, windows: np.ndarray) -> np.ndarray:
        """Maps ``N x B_H x B_H`` windows to ``N x B_M x B_M`` patches."""


@contextlib.contextmanager
def _evaluating(*modules: nn.Module):
    modes = [module.training for module in modules]
    for module in modules:
        module.eval()
    try:
        with torch.no_grad():
            yield
    finally:
        for module, mode in zip(modules, modes):
            module.train(mode)


@dataclasses.dataclass
class TranslatorState:
    """Trained networks, optimizer moments and loss history.

    Attributes:
        f (:class:`PerMaterial`): Translator(s).
        g (:class:`PerMaterial`): Inverse mapper(s).
        d (torch.nn.Module): Multi-head discriminator.
        netspec (:class:`NetSpec`): Architecture.
        config (:class:`HsrConfig`): Training parameters.
        generator_optimizer (torch.optim.Adam): Optimizer of ``f`` and ``g``.
        discriminator_optimizer (torch.optim.Adam): Optimizer of ``d``.
        iteration (int): Completed training iterations.
        history (list[tuple[float, float, float, float]]): Per-iteration
            ``(d_loss, f_loss, inverse, scale)``.
    """

    f: PerMaterial
    g: PerMaterial
    d: nn.Module
    netspec: NetSpec
    config: HsrConfig
    generator_optimizer: torch.optim.Optimizer
    discriminator_optimizer: torch.optim.Optimizer
    iteration: int = 0
    history: list = dataclasses.field(default_factory=list)

    @property
    def scale(self) -> int:
        """int: Upscaling factor."""
        return self.netspec.scale

    @property
    def patch_side(self) -> int:
        """int: HSI patch side."""
        return self.netspec.patch_side

    @property
    def shared(self) -> bool:
        """bool: True for a single translator shared by every material."""
        return self.f.shared

    def translate(self, material: int, windows: np.ndarray, chunk: int = 256) -> np.ndarray:
        """Translates ``N x B_H x B_H`` windows of ``material`` in evaluation mode."""
        net = self.f.net_for(material)
        windows = np.asarray(windows, dtype=np.float64)
        outputs = []
        with _evaluating(net):
            for start in range(0, len(windows), chunk):
                batch = torch.from_numpy(windows[start : start + chunk]).unsqueeze(1).to(DTYPE)
                outputs.append(net(batch).squeeze(1).numpy())
        return np.concatenate(outputs, axis=0)


def new_state(netspec: NetSpec, config: HsrConfig, seed: int, shared: bool = True) -> TranslatorState:
    """Builds freshly initialized networks and optimizers."""
    f, g, d = build_networks(netspec, seed)
    translators, inverses = [f], [g]
    if not shared:
        for material in range(1, netspec.R):
            f_r, g_r, _ = build_networks(netspec, seed + material)
            translators.append(f_r)
            inverses.append(g_r)
    f_stack, g_stack = PerMaterial(translators), PerMaterial(inverses)
    betas = (config.beta1, config.beta2)
    return TranslatorState(
        f=f_stack,
        g=g_stack,
        d=d,
        netspec=netspec,
        config=config,
        generator_optimizer=torch.optim.Adam(
            list(f_stack.parameters()) + list(g_stack.parameters()), lr=config.lr0, betas=betas
        ),
        discriminator_optimizer=torch.optim.Adam(d.parameters(), lr=config.lr0, betas=betas),
    )


def _gradients_finite(parameters) -> bool:
    return all(p.grad is None or bool(torch.isfinite(p.grad).all()) for p in parameters)


def train_translator(
    sampler: PatchSampler,
    config: HsrConfig,
    netspec: NetSpec,
    seed: int | None = None,
    shared: bool = True,
    progress: bool = False,
) -> TranslatorState:
    """Runs the alternating adversarial training on patches from ``sampler``.

    Every iteration draws fresh HSI and MSI batches, takes one discriminator
    step on the distribution matching loss, then one step of ``f`` and ``g`` on
    the non-saturating translator loss plus the weighted inverse and scale
    penalties.

    Args:
        sampler (:class:`PatchSampler`): Patch source.
        config (:class:`HsrConfig`): Training parameters.
        netspec (:class:`NetSpec`): Architecture.
        seed (int, optional): Seed of weights and draws. Defaults to ``config.seed``.
        shared (bool, optional): One translator for every material; False
            trains one translator per material. Defaults to True.
        progress (bool, optional): Show a progress bar. Defaults to False.

    Raises:
        NumericAbortError: If a loss or gradient becomes non-finite; the error
            carries the last good state.

    Returns:
        :class:`TranslatorState`: The trained state.
    """
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    state = new_state(netspec, config, seed, shared)
    generator_parameters = list(state.f.parameters()) + list(state.g.parameters())

    for t in tqdm(range(config.t_max), desc="train-hsr", disable=not progress):
        lr = learning_rate(t, config)
        for optimizer in (state.generator_optimizer, state.discriminator_optimizer):
            for group in optimizer.param_groups:
                group["lr"] = lr

        hsi = torch.from_numpy(sampler.hsi_batch(config.batch, rng)).to(DTYPE)
        msi = torch.from_numpy(sampler.msi_batch(config.batch, rng)).to(DTYPE)

        state.discriminator_optimizer.zero_grad()
        with torch.no_grad():
            fake = state.f(hsi)
        d_loss = discriminator_loss(state.d, msi, fake)
        d_loss.backward()
        if not torch.isfinite(d_loss) or not _gradients_finite(state.d.parameters()):
            raise NumericAbortError("Non-finite discriminator loss or gradient", t - 1, state)
        state.discriminator_optimizer.step()

        state.generator_optimizer.zero_grad()
        translated = state.f(hsi)
        reduced = state.g(msi)
        f_loss = generator_loss(state.d, translated)
        inverse = _inverse_penalty(hsi, state.g(translated), msi, state.f(reduced))
        scale = _scale_penalty(hsi, translated, msi, reduced)
        total = f_loss + config.lambda_inv * inverse + config.lambda_scale * scale
        total.backward()
        if not torch.isfinite(total) or not _gradients_finite(generator_parameters):
            raise NumericAbortError("Non-finite translator loss or gradient", t - 1, state)
        state.generator_optimizer.step()

        state.iteration = t + 1
        state.history.append((float(d_loss), float(f_loss), float(inverse), float(scale)))
        if state.iteration % config.log_every == 0:
            logger.debug(
                "Iteration %d: d_loss %.4f f_loss %.4f inverse %.4f scale %.4f (lr %.2e).",
                state.iteration,
                *state.history[-1],
                lr,
            )

    logger.info(
        "Trained %s translator for %d iterations.", "shared" if shared else "per-material", state.iteration
    )
    return state


def train_hsr(
    hsi_ab: AbundanceSet,
    msi_ab: AbundanceSet,
    config: HsrConfig,
    netspec: NetSpec,
    seed: int | None = None,
    shared: bool = True,
    progress: bool = False,
) -> TranslatorState:
    """Trains the translator on patches drawn from HSI and MSI abundance maps.

    Only the maps of ``msi_ab`` are used. See :func:`train_translator`.

    Raises:
        InvalidSpecError: If the material counts of the inputs and ``netspec``
            differ.
    """
    if not hsi_ab.R == msi_ab.R == netspec.R:
        raise InvalidSpecError(
            f"Material counts differ: HSI {hsi_ab.R}, MSI {msi_ab.R}, network {netspec.R}."
        )
    sampler = MapPatchSampler(
        hsi_ab.abundances, msi_ab.abundances, netspec.patch_side, netspec.scale, config.rotate
    )
    return train_translator(sampler, config, netspec, seed, shared, progress)


def super_resolve_abundances(state: PatchTranslator, hsi_ab: AbundanceSet, stride: int = 1) -> AbundanceSet:
    """Super-resolves every HSI abundance map window by window.

    Args:
        state (:class:`PatchTranslator`): Trained translator.
        hsi_ab (:class:`AbundanceSet`): HSI abundances and endmembers.
        stride (int, optional): Window stride. Defaults to 1.

    Returns:
        :class:`AbundanceSet`: ``(rows * s) x (cols * s)`` maps with the same endmembers.
    """
    maps = [
        slide_stitch(
            lambda windows, material=material: state.translate(material, windows),
            hsi_ab.abundances[material],
            state.patch_side,
            state.scale,
            stride,
        )
        for material in range(hsi_ab.R)
    ]
    return AbundanceSet(np.stack(maps), hsi_ab.endmembers, tolerance=np.inf)


def reconstruct_hsri(sr_abundances: AbundanceSet) -> SpectralCube:
    """Returns the HSI-region super-resolution image ``sum_r f(S_r^H) o c_r^H``."""
    return assemble_lmm(sr_abundances)
