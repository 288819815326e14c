"""Spectral response estimation from unregistered images by moment matching.

Only per-band means and the band covariance of the HSI enter the criterion,
so the estimate does not depend on pixel order or on co-registration.
"""

import dataclasses
import logging
import pathlib

import numpy as np

from .degradation import build_pm
from .exceptions import ConfigError, InvalidSpecError, NumericAbortError
from .tensor_core import SpectralCube

logger = logging.getLogger(__name__)

_MAX_BACKTRACKS = 60


@dataclasses.dataclass(frozen=True)
class PmEstimatorConfig:
    """Parameters of :func:`estimate_pm`.

    Attributes:
        omega (frozenset[tuple[int, int]]): Entries ``(m, k)`` of ``P`` forced to zero.
        max_iters (int): Iteration cap.
        step_size (float): Initial backtracking step.
        rel_tol (float): Relative objective change that stops the solver.
        seed (int): Kept for run reproducibility records; the initialization is
            deterministic.
    """

    omega: frozenset = frozenset()
    max_iters: int = 2000
    step_size: float = 1.0
    rel_tol: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "omega", frozenset((int(m), int(k)) for m, k in self.omega))
        self.validate()

    def validate(self):
        """Raises :class:`ConfigError` when a field is out of range."""
        if self.max_iters < 1:
            raise ConfigError(f"pm.max_iters must be positive, got {self.max_iters}.")
        if self.step_size <= 0:
            raise ConfigError(f"pm.step_size must be positive, got {self.step_size}.")
        if self.rel_tol <= 0:
            raise ConfigError(f"pm.rel_tol must be positive, got {self.rel_tol}.")
        if any(m < 0 or k < 0 for m, k in self.omega):
            raise ConfigError("pm.omega indices must be nonnegative.")


def band_stats(cube: SpectralCube) -> tuple[np.ndarray, np.ndarray]:
    """Per-band mean and population variance over all pixels.

    Example:
        >>> band_stats(SpectralCube(np.array([[[0.0], [2.0]]])))
        (array([1.]), array([1.]))
    """
    pixels = cube.pixels()
    return pixels.mean(axis=0), pixels.var(axis=0)


def banded_omega(K_H: int, K_M: int) -> frozenset:
    """Zero pattern of :func:`fresco.degradation.build_pm`."""
    P = build_pm(K_H, K_M)
    return frozenset((int(m), int(k)) for m, k in zip(*np.nonzero(P == 0.0)))


def read_omega(path: pathlib.Path | str) -> frozenset:
    """Reads forced-zero entries from a text file of ``row col`` pairs.

    Blank lines and ``#`` comments are ignored.

    Raises:
        ConfigError: If a line is not a pair of nonnegative integers.
    """
    path = pathlib.Path(path)
    entries = set()
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        fields = content.split()
        try:
            row, col = (int(field) for field in fields)
        except ValueError as error:
            raise ConfigError(f"{path}:{number}: expected 'row col', got {line.strip()!r}.") from error
        if row < 0 or col < 0:
            raise ConfigError(f"{path}:{number}: indices must be nonnegative.")
        entries.add((row, col))
    return frozenset(entries)


def _support_mask(K_M: int, K_H: int, omega: frozenset) -> np.ndarray:
    mask = np.ones((K_M, K_H), dtype=bool)
    for m, k in omega:
        if m >= K_M or k >= K_H:
            raise InvalidSpecError(f"Omega entry {(m, k)} lies outside the {K_M}x{K_H} response.")
        mask[m, k] = False
    empty = np.flatnonzero(~mask.any(axis=1))
    if empty.size:
        raise InvalidSpecError(f"Omega zeroes every entry of rows {empty.tolist()}.")
    return mask


class MomentMatching:
    """Moment matching criterion for a fixed pair of images.

    Args:
        Y_H (:class:`SpectralCube`): Observed HSI.
        Y_M (:class:`SpectralCube`): Observed MSI.
    """

    def __init__(self, Y_H: SpectralCube, Y_M: SpectralCube):
        pixels = Y_H.pixels()
        self.mean_hsi = pixels.mean(axis=0)
        self.cov_hsi = np.cov(pixels, rowvar=False, bias=True).reshape(Y_H.bands, Y_H.bands)
        self.mean_msi, self.var_msi = band_stats(Y_M)

    def residuals(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean and variance mismatches of every MSI band."""
        mean_error = P @ self.mean_hsi - self.mean_msi
        var_error = np.einsum("mk,kl,ml->m", P, self.cov_hsi, P) - self.var_msi
        return mean_error, var_error

    def objective(self, P: np.ndarray) -> float:
        """``sum_m (mu(P Y_H)_m - mu(Y_M)_m)^2 + (var(P Y_H)_m - var(Y_M)_m)^2``."""
        mean_error, var_error = self.residuals(P)
        return float(np.sum(mean_error**2) + np.sum(var_error**2))

    def gradient(self, P: np.ndarray) -> np.ndarray:
        """Gradient of :meth:`objective` with respect to ``P``."""
        mean_error, var_error = self.residuals(P)
        return 2.0 * np.outer(mean_error, self.mean_hsi) + 4.0 * var_error[:, None] * (P @ self.cov_hsi)


def initial_pm(K_M: int, K_H: int, omega: frozenset) -> np.ndarray:
    """Uniform averaging over the support of every row."""
    mask = _support_mask(K_M, K_H, omega)
    return mask / mask.sum(axis=1, keepdims=True)


def estimate_pm(Y_H: SpectralCube, Y_M: SpectralCube, config: PmEstimatorConfig) -> np.ndarray:
    """Estimates ``P`` by matching band means and variances.

    Minimizes the moment mismatch between ``P Y_H`` and ``Y_M`` by projected
    gradient with Armijo backtracking, starting from uniform averaging over the
    support. The projection clamps at zero and zeroes the entries of ``omega``.

    Args:
        Y_H (:class:`SpectralCube`): Observed HSI.
        Y_M (:class:`SpectralCube`): Observed MSI.
        config (:class:`PmEstimatorConfig`): Estimator parameters.

    Raises:
        InvalidSpecError: If ``omega`` leaves a row empty or lies out of range.
        NumericAbortError: If the gradient becomes non-finite.

    Returns:
        numpy.ndarray: ``K_M x K_H`` estimate, nonnegative with zeros on ``omega``.
    """
    K_M, K_H = Y_M.bands, Y_H.bands
    if K_M >= K_H:
        raise InvalidSpecError(f"Need fewer MSI bands than HSI bands, got K_M={K_M}, K_H={K_H}.")
    mask = _support_mask(K_M, K_H, config.omega)
    criterion = MomentMatching(Y_H, Y_M)

    def project(P):
        return np.where(mask, np.maximum(P, 0.0), 0.0)

    P = initial_pm(K_M, K_H, config.omega)
    value = criterion.objective(P)
    step = config.step_size
    iteration = 0
    for iteration in range(1, config.max_iters + 1):
        gradient = criterion.gradient(P)
        if not np.all(np.isfinite(gradient)):
            raise NumericAbortError("Non-finite gradient in the response estimator", iteration - 1, P)
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            candidate = project(P - step * gradient)
            candidate_value = criterion.objective(candidate)
            if candidate_value <= value + 1e-4 * float(np.sum(gradient * (candidate - P))):
                accepted = True
                break
            step *= 0.5
        if not accepted or np.array_equal(candidate, P):
            break
        previous, P, value = value, candidate, candidate_value
        step = min(step * 2.0, 1e6)
        if abs(previous - value) <= config.rel_tol * max(abs(previous), np.finfo(float).tiny):
            break

    logger.info("Response estimate after %d iterations, moment mismatch %.3e.", iteration, value)
    return P
