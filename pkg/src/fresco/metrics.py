"""Image quality metrics: PSNR, SSIM and ERGAS."""

import dataclasses
import json
import logging

from typing import Any, Callable

import numpy as np
from scipy import signal

from .degradation import gaussian_kernel
from .exceptions import DimensionError, UndefinedMetricError
from .tensor_core import SpectralCube

logger = logging.getLogger(__name__)

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _check_shapes(ref: SpectralCube, est: SpectralCube):
    if ref.shape != est.shape:
        raise DimensionError(f"Cannot compare cubes of shapes {ref.shape} and {est.shape}.")


def _psnr_from_mse(mse: float, peak: float) -> float:
    if mse == 0.0:
        return PSNR_CAP
    if peak <= 0.0:
        raise UndefinedMetricError(f"PSNR needs a positive peak, got {peak}.")
    return float(10.0 * np.log10(peak**2 / mse))


def psnr(ref: SpectralCube, est: SpectralCube, peak: float | None = None) -> float:
    """Peak signal-to-noise ratio over every entry, in dB.

    Example:
        >>> ref = SpectralCube(np.zeros((2, 2, 1)))
        >>> round(psnr(ref, SpectralCube(np.full((2, 2, 1), 0.1)), peak=1.0), 6)
        20.0

    Args:
        ref (:class:`SpectralCube`): Reference cube.
        est (:class:`SpectralCube`): Estimated cube.
        peak (float, optional): Peak value. Defaults to the reference maximum.

    Raises:
        DimensionError: If the shapes differ.
        UndefinedMetricError: If the cubes differ and the peak is not positive.

    Returns:
        float: ``10 log10(peak^2 / MSE)``, capped at 100 dB for identical inputs.
    """
    _check_shapes(ref, est)
    peak = float(ref.array.max()) if peak is None else float(peak)
    mse = float(np.mean((ref.array - est.array) ** 2))
    return _psnr_from_mse(mse, peak)


def per_band_psnr(ref: SpectralCube, est: SpectralCube, peak: float | None = None) -> np.ndarray:
    """Returns the PSNR of every band, with the same peak for all bands."""
    _check_shapes(ref, est)
    peak = float(ref.array.max()) if peak is None else float(peak)
    mse = np.mean((ref.array - est.array) ** 2, axis=(0, 1))
    return np.array([_psnr_from_mse(float(value), peak) for value in mse])


def ssim(ref: np.ndarray, est: np.ndarray, peak: float | None = None) -> float:
    """Mean structural similarity of two band images.

    Local statistics use an ``11 x 11`` Gaussian window with ``sigma = 1.5``
    over every fully contained position. ``peak`` defaults to the largest
    magnitude in either image, which keeps the index symmetric.

    Args:
        ref (numpy.ndarray): Reference band image.
        est (numpy.ndarray): Estimated band image.
        peak (float, optional): Dynamic range used by the stabilizing constants.

    Raises:
        DimensionError: If the shapes differ.
        UndefinedMetricError: If the images are smaller than the window.

    Returns:
        float: Mean SSIM in ``[-1, 1]``.
    """
    x = np.asarray(ref, dtype=np.float64)
    y = np.asarray(est, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise DimensionError(f"Cannot compare images of shapes {x.shape} and {y.shape}.")
    if min(x.shape) < SSIM_WINDOW:
        raise UndefinedMetricError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}.")
    if peak is None:
        peak = max(float(np.abs(x).max()), float(np.abs(y).max()))
    if peak <= 0.0:
        peak = 1.0

    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    window = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)

    def local_mean(image):
        return signal.convolve2d(image, window, mode="valid")

    mu_x = local_mean(x)
    mu_y = local_mean(y)
    var_x = local_mean(x * x) - mu_x * mu_x
    var_y = local_mean(y * y) - mu_y * mu_y
    cov = local_mean(x * y) - mu_x * mu_y
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(numerator / denominator))


def cube_ssim(ref: SpectralCube, est: SpectralCube, peak: float | None = None) -> float:
    """Returns the band average of :func:`ssim`."""
    _check_shapes(ref, est)
    return float(np.mean([ssim(ref.band(k), est.band(k), peak) for k in range(ref.bands)]))


def ergas(ref: SpectralCube, est: SpectralCube, ratio: float) -> float:
    """Relative dimensionless global error in synthesis.

    ``100 / ratio * sqrt(mean_k (RMSE_k / mu_k)^2)`` with ``mu_k`` the mean of
    reference band ``k``.

    Args:
        ref (:class:`SpectralCube`): Reference cube.
        est (:class:`SpectralCube`): Estimated cube.
        ratio (float): Resolution ratio ``s``.

    Raises:
        DimensionError: If the shapes differ.
        UndefinedMetricError: If a reference band has zero mean.

    Returns:
        float: The ERGAS value, 0 for identical cubes.
    """
    _check_shapes(ref, est)
    means = ref.array.mean(axis=(0, 1))
    if np.any(means == 0.0):
        raise UndefinedMetricError(f"ERGAS is undefined for zero-mean bands {np.flatnonzero(means == 0.0).tolist()}.")
    rmse = np.sqrt(np.mean((ref.array - est.array) ** 2, axis=(0, 1)))
    root = float(np.sqrt(np.mean((rmse / means) ** 2)))
    return (100.0 / ratio) * root


def _format(value: float | None) -> str:
    if value is None:
        return "undefined"
    return str(float(round(value, 6)))


def _number(value: float | None) -> float | None:
    return None if value is None else float(value)


@dataclasses.dataclass(frozen=True)
class MetricReport:
    """Quality of an estimated cube against its reference.

    A metric that is undefined for the inputs is ``None``, printed as
    ``undefined``.

    Attributes:
        psnr_db (float | None): PSNR over every entry.
        ssim (float | None): Band-averaged SSIM.
        ergas (float | None): ERGAS at the evaluation ratio.
        per_band_psnr (tuple[float, ...]): PSNR of every band, empty when undefined.
    """

    psnr_db: float | None
    ssim: float | None
    ergas: float | None
    per_band_psnr: tuple[float, ...]

    def to_text(self) -> str:
        """Fixed-order ``key=value`` report; perceptual metrics are not computed."""
        return (
            f"psnr={_format(self.psnr_db)} ssim={_format(self.ssim)} ergas={_format(self.ergas)} "
            "fid=unavailable lpips=unavailable"
        )

    def to_json(self) -> str:
        """Machine-readable report."""
        payload = {
            "psnr": _number(self.psnr_db),
            "ssim": _number(self.ssim),
            "ergas": _number(self.ergas),
            "per_band_psnr": [float(value) for value in self.per_band_psnr],
            "fid": None,
            "lpips": None,
        }
        return json.dumps(payload, indent=2)


def _defined(name: str, metric: Callable[..., Any], *args) -> Any:
    try:
        return metric(*args)
    except UndefinedMetricError as error:
        logger.warning("%s is undefined: %s", name, error)
        return None


def evaluate(ref: SpectralCube, est: SpectralCube, ratio: float, peak: float | None = None) -> MetricReport:
    """Computes every metric of a :class:`MetricReport`.

    A metric the inputs do not support, such as SSIM on bands smaller than its
    window, is logged and left as ``None`` while the others are still reported.

    Args:
        ref (:class:`SpectralCube`): Reference cube.
        est (:class:`SpectralCube`): Estimated cube.
        ratio (float): Resolution ratio used by ERGAS.
        peak (float, optional): Peak value. Defaults to the reference maximum.

    Raises:
        DimensionError: If the shapes differ.

    Returns:
        :class:`MetricReport`: The report.
    """
    _check_shapes(ref, est)
    peak = float(ref.array.max()) if peak is None else float(peak)
    band_psnr = _defined("Per-band PSNR", per_band_psnr, ref, est, peak)
    report = MetricReport(
        psnr_db=_defined("PSNR", psnr, ref, est, peak),
        ssim=_defined("SSIM", cube_ssim, ref, est, peak),
        ergas=_defined("ERGAS", ergas, ref, est, ratio),
        per_band_psnr=() if band_psnr is None else tuple(band_psnr.tolist()),
    )
    logger.info("Evaluation: %s", report.to_text())
    return report
