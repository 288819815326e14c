"""Central finite-difference gradients for checking analytic gradients."""

import logging

from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)


def finite_difference(func: Callable[[np.ndarray], float], x0: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Centered-difference gradient of ``func`` at ``x0``.

    Args:
        func (Callable): Scalar function of an array shaped like ``x0``.
        x0 (numpy.ndarray): Evaluation point, left untouched.
        eps (float, optional): Step size. Defaults to 1e-5.

    Returns:
        numpy.ndarray: Gradient estimate with the shape of ``x0``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    logger.debug("Finite difference gradient over %d entries (eps=%g).", x0.size, eps)
    grad = np.zeros_like(x0)
    x = x0.copy()
    for index in np.ndindex(x0.shape):
        x[index] = x0[index] + eps
        f_plus = func(x)
        x[index] = x0[index] - eps
        f_minus = func(x)
        x[index] = x0[index]
        grad[index] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Returns ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`` in the Frobenius norm."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)
