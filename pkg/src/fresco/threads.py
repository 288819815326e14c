"""Worker thread caps shared by the solvers and the training loop."""

import contextlib
import logging
import os

import torch
from threadpoolctl import threadpool_limits

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "FRESCO_THREADS"


def thread_count(default_cap: int = 8) -> int:
    """Returns the worker count requested through ``FRESCO_THREADS``.

    ``0``, an unset variable or an unparsable value fall back to the CPU count
    capped at ``default_cap``.
    """
    raw = os.environ.get(THREADS_ENV_VAR, "0").strip() or "0"
    try:
        requested = int(raw)
    except ValueError:
        logger.warning("Ignoring %s=%r, expected an integer.", THREADS_ENV_VAR, raw)
        requested = 0
    if requested > 0:
        return requested
    return max(1, min(default_cap, os.cpu_count() or 1))


def apply_thread_limits() -> int:
    """Caps the BLAS pools and the torch intra-op pool to :func:`thread_count`.

    Returns:
        int: The applied worker count.
    """
    count = thread_count()
    threadpool_limits(limits=count)
    torch.set_num_threads(count)
    logger.debug("Using %d worker threads.", count)
    return count


@contextlib.contextmanager
def single_threaded_blas():
    """Limits BLAS pools to one thread inside a worker of a thread pool."""
    with threadpool_limits(limits=1):
        yield
