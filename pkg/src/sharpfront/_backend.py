"""Kernel backend selection.

The compiled Cython module is used when importable; otherwise the numpy
fallback. Set ``SHARPFRONT_BACKEND=python`` to force the fallback.
"""

import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)


def _load(name):
    if name == "python":
        return _pykernels
    try:
        from . import _kernels
    except ImportError:
        if name == "compiled":
            raise
        logger.info("compiled kernels unavailable, using numpy fallback")
        return _pykernels
    return _kernels


kernels = _load(os.environ.get("SHARPFRONT_BACKEND", "auto"))
BACKEND = "python" if kernels is _pykernels else "compiled"


def get(name):
    """Return the kernel module for ``name`` in {"auto", "compiled", "python"}."""
    return _load(name)


def workers(default=1):
    """Worker count, overridable by the ``SHARPFRONT_WORKERS`` environment variable."""
    env = os.environ.get("SHARPFRONT_WORKERS")
    n = int(env) if env else int(default)
    if n < 1:
        raise ValueError("worker count must be >= 1")
    return n
