"""Picks the compiled kernels when available, else the numpy fallback.

Set ``VBDRISK_PURE_PYTHON=1`` to force the fallback.
"""

import logging
import os

from . import _fallback

log = logging.getLogger(__name__)

if os.environ.get("VBDRISK_PURE_PYTHON") == "1":
    kernels = _fallback
    NAME = "python"
else:
    try:
        from . import _kernels as kernels
        NAME = "cython"
    except ImportError:  # extension not built
        log.debug("compiled kernels unavailable, using numpy fallback")
        kernels = _fallback
        NAME = "python"

fallback = _fallback
