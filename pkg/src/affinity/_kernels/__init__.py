"""IPFP sweep kernel with a compiled core and a numpy fallback.

The compiled extension is optional: if it failed to build (or is absent in
a source checkout) the numpy implementation is selected at import time.
``BACKEND`` records which one is active.
"""

try:
    from . import _core as _backend

    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on the build environment
    from . import _py as _backend

    BACKEND = "numpy"

log_sweep = _backend.log_sweep

__all__ = ["log_sweep", "BACKEND"]
