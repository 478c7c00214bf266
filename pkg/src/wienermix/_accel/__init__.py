"""Accelerated reduction kernels with automatic backend selection.

The compiled extension (``_fast``, Cython) is used when it imported cleanly
and the environment variable ``WIENERMIX_NO_ACCEL`` is unset/empty; otherwise
the numpy reference (``_ref``) serves the same API.  ``backend()`` reports
which one is live.  Both backends are importable directly (``_ref`` always,
``_fast`` when built) so tests and benchmarks can compare them side by side.
"""

import os

from . import _ref

if os.environ.get("WIENERMIX_NO_ACCEL"):
    _impl = _ref
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = _ref

neumaier_sum = _impl.neumaier_sum
central_moments = _impl.central_moments
hermite_batch = _impl.hermite_batch
kahan_step = _impl.kahan_step


def backend():
    """Name of the live backend: 'cython' or 'numpy'."""
    return _impl.BACKEND


__all__ = ["neumaier_sum", "central_moments", "hermite_batch", "kahan_step", "backend"]
