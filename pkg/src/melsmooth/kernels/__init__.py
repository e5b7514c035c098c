"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time.  Set ``MELSMOOTH_BACKEND=numpy``
to force the fallback (numba is also skipped automatically when it is not
installed).  Both backends expose the same functions:

``smooth_axis0(x, weights)``
    Edge-replicated 1-D correlation along axis 0 of a 2-D array.
``yin_difference(frames, max_lag)``
    YIN squared-difference function for every frame.
``viterbi_banded(log_emit, log_stay, log_switch, log_trans_band, log_init)``
    Viterbi decoding over ``n_pitch`` banded pitch states plus one
    unvoiced state.
"""

import os

from . import _numpy

BACKEND_ENV = "MELSMOOTH_BACKEND"


def _select_backend():
    requested = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba":
        try:
            from . import _numba
        except ImportError:
            return "numpy", _numpy
        return "numba", _numba
    return "numpy", _numpy


BACKEND, _impl = _select_backend()

smooth_axis0 = _impl.smooth_axis0
yin_difference = _impl.yin_difference
viterbi_banded = _impl.viterbi_banded

__all__ = ["BACKEND", "smooth_axis0", "yin_difference", "viterbi_banded"]
