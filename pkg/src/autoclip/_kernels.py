"""Hot numeric kernels, numba-compiled with a pure-numpy fallback.

Set ``AUTOCLIP_DISABLE_NUMBA=1`` before import to force the numpy path
(useful for debugging and for the benchmark in ``benchmarks/``).
Both paths produce bit-identical float64 results for the inputs used here,
so the selection never affects reproducibility of reductions done row-wise.
"""

import os

import numpy as np

_DISABLE = os.environ.get("AUTOCLIP_DISABLE_NUMBA", "") not in ("", "0")


def _np_row_norms(a):
    out = np.empty(a.shape[0])
    for i in range(a.shape[0]):
        out[i] = np.sqrt(np.dot(a[i], a[i]))
    return out


def _np_weighted_row_sum(a, w):
    out = np.zeros(a.shape[1])
    for i in range(a.shape[0]):
        out += w[i] * a[i]
    return out


def _np_logistic_grads(x, y, w):
    """Per-sample gradients of log(1+exp(-y * x.w)), labels in {-1,+1}."""
    b, d = x.shape
    out = np.empty((b, d))
    for i in range(b):
        z = y[i] * np.dot(x[i], w)
        # sigmoid(-z), computed stably on either side
        if z >= 0:
            s = np.exp(-z) / (1.0 + np.exp(-z))
        else:
            s = 1.0 / (1.0 + np.exp(z))
        c = -y[i] * s
        for j in range(d):
            out[i, j] = c * x[i, j]
    return out


if _DISABLE:
    USING_NUMBA = False
    row_norms = _np_row_norms
    weighted_row_sum = _np_weighted_row_sum
    logistic_grads = _np_logistic_grads
else:
    from numba import njit

    USING_NUMBA = True
    row_norms = njit(cache=True)(_np_row_norms)
    weighted_row_sum = njit(cache=True)(_np_weighted_row_sum)
    logistic_grads = njit(cache=True)(_np_logistic_grads)
