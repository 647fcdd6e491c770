"""Hot kernels: compiled when the Cython extension is built, numpy otherwise.

Set ``INVFIM_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` names the
implementation that was picked.
"""

import os

import numpy as np

from invfim._kernels import _pykernels

_c = None
if os.environ.get("INVFIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from invfim._kernels import _ckernels as _c
    except ImportError:
        _c = None

BACKEND = "cython" if _c is not None else "python"
_impl = _c if _c is not None else _pykernels


def pivot(T, r, s):
    if _c is not None and T.dtype == np.float64 and T.flags.c_contiguous:
        _c.pivot(T, r, s)
    else:
        _pykernels.pivot(T, r, s)


def support_counts(rows, queries, t):
    if t > 64:
        return np.array(
            [sum(1 for a in rows if a & q == q) for q in queries], dtype=np.int64
        )
    return _impl.support_counts(rows, queries)


def enumerate_counts(hits, targets, n, absolute):
    return _impl.enumerate_counts(hits, targets, n, absolute)
