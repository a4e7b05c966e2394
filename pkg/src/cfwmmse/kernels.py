"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``CFWMMSE_PURE_PYTHON=1`` to force the numpy path.
"""

import os

import numpy as np

from ._ext import kernels_py

if os.environ.get("CFWMMSE_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from ._ext import kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "numpy"
_impl = _compiled if _compiled is not None else kernels_py


def effective_gains(g, q):
    """Inner products g[m,k]^H q[m,j] for a batch, shape (n, K, J, M).

    ``g`` is (n, M, K, L) and ``q`` is (n, M, J, L); a missing batch axis is added.
    """
    squeeze = g.ndim == 3
    g = np.ascontiguousarray(g[None] if squeeze else g, dtype=complex)
    q = np.ascontiguousarray(q[None] if q.ndim == 3 else q, dtype=complex)
    x = _impl.effective_gains(g, q)
    return x[0] if squeeze else x


def moment_sums(x):
    """(sum_n x[n,k,k,m] as (M, K), sum_n Re(x[n,k,j,l] x[n,k,j,m]^*) as (K, J, M, M))."""
    return _impl.moment_sums(np.ascontiguousarray(x, dtype=complex))
