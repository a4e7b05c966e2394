"""Pure-numpy versions of the compiled kernels; same signatures and results."""

import numpy as np


def effective_gains(g, q):
    """x[n, k, j, m] = g[n, m, k]^H q[n, m, j]."""
    return np.einsum("nmkl,nmjl->nkjm", g.conj(), q, optimize=True)


def moment_sums(x):
    """Sums over the leading axis of x[k, k, m] and Re(x[k, j, l] conj(x[k, j, m]))."""
    K, J = x.shape[1], x.shape[2]
    kk = np.arange(min(K, J))
    d = np.zeros((x.shape[3], K), dtype=complex)
    d[:, kk] = x[:, kk, kk, :].sum(axis=0).T
    b = np.einsum("nkjl,nkjm->kjlm", x.real, x.real, optimize=True)
    b += np.einsum("nkjl,nkjm->kjlm", x.imag, x.imag, optimize=True)
    return d, b
