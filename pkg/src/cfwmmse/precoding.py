"""Cluster-wise MMSE precoding built from a PC's collective channel matrix."""

from __future__ import annotations

import numpy as np

from .clustering import ClusterLayout


def collective_matrix(g: np.ndarray, aps, users) -> np.ndarray:
    """Stack g[m, k] for m in ``aps`` into columns: shape (..., L*|aps|, |users|).

    Row block i (rows i*L .. i*L+L-1) belongs to ``aps[i]``.
    """
    sub = g[..., aps, :, :][..., :, users, :]  # (..., C, U, L)
    sub = np.moveaxis(sub, -2, -1)  # (..., C, L, U)
    return sub.reshape(sub.shape[:-3] + (len(aps) * g.shape[-1], len(users)))


def mmse_matrix(G_hat: np.ndarray, p_blocks: np.ndarray, noise_power: float) -> np.ndarray:
    """Q = G ((P o G)^H G + noise I)^-1 for a (possibly batched) collective matrix.

    ``p_blocks`` is (C, U); each entry scales the L rows of its AP block.
    """
    n_rows, U = G_hat.shape[-2:]
    L = n_rows // p_blocks.shape[0]
    P_tilde = np.repeat(p_blocks, L, axis=0)
    gram = np.swapaxes((P_tilde * G_hat).conj(), -1, -2) @ G_hat + noise_power * np.eye(U)
    # Q gram = G  <=>  gram^T Q^T = G^T
    Qt = np.linalg.solve(np.swapaxes(gram, -1, -2), np.swapaxes(G_hat, -1, -2))
    return np.swapaxes(Qt, -1, -2)


def cluster_mmse_precoder(
    g_hat: np.ndarray,
    layout: ClusterLayout,
    p: np.ndarray,
    noise_power: float,
    s: int | None = None,
) -> np.ndarray:
    """Unit-norm per-AP precoders q[m, k] from each PC's MMSE matrix.

    ``g_hat`` is (M, K, L) or batched (n, M, K, L); ``p`` is the (M, K) power
    amplitude matrix entering the Hadamard weighting. Blocks for APs outside
    the user's PC, and all-zero blocks, are returned as zeros. With ``s``
    given only that PC is filled in.
    """
    q = np.zeros(g_hat.shape, dtype=complex)
    L = g_hat.shape[-1]
    pcs = range(layout.S) if s is None else [s]
    served = layout.served_users
    for t in pcs:
        aps, users = layout.pc_members[t], served[t]
        if len(users) == 0:
            continue
        G = collective_matrix(g_hat, aps, users)
        Q = mmse_matrix(G, p[np.ix_(aps, users)], noise_power)
        blocks = Q.reshape(Q.shape[:-2] + (len(aps), L, len(users)))
        blocks = np.moveaxis(blocks, -1, -2)  # (..., C, U, L)
        norms = np.linalg.norm(blocks, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            blocks = np.where(norms > 0, blocks / norms, 0.0)
        q[..., aps[:, None], users[None, :], :] = blocks
    return q


def mr_precoder(g_hat: np.ndarray, layout: ClusterLayout) -> np.ndarray:
    """Normalized matched filter restricted to each user's PC."""
    norms = np.linalg.norm(g_hat, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(norms > 0, g_hat / norms, 0.0)
    return q * layout.serving_mask()[..., None]
