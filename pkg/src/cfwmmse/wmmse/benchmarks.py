"""Heuristic benchmarks: per-AP top-k_max selection with equal power."""

from __future__ import annotations

import numpy as np

from ..clustering import ClusterLayout
from ..metrics import (
    Allocation,
    HardeningMoments,
    hardening_sinr,
    hardening_slinr,
    instantaneous_sinr,
    make_report,
    slinr,
)
from ..precoding import cluster_mmse_precoder
from .common import AlgorithmResult, LinkBudget, equal_power, top_k_support


def benchmark_support(score: np.ndarray, layout: ClusterLayout, k_max: int, P: float):
    """Association by per-AP ranking of ``score`` and the equal per-pair power."""
    a = top_k_support(score, layout, k_max)
    return a, equal_power(a, P)


def benchmark1(g: np.ndarray, layout: ClusterLayout, budget: LinkBudget, weights=None) -> AlgorithmResult:
    """Rank by instantaneous ||g_mk||^2, MMSE precoders on the true channels."""
    M, K, L = g.shape
    P = budget.power
    a, eta = benchmark_support(np.sum(np.abs(g) ** 2, axis=-1), layout, budget.k_max(L), P)
    gn = g / np.sqrt(budget.noise_power)
    p = np.sqrt(eta)
    q = cluster_mmse_precoder(gn, layout, p, 1.0)
    # a zero MMSE block cannot carry power
    a = a * (np.linalg.norm(q, axis=-1) > 0)
    alloc = Allocation(a=a, eta=eta * a, q=q * a[..., None])
    sinr = instantaneous_sinr(alloc, gn)
    pseudo = np.log2(1 + slinr(alloc, gn, layout))
    report = make_report(sinr, pseudo, layout, budget.fronthaul.m_mo, weights)
    return AlgorithmResult(name="bench1", allocation=alloc, report=report)


def benchmark2_powers(beta: np.ndarray, layout: ClusterLayout, budget: LinkBudget, L: int) -> np.ndarray:
    """(M, K) amplitudes a*sqrt(eta) of the large-scale-ranked benchmark."""
    a, eta = benchmark_support(beta, layout, budget.k_max(L), budget.power)
    return a * np.sqrt(eta)


def benchmark2(
    beta: np.ndarray,
    layout: ClusterLayout,
    budget: LinkBudget,
    L: int,
    eval_moments: HardeningMoments,
    weights=None,
) -> AlgorithmResult:
    """Rank by beta, equal power, evaluated with the hardening bound.

    ``eval_moments`` must come from the MMSE precoder built with
    :func:`benchmark2_powers` (the same rule Algorithm 2 freezes).
    """
    p = benchmark2_powers(beta, layout, budget, L)
    a = (p > 0).astype(int)
    alloc = Allocation(a=a, eta=p**2)
    sinr = hardening_sinr(eval_moments, alloc.p)
    pseudo = np.log2(1 + hardening_slinr(eval_moments, alloc.p, layout))
    report = make_report(sinr, pseudo, layout, budget.fronthaul.m_mo, weights)
    return AlgorithmResult(name="bench2", allocation=alloc, report=report)
