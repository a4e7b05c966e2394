"""SINR, SLINR, pseudo-SE and hardening-bound performance metrics."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .channel import PilotConfig, draw_channel_batch
from .clustering import ClusterLayout

log = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-12


def seed_sequence(seed) -> np.random.SeedSequence:
    """Accept an int, a sequence of ints or an existing SeedSequence."""
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


class AllocationError(ValueError):
    """An allocation violates a power, fronthaul or structural invariant."""


@dataclass(eq=False)
class Allocation:
    """Association bits, power coefficients and unit-norm precoders.

    ``q`` may be None for statistical-CSI allocations, whose precoders are
    recomputed per realization from the estimate. ``sign`` (entries +-1)
    records a precoder sign flip folded into the amplitude.
    """

    a: np.ndarray
    eta: np.ndarray
    q: np.ndarray | None = None
    sign: np.ndarray | None = None

    @property
    def p(self) -> np.ndarray:
        """Amplitudes a*sqrt(eta), shape (M, K), with any sign flip applied."""
        p = self.a * np.sqrt(self.eta)
        return p if self.sign is None else p * self.sign

    @property
    def q_bar(self) -> np.ndarray:
        if self.q is None:
            raise AttributeError("allocation carries no precoder vectors")
        return self.p[..., None] * self.q

    @classmethod
    def from_q_bar(cls, q_bar: np.ndarray, threshold: float = 0.0) -> "Allocation":
        power = np.sum(np.abs(q_bar) ** 2, axis=-1)
        a = (power > threshold).astype(int)
        with np.errstate(invalid="ignore", divide="ignore"):
            q = np.where(a[..., None] > 0, q_bar / np.sqrt(power)[..., None], 0.0)
        return cls(a=a, eta=power * a, q=q)

    def ap_power(self) -> np.ndarray:
        if self.q is None:
            return np.sum(self.a * self.eta, axis=1)
        return np.sum(np.abs(self.q_bar) ** 2, axis=(1, 2))

    def load(self) -> np.ndarray:
        return self.a.sum(axis=1)


def check_allocation(alloc: Allocation, P: float, k_max: int, rtol: float = 1e-6) -> None:
    """Raise AllocationError unless every invariant of ``alloc`` holds."""
    problems = []
    if not np.all(np.isin(alloc.a, (0, 1))):
        problems.append("a is not binary")
    if np.any(alloc.eta < 0):
        problems.append("negative eta")
    if np.any((alloc.eta > 0) & (alloc.a == 0)):
        problems.append("eta > 0 on an unassociated pair")
    if alloc.q is not None:
        norms = np.linalg.norm(alloc.q, axis=-1)
        bad = (alloc.a == 1) & (np.abs(norms - 1) > 1e-9)
        if np.any(bad):
            problems.append(f"{int(bad.sum())} active precoders are not unit norm")
    power = alloc.ap_power()
    if np.any(power > P * (1 + rtol)):
        problems.append(f"per-AP power {power.max():.6g} exceeds P={P:.6g}")
    load = alloc.load()
    if np.any(load > k_max):
        problems.append(f"an AP serves {int(load.max())} users, k_max={k_max}")
    if problems:
        raise AllocationError("; ".join(problems))


# ---------------------------------------------------------------------------
# instantaneous CSI


def _gain_matrix(q_bar: np.ndarray, g: np.ndarray, aps=None) -> np.ndarray:
    """Z[k, j] = sum_m g[m,k]^H q_bar[m,j] over ``aps`` (all APs by default)."""
    if aps is not None:
        g, q_bar = g[aps], q_bar[aps]
    return np.einsum("mkl,mjl->kj", g.conj(), q_bar)


def instantaneous_sinr(alloc_or_qbar, g: np.ndarray, k: int | None = None, noise_power: float = 1.0):
    """Network-wide SINR of user ``k`` (all users when k is None)."""
    q_bar = alloc_or_qbar.q_bar if isinstance(alloc_or_qbar, Allocation) else alloc_or_qbar
    Z = np.abs(_gain_matrix(q_bar, g)) ** 2
    signal = np.diag(Z).copy()
    interference = Z.sum(axis=1) - signal
    sinr = signal / (interference + noise_power)
    return sinr if k is None else float(sinr[k])


def slinr(alloc_or_qbar, g: np.ndarray, layout: ClusterLayout, k: int | None = None, noise_power: float = 1.0):
    """Signal over intra-cluster interference plus leakage plus noise.

    Each user is evaluated against its own PC: desired signal and
    intra-cluster interference come from that PC's APs, and leakage is what
    those APs radiate towards the users of other PCs (scaled by ``layout.t``).
    """
    q_bar = alloc_or_qbar.q_bar if isinstance(alloc_or_qbar, Allocation) else alloc_or_qbar
    K = g.shape[1]
    out = np.zeros(K)
    served = layout.served_users
    pcs = range(layout.S) if k is None else [int(layout.user_pc[k])]
    for s in pcs:
        users = served[s]
        if len(users) == 0:
            continue
        others = layout.other_users(s)
        Z = np.abs(_gain_matrix(q_bar, g, layout.pc_members[s])) ** 2  # (K, K)
        ds = Z[users, users]
        ici = Z[np.ix_(users, users)].sum(axis=1) - ds
        leak = (layout.t[others, None] * Z[np.ix_(others, users)]).sum(axis=0)
        out[users] = ds / (ici + leak + noise_power)
    return out if k is None else float(out[k])


def pseudo_se(slinr_value):
    """log2(1 + SLINR)."""
    return np.log2(1 + np.asarray(slinr_value))


def post_process_cap(se, m_mo: int):
    """Cap an SE at the modulation entropy log2(m_mo)."""
    return np.minimum(se, np.log2(m_mo))


# ---------------------------------------------------------------------------
# hardening bound


@dataclass(eq=False)
class HardeningMoments:
    """Network-wide expectation terms of the hardening bound.

    d[m, k] = |E{g_mk^H q_mk}| and B[k, j, l, m] = Re E{g_lk^H q_lj q_mj^H g_mk}.
    Cluster-local d~, B~, F~ are sub-blocks of these; see :meth:`local`.
    """

    d: np.ndarray
    B: np.ndarray
    n_h: int
    d_complex: np.ndarray | None = field(default=None, repr=False)

    def local(self, layout: ClusterLayout, s: int) -> dict:
        """Cluster-local moments of PC ``s``.

        Returns d (U, C), B (U, U, C, C) for pairs inside the PC and the summed
        leakage matrices F (U, C, C), F[k] = sum over outside users j of t_j * F~_kj.
        """
        aps = layout.pc_members[s]
        users = layout.served_users[s]
        others = layout.other_users(s)
        d = self.d[np.ix_(aps, users)].T
        B = self.B[np.ix_(users, users, aps, aps)]
        F = np.einsum("j,jkab->kab", layout.t[others].astype(float), self.B[np.ix_(others, users, aps, aps)])
        return {"aps": aps, "users": users, "d": d, "B": B, "F": F}


PrecoderRule = Callable[[np.ndarray], np.ndarray]


def estimate_hardening_moments(
    beta: np.ndarray,
    L: int,
    precoder_rule: PrecoderRule,
    pilot: PilotConfig,
    n_h: int = 200,
    seed=0,
    chunk: int = 50,
    antithetic: bool = True,
    workers: int = 1,
    channel_scale: float = 1.0,
) -> HardeningMoments:
    """Monte Carlo estimate of the hardening moments.

    ``precoder_rule`` maps a batch of estimates (n, M, K, L) to unit-norm
    precoders of the same shape. With ``antithetic`` each draw is paired with
    its complex conjugate (the joint law is conjugation invariant), which makes
    the estimated E{g^H q} exactly real. Chunks use seeds spawned from ``seed``
    and are reduced in chunk order, so the result does not depend on ``workers``.
    ``channel_scale`` multiplies every drawn channel and estimate (e.g. 1/sigma
    to work in noise-normalized units).
    """
    if n_h < 1:
        raise ValueError("n_h must be >= 1")
    base = n_h // 2 if antithetic and n_h > 1 else n_h
    sizes = [min(chunk, base - i) for i in range(0, base, chunk)]
    seeds = seed_sequence(seed).spawn(len(sizes))

    def work(args):
        size, ss = args
        g, g_hat = draw_channel_batch(beta, L, pilot, size, np.random.default_rng(ss))
        g, g_hat = g * channel_scale, g_hat * channel_scale
        if antithetic and n_h > 1:
            g = np.concatenate([g, g.conj()])
            g_hat = np.concatenate([g_hat, g_hat.conj()])
        x = kernels.effective_gains(g, precoder_rule(g_hat))
        d, b = kernels.moment_sums(x)
        return d, b, x.shape[0]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, zip(sizes, seeds)))
    else:
        parts = [work(a) for a in zip(sizes, seeds)]
    total = sum(p[2] for p in parts)
    d_sum = parts[0][0].copy()
    b_sum = parts[0][1].copy()
    for d, b, _ in parts[1:]:
        d_sum += d
        b_sum += b
    d_mean = d_sum / total
    return HardeningMoments(d=np.abs(d_mean), B=b_sum / total, n_h=total, d_complex=d_mean)


def _floor_denominator(den: np.ndarray, what: str) -> np.ndarray:
    bad = den <= 0
    if np.any(bad):
        log.warning("%s: %d non-positive denominators clipped to %g", what, int(bad.sum()), DENOMINATOR_FLOOR)
        den = np.where(bad, DENOMINATOR_FLOOR, den)
    return den


def hardening_terms(moments: HardeningMoments, p: np.ndarray):
    """(signal amplitude d_k^T p_k, total received power sum_j p_j^T B_kj p_j) per user."""
    amp = np.einsum("mk,mk->k", moments.d, p)
    total = np.einsum("kjlm,lj,mj->k", moments.B, p, p)
    return amp, total


def hardening_sinr(moments: HardeningMoments, p: np.ndarray, k: int | None = None, noise_power: float = 1.0, strict=False):
    """Hardening-bound SINR with network-wide moments; ``p`` is (M, K) of a*sqrt(eta)."""
    amp, total = hardening_terms(moments, p)
    num = amp**2
    den = total - num + noise_power
    if strict and np.any(den <= 0):
        raise FloatingPointError("non-positive hardening SINR denominator")
    sinr = num / _floor_denominator(den, "hardening_sinr")
    return sinr if k is None else float(sinr[k])


def local_hardening_terms(local: dict, p_local: np.ndarray):
    """Per-user (amplitude, total power incl. leakage) inside one PC; p_local is (C, U)."""
    amp = np.einsum("uc,cu->u", local["d"], p_local)
    intra = np.einsum("kjab,aj,bj->k", local["B"], p_local, p_local)
    leak = np.einsum("kab,ak,bk->k", local["F"], p_local, p_local)
    return amp, intra + leak


def hardening_slinr(
    moments: HardeningMoments,
    p: np.ndarray,
    layout: ClusterLayout,
    k: int | None = None,
    noise_power: float = 1.0,
    strict=False,
):
    """Hardening-bound SLINR, cluster-local with leakage to other PCs' users."""
    out = np.zeros(p.shape[1])
    pcs = range(layout.S) if k is None else [int(layout.user_pc[k])]
    for s in pcs:
        loc = moments.local(layout, s)
        if len(loc["users"]) == 0:
            continue
        amp, total = local_hardening_terms(loc, p[np.ix_(loc["aps"], loc["users"])])
        num = amp**2
        den = total - num + noise_power
        if strict and np.any(den <= 0):
            raise FloatingPointError("non-positive hardening SLINR denominator")
        out[loc["users"]] = num / _floor_denominator(den, "hardening_slinr")
    return out if k is None else float(out[k])


# ---------------------------------------------------------------------------
# reporting


@dataclass(eq=False)
class SeReport:
    sinr: np.ndarray
    se: np.ndarray
    pseudo_se: np.ndarray
    se_post: np.ndarray
    pc_weighted_pseudo_se: np.ndarray

    @property
    def sum_se(self) -> float:
        return float(self.se.sum())

    @property
    def sum_se_post(self) -> float:
        return float(self.se_post.sum())

    @property
    def sum_pseudo_se(self) -> float:
        return float(self.pseudo_se.sum())


def make_report(sinr, pseudo, layout: ClusterLayout, m_mo: int, weights=None) -> SeReport:
    sinr = np.asarray(sinr, dtype=float)
    se = np.log2(1 + sinr)
    pseudo = np.asarray(pseudo, dtype=float)
    w = np.ones_like(pseudo) if weights is None else np.asarray(weights, dtype=float)
    pcs = np.array([np.sum(w[u] * pseudo[u]) for u in layout.served_users])
    return SeReport(sinr=sinr, se=se, pseudo_se=pseudo, se_post=post_process_cap(se, m_mo), pc_weighted_pseudo_se=pcs)
