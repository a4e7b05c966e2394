"""Processing-cluster formation, user-to-cluster selection and fronthaul budget."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario, wrap_distance


class InfeasibleFronthaulError(ValueError):
    """The per-AP fronthaul budget cannot carry even one user."""


@dataclass(frozen=True)
class FronthaulConfig:
    """eCPRI fronthaul parameters; defaults are the Table I values."""

    fh_max: float = 10e9
    m_mo: int = 32
    n_sub: int = 3264
    n_o: int = 14
    n_bits: int = 16
    n_gran: int = 136
    eps_cp: float = 0.85
    delta_da: float = 5e-4
    delta_pr: float = 2e-4

    def __post_init__(self):
        if self.m_mo < 2 or (self.m_mo & (self.m_mo - 1)):
            raise ValueError(f"m_mo must be a power of two >= 2, got {self.m_mo}")
        if not 0 < self.eps_cp <= 1:
            raise ValueError("eps_cp must lie in (0, 1]")
        for name in ("fh_max", "n_sub", "n_o", "n_bits", "n_gran", "delta_da", "delta_pr"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def alpha1(self) -> float:
        return self.n_sub * self.n_o / (self.eps_cp * self.delta_da)

    def alpha2(self, L: int) -> float:
        return 2 * L * self.n_bits * self.n_gran / (self.eps_cp * self.delta_pr)

    def per_user_rate(self, L: int) -> float:
        """Fronthaul bits/s consumed by one served user (data + precoder)."""
        return self.alpha1 * math.log2(self.m_mo) + self.alpha2(L)

    @property
    def se_cap(self) -> float:
        return math.log2(self.m_mo)


def compute_k_max(cfg: FronthaulConfig, L: int) -> int:
    """Largest number of users an AP may serve within ``cfg.fh_max``."""
    ratio = cfg.fh_max / cfg.per_user_rate(L)
    # guard exact multiples against rounding just below the integer
    k_max = int(math.floor(ratio * (1 + 1e-12)))
    if k_max < 1:
        raise InfeasibleFronthaulError(
            f"fh_max={cfg.fh_max:g} b/s is below the cost of one user ({cfg.per_user_rate(L):g} b/s)"
        )
    return k_max


def fronthaul_load(cfg: FronthaulConfig, L: int, users_served) -> float:
    """FH_da + FH_pr for an AP serving ``users_served`` users."""
    return np.asarray(users_served) * cfg.per_user_rate(L)


@dataclass(frozen=True, eq=False)
class ClusterLayout:
    pc_members: tuple[np.ndarray, ...]
    user_pc: np.ndarray
    t: np.ndarray

    @property
    def S(self) -> int:
        return len(self.pc_members)

    @property
    def served_users(self) -> tuple[np.ndarray, ...]:
        return tuple(np.flatnonzero(self.user_pc == s) for s in range(self.S))

    def other_users(self, s: int) -> np.ndarray:
        return np.flatnonzero(self.user_pc != s)

    @property
    def ap_pc(self) -> np.ndarray:
        M = sum(len(c) for c in self.pc_members)
        out = np.empty(M, dtype=int)
        for s, members in enumerate(self.pc_members):
            out[members] = s
        return out

    def serving_mask(self) -> np.ndarray:
        """Boolean (M, K): AP m may serve user k (same PC)."""
        return self.ap_pc[:, None] == self.user_pc[None, :]


def _torus_mean(points: np.ndarray, side: float) -> np.ndarray:
    ang = 2 * np.pi * points / side
    z = np.exp(1j * ang).mean(axis=0)
    return (np.angle(z) % (2 * np.pi)) * side / (2 * np.pi)


def _kmeans_torus(pos: np.ndarray, S: int, side: float, rng: np.random.Generator, n_iter: int = 100):
    M = len(pos)
    # k-means++ seeding
    centers = [pos[rng.integers(M)]]
    for _ in range(1, S):
        d2 = np.min(wrap_distance(pos[:, None, :], np.array(centers)[None], side) ** 2, axis=1)
        if d2.sum() == 0:
            centers.append(pos[rng.integers(M)])
        else:
            centers.append(pos[rng.choice(M, p=d2 / d2.sum())])
    centers = np.array(centers)
    labels = np.full(M, -1)
    for _ in range(n_iter):
        new = np.argmin(wrap_distance(pos[:, None, :], centers[None], side), axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        for s in range(S):
            if np.any(labels == s):
                centers[s] = _torus_mean(pos[labels == s], side)
    return labels, centers


def form_pcs_geographic(scenario: Scenario, S: int, seed: int = 0) -> tuple[np.ndarray, ...]:
    """Group APs into S balanced, spatially compact processing clusters.

    Toroidal k-means, then the largest cluster hands its AP farthest from
    its centroid to the smallest cluster until sizes differ by at most one.
    """
    M = scenario.M
    if not 1 <= S <= M:
        raise ValueError(f"S must lie in [1, {M}], got {S}")
    if S == 1:
        return (np.arange(M),)
    pos, side = scenario.ap_positions, scenario.area_side
    labels, centers = _kmeans_torus(pos, S, side, np.random.default_rng(seed))
    while True:
        sizes = np.bincount(labels, minlength=S)
        big, small = int(np.argmax(sizes)), int(np.argmin(sizes))
        if sizes[big] - sizes[small] <= 1:
            break
        members = np.flatnonzero(labels == big)
        dist = wrap_distance(pos[members], centers[big], side)
        labels[members[np.argmax(dist)]] = small
    groups = [np.flatnonzero(labels == s) for s in range(S)]
    groups.sort(key=lambda g: g[0])
    return tuple(groups)


def assign_users_to_pcs(scenario_or_beta, pcs) -> ClusterLayout:
    """Each user joins the PC with the largest summed large-scale gain."""
    beta = scenario_or_beta.beta if isinstance(scenario_or_beta, Scenario) else np.asarray(scenario_or_beta)
    M, K = beta.shape
    pcs = tuple(np.sort(np.asarray(c, dtype=int)) for c in pcs)
    seen = np.concatenate(pcs)
    if len(seen) != M or not np.array_equal(np.sort(seen), np.arange(M)):
        raise ValueError("pcs must partition the AP index set")
    gain = np.stack([beta[c].sum(axis=0) for c in pcs])  # (S, K)
    user_pc = np.argmax(gain, axis=0)  # first maximum wins ties
    return ClusterLayout(pc_members=pcs, user_pc=user_pc, t=np.ones(K, dtype=int))


def build_layout(scenario: Scenario, S: int, seed: int = 0) -> ClusterLayout:
    return assign_users_to_pcs(scenario, form_pcs_geographic(scenario, S, seed=seed))
