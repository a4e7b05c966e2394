"""Configuration, state and helpers shared by the WMMSE algorithms and benchmarks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..clustering import ClusterLayout, FronthaulConfig, compute_k_max
from ..metrics import Allocation, SeReport

WEIGHT_RULES = ("uniform", "proportional_fair")
INIT_RULES = ("top_kmax",)


def dbm_to_watt(dbm: float) -> float:
    return 10 ** ((dbm - 30) / 10)


@dataclass(frozen=True)
class LinkBudget:
    """Per-AP power, noise and fronthaul budget; powers in watts."""

    power: float = 0.1
    noise_power: float = dbm_to_watt(-92.0)
    pilot_power: float = 0.1
    fronthaul: FronthaulConfig = field(default_factory=FronthaulConfig)

    def __post_init__(self):
        if self.power <= 0 or self.noise_power <= 0 or self.pilot_power <= 0:
            raise ValueError("powers must be positive")

    def k_max(self, L: int) -> int:
        return compute_k_max(self.fronthaul, L)

    @property
    def pilot_snr(self) -> float:
        return self.pilot_power / self.noise_power


@dataclass(frozen=True)
class AlgorithmConfig:
    epsilon_rel: float = 1e-4  # epsilon = epsilon_rel * P
    xi: float = 1e-3
    max_outer_iter: int = 50
    init_rule: str = "top_kmax"
    weight_rule: str = "uniform"
    activity_threshold_rel: float = 1e-6
    solver_tol: float = 1e-6
    solver_max_iter: int = 500
    n_h: int = 200
    antithetic: bool = True
    moment_refresh: int = 0

    def __post_init__(self):
        if self.epsilon_rel <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.xi < 1:
            raise ValueError("xi must lie in (0, 1)")
        if self.max_outer_iter < 0 or self.moment_refresh < 0:
            raise ValueError("iteration counts must be non-negative")
        if self.init_rule not in INIT_RULES:
            raise ValueError(f"init_rule must be one of {INIT_RULES}")
        if self.weight_rule not in WEIGHT_RULES:
            raise ValueError(f"weight_rule must be one of {WEIGHT_RULES}")
        if self.n_h < 1:
            raise ValueError("n_h must be >= 1")


@dataclass(eq=False)
class WmmseState:
    """Per-PC iterate of the WMMSE loop."""

    aps: np.ndarray
    users: np.ndarray
    u: np.ndarray
    e: np.ndarray
    rho: np.ndarray
    w: np.ndarray
    theta: np.ndarray | None = None
    iteration: int = 0

    def surrogate(self) -> float:
        """sum_k w_k (rho_k e_k - ln rho_k)."""
        return float(np.sum(self.w * (self.rho * self.e - np.log(self.rho))))


@dataclass(eq=False)
class AlgorithmResult:
    name: str
    allocation: Allocation
    report: SeReport
    history: list = field(default_factory=list)  # per PC: weighted sum pseudo-SE per outer iteration
    states: list = field(default_factory=list)
    relaxed: np.ndarray | None = None  # iterate before integer fronthaul enforcement
    status: str = "ok"
    info: dict = field(default_factory=dict)

    @property
    def iterations(self) -> list[int]:
        return [max(len(h) - 1, 0) for h in self.history]


def top_k_support(score: np.ndarray, layout: ClusterLayout, k_max: int) -> np.ndarray:
    """Binary (M, K): each AP keeps its k_max best-scoring users within its own PC.

    Ties go to the lower user index.
    """
    mask = layout.serving_mask()
    s = np.where(mask, score, -np.inf)
    order = np.argsort(-s, axis=1, kind="stable")
    a = np.zeros(score.shape, dtype=int)
    rows = np.arange(score.shape[0])[:, None]
    top = order[:, :k_max]
    a[rows, top] = 1
    return a * mask


def equal_power(a: np.ndarray, P: float) -> np.ndarray:
    """eta = P / (largest per-AP load) on every active pair."""
    load = int(a.sum(axis=1).max()) if a.size else 0
    if load == 0:
        return np.zeros(a.shape)
    return a * (P / load)


def hard_enforce(q_bar: np.ndarray, k_max: int, P: float, threshold: float, binding_rtol: float = 1e-4):
    """Make per-AP association counts integer-feasible.

    Per AP: keep the k_max pairs with the largest ||q_bar||^2 above
    ``threshold`` (ties by user index) and zero the rest. If pairs were
    dropped and the AP's power was binding, rescale the survivors back to the
    original power. Works on (M, K, L) vectors or (M, K) real amplitudes.
    """
    vec = q_bar if q_bar.ndim == 3 else q_bar[..., None]
    power = np.sum(np.abs(vec) ** 2, axis=-1)
    order = np.argsort(-power, axis=1, kind="stable")
    keep = np.zeros(power.shape, dtype=bool)
    rows = np.arange(power.shape[0])[:, None]
    keep[rows, order[:, :k_max]] = True
    keep &= power > threshold
    out = np.where(keep[..., None], vec, 0.0)
    before = power.sum(axis=1)
    after = np.sum(np.abs(out) ** 2, axis=(1, 2))
    dropped = (keep == 0) & (power > 0)
    rescale = dropped.any(axis=1) & (before >= P * (1 - binding_rtol)) & (after > 0)
    factor = np.ones(power.shape[0])
    factor[rescale] = np.sqrt(np.minimum(before[rescale], P) / after[rescale])
    out = out * factor[:, None, None]
    return out if q_bar.ndim == 3 else out[..., 0]


def update_fairness_weights(history, n: int, floor: float = 1e-3) -> np.ndarray:
    """Proportional-fair weights 1/max(mean past SE, floor); uniform with no history.

    ``history`` is an (n_past, K) array of per-user SE, or a length-K vector
    of running means; ``n`` is the 1-based index of the upcoming run.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    history = np.asarray(history, dtype=float)
    K = history.shape[-1]
    if n == 1 or history.size == 0:
        return np.ones(K)
    mean = history.mean(axis=0) if history.ndim == 2 else history
    return 1.0 / np.maximum(mean, floor)
