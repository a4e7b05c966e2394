"""Modified-WMMSE resource allocation and heuristic benchmarks."""

from ..precoding import cluster_mmse_precoder
from .benchmarks import benchmark1, benchmark2, benchmark2_powers
from .common import (
    AlgorithmConfig,
    AlgorithmResult,
    LinkBudget,
    WmmseState,
    equal_power,
    hard_enforce,
    top_k_support,
    update_fairness_weights,
)
from .instantaneous import (
    algorithm1,
    build_qcqp_instantaneous,
    mse_instantaneous,
    update_mse_instantaneous,
    update_receiver_instantaneous,
)
from .statistical import algorithm2, build_qcqp_statistical, estimate_mmse_moments, mmse_rule

__all__ = [
    "AlgorithmConfig",
    "AlgorithmResult",
    "LinkBudget",
    "WmmseState",
    "algorithm1",
    "algorithm2",
    "benchmark1",
    "benchmark2",
    "benchmark2_powers",
    "build_qcqp_instantaneous",
    "build_qcqp_statistical",
    "cluster_mmse_precoder",
    "equal_power",
    "estimate_mmse_moments",
    "hard_enforce",
    "mmse_rule",
    "mse_instantaneous",
    "top_k_support",
    "update_fairness_weights",
    "update_mse_instantaneous",
    "update_receiver_instantaneous",
]
