"""Statistical-CSI power control and association (Algorithm 2)."""

from __future__ import annotations

import numpy as np

from ..channel import PilotConfig
from ..clustering import ClusterLayout
from ..metrics import (
    DENOMINATOR_FLOOR,
    Allocation,
    HardeningMoments,
    estimate_hardening_moments,
    hardening_sinr,
    hardening_slinr,
    local_hardening_terms,
    make_report,
    seed_sequence,
)
from ..precoding import cluster_mmse_precoder
from ..solver import QcqpProblem, solve_qcqp
from .benchmarks import benchmark2_powers
from .common import AlgorithmConfig, AlgorithmResult, LinkBudget, WmmseState, hard_enforce


def mmse_rule(layout: ClusterLayout, p: np.ndarray):
    """Precoder rule for noise-normalized estimates with powers frozen at ``p``."""
    p = np.abs(p)

    def rule(g_hat):
        return cluster_mmse_precoder(g_hat, layout, p, 1.0)

    return rule


def estimate_mmse_moments(
    beta, L: int, layout: ClusterLayout, p, budget: LinkBudget, pilot: PilotConfig, n_h: int, seed, antithetic=True
) -> HardeningMoments:
    """Noise-normalized hardening moments of the cluster MMSE precoder built from ``p``."""
    return estimate_hardening_moments(
        beta,
        L,
        mmse_rule(layout, p),
        pilot,
        n_h=n_h,
        seed=seed,
        antithetic=antithetic,
        channel_scale=1 / np.sqrt(budget.noise_power),
    )


def statistical_terms(local: dict, p_local: np.ndarray):
    """Signal amplitude and interference-plus-noise per user of one PC (noise 1)."""
    amp, total = local_hardening_terms(local, p_local)
    rest = np.maximum(total - amp**2 + 1.0, DENOMINATOR_FLOOR)
    return amp, rest


def build_qcqp_statistical(local: dict, u, rho, w, theta, P: float, kcap) -> QcqpProblem:
    coef = w * rho * u**2
    A = np.einsum("k,kjab->jab", coef, local["B"]) + coef[:, None, None] * local["F"]
    c = (w * rho * u)[:, None] * local["d"]
    return QcqpProblem(A=A, c=c, block_size=1, power_cap=P, weighted_cap=kcap, weights=theta, real=True)


def _run_pc(local: dict, p0: np.ndarray, w, P: float, k_max: int, cfg: AlgorithmConfig):
    eps = cfg.epsilon_rel * P
    p = p0.copy()  # (C, U)
    history, fails, theta = [], 0, None
    for it in range(cfg.max_outer_iter + 1):
        amp, rest = statistical_terms(local, p)
        T = rest + amp**2
        u = amp / T
        e = rest / T
        rho = 1 / e
        history.append(float(np.sum(w * np.log2(1 + amp**2 / rest))))
        if it > 0 and abs(history[-1] - history[-2]) < cfg.xi * abs(history[-2]):
            break
        if it == cfg.max_outer_iter:
            break
        theta = 1 / (p**2 + eps)
        kcap = np.maximum(k_max, np.sum(theta * p**2, axis=1))
        prob = build_qcqp_statistical(local, u, rho, w, theta, P, kcap)
        sol = solve_qcqp(prob, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter, nonneg=True)
        fails += not sol.converged
        if sol.objective <= prob.objective(p.T):
            p = sol.v.T.copy()
    state = WmmseState(aps=local["aps"], users=local["users"], u=u, e=e, rho=rho, w=w, theta=theta, iteration=len(history) - 1)
    return p, history, state, fails


def algorithm2(
    beta: np.ndarray,
    L: int,
    layout: ClusterLayout,
    budget: LinkBudget,
    pilot: PilotConfig,
    cfg: AlgorithmConfig | None = None,
    moment_seed=0,
    eval_seed=1,
    eval_moments: HardeningMoments | None = None,
    n_h_eval: int | None = None,
    weights=None,
) -> AlgorithmResult:
    """Hardening-bound sum pseudo-SE maximization over powers and association.

    Starts from the large-scale benchmark allocation. Precoders are the
    cluster MMSE precoders built from those initial powers; their moments
    are estimated once and held fixed unless ``cfg.moment_refresh`` > 0.
    The result is evaluated with moments from ``eval_seed`` (or the given
    ``eval_moments``, which must match the final precoder rule).
    """
    cfg = cfg or AlgorithmConfig()
    P = budget.power
    k_max = budget.k_max(L)
    K = beta.shape[1]
    w_all = np.ones(K) if weights is None else np.asarray(weights, dtype=float)
    p = benchmark2_powers(beta, layout, budget, L)
    rule_p = p.copy()
    history, states, fails = [], [], 0
    seeds = seed_sequence(moment_seed).spawn(cfg.moment_refresh + 1)
    for r in range(cfg.moment_refresh + 1):
        if r > 0:
            rule_p = np.abs(p)
        moments = estimate_mmse_moments(beta, L, layout, rule_p, budget, pilot, cfg.n_h, seeds[r], cfg.antithetic)
        history, states = [], []
        for s in range(layout.S):
            loc = moments.local(layout, s)
            if len(loc["users"]) == 0:
                history.append([])
                continue
            idx = np.ix_(loc["aps"], loc["users"])
            p_s, hist, state, nf = _run_pc(loc, p[idx], w_all[loc["users"]], P, k_max, cfg)
            p[idx] = p_s
            history.append(hist)
            states.append(state)
            fails += nf
    relaxed = p.copy()
    thr = cfg.activity_threshold_rel * P
    p = hard_enforce(p, k_max, P, thr)
    a = (p**2 > thr).astype(int)
    p = p * a
    sign = np.where(p < 0, -1.0, 1.0)
    alloc = Allocation(a=a, eta=p**2, sign=sign if np.any(p < 0) else None)
    if eval_moments is None or cfg.moment_refresh > 0:
        eval_moments = estimate_mmse_moments(
            beta, L, layout, rule_p, budget, pilot, n_h_eval or cfg.n_h, eval_seed, cfg.antithetic
        )
    sinr = hardening_sinr(eval_moments, alloc.p)
    pseudo = np.log2(1 + hardening_slinr(eval_moments, alloc.p, layout))
    report = make_report(sinr, pseudo, layout, budget.fronthaul.m_mo, w_all)
    status = "ok" if fails == 0 else f"solver_max_iter:{fails}"
    return AlgorithmResult(
        name="alg2",
        allocation=alloc,
        report=report,
        history=history,
        states=states,
        relaxed=relaxed,
        status=status,
        info={"precoder_powers": rule_p, "n_sign_flips": int(np.sum(p < 0))},
    )
