"""Instantaneous-CSI joint precoding, association and power control (Algorithm 1)."""

from __future__ import annotations

import numpy as np

from ..clustering import ClusterLayout
from ..metrics import Allocation, instantaneous_sinr, make_report, slinr
from ..precoding import collective_matrix
from ..solver import QcqpProblem, solve_qcqp
from .common import AlgorithmConfig, AlgorithmResult, LinkBudget, WmmseState, hard_enforce


class _PcChannels:
    """Collective channels of one PC towards its own and the other users."""

    def __init__(self, g: np.ndarray, layout: ClusterLayout, s: int):
        self.aps = layout.pc_members[s]
        self.users = layout.served_users[s]
        self.others = layout.other_users(s)
        self.L = g.shape[-1]
        self.H = collective_matrix(g, self.aps, self.users)  # (n, U)
        H_O = collective_matrix(g, self.aps, self.others)  # (n, O)
        self.H_O = H_O
        self.t = layout.t[self.others].astype(float)
        self.R_O = (H_O * self.t) @ H_O.conj().T

    def terms(self, V: np.ndarray):
        """Desired amplitude h_k^H v_k and interference-plus-noise per user."""
        Z = self.H.conj().T @ V
        Y = self.H_O.conj().T @ V
        P2 = np.abs(Z) ** 2
        sig = np.diag(Z).copy()
        ici = P2.sum(axis=1) - np.diag(P2)
        leak = (self.t[:, None] * np.abs(Y) ** 2).sum(axis=0)
        return sig, ici + leak + 1.0


def _columns(q_bar: np.ndarray, pc: _PcChannels) -> np.ndarray:
    return collective_matrix(q_bar, pc.aps, pc.users)


def update_receiver_instantaneous(g, q_bar, layout: ClusterLayout, s: int, noise_power: float = 1.0):
    """MMSE receiver weights u_k for the users of PC ``s`` (complex)."""
    pc = _PcChannels(g / np.sqrt(noise_power), layout, s)
    sig, rest = pc.terms(_columns(q_bar, pc))
    return sig / (rest + np.abs(sig) ** 2)


def mse_instantaneous(g, q_bar, u, layout: ClusterLayout, s: int, noise_power: float = 1.0):
    """e_k = |u|^2 (total received + leakage + noise) - 2 Re(u^* h^H v) + 1, noise normalized."""
    pc = _PcChannels(g / np.sqrt(noise_power), layout, s)
    sig, rest = pc.terms(_columns(q_bar, pc))
    return np.abs(u) ** 2 * (rest + np.abs(sig) ** 2) - 2 * np.real(np.conj(u) * sig) + 1


update_mse_instantaneous = mse_instantaneous


def build_qcqp_instantaneous(pc: _PcChannels, u, rho, w, theta, P: float, kcap) -> QcqpProblem:
    """Quadratic form of the weighted MSE in the stacked precoders of each user."""
    coef = w * rho * np.abs(u) ** 2
    base = (pc.H * coef) @ pc.H.conj().T
    A = base[None] + coef[:, None, None] * pc.R_O[None]
    c = (w * rho * u)[:, None] * pc.H.T
    return QcqpProblem(A=A, c=c, block_size=pc.L, power_cap=P, weighted_cap=kcap, weights=theta)


def _init_columns(pc: _PcChannels, P: float, k_max: int) -> np.ndarray:
    C, U, L = len(pc.aps), len(pc.users), pc.L
    blocks = pc.H.reshape(C, L, U)
    norms2 = np.sum(np.abs(blocks) ** 2, axis=1)  # (C, U)
    V = np.zeros_like(pc.H)
    Vb = V.reshape(C, L, U)
    n_sel = min(k_max, U)
    for i in range(C):
        top = np.argsort(-norms2[i], kind="stable")[:n_sel]
        top = top[norms2[i, top] > 0]
        if len(top):
            Vb[i][:, top] = np.sqrt(P / len(top)) * blocks[i][:, top] / np.sqrt(norms2[i, top])
    return V


def _block_power(V: np.ndarray, C: int, L: int) -> np.ndarray:
    return np.sum(np.abs(V.reshape(C, L, -1)) ** 2, axis=1)


def _run_pc(pc: _PcChannels, w, P, k_max, cfg: AlgorithmConfig):
    C, L = len(pc.aps), pc.L
    eps = cfg.epsilon_rel * P
    V = _init_columns(pc, P, k_max)
    history, n_solver_fail = [], 0
    theta = None
    for it in range(cfg.max_outer_iter + 1):
        sig, rest = pc.terms(V)
        T = rest + np.abs(sig) ** 2
        u = sig / T
        e = rest / T
        rho = 1 / e
        history.append(float(np.sum(w * np.log2(1 + np.abs(sig) ** 2 / rest))))
        if it > 0 and abs(history[-1] - history[-2]) < cfg.xi * abs(history[-2]):
            break
        if it == cfg.max_outer_iter:
            break
        bp = _block_power(V, C, L)
        theta = 1 / (bp + eps)
        # keep the incumbent feasible so the update cannot lose ground
        kcap = np.maximum(k_max, np.sum(theta * bp, axis=1))
        prob = build_qcqp_instantaneous(pc, u, rho, w, theta, P, kcap)
        sol = solve_qcqp(prob, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter)
        n_solver_fail += not sol.converged
        if sol.objective <= prob.objective(V.T):
            V = sol.v.T.copy()
    state = WmmseState(aps=pc.aps, users=pc.users, u=u, e=e, rho=rho, w=w, theta=theta, iteration=len(history) - 1)
    return V, history, state, n_solver_fail


def algorithm1(
    g: np.ndarray,
    layout: ClusterLayout,
    budget: LinkBudget,
    cfg: AlgorithmConfig | None = None,
    weights=None,
) -> AlgorithmResult:
    """Sum pseudo-SE maximization with perfect instantaneous CSI, PC by PC.

    ``g`` is the (M, K, L) channel in physical units. The returned allocation
    is integer fronthaul feasible; its report holds the network-wide SINR and
    SE (capped at log2 m_mo) and the cluster-local pseudo-SE.
    """
    cfg = cfg or AlgorithmConfig()
    M, K, L = g.shape
    P = budget.power
    k_max = budget.k_max(L)
    gn = g / np.sqrt(budget.noise_power)
    w_all = np.ones(K) if weights is None else np.asarray(weights, dtype=float)
    q_bar = np.zeros(g.shape, dtype=complex)
    history, states, fails = [], [], 0
    for s in range(layout.S):
        pc = _PcChannels(gn, layout, s)
        if len(pc.users) == 0:
            history.append([])
            continue
        V, hist, state, nf = _run_pc(pc, w_all[pc.users], P, k_max, cfg)
        q_bar[pc.aps[:, None], pc.users[None, :], :] = V.reshape(len(pc.aps), L, -1).transpose(0, 2, 1)
        history.append(hist)
        states.append(state)
        fails += nf
    relaxed = q_bar.copy()
    final = hard_enforce(q_bar, k_max, P, cfg.activity_threshold_rel * P)
    alloc = Allocation.from_q_bar(final, threshold=cfg.activity_threshold_rel * P)
    sinr = instantaneous_sinr(alloc, gn)
    pseudo = np.log2(1 + slinr(alloc, gn, layout))
    report = make_report(sinr, pseudo, layout, budget.fronthaul.m_mo, w_all)
    status = "ok" if fails == 0 else f"solver_max_iter:{fails}"
    return AlgorithmResult(
        name="alg1", allocation=alloc, report=report, history=history, states=states, relaxed=relaxed, status=status
    )
