"""Convex QCQP with per-block power and weighted-power caps, solved in the dual.

Problem (one per processing cluster)::

    minimize    sum_k  v_k^H A_k v_k - 2 Re(c_k^H v_k)
    subject to  sum_k ||v_kb||^2            <= P        for every block b
                sum_k theta_bk ||v_kb||^2   <= kcap_b   for every block b

Each v_k is split into ``n_blocks`` contiguous blocks of ``block_size``
coordinates (one block per AP). Given multipliers (lam, mu) the Lagrangian
separates per user with v_k = (A_k + D_k)^-1 c_k, D_k block-diagonal with
entries lam_b + mu_b * theta_bk. The 2 * n_blocks multipliers are found by a
projected Newton method on the concave dual with an Armijo search along the
projection arc.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# relative ridge on A_k; fixes the minimizer along null directions of A_k
# that an inactive multiplier leaves free, at an objective bias of ~1e-9
RIDGE = 1e-9


@dataclass(eq=False)
class QcqpProblem:
    A: np.ndarray  # (U, n, n) Hermitian PSD
    c: np.ndarray  # (U, n)
    block_size: int
    power_cap: float
    weighted_cap: np.ndarray  # (n_blocks,)
    weights: np.ndarray  # (n_blocks, U) theta
    real: bool = False

    def __post_init__(self):
        self.A = np.asarray(self.A)
        self.c = np.asarray(self.c)
        U, n, n2 = self.A.shape
        if n != n2 or self.c.shape != (U, n):
            raise ValueError(f"inconsistent shapes A{self.A.shape} c{self.c.shape}")
        if n % self.block_size:
            raise ValueError("dimension is not a multiple of block_size")
        nb = n // self.block_size
        self.weighted_cap = np.broadcast_to(np.asarray(self.weighted_cap, dtype=float), (nb,)).copy()
        self.weights = np.asarray(self.weights, dtype=float).reshape(nb, U)
        if self.power_cap <= 0 or np.any(self.weighted_cap <= 0):
            raise ValueError("caps must be positive")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    @property
    def n_users(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_blocks(self) -> int:
        return self.dim // self.block_size

    def objective(self, v: np.ndarray) -> float:
        quad = np.einsum("ki,kij,kj->", v.conj(), self.A, v)
        lin = np.einsum("ki,ki->", self.c.conj(), v)
        return float(quad.real - 2 * lin.real)

    def block_power(self, v: np.ndarray) -> np.ndarray:
        """(n_blocks, U) matrix of ||v_kb||^2."""
        U = v.shape[0]
        return np.sum(np.abs(v.reshape(U, self.n_blocks, self.block_size)) ** 2, axis=2).T

    def constraint_values(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        bp = self.block_power(v)
        return bp.sum(axis=1), np.sum(self.weights * bp, axis=1)

    def to_dict(self) -> dict:
        def enc(x):
            x = np.asarray(x)
            if np.iscomplexobj(x):
                return {"re": x.real.tolist(), "im": x.imag.tolist()}
            return {"re": x.tolist()}

        return {
            "A": enc(self.A),
            "c": enc(self.c),
            "block_size": self.block_size,
            "power_cap": self.power_cap,
            "weighted_cap": self.weighted_cap.tolist(),
            "weights": self.weights.tolist(),
            "real": self.real,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QcqpProblem":
        def dec(x):
            arr = np.asarray(x["re"], dtype=float)
            return arr + 1j * np.asarray(x["im"], dtype=float) if "im" in x else arr

        return cls(
            A=dec(d["A"]),
            c=dec(d["c"]),
            block_size=int(d["block_size"]),
            power_cap=float(d["power_cap"]),
            weighted_cap=np.asarray(d["weighted_cap"], dtype=float),
            weights=np.asarray(d["weights"], dtype=float),
            real=bool(d.get("real", False)),
        )

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "QcqpProblem":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(eq=False)
class QcqpSolution:
    v: np.ndarray
    objective: float
    lam: np.ndarray
    mu: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool
    status: str = "optimal"
    info: dict = field(default_factory=dict)


def _repair(problem: QcqpProblem) -> tuple[np.ndarray, float]:
    """Symmetrize, floor eigenvalues at zero and add a tiny ridge."""
    A = problem.A
    A = 0.5 * (A + np.swapaxes(A.conj(), -1, -2))
    w, V = np.linalg.eigh(A)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    if np.any(w < 0):
        A = (V * np.maximum(w, 0)[:, None, :]) @ np.swapaxes(V.conj(), -1, -2)
    ridge = RIDGE * scale
    return A + ridge * np.eye(problem.dim), ridge


class _Dual:
    """Evaluates the dual function, its gradient and Hessian at (lam, mu)."""

    def __init__(self, problem: QcqpProblem, A: np.ndarray):
        self.p = problem
        self.A = A
        self.c = problem.c
        nb, bs = problem.n_blocks, problem.block_size
        self.expand = np.repeat(np.eye(nb), bs, axis=1)  # (nb, n)

    def diag(self, x: np.ndarray) -> np.ndarray:
        nb = self.p.n_blocks
        lam, mu = x[:nb], x[nb:]
        per_block = lam[:, None] + mu[:, None] * self.p.weights  # (nb, U)
        return per_block.T @ self.expand  # (U, n)

    def primal(self, x: np.ndarray) -> np.ndarray:
        Mk = self.A + self.diag(x)[:, :, None] * np.eye(self.p.dim)
        return np.linalg.solve(Mk, self.c[:, :, None])[:, :, 0]

    def evaluate(self, x: np.ndarray, hessian: bool = True):
        """Return (phi, grad, hess, v) for phi = -dual (convex, minimized)."""
        p, nb = self.p, self.p.n_blocks
        Mk = self.A + self.diag(x)[:, :, None] * np.eye(p.dim)
        # solves rather than an explicit inverse: phi is compared across steps
        # and Mk can be ill-conditioned when a multiplier sits at zero
        v = np.linalg.solve(Mk, self.c[:, :, None])[:, :, 0]
        dual = -float(np.einsum("ki,ki->", self.c.conj(), v).real) - x[:nb].sum() * p.power_cap - x[nb:] @ p.weighted_cap
        pw, wpw = p.constraint_values(v)
        grad = -np.concatenate([pw - p.power_cap, wpw - p.weighted_cap])
        if not hessian:
            return -dual, grad, None, v
        # G[k, b, b'] = Re(v_kb^H [Mk^-1]_{bb'} v_kb')
        Z = v[:, :, None] * self.expand.T[None]  # (U, n, nb): v restricted to each block
        W = np.linalg.solve(Mk, Z)
        G = np.einsum("kia,kib->kab", Z.conj(), W).real
        th = p.weights.T  # (U, nb)
        H = np.empty((2 * nb, 2 * nb))
        H[:nb, :nb] = 2 * G.sum(axis=0)
        H[:nb, nb:] = 2 * np.einsum("kab,kb->ab", G, th)
        H[nb:, :nb] = H[:nb, nb:].T
        H[nb:, nb:] = 2 * np.einsum("ka,kab,kb->ab", th, G, th)
        return -dual, grad, 0.5 * (H + H.T), v


def _feasible_scale(problem: QcqpProblem, v: np.ndarray) -> np.ndarray:
    """Shrink each block just enough to satisfy both of its caps."""
    pw, wpw = problem.constraint_values(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.minimum.reduce(
            [
                np.ones_like(pw),
                np.where(pw > 0, np.sqrt(problem.power_cap / pw), 1.0),
                np.where(wpw > 0, np.sqrt(problem.weighted_cap / wpw), 1.0),
            ]
        )
    s = s * (1 - 1e-12 * (s < 1))
    return v * np.repeat(s, problem.block_size)[None, :]


def _min_norm_solution(A: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Least-norm minimizer of v^H A v - 2 Re(c^H v) per user (pseudo-inverse)."""
    w, V = np.linalg.eigh(A)
    cut = 1e-10 * np.max(w, axis=1, keepdims=True)
    inv = np.where(w > cut, 1 / np.where(w > cut, w, 1), 0.0)
    coeff = np.einsum("kij,ki->kj", V.conj(), c) * inv
    return np.einsum("kij,kj->ki", V, coeff)


def kkt_residual(problem: QcqpProblem, solution: QcqpSolution) -> float:
    """Largest normalized KKT violation of ``solution``."""
    v, lam, mu = solution.v, solution.lam, solution.mu
    x = np.concatenate([lam, mu])
    dual = _Dual(problem, problem.A)
    Mk = problem.A + dual.diag(x)[:, :, None] * np.eye(problem.dim)
    r = np.einsum("kij,kj->ki", Mk, v) - problem.c
    c_norm = max(float(np.linalg.norm(problem.c)), 1e-300)
    stationarity = float(np.linalg.norm(r)) / c_norm
    pw, wpw = problem.constraint_values(v)
    primal = max(
        float(np.max((pw - problem.power_cap) / problem.power_cap)),
        float(np.max((wpw - problem.weighted_cap) / problem.weighted_cap)),
        0.0,
    )
    dual_feas = max(float(-np.min(x)), 0.0)
    scale = max(abs(problem.objective(v)), float(np.einsum("ki,ki->", problem.c.conj(), v).real), 1e-300)
    slack = np.concatenate([lam * np.abs(problem.power_cap - pw), mu * np.abs(problem.weighted_cap - wpw)])
    comp = float(np.max(slack)) / scale
    return max(stationarity, primal, dual_feas, comp)


def _make_solution(problem, v, x, it, converged, status, info) -> QcqpSolution:
    nb = problem.n_blocks
    sol = QcqpSolution(
        v=v,
        objective=problem.objective(v),
        lam=x[:nb].copy(),
        mu=x[nb:].copy(),
        kkt_residual=0.0,
        iterations=it,
        converged=converged,
        status=status,
        info=info,
    )
    sol.kkt_residual = kkt_residual(problem, sol)
    return sol


def _sign_fix(problem: QcqpProblem, sol: QcqpSolution) -> QcqpSolution:
    """Replace v by |v| in the real form when that does not worsen the objective."""
    if not np.any(sol.v < 0):
        return sol
    flipped = np.abs(sol.v)
    obj = problem.objective(flipped)
    if obj <= sol.objective + 1e-12 * max(1.0, abs(sol.objective)):
        sol.v = flipped
        sol.objective = obj
        sol.kkt_residual = kkt_residual(problem, sol)
        sol.info["sign_fixed"] = True
    else:
        sol.info["sign_fixed"] = False
    return sol


def solve_qcqp(
    problem: QcqpProblem,
    tol: float = 1e-6,
    max_iter: int = 500,
    nonneg: bool = False,
) -> QcqpSolution:
    """Solve ``problem`` to relative duality gap ``tol``.

    With ``nonneg`` (real form only) coordinates are replaced by their absolute
    values whenever that does not increase the objective.
    """
    A, ridge = _repair(problem)
    dual = _Dual(problem, A)
    nb = problem.n_blocks
    info = {"ridge": ridge}

    x = np.zeros(2 * nb)
    v0 = _min_norm_solution(A, problem.c)
    pw0, wpw0 = problem.constraint_values(v0)
    in_range = np.linalg.norm(np.einsum("kij,kj->ki", A, v0) - problem.c) <= 1e-8 * max(np.linalg.norm(problem.c), 1e-300)
    if in_range and np.all(pw0 <= problem.power_cap) and np.all(wpw0 <= problem.weighted_cap):
        # unconstrained minimizer already feasible
        sol = _make_solution(problem, v0, x, 0, True, "unconstrained", info)
        return _sign_fix(problem, sol) if nonneg and problem.real else sol

    # start the power multipliers near the scalar water level, away from the
    # near-singular region of rank-deficient A_k
    cb = np.sum(np.abs(problem.c.reshape(problem.n_users, nb, -1)) ** 2, axis=(0, 2))
    diagA = np.einsum("kii->ki", A).real.reshape(problem.n_users, nb, -1).mean(axis=(0, 2))
    a_scale = float(np.max(np.linalg.eigvalsh(A)))
    x[:nb] = np.maximum(np.sqrt(cb / problem.power_cap) - diagA, 1e-3 * a_scale)
    caps = np.concatenate([np.full(nb, problem.power_cap), problem.weighted_cap])
    phi, grad, H, v = dual.evaluate(x)

    best_v, best_f = None, np.inf
    converged, it = False, 0
    for it in range(1, max_iter + 1):
        feas_v = _feasible_scale(problem, v)
        f_primal = problem.objective(feas_v)
        if f_primal < best_f:
            best_v, best_f = feas_v, f_primal
        gap = best_f + phi  # primal - dual >= 0
        scale = max(abs(best_f), abs(phi), 1e-300)
        proj = x - np.maximum(x - grad, 0.0)
        pg = float(np.max(np.abs(proj) / caps))
        # the ridge can push gap slightly negative, so it never stops the loop alone
        if (gap <= tol * scale and pg <= 1e-8) or pg <= 1e-13 or (gap <= 1e-15 * scale and pg <= 1e-6):
            converged = True
            break

        eps_act = min(1e-12 + float(np.linalg.norm(proj)), 1e-6 * (1 + float(np.max(x))))
        active = (x <= eps_act) & (grad > 0)
        free = ~active
        d = np.zeros_like(x)
        Hff = H[np.ix_(free, free)]
        damp = 1e-12 * max(float(np.trace(Hff)), 1e-300)
        try:
            d[free] = -np.linalg.solve(Hff + damp * np.eye(free.sum()), grad[free])
        except np.linalg.LinAlgError:
            d[free] = -grad[free]
        hdiag = np.maximum(np.diag(H)[active], 1e-300)
        d[active] = -grad[active] / hdiag

        alpha = 1.0
        while True:
            x_new = np.maximum(x + alpha * d, 0.0)
            phi_new, g_new, H_new, v_new = dual.evaluate(x_new)
            decrease = float(grad @ (x_new - x))
            if phi_new <= phi + 1e-4 * decrease or alpha < 1e-12:
                break
            alpha *= 0.5
        if alpha < 1e-12 and phi_new > phi:
            break
        x, phi, grad, H, v = x_new, phi_new, g_new, H_new, v_new

    feas_v = _feasible_scale(problem, v)
    # on convergence keep the iterate that matches the returned multipliers
    if converged or problem.objective(feas_v) <= best_f:
        best_v = feas_v
    status = "optimal" if converged else "max_iter"
    sol = _make_solution(problem, best_v, x, it, converged, status, info)
    return _sign_fix(problem, sol) if nonneg and problem.real else sol
