"""Independent reference computations used by several test modules."""

import itertools

import numpy as np

from cfwmmse.solver import QcqpProblem


def tiny_qcqp(rng, n_users=2, n_aps=2, P=1.0):
    """Real, scalar-block instance with O(1) objective scale."""
    X = rng.standard_normal((n_users, n_aps, n_aps))
    A = np.einsum("kij,klj->kil", X, X) + 0.05 * np.eye(n_aps)
    c = rng.standard_normal((n_users, n_aps)) * rng.uniform(0.3, 3.0)
    theta = rng.uniform(0.5, 4.0, (n_aps, n_users))
    kcap = rng.uniform(0.3, 2.0, n_aps)
    return QcqpProblem(A=A, c=c, block_size=1, power_cap=P, weighted_cap=kcap, weights=theta, real=True)


def _grid_values(prob, pts):
    """Objective at grid points retracted onto the feasible set.

    ``pts`` has shape (N, U*nb) ordered (user, block). Each AP's coordinates
    are scaled down radially until both of its caps hold, so points on the
    curved boundary are reachable by the grid.
    """
    U, n = prob.c.shape
    v = pts.reshape(-1, U, n)
    bp = (v**2).transpose(0, 2, 1)  # (N, nb, U)
    with np.errstate(divide="ignore"):
        f = np.minimum(prob.power_cap / bp.sum(-1), prob.weighted_cap / (prob.weights * bp).sum(-1))
    v = v * np.sqrt(np.minimum(f, 1.0))[:, None, :]
    quad = np.einsum("Nki,kij,Nkj->N", v, prob.A.real, v)
    obj = quad - 2 * np.einsum("ki,Nki->N", prob.c.real, v)
    return obj, v.reshape(len(pts), -1)


def grid_qcqp(prob, final_step_rel=1e-3, first=21, zoom=11):
    """Brute-force grid minimum, refined by zooming onto the incumbent.

    Every grid point is first retracted onto the feasible set. The first
    grid covers the whole box [-sqrt(P), sqrt(P)]^d; each later grid spans two cells of the previous one around its best point, until
    the spacing drops below ``final_step_rel * sqrt(P)``.
    """
    d = prob.c.size
    r = np.sqrt(prob.power_cap)
    center, half = np.zeros(d), r
    n = first
    best_val, best_pt = 0.0, np.zeros(d)
    while True:
        axes = [np.linspace(ci - half, ci + half, n) for ci in center]
        pts = np.array(list(itertools.product(*axes)))
        vals, feasible = _grid_values(prob, pts)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_pt = float(vals[i]), feasible[i]
        step = 2 * half / (n - 1)
        if step <= final_step_rel * r:
            return best_val, best_pt.reshape(prob.c.shape)
        center, half, n = best_pt, 2 * step, zoom
