import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from cfwmmse.solver import QcqpProblem, QcqpSolution, kkt_residual, solve_qcqp

from .conftest import random_complex
from .oracles import grid_qcqp, tiny_qcqp


def complex_instance(rng, U=3, nb=2, bs=2, P=1.0):
    n = nb * bs
    X = random_complex(rng, (U, n, n))
    A = X @ np.swapaxes(X.conj(), -1, -2) / n
    c = random_complex(rng, (U, n)) * 2
    theta = rng.uniform(0.5, 3.0, (nb, U))
    return QcqpProblem(A=A, c=c, block_size=bs, power_cap=P, weighted_cap=rng.uniform(0.5, 1.5, nb), weights=theta)


def slsqp_reference(prob):
    """Real-embedded SLSQP solve with many restarts."""
    U, n = prob.c.shape
    nb, bs = prob.n_blocks, prob.block_size

    def unpack(x):
        return x[: U * n].reshape(U, n) + 1j * x[U * n :].reshape(U, n)

    def obj(x):
        return prob.objective(unpack(x))

    cons = []
    for b in range(nb):
        cons.append({"type": "ineq", "fun": lambda x, b=b: prob.power_cap - prob.block_power(unpack(x))[b].sum()})
        cons.append(
            {"type": "ineq", "fun": lambda x, b=b: prob.weighted_cap[b] - (prob.weights[b] * prob.block_power(unpack(x))[b]).sum()}
        )
    best = None
    rng = np.random.default_rng(0)
    for _ in range(4):
        x0 = rng.standard_normal(2 * U * n) * 0.05
        r = minimize(obj, x0, constraints=cons, method="SLSQP", options={"ftol": 1e-12, "maxiter": 500})
        if best is None or r.fun < best.fun:
            best = r
    return best.fun


class TestClosedForms:
    @pytest.mark.parametrize("a, c, P", [(2.0, 1.0, 1.0), (0.5, 3.0, 1.0), (1.0, 0.1, 4.0)])
    def test_scalar(self, a, c, P):
        prob = QcqpProblem(
            A=[[[a]]], c=[[c]], block_size=1, power_cap=P, weighted_cap=[10.0], weights=[[1.0]], real=True
        )
        sol = solve_qcqp(prob)
        np.testing.assert_allclose(sol.v[0, 0], min(c / a, np.sqrt(P)), rtol=1e-7)
        assert sol.kkt_residual < 1e-8

    def test_inactive_constraints(self, rng):
        prob = complex_instance(rng)
        A = prob.A + np.eye(prob.dim)
        tiny = prob.c * 1e-4
        prob = QcqpProblem(A=A, c=tiny, block_size=2, power_cap=1.0, weighted_cap=prob.weighted_cap, weights=prob.weights)
        sol = solve_qcqp(prob)
        np.testing.assert_allclose(sol.v, np.linalg.solve(A, tiny[..., None])[..., 0], rtol=1e-6)
        np.testing.assert_array_equal(sol.lam, 0)
        np.testing.assert_array_equal(sol.mu, 0)

    def test_zero_point_residual(self):
        prob = QcqpProblem(A=[[[1.0]]], c=[[1.0]], block_size=1, power_cap=1.0, weighted_cap=[1.0], weights=[[1.0]], real=True)
        zero = QcqpSolution(v=np.zeros((1, 1)), objective=0.0, lam=np.zeros(1), mu=np.zeros(1), kkt_residual=0.0, iterations=0, converged=True)
        assert kkt_residual(prob, zero) > 0.1


class TestOracles:
    @pytest.mark.parametrize("seed", range(5))
    def test_grid_tiny_real(self, seed):
        prob = tiny_qcqp(np.random.default_rng(seed))
        sol = solve_qcqp(prob)
        ref, _ = grid_qcqp(prob)
        assert abs(sol.objective - ref) <= 1e-3
        assert sol.kkt_residual < 1e-5

    @pytest.mark.parametrize("seed", range(6))
    def test_slsqp_complex(self, seed):
        prob = complex_instance(np.random.default_rng(100 + seed))
        sol = solve_qcqp(prob)
        ref = slsqp_reference(prob)
        assert sol.converged
        assert sol.objective <= ref + 1e-6 * max(1.0, abs(ref))
        assert sol.kkt_residual < 1e-5

    def test_cvxpy_agrees(self, rng):
        cp = pytest.importorskip("cvxpy")
        prob = tiny_qcqp(rng, n_users=3, n_aps=3)
        V = cp.Variable((3, 3))
        obj = sum(cp.quad_form(V[k], prob.A[k]) - 2 * prob.c[k] @ V[k] for k in range(3))
        cons = [cp.sum_squares(V[:, b]) <= prob.power_cap for b in range(3)]
        cons += [cp.sum(cp.multiply(prob.weights[b], cp.square(V[:, b]))) <= prob.weighted_cap[b] for b in range(3)]
        ref = cp.Problem(cp.Minimize(obj), cons).solve()
        assert solve_qcqp(prob).objective == pytest.approx(ref, abs=1e-5)


class TestProperties:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_feasible_and_not_worse_than_zero(self, seed):
        prob = complex_instance(np.random.default_rng(seed), U=2, nb=2, bs=2)
        sol = solve_qcqp(prob)
        power, weighted = prob.constraint_values(sol.v)
        assert np.all(power <= prob.power_cap * (1 + 1e-6))
        assert np.all(weighted <= prob.weighted_cap * (1 + 1e-6))
        assert sol.objective <= 1e-12

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000))
    def test_doubling_caps_never_hurts(self, seed):
        prob = complex_instance(np.random.default_rng(seed), U=2, nb=2, bs=1)
        big = QcqpProblem(
            A=prob.A, c=prob.c, block_size=1, power_cap=2 * prob.power_cap, weighted_cap=2 * prob.weighted_cap, weights=prob.weights
        )
        assert solve_qcqp(big).objective <= solve_qcqp(prob).objective + 1e-7

    def test_nonneg_when_off_diagonals_are_nonpositive(self, rng):
        # |v| can only lower v^T A v - 2 c^T v when A_ij <= 0 off the diagonal and c >= 0
        off = -rng.uniform(0, 0.3, (3, 3, 3))
        A = off + np.swapaxes(off, -1, -2)
        A[:, np.arange(3), np.arange(3)] = 2.0
        prob = QcqpProblem(A=A, c=rng.uniform(0, 1, (3, 3)), block_size=1, power_cap=0.5, weighted_cap=np.ones(3), weights=np.ones((3, 3)), real=True)
        sol = solve_qcqp(prob, nonneg=True)
        assert np.all(sol.v >= 0)
        assert sol.objective <= solve_qcqp(prob).objective + 1e-10

    def test_sign_fix_never_worsens(self, rng):
        for _ in range(10):
            prob = tiny_qcqp(rng, n_users=3, n_aps=3)
            assert solve_qcqp(prob, nonneg=True).objective <= solve_qcqp(prob).objective + 1e-12

    def test_real_solution_is_real(self, rng):
        sol = solve_qcqp(tiny_qcqp(rng))
        assert not np.iscomplexobj(sol.v) or not np.any(sol.v.imag)


class TestValidation:
    def test_shapes(self):
        with pytest.raises(ValueError):
            QcqpProblem(A=np.zeros((2, 3, 3)), c=np.zeros((2, 2)), block_size=1, power_cap=1, weighted_cap=1, weights=np.ones((3, 2)))

    def test_block_size(self):
        with pytest.raises(ValueError):
            QcqpProblem(A=np.zeros((1, 3, 3)), c=np.zeros((1, 3)), block_size=2, power_cap=1, weighted_cap=1, weights=np.ones((1, 1)))

    @pytest.mark.parametrize("P, cap, w", [(0, 1, 1), (1, 0, 1), (1, 1, 0)])
    def test_positive_caps_and_weights(self, P, cap, w):
        with pytest.raises(ValueError):
            QcqpProblem(A=np.eye(1)[None], c=np.ones((1, 1)), block_size=1, power_cap=P, weighted_cap=cap, weights=np.full((1, 1), w))

    def test_json_round_trip(self, rng, tmp_path):
        prob = complex_instance(rng)
        prob.dump(tmp_path / "p.json")
        back = QcqpProblem.load(tmp_path / "p.json")
        np.testing.assert_array_equal(back.A, prob.A)
        np.testing.assert_array_equal(back.c, prob.c)
        assert solve_qcqp(back).objective == solve_qcqp(prob).objective
