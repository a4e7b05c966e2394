"""Acceptance suite: one PASS/FAIL line per criterion, printed and collected.

The three experiment sweeps are run once per session and shared. Their CSVs
are written to ``$CFWMMSE_ACCEPTANCE_OUT`` when set (a temporary directory
otherwise) so two suite runs can be diffed byte for byte.
"""

import hashlib
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats
from scipy.optimize import minimize_scalar

from cfwmmse import kernels
from cfwmmse.channel import draw_channel_batch, draw_channels
from cfwmmse.clustering import FronthaulConfig, assign_users_to_pcs, build_layout, compute_k_max
from cfwmmse.harness import emit_outputs, load_config, run_experiment, summarize
from cfwmmse.metrics import (
    Allocation,
    check_allocation,
    estimate_hardening_moments,
    hardening_sinr,
    instantaneous_sinr,
    seed_sequence,
    slinr,
)
from cfwmmse.scenario import generate_scenario
from cfwmmse.solver import solve_qcqp
from cfwmmse.wmmse import AlgorithmConfig, algorithm1, algorithm2
from cfwmmse.wmmse.instantaneous import mse_instantaneous
from cfwmmse.wmmse.statistical import estimate_mmse_moments, mmse_rule, statistical_terms

from .acceptance_report import record
from .conftest import random_complex
from .oracles import grid_qcqp, tiny_qcqp

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = {name: ROOT / "configs" / "acceptance" / f"{name}.yaml" for name in ("clustering", "antennas", "modulation")}

pytestmark = pytest.mark.slow


# ---------------------------------------------------------------------------
# shared fixtures


@pytest.fixture(scope="session")
def out_root(tmp_path_factory):
    env = os.environ.get("CFWMMSE_ACCEPTANCE_OUT")
    return Path(env) if env else tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def sweeps(out_root):
    """name -> (config, table, output directory) for each acceptance sweep."""
    out = {}
    for name, path in CONFIGS.items():
        cfg = load_config(path)
        table = run_experiment(cfg)
        emit_outputs(table, summarize(table), cfg, out_root / name)
        out[name] = (cfg, table, out_root / name)
    return out


@pytest.fixture(scope="session")
def small_drops(budget, pilot):
    """20 seeded M=6, L=4, K=8, S=2 drops with both proposed algorithms run."""
    t0 = time.perf_counter()
    drops = []
    for d in range(20):
        sc = generate_scenario(6, 8, 4, seed=1000 + d)
        layout = build_layout(sc, 2, seed=d)
        g = draw_channels(sc, seed=2000 + d)
        r1 = algorithm1(g, layout, budget)
        r2 = algorithm2(sc.beta, sc.L, layout, budget, pilot, moment_seed=d, eval_seed=10_000 + d)
        drops.append({"scenario": sc, "layout": layout, "g": g, "alg1": r1, "alg2": r2, "moment_seed": d})
    return drops, time.perf_counter() - t0


def _mean_by(table, value, alg):
    return np.array(
        [r["sum_se_post"] for r in table.rows if r["sweep_value"] == value and r["algorithm"] == alg], dtype=float
    )


# ---------------------------------------------------------------------------
# criteria


def test_c1_fronthaul_budget_exactness():
    t0 = time.perf_counter()
    k6 = compute_k_max(FronthaulConfig(fh_max=6e9, m_mo=32), 24)
    k10 = compute_k_max(FronthaulConfig(fh_max=10e9, m_mo=32), 24)
    dt = time.perf_counter() - t0
    ok = (k6, k10) == (5, 8) and dt < 1.0
    assert record(1, ok, f"K_max(6 Gb/s)={k6} (want 5), K_max(10 Gb/s)={k10} (want 8), {dt * 1e3:.2f} ms")


def test_c2_wmmse_monotonicity(small_drops):
    drops, elapsed = small_drops
    worst, steps = 0.0, 0
    for drop in drops:
        for alg in ("alg1", "alg2"):
            for h in drop[alg].history:
                h = np.asarray(h)
                if h.size < 2:
                    continue
                drop_rel = (h[:-1] - h[1:]) / np.maximum(np.abs(h[:-1]), 1e-300)
                worst = max(worst, float(drop_rel.max()))
                steps += h.size - 1
    ok = worst <= 1e-8 and elapsed < 600
    assert record(2, ok, f"{steps} outer steps on 20 drops, worst relative decrease {worst:.2e} (<= 1e-8), {elapsed:.1f} s")


def _argmin_1d(f, center, scale):
    """Brent minimizer of a 1-D function bracketed around ``center``."""
    res = minimize_scalar(f, bracket=(center - scale, center + scale), tol=1e-12)
    return res.x


def test_c3_stationarity(small_drops, budget, pilot):
    drops, _ = small_drops
    worst_rho, worst_u = 0.0, 0.0
    for drop in drops[:10]:
        g, layout = drop["g"], drop["layout"]
        r1 = drop["alg1"]
        for s, state in zip([s for s in range(layout.S) if len(layout.served_users[s])], r1.states):
            e = mse_instantaneous(g, r1.relaxed, state.u, layout, s, budget.noise_power)
            worst_rho = max(worst_rho, float(np.max(np.abs(state.rho * e - 1))))
            for i, u in enumerate(state.u):
                # e is separable in Re(u) and Im(u); minimize each coordinate alone
                def along(x, i=i, imag=False):
                    uu = state.u.copy()
                    uu[i] = complex(u.real, x) if imag else complex(x, u.imag)
                    return mse_instantaneous(g, r1.relaxed, uu, layout, s, budget.noise_power)[i]

                scale = max(abs(u), 1e-3)
                re = _argmin_1d(along, u.real, scale)
                im = _argmin_1d(lambda x: along(x, imag=True), u.imag, scale)
                worst_u = max(worst_u, abs(complex(re, im) - u) / max(1.0, abs(u)))

        r2, sc = drop["alg2"], drop["scenario"]
        seed = seed_sequence(drop["moment_seed"]).spawn(1)[0]
        moments = estimate_mmse_moments(
            sc.beta, sc.L, layout, r2.info["precoder_powers"], budget, pilot, AlgorithmConfig().n_h, seed
        )
        for state in r2.states:
            s = int(layout.user_pc[state.users[0]])
            loc = moments.local(layout, s)
            amp, rest = statistical_terms(loc, r2.relaxed[np.ix_(loc["aps"], loc["users"])])
            T = rest + amp**2
            e = state.u**2 * T - 2 * state.u * amp + 1
            worst_rho = max(worst_rho, float(np.max(np.abs(state.rho * e - 1))))
            for i, u in enumerate(state.u):
                x = _argmin_1d(lambda v, i=i: v**2 * T[i] - 2 * v * amp[i] + 1, u, max(abs(u), 1e-3))
                worst_u = max(worst_u, abs(x - u) / max(1.0, abs(u)))
    ok = worst_rho < 1e-6 and worst_u < 1e-6
    assert record(3, ok, f"10 drops: max |rho*e-1|={worst_rho:.2e}, max u deviation from 1-D minimizer {worst_u:.2e} (< 1e-6)")


def test_c4_qcqp_oracle():
    t0 = time.perf_counter()
    worst_obj, worst_kkt = 0.0, 0.0
    for seed in range(50):
        prob = tiny_qcqp(np.random.default_rng(seed))
        ref, _ = grid_qcqp(prob)
        sol = solve_qcqp(prob)
        worst_obj = max(worst_obj, abs(sol.objective - ref))
        worst_kkt = max(worst_kkt, sol.kkt_residual)
    dt = time.perf_counter() - t0
    ok = worst_obj <= 1e-3 and worst_kkt < 1e-5 and dt < 60
    assert record(4, ok, f"50 instances: max |obj-grid|={worst_obj:.2e} (<= 1e-3), max KKT {worst_kkt:.2e} (< 1e-5), {dt:.1f} s")


def test_c5_feasibility(small_drops, sweeps, budget):
    drops, _ = small_drops
    k_max = budget.k_max(4)
    n_alloc = 0
    for drop in drops:
        for alg in ("alg1", "alg2"):
            check_allocation(drop[alg].allocation, budget.power, k_max)
            assert np.all(drop[alg].report.se_post <= np.log2(budget.fronthaul.m_mo))
            n_alloc += 1
    bad = []
    n_rows = 0
    for name, (cfg, table, _) in sweeps.items():
        for r in table.rows:
            n_rows += 1
            c = cfg.at(r["sweep_value"] if r["sweep_value"] != "" else None)
            if not (
                r["feasible"] == 1
                and r["max_ap_load"] <= r["k_max"] == c.budget().k_max(c.scenario.L)
                and r["max_ap_power_frac"] <= 1 + 1e-6
            ):
                bad.append((name, r["sweep_value"], r["drop_id"], r["algorithm"]))
        for u in table.user_rows:
            m_mo = cfg.at(u["sweep_value"] if u["sweep_value"] != "" else None).fronthaul.m_mo
            if u["se_post"] > np.log2(m_mo):
                bad.append((name, u["sweep_value"], u["drop_id"], u["algorithm"], "se_post"))
    ok = not bad
    assert record(5, ok, f"{n_alloc} direct allocations and {n_rows} experiment rows checked, {len(bad)} violations")


def test_c6_single_cluster_identity():
    rng = np.random.default_rng(6)
    sc = generate_scenario(6, 8, 4, seed=6)
    layout = assign_users_to_pcs(sc, (np.arange(6),))
    worst = 0.0
    for _ in range(20):
        g = random_complex(rng, (6, 8, 4)) * rng.uniform(0.5, 2.0, (6, 8, 1))
        a = (rng.random((6, 8)) < 0.6).astype(int)
        eta = rng.random((6, 8)) * a
        eta /= eta.sum(axis=1, keepdims=True).clip(1e-12)
        q = random_complex(rng, (6, 8, 4))
        q /= np.linalg.norm(q, axis=2, keepdims=True)
        alloc = Allocation(a=a, eta=eta, q=q)
        x, y = slinr(alloc, g, layout), instantaneous_sinr(alloc, g)
        worst = max(worst, float(np.max(np.abs(x - y) / np.maximum(np.abs(y), 1e-300))))
    ok = worst <= 1e-12
    assert record(6, ok, f"S=1, 20 random allocations: max relative |SLINR-SINR| {worst:.2e} (<= 1e-12)")


def test_c7_benchmark_dominance(sweeps):
    _, table, _ = sweeps["clustering"]
    parts, ok = [], True
    for alg, bench in (("alg1", "bench1"), ("alg2", "bench2")):
        a, b = _mean_by(table, 2, alg), _mean_by(table, 2, bench)
        p = stats.ttest_rel(a, b, alternative="greater").pvalue
        gain = a.mean() / b.mean() - 1
        ok &= bool(p < 0.05 and a.mean() > b.mean())
        parts.append(f"{alg} {a.mean():.2f} vs {bench} {b.mean():.2f} (+{100 * gain:.0f}%, p={p:.1e})")
    assert record(7, ok, "S=2, 50 drops, paired one-sided t-test: " + "; ".join(parts))


def test_c8_clustering_loss_ordering(sweeps):
    _, table, _ = sweeps["clustering"]
    parts, ok = [], True
    for alg in ("alg1", "alg2"):
        m = {S: _mean_by(table, S, alg) for S in (1, 2, 4)}
        for hi, lo in ((1, 2), (2, 4)):
            diff = m[hi] - m[lo]
            se = diff.std(ddof=1) / np.sqrt(diff.size)
            ok &= bool(diff.mean() >= -se)
        parts.append(f"{alg} " + " >= ".join(f"{m[S].mean():.2f}" for S in (1, 2, 4)))
    info = ", ".join(
        f"{b} " + "/".join(f"{_mean_by(table, S, b).mean():.2f}" for S in (1, 2, 4)) for b in ("bench1", "bench2")
    )
    assert record(8, ok, "S=1/2/4 mean sum SE within one paired SE: " + "; ".join(parts) + f" (info: {info})")


def _ergodic_se(g, g_hat, layout, rule_p, p, scale):
    """Per-draw SE log2(1+SINR) with MMSE precoders built from ``g_hat``, shape (n, K)."""
    q = mmse_rule(layout, rule_p)(g_hat * scale)
    A = np.einsum("nkjm,mj->nkj", kernels.effective_gains(g * scale, q), p)
    power = np.abs(A) ** 2
    sig = np.einsum("nkk->nk", power)
    return np.log2(1 + sig / (power.sum(axis=2) - sig + 1))


def test_c9_hardening_direction(small_drops, budget, pilot):
    drops, _ = small_drops
    n = 500
    scale = 1 / np.sqrt(budget.noise_power)
    violations, independent, n_users, worst = 0, 0, 0, -np.inf
    for i, drop in enumerate(drops):
        sc, layout, r2 = drop["scenario"], drop["layout"], drop["alg2"]
        p, rule_p = r2.allocation.p, r2.info["precoder_powers"]
        # matched: moments and ergodic SE come from the same n draws
        seed = 30_000 + i
        moments = estimate_hardening_moments(
            sc.beta, sc.L, mmse_rule(layout, rule_p), pilot, n_h=n, seed=seed, chunk=n, antithetic=False, channel_scale=scale
        )
        hard = np.log2(1 + hardening_sinr(moments, p))
        rng = np.random.default_rng(seed_sequence(seed).spawn(1)[0])
        se = _ergodic_se(*draw_channel_batch(sc.beta, sc.L, pilot, n, rng), layout, rule_p, p, scale)
        ergodic, err = se.mean(axis=0), se.std(axis=0, ddof=1) / np.sqrt(n)
        slack = hard - (ergodic + 2 * err)
        violations += int(np.sum(slack > 0))
        worst = max(worst, float(slack.max()))
        # unmatched draws, reported only
        rng = np.random.default_rng(40_000 + i)
        se = _ergodic_se(*draw_channel_batch(sc.beta, sc.L, pilot, n, rng), layout, rule_p, p, scale)
        independent += int(np.sum(hard > se.mean(axis=0) + 2 * se.std(axis=0, ddof=1) / np.sqrt(n)))
        n_users += sc.K
    ok = violations == 0
    assert record(
        9,
        ok,
        f"20 matched instances, {n_users} users, n_h={n}, {n} draws: {violations} with hardening SE > ergodic + 2 SE "
        f"(max slack {worst:.4f}; info: {independent} on independent draws)",
    )


def test_c10_gap_shrinks_with_antennas(sweeps):
    _, table, _ = sweeps["antennas"]
    gaps = {}
    for L in (4, 32):
        a1, a2 = _mean_by(table, L, "alg1").mean(), _mean_by(table, L, "alg2").mean()
        gaps[L] = (a1 - a2) / a1
    ok = gaps[32] < gaps[4]
    assert record(10, ok, f"alg1 vs alg2 gap: L=4 {100 * gaps[4]:.1f}%, L=32 {100 * gaps[32]:.1f}%")


def test_c11_modulation_interior_maximum(sweeps):
    cfg, table, _ = sweeps["modulation"]
    values = list(cfg.sweep.values)
    parts, ok = [], True
    for alg in ("alg1", "alg2"):
        means = [_mean_by(table, v, alg).mean() for v in values]
        best = int(np.argmax(means))
        ok &= 0 < best < len(values) - 1
        parts.append(f"{alg} " + "/".join(f"{m:.2f}" for m in means) + f" argmax M_mo={values[best]}")
    info = "; ".join(
        f"{b} argmax M_mo={values[int(np.argmax([_mean_by(table, v, b).mean() for v in values]))]}" for b in ("bench1", "bench2")
    )
    assert record(11, ok, f"S=1, M_mo {values}: " + "; ".join(parts) + f" (info: {info})")


def _digest(directory: Path) -> str:
    h = hashlib.sha256()
    for f in sorted(directory.glob("*.csv")):
        if f.name != "timings.csv":
            h.update(f.name.encode() + f.read_bytes())
    return h.hexdigest()


def _lines_for_drops(path: Path, n_drops: int) -> list[str]:
    lines = path.read_text().splitlines()
    col = lines[0].split(",").index("drop_id")
    return [lines[0]] + [ln for ln in lines[1:] if int(ln.split(",")[col]) < n_drops]


def test_c12_determinism(sweeps, tmp_path):
    n = 2
    mismatches = []
    for name, path in CONFIGS.items():
        runs = []
        for rep in range(2):
            out = tmp_path / f"{name}_{rep}"
            cmd = [sys.executable, "-m", "cfwmmse", "run", "--config", str(path), "--drops", str(n), "--out-dir", str(out)]
            subprocess.run(cmd, check=True, capture_output=True)
            runs.append(out)
        csvs = sorted(f.name for f in runs[0].glob("*.csv") if f.name != "timings.csv")
        for f in csvs:
            if (runs[0] / f).read_bytes() != (runs[1] / f).read_bytes():
                mismatches.append(f"{name}/{f}")
        session_dir = sweeps[name][2]
        for f in ("results.csv", "per_user.csv"):
            if _lines_for_drops(runs[0] / f, n) != _lines_for_drops(session_dir / f, n):
                mismatches.append(f"{name}/{f} vs session")
    digests = " ".join(f"{name}={_digest(sweeps[name][2])[:12]}" for name in CONFIGS)
    ok = not mismatches
    assert record(
        12, ok, f"two fresh runs of each sweep ({n} drops) byte-identical, rows match the full run; {mismatches or 'no diffs'}; full-run digests {digests}"
    )
