"""Monte Carlo driver: drops x sweep values x algorithms, summaries and file output."""

from __future__ import annotations

import csv
import json
import logging
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import __version__, kernels
from ..channel import draw_channels
from ..clustering import build_layout
from ..metrics import AllocationError, check_allocation
from ..scenario import generate_scenario
from ..wmmse import (
    algorithm1,
    algorithm2,
    benchmark1,
    benchmark2,
    benchmark2_powers,
    estimate_mmse_moments,
    update_fairness_weights,
)
from .config import RunConfig

log = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "sweep_variable",
    "sweep_value",
    "drop_id",
    "algorithm",
    "S",
    "M",
    "K",
    "L",
    "k_max",
    "sum_se",
    "sum_se_post",
    "sum_pseudo_se",
    "min_se_post",
    "iterations",
    "active_pairs",
    "max_ap_load",
    "max_ap_power_frac",
    "feasible",
    "status",
]
USER_COLUMNS = ["sweep_value", "drop_id", "algorithm", "S", "user", "se", "se_post", "pseudo_se"]
TIMING_COLUMNS = ["sweep_value", "drop_id", "algorithm", "S", "wall_time_s"]
SUMMARY_COLUMNS = [
    "sweep_variable",
    "sweep_value",
    "algorithm",
    "n_drops",
    "mean_sum_se_post",
    "stderr_sum_se_post",
    "mean_sum_se",
    "mean_sum_pseudo_se",
    "p5_user_se_post",
]
FIGURES = {"S": "fig2", "L": "fig3", "M": "fig4", "m_mo": "fig5", "fh_max": "fig6", "K": "fig7"}


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    user_rows: list = field(default_factory=list)
    timings: list = field(default_factory=list)

    def extend(self, other: "ResultTable") -> None:
        self.rows += other.rows
        self.user_rows += other.user_rows
        self.timings += other.timings

    def column(self, name: str, algorithm: str | None = None, sweep_value=None) -> np.ndarray:
        return np.array(
            [
                r[name]
                for r in self.rows
                if (algorithm is None or r["algorithm"] == algorithm)
                and (sweep_value is None or r["sweep_value"] == sweep_value)
            ]
        )


def drop_seeds(cfg: RunConfig, value_index: int, drop: int) -> dict:
    """Named child seeds for one (sweep value, drop) cell.

    With common random numbers every sweep value of a drop sees the same seeds.
    """
    key = [cfg.monte_carlo.master_seed, drop]
    if not cfg.monte_carlo.common_random_numbers:
        key.insert(1, value_index)
    names = ("scenario", "clustering", "channels", "moments", "evaluation")
    children = np.random.SeedSequence(key).spawn(len(names))
    return dict(zip(names, children))


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


def _feasible(result, budget, k_max: int) -> bool:
    try:
        check_allocation(result.allocation, budget.power, k_max)
    except AllocationError as exc:
        log.error("%s emitted an infeasible allocation: %s", result.name, exc)
        return False
    return bool(np.all(result.report.se_post <= budget.fronthaul.se_cap))


def _alloc_stats(results, budget, k_max: int) -> dict:
    alloc = results[-1].allocation
    return {
        "active_pairs": int(alloc.a.sum()),
        "max_ap_load": int(max(r.allocation.load().max() for r in results)),
        "max_ap_power_frac": float(max(r.allocation.ap_power().max() for r in results) / budget.power),
        "feasible": int(all(_feasible(r, budget, k_max) for r in results)),
    }


def run_drop(cfg: RunConfig, value_index: int, value, drop: int) -> ResultTable:
    """Every requested algorithm on one drop at one sweep value."""
    c = cfg.at(value)
    sc_cfg = c.scenario
    S = c.clustering.S
    seeds = drop_seeds(cfg, value_index, drop)
    budget = c.budget()
    pilot = c.pilot_config()
    table = ResultTable()
    base = {
        "sweep_variable": cfg.sweep.variable or "",
        "sweep_value": "" if value is None else value,
        "drop_id": drop,
        "S": S,
        "M": sc_cfg.M,
        "K": sc_cfg.K,
        "L": sc_cfg.L,
    }
    try:
        k_max = budget.k_max(sc_cfg.L)
        scenario = generate_scenario(
            sc_cfg.M,
            sc_cfg.K,
            sc_cfg.L,
            area_side=sc_cfg.area_side,
            seed=_int_seed(seeds["scenario"]),
            shadow_sigma_db=sc_cfg.shadow_sigma_db,
            path_loss=sc_cfg.path_loss,
        )
        layout = build_layout(scenario, S, seed=_int_seed(seeds["clustering"]))
    except ValueError as exc:
        for alg in c.algorithms.run:
            table.rows.append({**base, "algorithm": alg, "k_max": 0, "status": f"error:{exc}"})
        return table

    outcomes = {}
    timings = {}
    run = c.algorithms.run
    if "alg1" in run or "bench1" in run:
        rng = np.random.default_rng(seeds["channels"])
        channels = [draw_channels(scenario, rng) for _ in range(c.monte_carlo.n_small)]
        pf = c.algorithms.alg1.weight_rule == "proportional_fair"
        for alg in ("alg1", "bench1"):
            if alg not in run:
                continue
            t0 = time.perf_counter()
            history, results = [], []
            for n, g in enumerate(channels, start=1):
                w = update_fairness_weights(np.array(history).reshape(-1, scenario.K), n) if pf else None
                if alg == "alg1":
                    res = algorithm1(g, layout, budget, c.algorithms.alg1, weights=w)
                else:
                    res = benchmark1(g, layout, budget, weights=w)
                history.append(res.report.se)
                results.append(res)
            timings[alg] = time.perf_counter() - t0
            outcomes[alg] = results
    if "alg2" in run or "bench2" in run:
        t0 = time.perf_counter()
        p0 = benchmark2_powers(scenario.beta, layout, budget, scenario.L)
        eval_moments = estimate_mmse_moments(
            scenario.beta,
            scenario.L,
            layout,
            p0,
            budget,
            pilot,
            c.monte_carlo.n_h_eval,
            seeds["evaluation"],
            c.algorithms.alg2.antithetic,
        )
        shared = time.perf_counter() - t0
        if "bench2" in run:
            t0 = time.perf_counter()
            outcomes["bench2"] = [benchmark2(scenario.beta, layout, budget, scenario.L, eval_moments)]
            timings["bench2"] = time.perf_counter() - t0 + shared
        if "alg2" in run:
            t0 = time.perf_counter()
            a2cfg = replace(c.algorithms.alg2, n_h=c.monte_carlo.n_h)
            outcomes["alg2"] = [
                algorithm2(
                    scenario.beta,
                    scenario.L,
                    layout,
                    budget,
                    pilot,
                    a2cfg,
                    moment_seed=seeds["moments"],
                    eval_seed=seeds["evaluation"],
                    eval_moments=eval_moments,
                    n_h_eval=c.monte_carlo.n_h_eval,
                )
            ]
            timings["alg2"] = time.perf_counter() - t0 + shared

    for alg in run:
        results = outcomes[alg]
        se = np.mean([r.report.se for r in results], axis=0)
        se_post = np.mean([r.report.se_post for r in results], axis=0)
        pseudo = np.mean([r.report.pseudo_se for r in results], axis=0)
        status = ";".join(sorted({r.status for r in results}))
        table.rows.append(
            {
                **base,
                "algorithm": alg,
                "k_max": k_max,
                "sum_se": float(se.sum()),
                "sum_se_post": float(se_post.sum()),
                "sum_pseudo_se": float(pseudo.sum()),
                "min_se_post": float(se_post.min()),
                "iterations": int(sum(sum(r.iterations) for r in results)),
                **_alloc_stats(results, budget, k_max),
                "status": status,
            }
        )
        for k in range(scenario.K):
            table.user_rows.append(
                {
                    "sweep_value": base["sweep_value"],
                    "drop_id": drop,
                    "algorithm": alg,
                    "S": S,
                    "user": k,
                    "se": float(se[k]),
                    "se_post": float(se_post[k]),
                    "pseudo_se": float(pseudo[k]),
                }
            )
        table.timings.append(
            {"sweep_value": base["sweep_value"], "drop_id": drop, "algorithm": alg, "S": S, "wall_time_s": timings[alg]}
        )
    return table


def _run_task(args):
    return run_drop(*args)


def run_experiment(cfg: RunConfig, workers: int = 1) -> ResultTable:
    """All sweep values and drops; rows come back in (sweep value, drop, algorithm) order."""
    tasks = [
        (cfg, i, value, drop)
        for i, value in enumerate(cfg.sweep_points())
        for drop in range(cfg.monte_carlo.n_drops)
    ]
    table = ResultTable()
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_task, tasks))
    else:
        parts = [_run_task(t) for t in tasks]
    for part in parts:
        table.extend(part)
    return table


def percentile5(samples) -> float:
    """Empirical 5th percentile with linear interpolation."""
    return float(np.percentile(np.asarray(samples, dtype=float), 5))


def summarize(table: ResultTable) -> list[dict]:
    """Mean, standard error and 5th-percentile user SE per (sweep value, algorithm)."""
    if not table.rows:
        raise ValueError("cannot summarize an empty table")
    groups: dict = {}
    for r in table.rows:
        if "sum_se_post" not in r:
            continue
        groups.setdefault((r["sweep_value"], r["algorithm"]), []).append(r)
    users: dict = {}
    for u in table.user_rows:
        users.setdefault((u["sweep_value"], u["algorithm"]), []).append(u["se_post"])
    out = []
    for (value, alg), rows in groups.items():
        x = np.array([r["sum_se_post"] for r in rows])
        n = len(x)
        out.append(
            {
                "sweep_variable": rows[0]["sweep_variable"],
                "sweep_value": value,
                "algorithm": alg,
                "n_drops": n,
                "mean_sum_se_post": float(x.mean()),
                "stderr_sum_se_post": float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
                "mean_sum_se": float(np.mean([r["sum_se"] for r in rows])),
                "mean_sum_pseudo_se": float(np.mean([r["sum_pseudo_se"] for r in rows])),
                "p5_user_se_post": percentile5(users[(value, alg)]) if (value, alg) in users else float("nan"),
            }
        )
    return out


def _write_csv(path: Path, columns, rows) -> None:
    try:
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", quoting=csv.QUOTE_MINIMAL)
            writer.writeheader()
            for r in rows:
                writer.writerow({k: r.get(k, "") for k in columns})
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc}") from exc


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return [{k: _coerce(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def load_table(directory) -> ResultTable:
    d = Path(directory)
    timings = d / "timings.csv"
    return ResultTable(
        rows=read_csv(d / "results.csv"),
        user_rows=read_csv(d / "per_user.csv"),
        timings=read_csv(timings) if timings.exists() else [],
    )


def emit_outputs(table: ResultTable, summary: list[dict], cfg: RunConfig | None, out_dir) -> list[Path]:
    """Write long-format CSVs, figure series and a manifest; returns the paths written.

    ``timings.csv`` is the only file that varies between identical runs.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    def emit(name, columns, rows):
        path = out / name
        _write_csv(path, columns, rows)
        written.append(path)

    emit("results.csv", RESULT_COLUMNS, table.rows)
    emit("per_user.csv", USER_COLUMNS, table.user_rows)
    emit("summary.csv", SUMMARY_COLUMNS, summary)
    emit("timings.csv", TIMING_COLUMNS, table.timings)
    var = cfg.sweep.variable if cfg is not None else None
    if var in FIGURES:
        series = [
            {"x": s["sweep_value"], "algorithm": s["algorithm"], "y": s["mean_sum_se_post"], "yerr": s["stderr_sum_se_post"]}
            for s in summary
        ]
        emit(f"{FIGURES[var]}_{var}.csv", ["x", "algorithm", "y", "yerr"], series)
    cdf = []
    by_alg: dict = {}
    for u in table.user_rows:
        by_alg.setdefault((u["sweep_value"], u["algorithm"]), []).append(u["se_post"])
    for (value, alg), samples in by_alg.items():
        xs = np.sort(samples)
        n = len(xs)
        cdf += [{"sweep_value": value, "algorithm": alg, "se_post": float(x), "cdf": (i + 1) / n} for i, x in enumerate(xs)]
    emit("fig8-cdf.csv", ["sweep_value", "algorithm", "se_post", "cdf"], cdf)
    manifest = {
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config_sha256": cfg.digest() if cfg is not None else None,
        "config": cfg.to_dict() if cfg is not None else None,
        "files": [p.name for p in written],
        "solver": {"tol": 1e-6, "max_iter": 500} if cfg is None else {
            "tol": cfg.algorithms.alg1.solver_tol,
            "max_iter": cfg.algorithms.alg1.solver_max_iter,
        },
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    written.append(path)
    return written
