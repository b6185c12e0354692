"""Experiment orchestration: per-seed runs, summaries, estimator comparison, invariant checks."""
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .diagnostics import finite_diff_gradient, stationarity
from .estimators import MINIBATCH, BatchPlan
from .exceptions import ConfigError
from .generators import generate_instance
from .io import ensure_dir, load_instance, write_rows, write_trace
from .problem import FINITE_SUM, exact_nested_gradient
from .prox import prox, subdiff_distance, subgradient
from .solver import calibrate, run, update_z, with_overrides

SUMMARY_COLUMNS = ("seed", "estimator", "mode", "eps", "samples_to_eps", "iterations", "final_stat_total")
COMPARE_COLUMNS = ("estimator", "eps", "median_samples", "reached", "runs", "fitted_exponent")


def build_problem(config, seed):
    if config.instance:
        return load_instance(config.instance)
    return generate_instance(replace(config.generator, seed=seed))


def build_solver_config(problem, config, estimator, eps, seed):
    base = calibrate(
        problem,
        mode=config.mode,
        alpha=config.alpha,
        eps=eps,
        q_override=config.plan_overrides.get("q"),
        estimator=estimator,
        K=config.K,
        seed=seed,
    )
    plan = base.plan
    if config.plan_overrides:
        plan = replace(plan, **config.plan_overrides)
    return with_overrides(base, plan=plan, **config.overrides)


def trace_name(seed, estimator, eps):
    return f"trace_seed{seed}_{estimator}_eps{eps:g}.csv"


def _seed_job(args):
    config, seed = args
    problem = build_problem(config, seed)
    rows, traces = [], []
    for estimator in config.estimators:
        for eps in config.eps_targets:
            cfg = build_solver_config(problem, config, estimator, eps, seed)
            report = run(
                problem,
                cfg,
                keep_history=False,
                record_every=config.record_every,
                stop_eps=eps if config.stop_at_eps else None,
            )
            last = report.trace[-1]
            rows.append(
                (seed, estimator, config.mode, eps, report.samples_to_eps(eps), last.k, last.stationarity.total)
            )
            traces.append((trace_name(seed, estimator, eps), report))
    return rows, traces


def run_experiment(config, write=True):
    """Run every (seed, estimator, eps) combination of ``config``.

    Returns ``(status, rows, files)``; ``rows`` follow ``SUMMARY_COLUMNS``
    and are ordered by seed, then estimator, then eps, whatever the number of
    workers.
    """
    jobs = [(config, seed) for seed in config.seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_seed_job, jobs))
    else:
        results = [_seed_job(job) for job in jobs]
    rows, files = [], []
    if write:
        ensure_dir(config.out)
    for seed_rows, traces in results:
        rows.extend(seed_rows)
        if write:
            for name, report in traces:
                path = os.path.join(config.out, name)
                write_trace(report, path)
                files.append(path)
    if write:
        path = os.path.join(config.out, "summary.csv")
        write_rows(path, SUMMARY_COLUMNS, rows)
        files.append(path)
    return 0, rows, files


def fitted_exponent(eps, samples):
    """Slope of ``log(samples)`` against ``log(1/eps)``; ``None`` with fewer than two usable points."""
    pts = [(e, s) for e, s in zip(eps, samples) if s is not None and np.isfinite(s)]
    if len(pts) < 2 or len({e for e, _ in pts}) < 2:
        return None
    e, s = np.array(pts, dtype=float).T
    return float(np.polyfit(np.log(1 / e), np.log(s), 1)[0])


def summarize(rows, estimators, eps_targets):
    """Median samples-to-eps per (estimator, eps) and a per-estimator scaling fit.

    Runs that never reached ``eps`` count as infinitely expensive in the
    median.
    """
    table = []
    for est in estimators:
        medians = []
        for eps in eps_targets:
            vals = [r[4] for r in rows if r[1] == est and r[3] == eps]
            reached = [v for v in vals if v is not None]
            med = float(np.median([v if v is not None else np.inf for v in vals])) if vals else None
            medians.append(med)
            table.append([est, eps, med, len(reached), len(vals), None])
        exp = fitted_exponent(eps_targets, medians)
        for row in table[-len(eps_targets) :]:
            row[5] = exp
    return [tuple(r) for r in table]


def compare_estimators(config, write=True):
    if len(config.estimators) < 2:
        raise ConfigError("comparison needs at least two estimator kinds")
    status, rows, files = run_experiment(config, write=write)
    table = summarize(rows, config.estimators, config.eps_targets)
    if write:
        path = os.path.join(config.out, "compare.csv")
        write_rows(path, COMPARE_COLUMNS, table)
        files.append(path)
    return table, rows, files


def check_instance(problem, seed=0, n_points=5, K=50):
    """Invariant suite on one instance; returns a list of ``(name, passed, detail)``."""
    rng = np.random.default_rng(seed)
    out = []
    sp = problem.spectral
    out.append(("full column rank of A", sp.sigma_min_A > 0, f"sigma_min_A={sp.sigma_min_A:.3e}"))
    if problem.oracle.mode == FINITE_SUM:
        worst = 0.0
        for _ in range(n_points):
            x = rng.standard_normal(problem.dim_x)
            g = exact_nested_gradient(problem, x)
            fd = finite_diff_gradient(problem, x)
            worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-12))
        out.append(("chain rule vs finite differences", worst <= 1e-5, f"max rel err={worst:.2e}"))

    worst_prox = 0.0
    for reg in problem.regs:
        for _ in range(20):
            v1, v2 = rng.standard_normal((2, problem.block_dims[0]))
            p1, p2 = prox(reg, 0.7, v1), prox(reg, 0.7, v2)
            worst_prox = max(worst_prox, np.linalg.norm(p1 - p2) - np.linalg.norm(v1 - v2))
            worst_prox = max(worst_prox, subdiff_distance(reg, p1, subgradient(reg, p1)))
    out.append(("prox nonexpansive, subgradient selector", worst_prox <= 1e-12, f"worst={worst_prox:.2e}"))

    mode = problem.oracle.mode
    estimator = "spider" if mode == FINITE_SUM else MINIBATCH
    cfg = calibrate(problem, mode=mode, estimator=estimator, K=K, seed=seed)
    if mode != FINITE_SUM:
        cfg = with_overrides(cfg, plan=BatchPlan(s=8, b1=8, b2=8, q=1))
    rep = run(problem, cfg)
    h = rep.history
    worst_dual, worst_key = 0.0, 0.0
    A = problem.A
    for k in range(K):
        x0, x1, z1 = h["x"][k], h["x"][k + 1], h["z"][k + 1]
        z_check = update_z(problem, cfg, x1, h["y"][k + 1], h["z"][k])
        worst_dual = max(worst_dual, np.linalg.norm(z_check - z1))
        Gdx = cfg.r * (x1 - x0) - cfg.rho * cfg.eta * (A.T @ (A @ (x1 - x0)))
        key = A.T @ z1 - h["v"][k] - Gdx / cfg.eta
        worst_key = max(worst_key, np.linalg.norm(key) / max(1.0, np.linalg.norm(A.T @ z1)))
    out.append(("dual update reproducible", worst_dual == 0.0, f"max diff={worst_dual:.2e}"))
    out.append(("A^T z = v + G dx / eta", worst_key <= 1e-8, f"max rel err={worst_key:.2e}"))
    if mode == FINITE_SUM:
        first = rep.trace[1].stationarity.total
        best = min(r.stationarity.total for r in rep.trace[1:])
        out.append(("stationarity does not grow", best <= first, f"first={first:.2e} best={best:.2e}"))
    else:
        stat = stationarity(problem, rep.x, rep.y, rep.z, gradient_oracle=problem.oracle.surrogate(2000, rng))
        out.append(("surrogate stationarity finite", np.isfinite(stat.total), f"total={stat.total:.2e}"))
    return out
