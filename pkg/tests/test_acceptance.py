"""Acceptance suite: one test per criterion, each printed as a PASS/FAIL line.

The benchmark-scale checks (6, 7, 10) share one synthetic benchmark and one
5-shot tuning run on validation tasks.  They take several minutes.
"""

import csv
import json
import time
from dataclasses import replace

import numpy as np
import pytest

from alphatim import cli
from alphatim.benchmark import TARGET_BAND, default_alpha, default_lambda, synthetic_benchmark
from alphatim.classifiers import (
    ClassifierState,
    LossConfig,
    alpha_tim_loss,
    class_means,
    fit_prototypes,
    stack_tasks,
    tim_loss,
)
from alphatim.evaluation import EvalConfig, evaluate, sweep, tune
from alphatim.mathcore import alpha_divergence, alpha_entropy, generalized_log
from alphatim.sampling import RngStream, apportion, sample_dirichlet
from alphatim.tasks import TaskSpec

from conftest import random_simplex, record_criterion
from helpers import finite_difference_grad, random_task

ALPHA_GRID = [1, 2, 3, 5, 7]
LAMBDA_GRID = [0, 0.25, 0.5, 0.75, 1]
BENCH_TASKS = 1000
TUNE_TASKS = 500


def _check(number, ok, detail):
    record_criterion(number, bool(ok), detail)
    assert ok, detail


# ---------------------------------------------------------------- 1


def test_criterion_01_entropy_divergence_identity():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(1000):
        k = int(rng.integers(2, 11))
        p = random_simplex(rng, k)
        u = np.full(k, 1.0 / k)
        for alpha in (0.5, 2, 3, 5, 7):
            rhs = generalized_log(k, alpha) - k ** (1 - alpha) * alpha_divergence(p, u, alpha)
            worst = max(worst, abs(alpha_entropy(p, alpha) - rhs))
    elapsed = time.perf_counter() - t0
    _check(1, worst < 1e-10 and elapsed < 1.0, f"identity max err {worst:.2e} (<1e-10), {elapsed:.2f}s (<1s)")


# ---------------------------------------------------------------- 2


def test_criterion_02_dirichlet_moments():
    n = 100_000
    t0 = time.perf_counter()
    worst = 0.0
    for j, a in enumerate(([0.5] * 3, [2.0] * 3, [3.0, 1.0])):
        a = np.array(a)
        x = sample_dirichlet(a, RngStream(7, j), size=n)
        a0 = a.sum()
        mean = a / a0
        var = a * (a0 - a) / (a0**2 * (a0 + 1))
        # standard error of the sample mean and of the sample variance
        se_mean = np.sqrt(var / n)
        m4 = ((x - mean) ** 4).mean(axis=0)
        se_var = np.sqrt((m4 - var**2) / n)
        z_mean = np.abs(x.mean(axis=0) - mean) / se_mean
        z_var = np.abs(x.var(axis=0, ddof=1) - var) / se_var
        worst = max(worst, z_mean.max(), z_var.max())
    elapsed = time.perf_counter() - t0
    _check(2, worst < 3 and elapsed < 5.0, f"dirichlet moments max |z| {worst:.2f} (<3 SE), {elapsed:.2f}s (<5s)")


# ---------------------------------------------------------------- 3


def test_criterion_03_gradient_oracle():
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(100):
        k = int(rng.integers(2, 5))
        d = int(rng.integers(2, 9))
        nq = int(rng.integers(1, 13))
        shots = int(rng.integers(1, 3))
        task = random_task(rng, k, d, shots, nq)
        cfg = LossConfig(alpha=float(rng.choice([0.5, 2, 3, 5, 7])), lam=float(rng.uniform(0, 1)), tau=float(rng.uniform(1, 15)))
        w = rng.normal(scale=0.5, size=(k, d))
        for fn in (tim_loss, alpha_tim_loss):
            _, g = fn(ClassifierState(w, cfg), task)
            fd = finite_difference_grad(lambda v: fn(ClassifierState(v, cfg), task)[0], w, h=1e-6)
            rel = np.abs(g - fd).max() / max(np.abs(fd).max(), 1e-8)
            worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    _check(3, worst < 1e-4 and elapsed < 10.0, f"gradient vs finite differences max rel err {worst:.2e} (<1e-4), {elapsed:.2f}s (<10s)")


# ---------------------------------------------------------------- 4


def test_criterion_04_alpha_one_is_tim():
    rng = np.random.default_rng(404)
    worst_loss = 0.0
    worst_traj = 0.0
    for i in range(100):
        k = int(rng.integers(2, 6))
        task = random_task(rng, k, int(rng.integers(2, 12)), int(rng.integers(1, 4)), int(rng.integers(1, 20)))
        w = rng.normal(scale=0.5, size=(k, task.support_features.shape[1]))
        tau = float(rng.uniform(1, 20))
        a_cfg = LossConfig(alpha=1.0, lam=float(rng.uniform(0, 1)), tau=tau)
        t_cfg = LossConfig(alpha=2.0, lam=1.0, tau=tau)
        la, ga = alpha_tim_loss(ClassifierState(w, a_cfg), task)
        lt, gt = tim_loss(ClassifierState(w, t_cfg), task)
        worst_loss = max(worst_loss, abs(la - lt), np.abs(ga - gt).max())
        if i < 20:
            zs, ys, zq = stack_tasks([task])
            w0 = class_means(zs, ys, k)
            fa, ha = fit_prototypes(w0, zs, ys, zq, replace(a_cfg, iterations=200, learning_rate=1e-2), "alpha_tim", trace=True)
            ft, ht = fit_prototypes(w0, zs, ys, zq, replace(t_cfg, iterations=200, learning_rate=1e-2), "tim", trace=True)
            worst_traj = max(worst_traj, np.abs(fa - ft).max(), np.abs(ha - ht).max())
    ok = worst_loss < 1e-12 and worst_traj < 1e-9
    _check(4, ok, f"alpha=1 vs TIM lambda=1: loss/grad diff {worst_loss:.1e} (<1e-12), trajectory diff {worst_traj:.1e} (<1e-9)")


# ---------------------------------------------------------------- 5


def _simplex_grid(k, step):
    if k == 1:
        yield (step,)
        return
    for i in range(step + 1):
        for rest in _simplex_grid(k - 1, step - i):
            yield (i,) + rest


def test_criterion_05_apportionment():
    checked = 0
    bad = []
    for k in range(1, 5):
        for p_int in _simplex_grid(k, 10):
            p = np.array(p_int, dtype=float) / 10
            for total in range(1, 21):
                c = apportion(p, total)
                checked += 1
                if c.sum() != total or np.any(np.abs(c - p * total) >= 1):
                    bad.append((p_int, total, c.tolist()))
    golden = apportion(np.array([0.5, 0.3, 0.2]), 75).tolist()
    ok = not bad and golden == [38, 22, 15]
    _check(5, ok, f"apportion: {checked} cases, {len(bad)} violations, golden (0.5,0.3,0.2)x75 -> {tuple(golden)}")


# ---------------------------------------------------------------- 6, 7, 10


@pytest.fixture(scope="module")
def bench():
    return synthetic_benchmark()


@pytest.fixture(scope="module")
def tuned(bench):
    """alpha and lambda selected on 5-shot dirichlet(a=1) validation tasks."""
    _, val = bench
    spec = TaskSpec(shots=5, dirichlet_a=1.0, seed=0)
    alpha = tune(val, EvalConfig("alpha_tim", spec, LossConfig(), n_tasks=TUNE_TASKS), "alpha", ALPHA_GRID)
    lam = tune(val, EvalConfig("tim", spec, LossConfig(), n_tasks=TUNE_TASKS), "lambda", LAMBDA_GRID)
    return alpha, lam


@pytest.mark.slow
def test_shipped_five_shot_defaults_match_tuning(tuned):
    assert tuned == (default_alpha(5), default_lambda(5))


def _pair(fs, method, loss_cfg=None):
    """(balanced, dirichlet a=2) reports for 5-way 5-shot tasks."""
    cfgs = [
        EvalConfig(method, TaskSpec(shots=5, imbalance="balanced", seed=0), loss_cfg or LossConfig(), n_tasks=BENCH_TASKS),
        EvalConfig(method, TaskSpec(shots=5, imbalance="dirichlet", dirichlet_a=2.0, seed=0), loss_cfg or LossConfig(), n_tasks=BENCH_TASKS),
    ]
    return [evaluate(fs, c) for c in cfgs]


@pytest.mark.slow
def test_criterion_06_class_balance_bias(bench, tuned):
    test_fs, _ = bench
    alpha, _ = tuned
    t0 = time.perf_counter()
    ss_bal, ss_dir = _pair(test_fs, "simpleshot")
    sk_bal, sk_dir = _pair(test_fs, "sinkhorn_balanced")
    at_bal, at_dir = _pair(test_fs, "alpha_tim", LossConfig(alpha=alpha))
    elapsed = time.perf_counter() - t0
    sk_drop = sk_bal.mean_accuracy - sk_dir.mean_accuracy
    at_drop = at_bal.mean_accuracy - at_dir.mean_accuracy
    ss_gap = abs(ss_bal.mean_accuracy - ss_dir.mean_accuracy)
    in_band = TARGET_BAND[0] <= ss_bal.mean_accuracy <= TARGET_BAND[1]
    ok = in_band and sk_drop >= 0.08 and at_drop <= sk_drop - 0.05 and ss_gap < 0.01 and elapsed < 600
    _check(
        6,
        ok,
        f"simpleshot balanced {ss_bal.mean_accuracy:.4f} in {TARGET_BAND}; sinkhorn drop {sk_drop:.4f} (>=0.08); "
        f"alpha-TIM (alpha={alpha:g}) drop {at_drop:.4f} (<= {sk_drop - 0.05:.4f}); simpleshot gap {ss_gap:.4f} (<0.01); "
        f"{elapsed:.0f}s (<600s)",
    )


@pytest.mark.slow
def test_criterion_07_alpha_tim_not_worse_than_tim(bench, tuned):
    test_fs, _ = bench
    alpha, lam = tuned
    spec = TaskSpec(shots=5, imbalance="dirichlet", dirichlet_a=2.0, seed=0)
    at = evaluate(test_fs, EvalConfig("alpha_tim", spec, LossConfig(alpha=alpha), n_tasks=BENCH_TASKS))
    tm = evaluate(test_fs, EvalConfig("tim", spec, LossConfig(lam=lam), n_tasks=BENCH_TASKS))
    ok = at.mean_accuracy >= tm.mean_accuracy - tm.ci95
    _check(
        7,
        ok,
        f"dirichlet(a=2) 5-shot: alpha-TIM (alpha={alpha:g}) {at.mean_accuracy:.4f} vs "
        f"TIM (lambda={lam:g}) {tm.mean_accuracy:.4f} - ci95 {tm.ci95:.4f} = {tm.mean_accuracy - tm.ci95:.4f}",
    )


@pytest.mark.slow
def test_criterion_10_sinkhorn_dirichlet_trend(bench):
    test_fs, _ = bench
    base = EvalConfig("sinkhorn_balanced", TaskSpec(shots=5, seed=0), n_tasks=BENCH_TASKS)
    results = sweep(test_fs, base, "dirichlet_a", [1, 2, 5, 1e6])
    accs = [r.mean_accuracy for _, r in results]
    balanced = evaluate(test_fs, replace(base, task_spec=replace(base.task_spec, imbalance="balanced")))
    monotone = all(a <= b for a, b in zip(accs, accs[1:]))
    near = abs(accs[-1] - balanced.mean_accuracy) <= balanced.ci95
    trend = ", ".join(f"a={v:g}:{a:.4f}" for (v, _), a in zip(results, accs))
    _check(
        10,
        monotone and near,
        f"sinkhorn by dirichlet-a [{trend}] non-increasing as a decreases: {monotone}; "
        f"a=1e6 vs balanced {balanced.mean_accuracy:.4f} +- {balanced.ci95:.4f}: {near}",
    )


# ---------------------------------------------------------------- 8


def test_criterion_08_curve_properties(tmp_path):
    out = tmp_path / "curves.csv"
    assert cli.main(["curves", "--alphas", "1,2,5", "--grid", "9", "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = [{k: float(v) for k, v in r.items()} for r in csv.DictReader(fh)]

    def at(p, alpha):
        return next(r for r in rows if abs(r["p"] - p) < 1e-12 and r["alpha"] == alpha)

    mid = max(abs(at(0.5, a)["grad_logit"]) for a in (1, 2, 5))
    g5, g1 = abs(at(0.8, 5)["grad_logit"]), abs(at(0.8, 1)["grad_logit"])

    h = 1e-5
    fd_err = 0.0
    for r in rows:
        l = np.log(r["p"] / (1 - r["p"]))
        hp = alpha_entropy(np.array([1 / (1 + np.exp(-(l + h))), 1 / (1 + np.exp(l + h))]), r["alpha"])
        hm = alpha_entropy(np.array([1 / (1 + np.exp(-(l - h))), 1 / (1 + np.exp(l - h))]), r["alpha"])
        fd_err = max(fd_err, abs((hp - hm) / (2 * h) - r["grad_logit"]))
    ok = mid < 1e-9 and g5 < g1 and fd_err < 1e-6
    _check(8, ok, f"curves: |grad| at p=0.5 {mid:.1e} (<1e-9); |grad| at p=0.8 alpha=5 {g5:.4f} < alpha=1 {g1:.4f}; FD err {fd_err:.1e} (<1e-6)")


# ---------------------------------------------------------------- 9


def test_criterion_09_worker_determinism(tmp_path):
    feats = tmp_path / "feats.fsfv"
    assert cli.main(["gen-synth", "--classes", "12", "--dim", "16", "--per-class", "60", "--separation", "3", "--seed", "5", "--out", str(feats)]) == 0
    reports = []
    for workers in (1, 8):
        out = tmp_path / f"r{workers}.json"
        argv = ["run", "--features", str(feats), "--method", "alpha-tim", "--tasks", "300", "--iterations", "50",
                "--seed", "9", "--workers", str(workers), "--per-task", "--out", str(out)]
        assert cli.main(argv) == 0
        data = json.loads(out.read_text())
        data.pop("wall_time_seconds")
        reports.append(json.dumps(data, sort_keys=True))
    same = reports[0] == reports[1]
    _check(9, same, f"run with workers 1 vs 8 (300 tasks, {300 // 64 + 1} chunks): JSON identical excluding wall time: {same}")
