"""Benchmark harness: accuracy over many tasks, sweeps and validation tuning.

Tasks are processed in fixed chunks of ``CHUNK_SIZE`` consecutive task
indices.  Chunk boundaries never depend on the worker count, so reports
are bit-identical for any ``workers`` setting.
"""

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .classifiers import (
    LossConfig,
    SinkhornConfig,
    class_means,
    distance_logits,
    fit_prototypes,
    nearest_mean_labels,
    query_posteriors,
    sinkhorn_plan,
    stack_tasks,
)
from .errors import DivergenceError, DomainError, EvaluationError
from .tasks import TaskSpec, build_task

METHODS = ("simpleshot", "tim", "alpha_tim", "sinkhorn_balanced")
SWEEP_PARAMS = ("alpha", "lambda", "dirichlet_a")
CHUNK_SIZE = 64
Z_95 = 1.96


def canonical_method(name):
    name = name.replace("-", "_")
    if name not in METHODS:
        raise DomainError(f"unknown method {name!r}; expected one of {METHODS}")
    return name


@dataclass(frozen=True)
class EvalConfig:
    method: str = "alpha_tim"
    task_spec: TaskSpec = field(default_factory=TaskSpec)
    loss_config: LossConfig = field(default_factory=LossConfig)
    sinkhorn_config: SinkhornConfig = field(default_factory=SinkhornConfig)
    n_tasks: int = 10_000
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "method", canonical_method(self.method))
        if self.n_tasks < 1:
            raise DomainError("n_tasks must be at least 1")
        if self.workers < 1:
            raise DomainError("workers must be at least 1")

    def describe(self):
        """Settings that determine the results; ``workers`` is deliberately absent."""
        spec = asdict(self.task_spec)
        spec.pop("task_index")
        out = {"method": self.method, "n_tasks": self.n_tasks, "task_spec": spec}
        if self.method in ("tim", "alpha_tim"):
            loss = asdict(self.loss_config)
            loss.pop("alpha" if self.method == "tim" else "lam")
            out["loss_config"] = loss
        if self.method == "sinkhorn_balanced":
            sk = asdict(self.sinkhorn_config)
            if sk["column_marginal"] is not None:
                sk["column_marginal"] = list(sk["column_marginal"])
            out["sinkhorn_config"] = sk
        return out

    def fingerprint(self):
        blob = json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class EvalReport:
    method: str
    config: dict
    per_task_accuracy: np.ndarray
    mean_accuracy: float
    ci95: float
    config_fingerprint: str
    seed: int
    n_tasks: int
    wall_time_seconds: float

    @classmethod
    def from_accuracies(cls, cfg, accuracies, wall_time=0.0):
        acc = np.asarray(accuracies, dtype=np.float64)
        mean, ci = summarize(acc)
        return cls(
            method=cfg.method,
            config=cfg.describe(),
            per_task_accuracy=acc,
            mean_accuracy=mean,
            ci95=ci,
            config_fingerprint=cfg.fingerprint(),
            seed=cfg.task_spec.seed,
            n_tasks=int(acc.size),
            wall_time_seconds=float(wall_time),
        )

    def to_dict(self, per_task=False):
        out = {
            "method": self.method,
            "config": self.config,
            "mean_accuracy": self.mean_accuracy,
            "ci95": self.ci95,
            "n_tasks": self.n_tasks,
            "seed": self.seed,
            "wall_time_seconds": self.wall_time_seconds,
            "fingerprint": self.config_fingerprint,
        }
        if per_task:
            out["per_task_accuracy"] = self.per_task_accuracy.tolist()
        return out

    def to_json(self, per_task=False):
        return json.dumps(self.to_dict(per_task), indent=2, sort_keys=True)


def summarize(accuracies):
    """Mean and normal-approximation 95% half-width (1.96 * sample std / sqrt(n))."""
    acc = np.asarray(accuracies, dtype=np.float64)
    n = acc.size
    mean = float(acc.mean())
    std = float(acc.std(ddof=1)) if n > 1 else 0.0
    return mean, Z_95 * std / np.sqrt(n)


def _predict_stack(method, zs, ys, zq, k, cfg):
    w0 = class_means(zs, ys, k)
    if method == "simpleshot":
        return nearest_mean_labels(w0, zq)
    if method == "sinkhorn_balanced":
        sk = cfg.sinkhorn_config
        cost = -2.0 * distance_logits(w0, zq, 1.0)
        return np.argmax(sinkhorn_plan(cost, sk.epsilon, sk.iterations, sk.column_marginal), axis=-1)
    w = fit_prototypes(w0, zs, ys, zq, cfg.loss_config, method)
    return np.argmax(query_posteriors(w, zq, cfg.loss_config.tau), axis=-1)


def evaluate_chunk(fs, cfg, start, stop):
    """Per-task accuracies for task indices ``start .. stop - 1``."""
    tasks = []
    for i in range(start, stop):
        try:
            tasks.append(build_task(fs, cfg.task_spec.with_index(i)))
        except Exception as exc:
            raise EvaluationError(i, exc) from exc
    zs, ys, zq = stack_tasks(tasks)
    try:
        pred = _predict_stack(cfg.method, zs, ys, zq, cfg.task_spec.ways, cfg)
    except DivergenceError as exc:
        first = start + (exc.positions[0] if exc.positions else 0)
        raise EvaluationError(first, exc) from exc
    truth = np.stack([t.hidden_query_labels for t in tasks])
    return (pred == truth).mean(axis=1)


def evaluate(fs, cfg):
    t0 = time.perf_counter()
    bounds = [(s, min(s + CHUNK_SIZE, cfg.n_tasks)) for s in range(0, cfg.n_tasks, CHUNK_SIZE)]
    if cfg.workers == 1 or len(bounds) == 1:
        parts = [evaluate_chunk(fs, cfg, s, e) for s, e in bounds]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda b: evaluate_chunk(fs, cfg, *b), bounds))
    return EvalReport.from_accuracies(cfg, np.concatenate(parts), time.perf_counter() - t0)


def with_param(cfg, param, value):
    """Copy of ``cfg`` with one sweepable setting replaced."""
    if param == "alpha":
        return replace(cfg, loss_config=replace(cfg.loss_config, alpha=float(value)))
    if param == "lambda":
        return replace(cfg, loss_config=replace(cfg.loss_config, lam=float(value)))
    if param == "dirichlet_a":
        spec = replace(cfg.task_spec, imbalance="dirichlet", dirichlet_a=float(value))
        return replace(cfg, task_spec=spec)
    raise DomainError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")


def sweep(fs, cfg, param, values):
    param = param.replace("-", "_")
    if not len(values):
        raise DomainError("sweep needs at least one value")
    return [(float(v), evaluate(fs, with_param(cfg, param, v))) for v in values]


def best_value(results):
    """Grid value with the highest mean accuracy; ties go to the smaller value."""
    ranked = sorted(results, key=lambda vr: (-vr[1].mean_accuracy, vr[0]))
    return ranked[0][0]


def tune(fs_validation, cfg, param, grid):
    return best_value(sweep(fs_validation, cfg, param, grid))


def write_sweep_csv(results, fh):
    fh.write("param_value,mean_accuracy,ci95\n")
    for value, report in results:
        fh.write(f"{value!r},{report.mean_accuracy!r},{report.ci95!r}\n")
