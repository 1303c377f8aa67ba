"""Few-shot task construction.

A task samples ``ways`` classes uniformly without replacement, draws a
balanced support set, then draws query samples according to class counts
produced by the chosen imbalance mode.  All randomness for task ``i``
comes from ``RngStream(seed, i)``.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, InfeasibleError
from .mathcore import normalize_l2
from .sampling import (
    RngStream,
    apportion,
    linear_imbalance_counts,
    sample_query_counts,
    step_imbalance_counts,
)

IMBALANCE_MODES = ("dirichlet", "balanced", "linear", "step")


@dataclass(frozen=True)
class TaskSpec:
    ways: int = 5
    shots: int = 5
    query_total: int = 75
    imbalance: str = "dirichlet"
    dirichlet_a: float = 2.0
    minority: int = 1
    seed: int = 0
    task_index: int = 0

    def __post_init__(self):
        if self.ways < 2:
            raise DomainError("ways must be at least 2")
        if self.shots < 1:
            raise DomainError("shots must be at least 1")
        if self.query_total < 1:
            raise DomainError("query_total must be at least 1")
        if self.imbalance not in IMBALANCE_MODES:
            raise DomainError(f"imbalance must be one of {IMBALANCE_MODES}")
        if self.imbalance == "dirichlet" and not self.dirichlet_a > 0:
            raise DomainError("dirichlet_a must be positive")

    def with_index(self, task_index):
        return replace(self, task_index=int(task_index))


def default_spec_for_split(split_tag, **overrides):
    """Validation tasks use a uniform Dirichlet (a = 1), test tasks a = 2."""
    a = 1.0 if split_tag == "validation" else 2.0
    return TaskSpec(**{"imbalance": "dirichlet", "dirichlet_a": a, **overrides})


@dataclass(frozen=True, eq=False)
class Task:
    support_features: np.ndarray
    support_labels: np.ndarray
    query_features: np.ndarray
    hidden_query_labels: np.ndarray
    class_map: np.ndarray
    support_index: np.ndarray
    query_index: np.ndarray

    @property
    def ways(self):
        return len(self.class_map)

    @property
    def query_counts(self):
        return np.bincount(self.hidden_query_labels, minlength=self.ways)

    def equals(self, other):
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in self.__dataclass_fields__
        )


def query_counts(spec, rng):
    k, total = spec.ways, spec.query_total
    if spec.imbalance == "balanced":
        return apportion(np.full(k, 1.0 / k), total)
    if spec.imbalance == "dirichlet":
        return sample_query_counts(spec.dirichlet_a, k, total, rng)
    if spec.imbalance == "linear":
        return linear_imbalance_counts(k, total, rng)
    return step_imbalance_counts(k, total, spec.minority, rng)


def cap_counts(counts, capacity):
    """Clip counts to capacity, re-apportioning the surplus over spare capacity.

    The total is preserved; raises InfeasibleError if the classes cannot
    absorb it.
    """
    counts = np.asarray(counts, dtype=np.int64).copy()
    capacity = np.asarray(capacity, dtype=np.int64)
    if counts.sum() > capacity.sum():
        raise InfeasibleError(
            f"{counts.sum()} query samples requested but only {capacity.sum()} available"
        )
    while True:
        surplus = int(np.maximum(counts - capacity, 0).sum())
        if surplus == 0:
            return counts
        counts = np.minimum(counts, capacity)
        spare = capacity - counts
        counts += apportion(spare / spare.sum(), surplus)


def build_task(fs, spec):
    rng = RngStream(spec.seed, spec.task_index)
    per_class = fs.class_indices()
    eligible = np.flatnonzero(np.array([len(ix) for ix in per_class]) >= spec.shots)
    if eligible.size < spec.ways:
        raise InfeasibleError(
            f"{spec.ways}-way tasks need {spec.ways} classes with >= {spec.shots} samples, "
            f"found {eligible.size}"
        )
    classes = eligible[rng.choice(eligible.size, spec.ways)]

    counts = query_counts(spec, rng)
    shuffled = [per_class[c][rng.permutation(len(per_class[c]))] for c in classes]
    capacity = np.array([len(ix) - spec.shots for ix in shuffled])
    counts = cap_counts(counts, capacity)

    support_index = np.concatenate([ix[: spec.shots] for ix in shuffled])
    support_labels = np.repeat(np.arange(spec.ways), spec.shots)
    query_index = np.concatenate(
        [ix[spec.shots : spec.shots + n] for ix, n in zip(shuffled, counts)]
    )
    query_labels = np.repeat(np.arange(spec.ways), counts)
    order = rng.permutation(query_index.size)
    query_index, query_labels = query_index[order], query_labels[order]

    return Task(
        support_features=normalize_l2(fs.features[support_index]),
        support_labels=support_labels,
        query_features=normalize_l2(fs.features[query_index]),
        hidden_query_labels=query_labels,
        class_map=classes.astype(np.int64),
        support_index=support_index,
        query_index=query_index,
    )


def build_task_batch(fs, spec_template, n_tasks, start=0):
    """Tasks ``start .. start + n_tasks - 1``, each built from its own stream."""
    if n_tasks < 1:
        raise DomainError("n_tasks must be at least 1")
    return [build_task(fs, spec_template.with_index(i)) for i in range(start, start + n_tasks)]
