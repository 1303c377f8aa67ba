import numpy as np

from alphatim.mathcore import normalize_l2
from alphatim.tasks import Task


def random_task(rng, k, d, shots, n_query):
    zs = normalize_l2(rng.normal(size=(k * shots, d)))
    ys = np.repeat(np.arange(k), shots)
    zq = normalize_l2(rng.normal(size=(n_query, d)))
    yq = rng.integers(0, k, size=n_query)
    return make_task(zs, ys, zq, yq)


def make_task(zs, ys, zq, yq):
    k = int(max(ys.max(), yq.max())) + 1
    return Task(
        support_features=np.asarray(zs, dtype=float),
        support_labels=np.asarray(ys),
        query_features=np.asarray(zq, dtype=float),
        hidden_query_labels=np.asarray(yq),
        class_map=np.arange(k),
        support_index=np.arange(len(ys)),
        query_index=np.arange(len(ys), len(ys) + len(yq)),
    )


def task_with_counts(fs, classes, shots, counts, seed=0):
    """Task over ``classes`` with exactly ``counts`` query samples per class."""
    rng = np.random.default_rng(seed)
    sup, qry, yq = [], [], []
    for k, (c, n) in enumerate(zip(classes, counts)):
        idx = rng.permutation(np.flatnonzero(fs.labels == c))
        sup.append(idx[:shots])
        qry.append(idx[shots : shots + n])
        yq += [k] * n
    sup, qry = np.concatenate(sup), np.concatenate(qry)
    return Task(
        support_features=normalize_l2(fs.features[sup]),
        support_labels=np.repeat(np.arange(len(classes)), shots),
        query_features=normalize_l2(fs.features[qry]),
        hidden_query_labels=np.array(yq),
        class_map=np.array(classes),
        support_index=sup,
        query_index=qry,
    )


def finite_difference_grad(f, w, h=1e-5):
    g = np.zeros_like(w)
    for idx in np.ndindex(w.shape):
        up, dn = w.copy(), w.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (f(up) - f(dn)) / (2 * h)
    return g
