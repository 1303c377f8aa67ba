"""Random variates: Gamma, Dirichlet, and integer query counts.

Streams are keyed by ``(seed, stream_id)`` on a Philox counter-based bit
generator, so task ``i`` owns stream ``i`` and never depends on how many
other tasks were drawn before it.
"""

import numpy as np

from .errors import DomainError, InfeasibleError

_U64 = (1 << 64) - 1


class RngStream:
    """Independent, reproducible random stream identified by (seed, stream_id)."""

    def __init__(self, seed, stream_id=0):
        seed, stream_id = int(seed), int(stream_id)
        if not (0 <= seed <= _U64 and 0 <= stream_id <= _U64):
            raise DomainError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = seed
        self.stream_id = stream_id
        key = np.array([seed, stream_id], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self, size=None):
        return self.generator.random(size)

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def permutation(self, n):
        return self.generator.permutation(n)

    def choice(self, n, size):
        """``size`` distinct integers from range(n), in random order."""
        return self.generator.permutation(n)[:size]


def _log_gamma_variates(shapes, rng):
    """log of unit-scale Gamma draws, one per entry of ``shapes``.

    Marsaglia-Tsang squeeze/rejection for shape >= 1.  Shapes below 1 draw
    at shape + 1 and add log(U) / shape, which stays finite where the
    multiplied form would underflow.
    """
    shapes = np.asarray(shapes, dtype=np.float64)
    if np.any(~(shapes > 0)):
        raise DomainError("Gamma shape must be positive")
    flat = shapes.ravel()
    boosted = flat < 1.0
    a = np.where(boosted, flat + 1.0, flat)
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)

    out = np.empty_like(flat)
    pending = np.arange(flat.size)
    while pending.size:
        x = rng.normal(pending.size)
        u = rng.uniform(pending.size)
        dp, cp = d[pending], c[pending]
        t = 1.0 + cp * x
        ok = t > 0
        v = np.where(ok, t, 1.0) ** 3
        x2 = x * x
        accept = ok & (
            (u < 1.0 - 0.0331 * x2 * x2)
            | (np.log(np.where(u > 0, u, 1e-300)) < 0.5 * x2 + dp * (1.0 - v + np.log(v)))
        )
        done = pending[accept]
        out[done] = np.log(dp[accept]) + np.log(v[accept])
        pending = pending[~accept]

    idx = np.flatnonzero(boosted)
    if idx.size:
        u = rng.uniform(idx.size)
        # random() is in [0, 1); 1 - u keeps the log finite
        out[idx] += np.log1p(-u) / flat[idx]
    return out.reshape(shapes.shape)


def sample_gamma(shape, rng, size=None):
    """Unit-scale Gamma(shape) draw(s)."""
    if not shape > 0:
        raise DomainError(f"Gamma shape must be positive, got {shape}")
    n = 1 if size is None else size
    draws = np.exp(_log_gamma_variates(np.full(n, float(shape)), rng))
    return float(draws[0]) if size is None else draws


def sample_dirichlet(a, rng, size=None):
    """Dirichlet(a) draw(s) built by normalizing independent Gamma(a_k) variates."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise DomainError("Dirichlet parameters must be a non-empty vector")
    if np.any(~(a > 0)):
        raise DomainError("Dirichlet parameters must be positive")
    lead = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    logs = _log_gamma_variates(np.broadcast_to(a, lead + a.shape), rng)
    # p_k = n_k / sum n, evaluated from logs
    logs = logs - logs.max(axis=-1, keepdims=True)
    n = np.exp(logs)
    return n / n.sum(axis=-1, keepdims=True)


def apportion(p, total):
    """Largest-remainder rounding of ``p * total`` to integers summing to ``total``.

    Leftover units go to the largest fractional remainders; equal remainders
    favour the lower class index.
    """
    total = int(total)
    if total < 1:
        raise DomainError("total must be at least 1")
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0) or not p.sum() > 0:
        raise DomainError("proportions must be a nonnegative vector with positive mass")
    p = p / p.sum()
    exact = p * total
    counts = np.floor(exact).astype(np.int64)
    remainders = exact - counts
    left = total - int(counts.sum())
    if left < 0:
        # only reachable through rounding noise at the simplex boundary
        order = np.lexsort((np.arange(p.size), np.round(remainders, 9)))
        for k in order[:-left]:
            counts[k] -= 1
    elif left > 0:
        order = np.lexsort((np.arange(p.size), -np.round(remainders, 9)))
        counts[order[:left]] += 1
    return counts


def sample_query_counts(a, k, total, rng):
    """Query class counts: Dirichlet(a * 1_K) proportions, then apportionment."""
    if not a > 0:
        raise DomainError("concentration must be positive")
    if k < 1:
        raise DomainError("K must be positive")
    return apportion(sample_dirichlet(np.full(k, float(a)), rng), total)


def linear_imbalance_counts(k, total, rng):
    """Arithmetic progression of K positive counts summing to ``total``.

    Chooses the largest feasible step, then assigns counts to classes at random.
    """
    if k < 1 or total < 1:
        raise DomainError("K and total must be positive")
    tri = k * (k - 1) // 2
    step = (total - k) // tri if tri else 0
    while step >= 0:
        rest = total - step * tri
        if rest % k == 0 and rest // k >= 1:
            first = rest // k
            counts = first + step * np.arange(k, dtype=np.int64)
            return counts[rng.permutation(k)]
        step -= 1
    raise InfeasibleError(f"no arithmetic progression of {k} positive integers sums to {total}")


def step_imbalance_counts(k, total, minority, rng):
    """One class gets ``minority`` samples, the other K-1 split the rest equally."""
    if k < 2:
        raise DomainError("step imbalance needs at least two classes")
    if minority < 1 or minority > total:
        raise DomainError("minority must lie in [1, total]")
    rest = total - minority
    if rest % (k - 1):
        raise InfeasibleError(f"{rest} samples cannot be split equally over {k - 1} classes")
    counts = np.full(k, rest // (k - 1), dtype=np.int64)
    counts[0] = minority
    return counts[rng.permutation(k)]
