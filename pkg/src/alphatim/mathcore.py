"""Entropies, divergences and the distance-softmax posterior.

Every function works in float64.  ``alpha == 1`` is routed to the exact
Shannon / KL expressions instead of a numerical limit.
"""

import numpy as np

from .errors import DomainError

SIMPLEX_ATOL = 1e-9


def _is_shannon(alpha):
    return float(alpha) == 1.0


def _check_alpha(alpha):
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")


def as_prob_vector(p, atol=SIMPLEX_ATOL):
    """Validate ``p`` as a point of the probability simplex and return it as float64."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("probability vector must be a non-empty 1-d array")
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise DomainError("probability entries must lie in [0, 1]")
    if abs(p.sum() - 1.0) > atol:
        raise DomainError(f"probabilities sum to {p.sum()!r}, expected 1")
    return p


def generalized_log(x, alpha):
    """log_alpha(x) = (x^(1-alpha) - 1) / (1 - alpha); natural log at alpha == 1."""
    _check_alpha(alpha)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise DomainError("generalized_log is defined for x > 0 only")
    if _is_shannon(alpha):
        out = np.log(x)
    else:
        out = (np.power(x, 1.0 - alpha) - 1.0) / (1.0 - alpha)
    return float(out) if out.ndim == 0 else out


def _xlogx(p):
    # 0 * log 0 = 0
    safe = np.where(p > 0, p, 1.0)
    return np.where(p > 0, p * np.log(safe), 0.0)


def shannon_entropy(p):
    p = as_prob_vector(p)
    return float(max(-_xlogx(p).sum(), 0.0))


def alpha_entropy(p, alpha):
    """Tsallis entropy (1 - sum p^alpha) / (alpha - 1)."""
    _check_alpha(alpha)
    if _is_shannon(alpha):
        return shannon_entropy(p)
    p = as_prob_vector(p)
    return float((1.0 - np.power(p, alpha).sum()) / (alpha - 1.0))


def kl_divergence(p, q):
    p = as_prob_vector(p)
    q = as_prob_vector(q)
    if p.shape != q.shape:
        raise DomainError("p and q must have the same length")
    support = p > 0
    if np.any(q[support] == 0):
        raise DomainError("p is not absolutely continuous with respect to q")
    d = np.sum(p[support] * np.log(p[support] / q[support]))
    return float(max(d, 0.0))


def alpha_divergence(p, q, alpha):
    """Tsallis alpha-divergence (1 - sum p^alpha q^(1-alpha)) / (1 - alpha)."""
    _check_alpha(alpha)
    if _is_shannon(alpha):
        return kl_divergence(p, q)
    p = as_prob_vector(p)
    q = as_prob_vector(q)
    if p.shape != q.shape:
        raise DomainError("p and q must have the same length")
    support = p > 0
    if np.any(q[support] == 0):
        if alpha > 1:
            raise DomainError("p is not absolutely continuous with respect to q")
    ps, qs = p[support], q[support]
    qpow = np.zeros_like(qs)
    pos = qs > 0
    qpow[pos] = np.power(qs[pos], 1.0 - alpha)
    d = (1.0 - np.sum(np.power(ps, alpha) * qpow)) / (1.0 - alpha)
    return float(max(d, 0.0))


def softmax(logits, axis=-1):
    """Softmax with max-logit subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits, axis=-1):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def distance_logits(prototypes, z, tau):
    """Logits -(tau/2) * ||w_k - z_i||^2 for rows ``z`` against prototypes ``w``.

    Works on stacks: prototypes (..., K, d), z (..., N, d) -> (..., N, K).
    """
    w = np.asarray(prototypes, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    zz = np.einsum("...nd,...nd->...n", z, z)[..., :, None]
    ww = np.einsum("...kd,...kd->...k", w, w)[..., None, :]
    d2 = np.maximum(zz + ww - 2.0 * (z @ np.swapaxes(w, -1, -2)), 0.0)
    return -0.5 * tau * d2


def posterior(prototypes, z, tau):
    """Class posterior of a single unit-norm feature ``z``."""
    if not tau > 0:
        raise DomainError("tau must be positive")
    w = np.asarray(prototypes, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if w.ndim != 2 or z.ndim != 1 or w.shape[1] != z.shape[0]:
        raise DomainError("expected prototypes of shape (K, d) and z of shape (d,)")
    if not np.all(np.isfinite(w)):
        raise DomainError("prototypes must be finite")
    if abs(np.linalg.norm(z) - 1.0) > 1e-6:
        raise DomainError("z must have unit L2 norm")
    return softmax(distance_logits(w, z[None, :], tau)[0])


def normalize_l2(x, axis=-1):
    """Scale ``x`` to unit L2 norm along ``axis``."""
    x = np.asarray(x, dtype=np.float64)
    norm = np.linalg.norm(x, axis=axis, keepdims=True)
    if np.any(norm == 0) or not np.all(np.isfinite(norm)):
        raise DomainError("cannot normalize a zero or non-finite vector")
    return x / norm


def binary_alpha_entropy_and_logit_grad(p, alpha):
    """H_alpha({p, 1-p}) and its derivative w.r.t. the logit l, where p = sigmoid(l)."""
    _check_alpha(alpha)
    p = np.asarray(p, dtype=np.float64)
    q = 1.0 - p
    dp_dl = p * q
    if _is_shannon(alpha):
        h = -(_xlogx(p) + _xlogx(q))
        dh_dp = np.log(q) - np.log(p)
    else:
        h = (1.0 - p**alpha - q**alpha) / (alpha - 1.0)
        dh_dp = -alpha * (p ** (alpha - 1.0) - q ** (alpha - 1.0)) / (alpha - 1.0)
    return h, dh_dp * dp_dl


def entropy_gradient_curve(alphas, grid_size):
    """Rows (p, alpha, H_alpha, dH_alpha/dl) on p = j/(grid_size+1), j = 1..grid_size.

    An odd ``grid_size`` puts p = 0.5 on the grid.
    """
    if grid_size < 3:
        raise DomainError("grid_size must be at least 3")
    p = np.arange(1, grid_size + 1, dtype=np.float64) / (grid_size + 1)
    rows = []
    for alpha in alphas:
        h, g = binary_alpha_entropy_and_logit_grad(p, alpha)
        rows.extend(zip(p.tolist(), [float(alpha)] * grid_size, h.tolist(), g.tolist()))
    return rows


def write_curve_csv(rows, fh):
    fh.write("p,alpha,entropy,grad_logit\n")
    for p, a, h, g in rows:
        fh.write(f"{p!r},{a!r},{h!r},{g!r}\n")
