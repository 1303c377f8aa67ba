"""Per-task classifiers on frozen, L2-normalized features.

Posteriors are p_ik ∝ exp(-tau/2 * ||w_k - z_i||^2) over prototypes
W = (w_1..w_K).  TIM minimizes

    CE(support) + H(Y_Q | X_Q) - lambda * H(Y_Q)

and alpha-TIM replaces both query entropies with Tsallis alpha-entropies
(with unit weight on the marginal term).  Both are fit by plain full-batch
gradient descent on W with analytic gradients.

The numeric kernels operate on stacks of equally shaped tasks, leading
axis = task, so a whole chunk of an evaluation runs as one array program.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DivergenceError, DomainError
from .mathcore import distance_logits, log_softmax, normalize_l2, softmax

LOSS_KINDS = ("tim", "alpha_tim")
LOG_FLOOR = 1e-12
# p_hat ** (alpha - 1) floor for alpha < 1
_POW_FLOOR = 1e-300


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 2.0
    lam: float = 1.0
    tau: float = 15.0
    iterations: int = 1000
    learning_rate: float = 1e-3
    use_ce: bool = True
    use_conditional: bool = True
    use_marginal: bool = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if not self.lam >= 0:
            raise DomainError("lambda must be nonnegative")
        if not self.tau > 0:
            raise DomainError("tau must be positive")
        if self.iterations < 1:
            raise DomainError("iterations must be at least 1")
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")


@dataclass
class ClassifierState:
    prototypes: np.ndarray
    config: LossConfig = field(default_factory=LossConfig)


@dataclass(frozen=True)
class SinkhornConfig:
    """Balanced-assignment settings; ``column_marginal=None`` means uniform 1/K."""

    iterations: int = 100
    epsilon: float = 0.05
    column_marginal: tuple = None

    def __post_init__(self):
        if self.iterations < 1:
            raise DomainError("iterations must be at least 1")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.column_marginal is not None:
            c = np.asarray(self.column_marginal, dtype=np.float64)
            if np.any(c < 0) or abs(c.sum() - 1.0) > 1e-9:
                raise DomainError("column_marginal must be a probability vector")


# ---------------------------------------------------------------- stacking


def stack_tasks(tasks):
    """(support Z, support labels, query Z) arrays with a leading task axis."""
    shapes = {(t.support_features.shape, t.query_features.shape, t.ways) for t in tasks}
    if len(shapes) != 1:
        raise DomainError("tasks in a stack must share ways, shots, query size and dim")
    zs = np.stack([t.support_features for t in tasks])
    ys = np.stack([t.support_labels for t in tasks])
    zq = np.stack([t.query_features for t in tasks])
    return zs, ys, zq


def class_means(zs, ys, k):
    """L2-normalized per-class means of the support features, shape (T, K, d)."""
    onehot = np.eye(k)[ys]
    sums = np.einsum("tnk,tnd->tkd", onehot, zs)
    return normalize_l2(sums / onehot.sum(axis=1)[:, :, None])


# ------------------------------------------------------------------ losses


def _logit_grad_to_prototypes(g, z, w, tau):
    # s_nk = -(tau/2)||z_n - w_k||^2  =>  ds_nk/dw_k = tau (z_n - w_k)
    return tau * (np.swapaxes(g, 1, 2) @ z - g.sum(axis=1)[:, :, None] * w)


def _softmax_backward(p, p_times_dl_dp):
    # dL/ds_ik = p_ik * (dL/dp_ik - sum_j p_ij dL/dp_ij), given p * dL/dp
    return p_times_dl_dp - p * p_times_dl_dp.sum(axis=-1, keepdims=True)


def _shannon_query_terms(pq, logpq, cfg):
    q = pq.shape[1]
    value = np.zeros(pq.shape[0])
    pa = np.zeros_like(pq)
    if cfg.use_conditional:
        value += -(pq * logpq).sum(axis=(1, 2)) / q
        pa += -pq * (logpq + 1.0) / q
    if cfg.use_marginal and cfg.lam != 0:
        p_hat = pq.mean(axis=1)
        log_hat = np.log(np.maximum(p_hat, LOG_FLOOR))
        value += cfg.lam * (p_hat * log_hat).sum(axis=1)
        pa += pq * (cfg.lam * (log_hat + 1.0) / q)[:, None, :]
    return value, pa


def _alpha_query_terms(pq, alpha, cfg):
    q = pq.shape[1]
    value = np.zeros(pq.shape[0])
    pa = np.zeros_like(pq)
    scale = 1.0 / (alpha - 1.0)
    if cfg.use_conditional:
        p_pow = pq**alpha
        # (1/|Q|) sum_i H_alpha(p_i)
        value += scale * (1.0 - p_pow.sum(axis=2).mean(axis=1))
        pa += -alpha * scale * p_pow / q
    if cfg.use_marginal:
        p_hat = pq.mean(axis=1)
        # - H_alpha(p_hat)
        value += -scale * (1.0 - (p_hat**alpha).sum(axis=1))
        hat_pow = np.maximum(p_hat, _POW_FLOOR) ** (alpha - 1.0)
        pa += pq * (alpha * scale * hat_pow / q)[:, None, :]
    return value, pa


def loss_and_grad(w, zs, ys, zq, cfg, kind):
    """Loss value per task (T,) and gradient w.r.t. prototypes (T, K, d).

    ``kind='alpha_tim'`` with ``cfg.alpha == 1`` evaluates the Shannon
    terms with unit marginal weight, i.e. exactly TIM at lambda = 1.
    """
    if kind not in LOSS_KINDS:
        raise DomainError(f"unknown loss kind {kind!r}")
    t, k, _ = w.shape
    value = np.zeros(t)
    grad = np.zeros_like(w)

    if cfg.use_ce:
        s_sup = distance_logits(w, zs, cfg.tau)
        logp_sup = log_softmax(s_sup)
        onehot = np.eye(k)[ys]
        n_sup = zs.shape[1]
        value += -(onehot * logp_sup).sum(axis=(1, 2)) / n_sup
        g_sup = (np.exp(logp_sup) - onehot) / n_sup
        grad += _logit_grad_to_prototypes(g_sup, zs, w, cfg.tau)

    if cfg.use_conditional or cfg.use_marginal:
        s_q = distance_logits(w, zq, cfg.tau)
        logpq = log_softmax(s_q)
        pq = np.exp(logpq)
        if kind == "tim":
            v, pa = _shannon_query_terms(pq, logpq, cfg)
        elif float(cfg.alpha) == 1.0:
            v, pa = _shannon_query_terms(pq, logpq, replace(cfg, lam=1.0))
        else:
            v, pa = _alpha_query_terms(pq, cfg.alpha, cfg)
        value += v
        grad += _logit_grad_to_prototypes(_softmax_backward(pq, pa), zq, w, cfg.tau)
    return value, grad


def _single(state, task, kind):
    zs, ys, zq = stack_tasks([task])
    w = np.asarray(state.prototypes, dtype=np.float64)[None]
    value, grad = loss_and_grad(w, zs, ys, zq, state.config, kind)
    if not (np.isfinite(value[0]) and np.all(np.isfinite(grad))):
        raise DivergenceError("loss or gradient is not finite")
    return float(value[0]), grad[0]


def tim_loss(state, task):
    """TIM loss and its gradient w.r.t. the prototypes."""
    return _single(state, task, "tim")


def alpha_tim_loss(state, task):
    """alpha-TIM loss and its gradient w.r.t. the prototypes."""
    return _single(state, task, "alpha_tim")


# --------------------------------------------------------------- inference


def init_prototypes(task, config=None):
    zs, ys, _ = stack_tasks([task])
    return ClassifierState(class_means(zs, ys, task.ways)[0], config or LossConfig())


def fit_prototypes(w0, zs, ys, zq, cfg, kind, trace=False):
    """Run ``cfg.iterations`` gradient-descent steps from ``w0`` on a task stack.

    Returns the final prototypes, plus the per-step loss history when
    ``trace`` is set.
    """
    w = np.array(w0, dtype=np.float64)
    history = []
    for step in range(cfg.iterations):
        value, grad = loss_and_grad(w, zs, ys, zq, cfg, kind)
        bad = ~(np.isfinite(value) & np.isfinite(grad).all(axis=(1, 2)))
        if bad.any():
            where = np.flatnonzero(bad).tolist()
            raise DivergenceError(f"non-finite loss at step {step}", positions=where)
        if trace:
            history.append(value.copy())
        w -= cfg.learning_rate * grad
    if not np.all(np.isfinite(w)):
        bad = ~np.isfinite(w).all(axis=(1, 2))
        raise DivergenceError("prototypes became non-finite", positions=np.flatnonzero(bad).tolist())
    return (w, np.array(history)) if trace else w


def fit_transductive(task, cfg, loss_kind="alpha_tim"):
    zs, ys, zq = stack_tasks([task])
    w0 = class_means(zs, ys, task.ways)
    return ClassifierState(fit_prototypes(w0, zs, ys, zq, cfg, loss_kind)[0], cfg)


def query_posteriors(w, zq, tau):
    return softmax(distance_logits(w, zq, tau))


def predict(state, task):
    """Arg-max posterior label for every query sample; ties go to the lower class."""
    p = query_posteriors(state.prototypes, task.query_features, state.config.tau)
    return np.argmax(p, axis=-1)


def nearest_mean_labels(means, zq):
    d2 = -2.0 * distance_logits(means, zq, 1.0)
    return np.argmin(d2, axis=-1)


def simpleshot_predict(task):
    """Inductive nearest normalized class mean; each query sample is labeled on its own."""
    zs, ys, _ = stack_tasks([task])
    means = class_means(zs, ys, task.ways)[0]
    return nearest_mean_labels(means, task.query_features)


def sinkhorn_plan(cost, epsilon, iterations, col_marginal=None):
    """Entropic transport plans for a stack of (T, Q, K) costs.

    Rows are scaled to 1/Q and columns to ``col_marginal`` (uniform 1/K by
    default); the last scaling is over rows, so row sums are exact.
    """
    t, q, k = cost.shape
    r = np.full(q, 1.0 / q)
    c = np.full(k, 1.0 / k) if col_marginal is None else np.asarray(col_marginal, dtype=np.float64)
    # per-row shifts are absorbed by the row scaling
    m = np.exp(-(cost - cost.min(axis=2, keepdims=True)) / epsilon)
    for _ in range(iterations):
        m *= (c / m.sum(axis=1))[:, None, :]
        m *= (r / m.sum(axis=2))[:, :, None]
        bad = ~np.isfinite(m).all(axis=(1, 2))
        if bad.any():
            raise DivergenceError("Sinkhorn scaling produced non-finite values", positions=np.flatnonzero(bad).tolist())
    return m


def sinkhorn_balanced_predict(task, cfg=None):
    cfg = cfg or SinkhornConfig()
    zs, ys, zq = stack_tasks([task])
    w = class_means(zs, ys, task.ways)
    cost = -2.0 * distance_logits(w, zq, 1.0)
    plan = sinkhorn_plan(cost, cfg.epsilon, cfg.iterations, cfg.column_marginal)
    return np.argmax(plan[0], axis=-1)
