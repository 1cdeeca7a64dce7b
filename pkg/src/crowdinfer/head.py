"""Dirichlet prediction head: raw scores to concentration parameters,
the analytic Chernoff/Bhattacharyya objective, and a small trainer.

The head maps a feature vector x to raw scores z = A'x + b and combines
two softmax branches so the predicted concentrations always sum to the
prior parameter sum plus the number of observed responses:

    alpha_hat = alpha0_sum * softmax(z) + n * softmax(W z)

Training minimizes the closed-form Chernoff distance between predicted
and target Dirichlet parameters with Adam and linear warmup.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import DirichletParams

# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

_LANCZOS_G = 7.0
_LANCZOS_COEFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


def _check_positive(x: np.ndarray, name: str) -> None:
    if not np.isfinite(x).all() or (x <= 0).any():
        raise ValueError(f"{name} requires positive finite arguments")


def log_gamma(x):
    """Natural log of the gamma function for x > 0 (Lanczos, g=7).

    Arguments below 0.5 are lifted with log_gamma(x) = log_gamma(x+1) - log(x)
    to stay inside the approximation's accurate range.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xv = np.atleast_1d(x)
    _check_positive(xv, "log_gamma")

    small = xv < 0.5
    z = np.where(small, xv + 1.0, xv) - 1.0
    series = np.full_like(z, _LANCZOS_COEFS[0])
    for i, c in enumerate(_LANCZOS_COEFS[1:], start=1):
        series += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    out = _HALF_LOG_TWO_PI + (z + 0.5) * np.log(t) - t + np.log(series)
    out = np.where(small, out - np.log(xv), out)
    return float(out[0]) if scalar else out


def digamma(x):
    """Derivative of log_gamma for x > 0.

    Small arguments are shifted upward by the recurrence psi(x) = psi(x+1) - 1/x,
    then the Stirling-type asymptotic series is applied.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xv = np.atleast_1d(x).astype(float).copy()
    _check_positive(xv, "digamma")

    acc = np.zeros_like(xv)
    for _ in range(9):
        mask = xv < 8.5
        if not mask.any():
            break
        acc[mask] -= 1.0 / xv[mask]
        xv[mask] += 1.0
    inv2 = 1.0 / (xv * xv)
    series = inv2 * (
        1.0 / 12.0
        - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0)))
    )
    out = acc + np.log(xv) - 0.5 / xv - series
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Chernoff / Bhattacharyya distance between Dirichlet distributions
# ---------------------------------------------------------------------------

def _check_tau(tau: float) -> None:
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")


def _chernoff_raw(a: np.ndarray, b: np.ndarray, tau: float) -> np.ndarray:
    """Closed-form Chernoff distance; a, b have shape (..., K)."""
    m = tau * a + (1.0 - tau) * b
    return (
        log_gamma(m.sum(axis=-1))
        - log_gamma(m).sum(axis=-1)
        + tau * (log_gamma(a).sum(axis=-1) - log_gamma(a.sum(axis=-1)))
        + (1.0 - tau) * (log_gamma(b).sum(axis=-1) - log_gamma(b.sum(axis=-1)))
    )


def _chernoff_grad_raw(a: np.ndarray, b: np.ndarray, tau: float) -> np.ndarray:
    """Gradient of the closed form with respect to a's components."""
    m = tau * a + (1.0 - tau) * b
    psi_sm = np.asarray(digamma(m.sum(axis=-1)))
    psi_sa = np.asarray(digamma(a.sum(axis=-1)))
    return tau * (psi_sm[..., None] - digamma(m) + digamma(a) - psi_sa[..., None])


def chernoff(a: DirichletParams, b: DirichletParams, tau: float = 0.5) -> float:
    """Chernoff distance between Dirichlet(a) and Dirichlet(b).

    tau = 1/2 gives the (symmetric) Bhattacharyya distance.  Zero iff the
    parameter vectors coincide; clamped at zero against rounding.
    """
    _check_tau(tau)
    if len(a) != len(b):
        raise ValueError("parameter vectors must have equal length")
    return float(max(_chernoff_raw(a.alpha, b.alpha, tau), 0.0))


def chernoff_grad(a: DirichletParams, b: DirichletParams, tau: float = 0.5) -> np.ndarray:
    """Partial derivatives of chernoff(a, b, tau) w.r.t. a's components."""
    _check_tau(tau)
    if len(a) != len(b):
        raise ValueError("parameter vectors must have equal length")
    return _chernoff_grad_raw(a.alpha, b.alpha, tau)


# ---------------------------------------------------------------------------
# Prediction head
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeadModel:
    """Linear score map plus the learned mixing matrix of the two softmax
    branches."""

    A: np.ndarray          # (d, K) feature -> raw score map
    bias: np.ndarray       # (K,)
    W: np.ndarray          # (K, K) mixing matrix for the response branch
    alpha0_sum: float      # prior parameter sum

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        bias = np.asarray(self.bias, dtype=float)
        W = np.asarray(self.W, dtype=float)
        k = bias.size
        if A.ndim != 2 or A.shape[1] != k or W.shape != (k, k):
            raise ValueError(f"inconsistent parameter shapes: A {A.shape}, bias {bias.shape}, W {W.shape}")
        for name, arr in (("A", A), ("bias", bias), ("W", W)):
            if not np.isfinite(arr).all():
                raise ValueError(f"non-finite entries in {name}")
        if not self.alpha0_sum > 0:
            raise ValueError("alpha0_sum must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "W", W)

    @property
    def feature_dim(self) -> int:
        return self.A.shape[0]

    @property
    def num_categories(self) -> int:
        return self.bias.size


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_batch(model: HeadModel, X: np.ndarray, n: np.ndarray):
    Z = X @ model.A + model.bias
    S = softmax(Z)
    Sigma = softmax(Z @ model.W.T)
    alpha = model.alpha0_sum * S + n[:, None] * Sigma
    return alpha, Z, S, Sigma


def head_forward(model: HeadModel, features: np.ndarray, n: int) -> DirichletParams:
    """Predict Dirichlet parameters for one task at response count n.

    By construction the components sum to alpha0_sum + n.
    """
    features = np.asarray(features, dtype=float)
    if features.shape != (model.feature_dim,):
        raise ValueError(
            f"feature shape {features.shape} does not match model dimension ({model.feature_dim},)"
        )
    if not np.isfinite(features).all():
        raise ValueError("non-finite feature values")
    if n < 0:
        raise ValueError("response count n must be non-negative")
    alpha, _, _, _ = _forward_batch(model, features[None, :], np.array([float(n)]))
    return DirichletParams(alpha[0])


def predict(model: HeadModel, features: np.ndarray, n: int) -> DirichletParams:
    """Alias of head_forward used at pipeline level."""
    return head_forward(model, features, n)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainExample:
    features: np.ndarray
    target_alpha: np.ndarray
    n: float
    weight: float = 1.0
    task_id: Optional[str] = None


@dataclass
class TrainConfig:
    learning_rate: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.995
    warmup_iters: Optional[int] = None   # defaults to ceil(2 / (1 - beta2))
    batch_size: int = 256
    epochs: int = 200
    tau: float = 0.5
    seed: int = 0
    select: str = "best"                 # "best" (monitored loss) or "last"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        _check_tau(self.tau)
        if self.select not in ("best", "last"):
            raise ValueError(f"unknown model selection rule {self.select!r}")
        if self.warmup_iters is None:
            self.warmup_iters = math.ceil(2.0 / (1.0 - self.beta2))


class _Adam:
    def __init__(self, shapes, cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        cfg = self.cfg
        lr = cfg.learning_rate * min(1.0, self.t / max(cfg.warmup_iters, 1))
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = cfg.beta1 * self.m[i] + (1 - cfg.beta1) * g
            self.v[i] = cfg.beta2 * self.v[i] + (1 - cfg.beta2) * g * g
            mhat = self.m[i] / (1 - cfg.beta1 ** self.t)
            vhat = self.v[i] / (1 - cfg.beta2 ** self.t)
            out.append(p - lr * mhat / (np.sqrt(vhat) + 1e-8))
        return out


def _stack(dataset: Sequence[TrainExample]):
    X = np.stack([np.asarray(ex.features, dtype=float) for ex in dataset])
    T = np.stack([np.asarray(ex.target_alpha, dtype=float) for ex in dataset])
    n = np.array([float(ex.n) for ex in dataset])
    w = np.array([float(ex.weight) for ex in dataset])
    return X, T, n, w


def _degenerate_rows(alpha: np.ndarray) -> np.ndarray:
    # softmax underflow or exploded weights leave zero/non-finite components,
    # where the loss is divergent
    return ~(np.isfinite(alpha).all(axis=-1) & (alpha > 0).all(axis=-1))


def _batch_loss_grads(model: HeadModel, X, T, n, w, tau):
    """Weighted mean Chernoff loss and its gradients (dA, dbias, dW)."""
    alpha, Z, S, Sigma = _forward_batch(model, X, n)
    bad = _degenerate_rows(alpha)
    if bad.any():
        J = np.where(bad, np.inf, 0.0)
        zeros = (np.zeros_like(model.A), np.zeros_like(model.bias), np.zeros_like(model.W))
        return math.inf, J, zeros
    J = _chernoff_raw(alpha, T, tau)
    wn = w / w.sum()
    loss = float(J @ wn)

    G = _chernoff_grad_raw(alpha, T, tau) * wn[:, None]
    dS = model.alpha0_sum * G
    dZ = S * dS - S * (S * dS).sum(axis=1, keepdims=True)
    dSigma = n[:, None] * G
    dU = Sigma * dSigma - Sigma * (Sigma * dSigma).sum(axis=1, keepdims=True)
    dZ = dZ + dU @ model.W
    dW = dU.T @ Z
    dA = X.T @ dZ
    dbias = dZ.sum(axis=0)
    return loss, J, (dA, dbias, dW)


def _mean_loss(model: HeadModel, X, T, n, w, tau) -> float:
    alpha, _, _, _ = _forward_batch(model, X, n)
    if _degenerate_rows(alpha).any():
        return math.inf
    J = _chernoff_raw(alpha, T, tau)
    return float(J @ (w / w.sum()))


def init_model(feature_dim: int, num_categories: int, alpha0_sum: float,
               rng: np.random.Generator) -> HeadModel:
    A = rng.normal(0.0, 0.1 / math.sqrt(feature_dim), size=(feature_dim, num_categories))
    return HeadModel(
        A=A,
        bias=np.zeros(num_categories),
        W=np.eye(num_categories),
        alpha0_sum=alpha0_sum,
    )


def train_head(
    dataset: Sequence[TrainExample],
    cfg: TrainConfig,
    val_dataset: Optional[Sequence[TrainExample]] = None,
    alpha0_sum: Optional[float] = None,
    callback: Optional[Callable[[int, float, Optional[float]], None]] = None,
) -> HeadModel:
    """Fit the head by Adam on the weighted mean Bhattacharyya/Chernoff loss.

    Model selection keeps the epoch with the lowest monitored loss
    (validation loss when a validation set is given, else training loss);
    cfg.select="last" disables the snapshotting.  The optional callback
    receives (epoch, train_loss, val_loss) after every epoch.
    """
    if not dataset:
        raise ValueError("empty training dataset")
    X, T, n, w = _stack(dataset)
    k = T.shape[1]
    if alpha0_sum is None:
        alpha0_sum = float(k)
    if val_dataset:
        Xv, Tv, nv, wv = _stack(val_dataset)

    rng = np.random.default_rng(cfg.seed)
    model = init_model(X.shape[1], k, alpha0_sum, rng)
    params = [model.A, model.bias, model.W]
    adam = _Adam([p.shape for p in params], cfg)

    best_loss = math.inf
    best_params = [p.copy() for p in params]
    N = X.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(N)
        for start in range(0, N, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, J, grads = _batch_loss_grads(model, X[idx], T[idx], n[idx], w[idx], cfg.tau)
            if not math.isfinite(loss):
                bad = idx[~np.isfinite(J)]
                bad_id = dataset[bad[0]].task_id if bad.size else "unknown"
                raise RuntimeError(
                    f"non-finite training loss at iteration {adam.t + 1}, example {bad_id}"
                )
            params = adam.step(params, grads)
            model = HeadModel(params[0], params[1], params[2], alpha0_sum)

        train_loss = _mean_loss(model, X, T, n, w, cfg.tau)
        val_loss = _mean_loss(model, Xv, Tv, nv, wv, cfg.tau) if val_dataset else None
        monitored = val_loss if val_dataset else train_loss
        if monitored < best_loss:
            best_loss = monitored
            best_params = [p.copy() for p in params]
        if callback is not None:
            callback(epoch, train_loss, val_loss)

    if cfg.select == "best":
        model = HeadModel(best_params[0], best_params[1], best_params[2], alpha0_sum)
    return model


# ---------------------------------------------------------------------------
# Model file
# ---------------------------------------------------------------------------

_MODEL_FORMAT = 1


def save_model(path, model: HeadModel) -> None:
    payload = {
        "format_version": _MODEL_FORMAT,
        "d": model.feature_dim,
        "C": model.num_categories - 1,
        "alpha0_sum": model.alpha0_sum,
        "A": model.A.tolist(),
        "bias": model.bias.tolist(),
        "W": model.W.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path) -> HeadModel:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format_version") != _MODEL_FORMAT:
        raise ValueError(f"unsupported model format: {payload.get('format_version')}")
    return HeadModel(
        A=np.asarray(payload["A"]),
        bias=np.asarray(payload["bias"]),
        W=np.asarray(payload["W"]),
        alpha0_sum=float(payload["alpha0_sum"]),
    )
