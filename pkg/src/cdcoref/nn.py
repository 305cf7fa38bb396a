"""Minimal trainable-layer toolkit on plain numpy.

Parameters live in a flat dict mapping name -> ndarray so that optimizers,
checkpoints, and finite-difference checks can treat every tensor uniformly.
Layers are pure functions of (params, inputs) returning outputs plus a cache
for the backward pass; gradients are accumulated into a grads dict shaped
like the params dict.

Only the fixed architectures the engine needs are provided: dense layers and
a one-hidden-layer scalar-output feed-forward net with ReLU and inverted
dropout. No general autodiff.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

HIDDEN_WIDTH = 1024
DROPOUT_RATE = 0.3
LEARNING_RATE = 1e-4


def xavier_init(shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Uniform in +-sqrt(6/(fan_in+fan_out)).

    2-d shapes are (fan_out, fan_in); 1-d shapes use the single dimension
    for both fans, which only matters for embedding-style tables.
    """
    if len(shape) == 2:
        fan_out, fan_in = shape
    elif len(shape) == 1:
        fan_out = fan_in = shape[0]
    else:
        raise ValueError(f"unsupported shape {shape}")
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(np.float64)


def init_dense(params: dict, name: str, fan_out: int, fan_in: int,
               rng: np.random.Generator) -> None:
    params[f"{name}.W"] = xavier_init((fan_out, fan_in), rng)
    params[f"{name}.b"] = np.zeros(fan_out, dtype=np.float64)


def dense_forward(params: dict, name: str, x: np.ndarray):
    W = params[f"{name}.W"]
    b = params[f"{name}.b"]
    if x.ndim != 2 or x.shape[1] != W.shape[1]:
        raise ValueError(
            f"{name}: input shape {x.shape} does not match weight {W.shape}")
    return x @ W.T + b, x


def dense_backward(params: dict, name: str, cache, dy: np.ndarray,
                   grads: dict) -> np.ndarray:
    x = cache
    W = params[f"{name}.W"]
    _accumulate(grads, f"{name}.W", dy.T @ x)
    _accumulate(grads, f"{name}.b", dy.sum(axis=0))
    return dy @ W


def init_ffnn(params: dict, prefix: str, in_dim: int, hidden: int,
              rng: np.random.Generator) -> None:
    """One hidden ReLU layer, scalar output head."""
    init_dense(params, f"{prefix}.hidden", hidden, in_dim, rng)
    init_dense(params, f"{prefix}.out", 1, hidden, rng)


def ffnn_forward(params: dict, prefix: str, x: np.ndarray, *,
                 training: bool = False, dropout: float = DROPOUT_RATE,
                 rng: np.random.Generator | None = None):
    """Score each input row; returns (scores of shape (B,), cache)."""
    pre, x_cache = dense_forward(params, f"{prefix}.hidden", x)
    h = np.maximum(pre, 0.0)
    if training and dropout > 0.0:
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        # inverted dropout: eval mode needs no rescaling
        mask = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
        h = h * mask
    else:
        mask = None
    out, h_cache = dense_forward(params, f"{prefix}.out", h)
    cache = (x_cache, pre, mask, h_cache)
    return out[:, 0], cache


def ffnn_backward(params: dict, prefix: str, cache, dscores: np.ndarray,
                  grads: dict) -> np.ndarray:
    """Accumulate parameter grads; returns gradient w.r.t. the input rows."""
    x_cache, pre, mask, h_cache = cache
    dh = dense_backward(params, f"{prefix}.out", h_cache,
                        dscores[:, None], grads)
    if mask is not None:
        dh = dh * mask
    dpre = dh * (pre > 0.0)
    return dense_backward(params, f"{prefix}.hidden", x_cache, dpre, grads)


def _accumulate(grads: dict, name: str, value: np.ndarray) -> None:
    if name in grads:
        grads[name] += value
    else:
        grads[name] = value


def zero_grads_like(params: dict) -> dict:
    return {name: np.zeros_like(arr) for name, arr in params.items()}


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def bce_loss(logits: np.ndarray, labels: np.ndarray,
             positive_only: bool = False):
    """Mean binary cross-entropy over sigmoid(logits).

    Stable for |logit| well beyond 100. `positive_only` drops the
    (1-y)*log(1-p) term, keeping only -y*log(p); it exists for studying
    that variant and is never the training default.

    Returns (loss, dloss/dlogits) with the 1/B factor folded into the
    gradient.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if logits.shape != labels.shape:
        raise ValueError(f"shape mismatch {logits.shape} vs {labels.shape}")
    n = logits.size
    if n == 0:
        return 0.0, np.zeros_like(logits)
    log1p_term = np.log1p(np.exp(-np.abs(logits)))
    if positive_only:
        # -y*log(sigmoid(l)) = y*softplus(-l)
        per = labels * (np.maximum(-logits, 0.0) + log1p_term)
        grad = labels * (sigmoid(logits) - 1.0) / n
    else:
        per = np.maximum(logits, 0.0) - logits * labels + log1p_term
        grad = (sigmoid(logits) - labels) / n
    return float(per.mean()), grad


class Adam:
    """Standard Adam with bias correction over a flat params dict."""

    def __init__(self, params: dict, lr: float = LEARNING_RATE,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict,
             skip: frozenset[str] = frozenset()) -> None:
        """In-place update; parameters named in `skip` are left untouched."""
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, g in grads.items():
            if name in skip:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[name] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {f"opt.m:{k}": v for k, v in self.m.items()}
        out.update({f"opt.v:{k}": v for k, v in self.v.items()})
        out["opt.step"] = np.array(float(self.step_count))
        return out

    def load_state_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        for key, arr in tensors.items():
            if key == "opt.step":
                self.step_count = int(round(float(arr)))
            elif key.startswith("opt.m:"):
                self.m[key[len("opt.m:"):]] = np.array(arr, dtype=np.float64)
            elif key.startswith("opt.v:"):
                self.v[key[len("opt.v:"):]] = np.array(arr, dtype=np.float64)


def finite_difference_grads(loss_fn: Callable[[dict], float], params: dict,
                            h: float = 1e-4) -> dict:
    """Central differences (f(x+h)-f(x-h))/2h per parameter entry.

    `loss_fn` must be a pure function of the params dict (eval mode or a
    frozen dropout mask). Intended for small test networks; cost is two
    evaluations per scalar parameter.
    """
    fd = {}
    for name, arr in params.items():
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn(params)
            flat[i] = orig - h
            down = loss_fn(params)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        fd[name] = g
    return fd


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Norm-based relative difference, robust near zero."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    diff = float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
    denom = max(na, nb, 1e-8)
    return diff / denom


def gradient_check(loss_fn: Callable[[dict], float], params: dict,
                   analytic: dict, h: float = 1e-4) -> dict[str, float]:
    """Relative error per tensor between analytic and FD gradients."""
    fd = finite_difference_grads(loss_fn, params, h=h)
    errs = {}
    for name in params:
        errs[name] = relative_error(analytic.get(name, np.zeros_like(params[name])),
                                    fd[name])
    return errs
