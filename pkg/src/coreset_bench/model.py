"""Small differentiable classifiers with exact analytic gradients.

Two model kinds share one flat-parameter representation:

* ``logistic``: logits = x W + b, parameters [W (d*C), b (C)].
* ``mlp``: logits = relu(x W1 + b1) W2 + b2, parameters
  [W1 (d*h), b1 (h), W2 (h*C), b2 (C)].

The final linear layer always occupies the tail of the flat vector, so the
``last_layer`` gradient restriction is a suffix slice. Everything is float64;
losses are weighted softmax cross-entropy normalized by the weight sum, and
all gradients are closed-form (no autodiff).
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class Model:
    kind: str
    params: np.ndarray
    dim: int
    hidden: int
    class_count: int

    def __post_init__(self):
        if self.kind not in ("logistic", "mlp"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "mlp" and self.hidden < 1:
            raise ValueError("mlp requires hidden >= 1")
        expected = param_count(self.kind, self.dim, self.hidden, self.class_count)
        self.params = np.asarray(self.params, dtype=np.float64).ravel()
        if self.params.size != expected:
            raise ValueError(
                f"parameter vector has {self.params.size} entries, expected {expected}"
            )

    def last_layer_size(self) -> int:
        width = self.dim if self.kind == "logistic" else self.hidden
        return width * self.class_count + self.class_count

    def last_layer_slice(self) -> slice:
        return slice(self.params.size - self.last_layer_size(), self.params.size)

    def copy(self) -> "Model":
        return Model(self.kind, self.params.copy(), self.dim, self.hidden, self.class_count)


def param_count(kind: str, dim: int, hidden: int, class_count: int) -> int:
    if kind == "logistic":
        return dim * class_count + class_count
    return dim * hidden + hidden + hidden * class_count + class_count


def init_model(kind: str, dim: int, class_count: int, hidden: int = 0, seed=0,
               scale: float = 0.01) -> Model:
    """Seeded Gaussian initialization, scale * N(0, 1) per parameter."""
    rng = np.random.default_rng(seed)
    n = param_count(kind, dim, hidden, class_count)
    return Model(kind, scale * rng.standard_normal(n), dim, hidden, class_count)


def _unpack(model: Model):
    p, d, h, c = model.params, model.dim, model.hidden, model.class_count
    if model.kind == "logistic":
        return (p[: d * c].reshape(d, c), p[d * c :])
    o = 0
    w1 = p[o : o + d * h].reshape(d, h); o += d * h
    b1 = p[o : o + h]; o += h
    w2 = p[o : o + h * c].reshape(h, c); o += h * c
    b2 = p[o:]
    return (w1, b1, w2, b2)


def forward(model: Model, features: np.ndarray) -> np.ndarray:
    """Logits for a batch, shape (n, class_count)."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ValueError(f"features must be (n, {model.dim}), got {x.shape}")
    if model.kind == "logistic":
        w, b = _unpack(model)
        return x @ w + b
    w1, b1, w2, b2 = _unpack(model)
    return np.maximum(x @ w1 + b1, 0.0) @ w2 + b2


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(model: Model, features, labels, weights):
    """Weighted-mean cross-entropy and its exact gradient over all parameters.

    loss = sum_i w_i * ell_i / sum_i w_i with ell_i = -log softmax(logits_i)[y_i].
    Weights must be non-negative and not all zero.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (x.shape[0],):
        raise ValueError("weights must have one entry per sample")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    wsum = w.sum()
    if wsum <= 0.0:
        raise ValueError("weights must not be all zero")
    wn = w / wsum

    if model.kind == "logistic":
        wmat, b = _unpack(model)
        logits = x @ wmat + b
    else:
        w1, b1, w2, b2 = _unpack(model)
        pre = x @ w1 + b1
        hid = np.maximum(pre, 0.0)
        logits = hid @ w2 + b2

    probs = _softmax(logits)
    n = x.shape[0]
    loss = float(-(wn * np.log(probs[np.arange(n), y])).sum())

    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits *= wn[:, None]

    grad = np.empty_like(model.params)
    if model.kind == "logistic":
        d, c = model.dim, model.class_count
        grad[: d * c] = (x.T @ dlogits).ravel()
        grad[d * c :] = dlogits.sum(axis=0)
        return loss, grad
    dhid = dlogits @ w2.T
    dpre = dhid * (pre > 0.0)
    d, h, c = model.dim, model.hidden, model.class_count
    o = 0
    grad[o : o + d * h] = (x.T @ dpre).ravel(); o += d * h
    grad[o : o + h] = dpre.sum(axis=0); o += h
    grad[o : o + h * c] = (hid.T @ dlogits).ravel(); o += h * c
    grad[o:] = dlogits.sum(axis=0)
    return loss, grad


@dataclass
class GradientMatrix:
    """Per-sample gradient rows: row i is the gradient of sample i's own loss."""

    rows: np.ndarray
    mode: str

    def __post_init__(self):
        if self.mode not in ("last_layer", "full"):
            raise ValueError(f"unknown gradient mode {self.mode!r}")
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2:
            raise ValueError("rows must be 2-D")


def per_sample_gradients(model: Model, features, labels, mode: str = "last_layer") -> GradientMatrix:
    """One gradient row per sample, of that sample's unweighted loss.

    In last_layer mode rows are restricted to the final linear layer
    (weights then bias, matching the tail of the flat parameter vector);
    the row mean equals the full-batch mean gradient on those coordinates.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.shape[0] < 1:
        raise ValueError("batch must be non-empty")

    if model.kind == "logistic":
        wmat, b = _unpack(model)
        logits = x @ wmat + b
        act = x
    else:
        w1, b1, w2, b2 = _unpack(model)
        pre = x @ w1 + b1
        act = np.maximum(pre, 0.0)
        logits = act @ w2 + b2

    probs = _softmax(logits)
    n = x.shape[0]
    delta = probs
    delta[np.arange(n), y] -= 1.0

    # last-layer rows: outer(act_i, delta_i) flattened, then the bias part.
    last = np.einsum("ni,nj->nij", act, delta).reshape(n, -1)
    if mode == "last_layer":
        return GradientMatrix(rows=np.hstack([last, delta]), mode=mode)
    if mode != "full":
        raise ValueError(f"unknown gradient mode {mode!r}")
    if model.kind == "logistic":
        return GradientMatrix(rows=np.hstack([last, delta]), mode="full")
    dpre = (delta @ w2.T) * (pre > 0.0)
    first = np.einsum("ni,nj->nij", x, dpre).reshape(n, -1)
    return GradientMatrix(
        rows=np.hstack([first, dpre, last, delta]), mode="full"
    )


def cosine_lr(epoch: int, total_epochs: int, base_lr: float) -> float:
    """base_lr * 0.5 * (1 + cos(pi * epoch / total_epochs))."""
    if total_epochs < 1:
        raise ValueError("total_epochs must be >= 1")
    if not 0 <= epoch <= total_epochs:
        raise ValueError("epoch must lie in [0, total_epochs]")
    return base_lr * 0.5 * (1.0 + np.cos(np.pi * epoch / total_epochs))


def clip_global_norm(grad: np.ndarray, g_max: float) -> np.ndarray:
    """Rescale to L2 norm g_max when larger; direction is preserved."""
    if g_max <= 0:
        raise ValueError("g_max must be > 0")
    norm = float(np.linalg.norm(grad))
    if norm <= g_max:
        return grad
    return grad * (g_max / norm)


@dataclass
class OptimizerState:
    """SGD-with-momentum state: v <- beta*v + clip(g); theta <- theta - lr*v."""

    velocity: np.ndarray
    momentum: float = 0.9
    base_lr: float = 0.05
    clip_norm: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0")
        self.velocity = np.asarray(self.velocity, dtype=np.float64)


def make_optimizer(model: Model, momentum: float = 0.9, base_lr: float = 0.05,
                   clip_norm: float = 1.0) -> OptimizerState:
    return OptimizerState(
        velocity=np.zeros_like(model.params),
        momentum=momentum,
        base_lr=base_lr,
        clip_norm=clip_norm,
    )


def sgd_step(state: OptimizerState, model: Model, grad: np.ndarray, lr: float) -> None:
    """One momentum step, in place. The velocity updates even when lr is 0."""
    if state.velocity.shape != model.params.shape or grad.shape != model.params.shape:
        raise ValueError("gradient/velocity shape mismatch")
    state.velocity *= state.momentum
    state.velocity += clip_global_norm(grad, state.clip_norm)
    model.params = model.params - lr * state.velocity
