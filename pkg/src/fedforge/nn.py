"""Dense-network training core: build, train, evaluate, flatten/unflatten."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DataConfig, TaskConfig
from .errors import DimensionMismatch, NonFiniteLoss
from .modelspec import LayerSpec, ModelSpec, mlp_spec

__all__ = [
    "ModelSpec", "LayerSpec", "mlp_spec", "FlatWeights", "Dataset", "Metrics",
    "OptimizerState", "make_optimizer", "build_model", "client_update",
    "evaluate", "flatten", "unflatten", "loss_and_grad",
]


@dataclass
class FlatWeights:
    """Flattened float32 parameter vector plus the spec that shapes it."""

    values: np.ndarray
    spec: ModelSpec

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.shape != (self.spec.num_params,):
            raise DimensionMismatch(
                f"expected {self.spec.num_params} params, got {self.values.shape}"
            )

    def copy(self) -> "FlatWeights":
        return FlatWeights(self.values.copy(), self.spec)


@dataclass
class Dataset:
    features: np.ndarray  # (n, in_dim) float32
    labels: np.ndarray    # (n,) int labels or float targets
    config: DataConfig

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        if self.features.ndim != 2:
            raise DimensionMismatch("features must be a 2-D matrix")
        if len(self.features) != len(self.labels):
            raise DimensionMismatch("feature/label row count mismatch")
        if self.config.task == "Classification":
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) and (
                self.labels.min() < 0 or self.labels.max() >= self.config.numLabels
            ):
                raise DimensionMismatch("class label outside [0, numLabels)")
        else:
            self.labels = np.asarray(self.labels, dtype=np.float32)

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    loss: float


def unflatten(values: np.ndarray, spec: ModelSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into per-layer (W, b) views."""
    if values.shape != (spec.num_params,):
        raise DimensionMismatch(f"expected {spec.num_params} values")
    out, off = [], 0
    for layer in spec.layers:
        w = values[off:off + layer.in_dim * layer.out_dim].reshape(layer.in_dim, layer.out_dim)
        off += layer.in_dim * layer.out_dim
        b = values[off:off + layer.out_dim]
        off += layer.out_dim
        out.append((w, b))
    return out


def flatten(params: list[tuple[np.ndarray, np.ndarray]], spec: ModelSpec) -> np.ndarray:
    parts = []
    for w, b in params:
        parts.append(np.ravel(w))
        parts.append(np.ravel(b))
    vec = np.concatenate(parts).astype(np.float32)
    if vec.shape != (spec.num_params,):
        raise DimensionMismatch("flattened length does not match spec")
    return vec


def build_model(spec: ModelSpec, seed: int) -> FlatWeights:
    """Xavier-uniform weights, zero biases; deterministic in (spec, seed)."""
    spec.validate()
    rng = np.random.default_rng(seed)
    parts = []
    for layer in spec.layers:
        a = np.sqrt(6.0 / (layer.in_dim + layer.out_dim))
        w = rng.uniform(-a, a, size=(layer.in_dim, layer.out_dim))
        parts.append(np.ravel(w))
        parts.append(np.zeros(layer.out_dim))
    return FlatWeights(np.concatenate(parts).astype(np.float32), spec)


def forward(weights: FlatWeights, x: np.ndarray) -> np.ndarray:
    """Network outputs for a batch (ReLU applied per the spec's activations)."""
    params = unflatten(weights.values, weights.spec)
    h = x.astype(np.float32)
    for (w, b), layer in zip(params, weights.spec.layers):
        h = h @ w + b
        if layer.activation == "relu":
            h = np.maximum(h, 0.0)
    return h


def _log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=1, keepdims=True)
    s = z - m
    return s - np.log(np.exp(s).sum(axis=1, keepdims=True))


def loss_and_grad(
    weights: FlatWeights, x: np.ndarray, y: np.ndarray, loss: str, num_labels: int
) -> tuple[float, np.ndarray]:
    """Mean batch loss and its gradient w.r.t. the flat parameter vector."""
    spec = weights.spec
    params = unflatten(weights.values.astype(np.float64), spec)
    n = len(x)

    # forward with cache
    acts = [x.astype(np.float64)]
    pre = []
    h = acts[0]
    for (w, b), layer in zip(params, spec.layers):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if layer.activation == "relu" else z
        acts.append(h)
    out = acts[-1]

    if loss == "CrossEntropyLoss":
        logp = _log_softmax(out)
        value = -logp[np.arange(n), y.astype(np.int64)].mean()
        probs = np.exp(logp)
        dout = probs
        dout[np.arange(n), y.astype(np.int64)] -= 1.0
        dout /= n
    elif loss == "MSELoss":
        if out.shape[1] > 1 and y.ndim == 1 and not np.issubdtype(y.dtype, np.floating):
            target = np.zeros_like(out)
            target[np.arange(n), y.astype(np.int64)] = 1.0
        else:
            target = np.asarray(y, dtype=np.float64).reshape(out.shape)
        diff = out - target
        value = 0.5 * float((diff ** 2).sum()) / n
        dout = diff / n
    else:
        raise ValueError(f"unknown loss {loss!r}")

    grads = [None] * len(params)
    delta = dout
    for i in range(len(params) - 1, -1, -1):
        w, b = params[i]
        if spec.layers[i].activation == "relu":
            delta = delta * (pre[i] > 0)
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = delta @ w.T
    return float(value), flatten(grads, spec)


@dataclass
class OptimizerState:
    """Moment accumulators plus step counter for the four supported rules."""

    kind: str
    d: int
    step_count: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def step(self, grads: np.ndarray, lr: float) -> np.ndarray:
        """Weight delta for one update; mutates the accumulators."""
        g = np.asarray(grads, dtype=np.float64)
        if g.shape != (self.d,):
            raise DimensionMismatch("gradient length mismatch")
        self.step_count += 1
        if self.kind == "SGD":
            return -lr * g
        if self.kind == "Adam":
            b1, b2, eps = 0.9, 0.999, 1e-8
            self.m = b1 * self.m + (1 - b1) * g
            self.v = b2 * self.v + (1 - b2) * g * g
            mh = self.m / (1 - b1 ** self.step_count)
            vh = self.v / (1 - b2 ** self.step_count)
            return -lr * mh / (np.sqrt(vh) + eps)
        if self.kind == "AdaGrad":
            eps = 1e-10
            self.v = self.v + g * g
            return -lr * g / (np.sqrt(self.v) + eps)
        if self.kind == "RMSProp":
            alpha, eps = 0.99, 1e-8
            self.v = alpha * self.v + (1 - alpha) * g * g
            return -lr * g / (np.sqrt(self.v) + eps)
        raise ValueError(f"unknown optimizer {self.kind!r}")


def make_optimizer(kind: str, d: int) -> OptimizerState:
    state = OptimizerState(kind=kind, d=d)
    if kind in ("Adam",):
        state.m = np.zeros(d)
    if kind in ("Adam", "AdaGrad", "RMSProp"):
        state.v = np.zeros(d)
    return state


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, epoch])


def train_epochs(
    weights: FlatWeights,
    data: Dataset,
    *,
    epochs: int,
    batch_size: int,
    lr: float,
    optimizer: str,
    loss: str,
    seed: int,
    start_epoch: int = 0,
    state: OptimizerState | None = None,
) -> tuple[FlatWeights, OptimizerState]:
    """Seeded shuffle-and-minibatch loop; the input weights are not mutated."""
    if data.features.shape[1] != weights.spec.layers[0].in_dim:
        raise DimensionMismatch(
            f"data dim {data.features.shape[1]} != model in_dim "
            f"{weights.spec.layers[0].in_dim}"
        )
    w = weights.copy()
    if state is None:
        state = make_optimizer(optimizer, weights.spec.num_params)
    n = len(data)
    for e in range(start_epoch, start_epoch + epochs):
        perm = _epoch_rng(seed, e).permutation(n)
        for lo in range(0, n, batch_size):
            idx = perm[lo:lo + batch_size]
            value, grads = loss_and_grad(
                w, data.features[idx], data.labels[idx], loss, data.config.numLabels
            )
            if not np.isfinite(value):
                raise NonFiniteLoss(f"loss diverged at epoch {e}")
            w.values = (w.values.astype(np.float64) + state.step(grads, lr)).astype(
                np.float32
            )
    return w, state


def client_update(
    weights: FlatWeights, data: Dataset, cfg: TaskConfig, seed: int
) -> FlatWeights:
    """Local training loop: E epochs of seeded-shuffle minibatch optimization."""
    w, _ = train_epochs(
        weights,
        data,
        epochs=cfg.epoch,
        batch_size=cfg.minibatch,
        lr=cfg.lr,
        optimizer=cfg.optimizer,
        loss=cfg.loss,
        seed=seed,
    )
    return w


def evaluate(weights: FlatWeights, data: Dataset, batch: int) -> Metrics:
    """Batched deterministic evaluation; accuracy is argmax-based for classification."""
    if data.features.shape[1] != weights.spec.layers[0].in_dim:
        raise DimensionMismatch("data dim does not match model input")
    n = len(data)
    total_loss = 0.0
    correct = 0
    classify = data.config.task == "Classification"
    for lo in range(0, n, batch):
        x = data.features[lo:lo + batch]
        y = data.labels[lo:lo + batch]
        out = forward(weights, x).astype(np.float64)
        if classify:
            yi = y.astype(np.int64)
            correct += int((out.argmax(axis=1) == yi).sum())
            logp = _log_softmax(out)
            total_loss += -float(logp[np.arange(len(x)), yi].sum())
        else:
            target = np.asarray(y, dtype=np.float64).reshape(out.shape)
            total_loss += 0.5 * float(((out - target) ** 2).sum())
    acc = correct / n if n else 0.0
    return Metrics(accuracy=acc, loss=total_loss / n if n else 0.0)
