"""Small dense softmax classifier trained with minibatch SGD.

Parameters live in one flat float64 vector.  Each layer contributes a
row-major ``(fan_in, fan_out)`` weight block followed by its bias.  Hidden
layers use ReLU; the output is a softmax over ``num_classes`` logits.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import DivergenceError, EmptyDataError, ShapeError


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    num_classes: int
    hidden_dims: tuple = ()
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if any(h < 0 for h in self.hidden_dims):
            raise ValueError(f"hidden_dims must be non-negative, got {self.hidden_dims}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def layer_sizes(self):
        # zero-width hidden layers are dropped rather than severing the network
        hidden = [h for h in self.hidden_dims if h > 0]
        return np.array([self.input_dim, *hidden, self.num_classes], dtype=np.int64)

    @property
    def shapes(self):
        sizes = self.layer_sizes
        out = []
        for m, k in zip(sizes[:-1], sizes[1:]):
            out += [(int(m), int(k)), (int(k),)]
        return tuple(out)

    @property
    def num_params(self):
        return int(sum(np.prod(s) for s in self.shapes))


@dataclass
class ParamVector:
    """Flat parameter vector plus per-block shapes."""

    values: np.ndarray
    shapes: tuple = field(default=())

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        self.shapes = tuple(tuple(int(d) for d in s) for s in self.shapes)
        if not self.shapes:
            self.shapes = ((self.values.size,),)
        expected = int(sum(np.prod(s) for s in self.shapes))
        if expected != self.values.size:
            raise ShapeError(f"shapes account for {expected} values, vector has {self.values.size}")

    @property
    def size(self):
        return self.values.size

    def blocks(self):
        """Views into ``values``, one per shape entry."""
        out, off = [], 0
        for s in self.shapes:
            n = int(np.prod(s))
            out.append(self.values[off:off + n].reshape(s))
            off += n
        return out

    def copy(self):
        return ParamVector(self.values.copy(), self.shapes)

    def same_layout(self, other):
        return self.shapes == other.shapes

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.shapes == other.shapes and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


def init_model(spec, seed):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    parts = []
    for shape in spec.shapes:
        if len(shape) == 2:
            bound = 1.0 / np.sqrt(shape[0])
            parts.append(rng.uniform(-bound, bound, size=shape).ravel())
        else:
            parts.append(np.zeros(shape))
    return ParamVector(np.concatenate(parts), spec.shapes)


def _check_params(params, spec):
    if params.shapes != spec.shapes:
        raise ShapeError(f"parameter layout {params.shapes} does not match model {spec.shapes}")


def _features(features, spec):
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ShapeError(f"expected features of width {spec.input_dim}, got shape {X.shape}")
    return X


def logits(params, spec, features):
    _check_params(params, spec)
    h = _features(features, spec)
    blocks = params.blocks()
    n_layers = len(blocks) // 2
    for layer in range(n_layers):
        W, b = blocks[2 * layer], blocks[2 * layer + 1]
        h = h @ W + b
        if layer < n_layers - 1:
            h = np.maximum(h, 0.0)
    return h


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params, spec, features):
    """Class-probability matrix, one row per sample."""
    return softmax(logits(params, spec, features))


def predict(params, spec, features):
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(logits(params, spec, features), axis=1)


def loss_and_grad(params, spec, features, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. ``values``."""
    _check_params(params, spec)
    X = np.ascontiguousarray(_features(features, spec))
    y = np.ascontiguousarray(labels, dtype=np.int64)
    loss, grad = _accel.loss_grad(params.values, spec.layer_sizes, X, y)
    return float(loss), grad


def cross_entropy(params, spec, features, labels):
    probs = forward(params, spec, features)
    y = np.asarray(labels, dtype=np.int64)
    p = np.maximum(probs[np.arange(y.shape[0]), y], _accel.PROB_FLOOR)
    return float(-np.mean(np.log(p)))


def minibatch_orders(n, epochs, seed):
    rng = np.random.default_rng(seed)
    return np.stack([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)


def train_local(params, spec, data, cfg):
    """Run ``cfg.epochs`` shuffled minibatch SGD passes over ``data``.

    Returns a new ParamVector; ``params`` is left untouched.
    """
    _check_params(params, spec)
    if len(data) == 0:
        raise EmptyDataError("cannot train on an empty dataset")
    X = np.ascontiguousarray(_features(data.features, spec))
    y = np.ascontiguousarray(data.labels, dtype=np.int64)
    orders = minibatch_orders(X.shape[0], cfg.epochs, cfg.seed)
    values, losses = _accel.sgd_epochs(
        params.values, spec.layer_sizes, X, y, orders, float(cfg.learning_rate), int(cfg.batch_size)
    )
    if not (np.all(np.isfinite(losses)) and np.all(np.isfinite(values))):
        raise DivergenceError(f"training diverged (epoch losses {losses.tolist()})")
    return ParamVector(values, params.shapes)


def evaluate_accuracy(params, spec, data):
    """Fraction of samples whose argmax prediction equals the label."""
    if len(data) == 0:
        raise EmptyDataError("cannot evaluate on an empty dataset")
    pred = predict(params, spec, data.features)
    return float(np.mean(pred == np.asarray(data.labels)))
