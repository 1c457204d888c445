"""Dense MLP classifier written directly against numpy.

Parameters are float64 arrays stored as ``(weight, bias)`` pairs with weight
shape ``(fan_in, fan_out)``. Every public function returns a new
:class:`ModelState`; callers never observe in-place mutation.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, DataError, DimensionError

Tensor = np.ndarray
Grads = List[Tuple[Tensor, Tensor]]

ACTIVATIONS = ("relu", "tanh")
OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class ArchitectureSpec:
    input_dim: int
    hidden_dims: Tuple[int, ...] = (64, 64)
    num_classes: int = 2
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.num_classes)
        if any(int(d) < 1 for d in dims):
            raise ConfigurationError(f"all layer dimensions must be positive, got {dims}")
        if self.num_classes < 2:
            raise ConfigurationError("num_classes must be at least 2")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")

    def layer_shapes(self):
        dims = (self.input_dim, *self.hidden_dims, self.num_classes)
        return [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]


@dataclass(frozen=True)
class OptimizerHyper:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError("adam betas must lie in (0, 1)")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")


@dataclass
class OptimizerState:
    kind: str = "adam"
    step_count: int = 0
    first_moments: Optional[List[Tensor]] = None
    second_moments: Optional[List[Tensor]] = None
    hyper: OptimizerHyper = field(default_factory=OptimizerHyper)


@dataclass
class ModelState:
    arch: ArchitectureSpec
    params: List[Tuple[Tensor, Tensor]]
    optimizer_state: OptimizerState

    def copy(self) -> "ModelState":
        return copy.deepcopy(self)

    def flat_params(self) -> List[Tensor]:
        return [t for pair in self.params for t in pair]


def fresh_optimizer(kind, hyper, arch):
    if kind not in OPTIMIZERS:
        raise ConfigurationError(f"unknown optimizer {kind!r}")
    if kind == "sgd":
        return OptimizerState("sgd", 0, None, None, hyper)
    zeros = [np.zeros(s) for shape in arch.layer_shapes() for s in (shape, shape[1])]
    return OptimizerState("adam", 0, zeros, [z.copy() for z in zeros], hyper)


def reset_optimizer(model: ModelState) -> ModelState:
    """Copy of ``model`` with step count and moments cleared."""
    out = model.copy()
    opt = model.optimizer_state
    out.optimizer_state = fresh_optimizer(opt.kind, opt.hyper, model.arch)
    return out


def init_model(arch: ArchitectureSpec, seed: int, optimizer: str = "adam",
               hyper: Optional[OptimizerHyper] = None) -> ModelState:
    """Uniform(-a, a) initialisation with a = 1/sqrt(fan_in), per layer."""
    rng = np.random.default_rng(seed)
    params = []
    for fan_in, fan_out in arch.layer_shapes():
        a = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-a, a, size=(fan_in, fan_out))
        b = rng.uniform(-a, a, size=fan_out)
        params.append((w, b))
    return ModelState(arch, params, fresh_optimizer(optimizer, hyper or OptimizerHyper(), arch))


def param_digest(model: ModelState) -> str:
    h = hashlib.sha256()
    for t in model.flat_params():
        h.update(np.ascontiguousarray(t, dtype=np.float64).tobytes())
    return h.hexdigest()


def _activate(kind, z):
    return np.maximum(z, 0.0) if kind == "relu" else np.tanh(z)


def _activation_grad(kind, z, a):
    return (z > 0).astype(np.float64) if kind == "relu" else 1.0 - a * a


def _check_batch(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] != model.arch.input_dim:
        raise DimensionError(
            f"expected batch of shape (B>=1, {model.arch.input_dim}), got {x.shape}"
        )
    return x


def _forward_cache(model, x):
    acts, pre = [x], []
    h = x
    last = len(model.params) - 1
    for i, (w, b) in enumerate(model.params):
        z = h @ w + b
        pre.append(z)
        h = z if i == last else _activate(model.arch.activation, z)
        acts.append(h)
    return acts, pre


def forward(model: ModelState, batch_features) -> Tensor:
    x = _check_batch(model, batch_features)
    acts, _ = _forward_cache(model, x)
    return acts[-1]


def softmax(logits) -> Tensor:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict_confidences(model: ModelState, features) -> Tensor:
    """Confidence vector for a single example; the only view an attacker gets."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 1:
        raise DimensionError(f"expected a single feature vector, got shape {f.shape}")
    return softmax(forward(model, f[None, :]))[0]


def predict_confidences_batch(model: ModelState, features) -> Tensor:
    return softmax(forward(model, features))


def _check_labels(model, labels, n):
    y = np.asarray(labels)
    if y.shape != (n,):
        raise DimensionError(f"expected {n} labels, got shape {y.shape}")
    if n and (y.min() < 0 or y.max() >= model.arch.num_classes):
        raise DataError(f"labels must lie in [0, {model.arch.num_classes})")
    return y.astype(np.int64)


def loss_and_gradients(model: ModelState, batch_features, labels) -> Tuple[float, Grads]:
    """Mean softmax cross-entropy over the batch and its parameter gradients."""
    x = _check_batch(model, batch_features)
    y = _check_labels(model, labels, x.shape[0])
    acts, pre = _forward_cache(model, x)
    logits = acts[-1]
    n = x.shape[0]

    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(lse - shifted[np.arange(n), y]))

    delta = softmax(logits)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads: Grads = [None] * len(model.params)  # type: ignore[list-item]
    for i in range(len(model.params) - 1, -1, -1):
        w, _ = model.params[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i:
            delta = (delta @ w.T) * _activation_grad(model.arch.activation, pre[i - 1], acts[i])
    return loss, grads


def _apply_step(model: ModelState, grads: Grads) -> None:
    # mutates model; public callers go through optimizer_step
    opt = model.optimizer_state
    hp = opt.hyper
    opt.step_count += 1
    flat_g = [g for pair in grads for g in pair]
    flat_p = model.flat_params()
    if len(flat_g) != len(flat_p) or any(g.shape != p.shape for g, p in zip(flat_g, flat_p)):
        raise DimensionError("gradient shapes do not match parameter shapes")
    if opt.kind == "sgd":
        for p, g in zip(flat_p, flat_g):
            p -= hp.learning_rate * g
        return
    t = opt.step_count
    c1 = 1.0 - hp.beta1 ** t
    c2 = 1.0 - hp.beta2 ** t
    for p, g, m, v in zip(flat_p, flat_g, opt.first_moments, opt.second_moments):
        m *= hp.beta1
        m += (1.0 - hp.beta1) * g
        v *= hp.beta2
        v += (1.0 - hp.beta2) * (g * g)
        p -= hp.learning_rate * (m / c1) / (np.sqrt(v / c2) + hp.epsilon)


def optimizer_step(model: ModelState, grads: Grads) -> ModelState:
    out = model.copy()
    _apply_step(out, grads)
    return out


def train_epochs(model: ModelState, train_set, epochs: int, batch_size: int,
                 shuffle_seed: int) -> ModelState:
    """Minibatch training with a seeded shuffle per epoch.

    ``train_set`` is anything with ``features`` and ``labels`` arrays (a
    :class:`driftbench.data.Dataset` in practice). Optimizer state carries over
    between epochs and is returned with the model.
    """
    if epochs < 0 or batch_size < 1:
        raise ConfigurationError("epochs must be >= 0 and batch_size >= 1")
    x = np.asarray(train_set.features, dtype=np.float64)
    y = np.asarray(train_set.labels, dtype=np.int64)
    if len(y) == 0:
        raise DataError("cannot train on an empty training set")
    out = model.copy()
    if epochs == 0:
        return out
    rng = np.random.default_rng(shuffle_seed)
    n = len(y)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, grads = loss_and_gradients(out, x[idx], y[idx])
            _apply_step(out, grads)
    return out


def mean_loss(model: ModelState, dataset) -> float:
    loss, _ = loss_and_gradients(model, dataset.features, dataset.labels)
    return loss


def accuracy(model: ModelState, eval_set) -> float:
    y = np.asarray(eval_set.labels, dtype=np.int64)
    if len(y) == 0:
        raise DataError("cannot evaluate accuracy on an empty set")
    conf = predict_confidences_batch(model, eval_set.features)
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return float(np.mean(np.argmax(conf, axis=1) == y))
