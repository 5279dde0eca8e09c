"""Feedforward next-activity predictor: forward pass, backprop, Adam.

The network is the teacher model of the debiasing pipeline and also serves,
with a sensitive-free schema, as the fair baseline. Hidden layers use ReLU,
the output layer softmax over the prediction alphabet; training minimizes
categorical cross-entropy. Everything is plain float64 numpy, deterministic
for a fixed seed.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, replace

import numpy as np

from .encoding import FeatureSchema

HIDDEN_SIZES = (512, 256, 128, 64)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    shuffle_seed: int | None = None  # derived from the training seed if unset

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass(frozen=True)
class MlpModel:
    weights: tuple  # (W, b) per layer, input -> hidden... -> output
    seed: int
    config: TrainConfig
    schema: FeatureSchema | None = None
    loss_history: tuple = ()
    hidden_sizes: tuple = HIDDEN_SIZES

    @property
    def input_width(self):
        return self.weights[0][0].shape[0]

    @property
    def n_classes(self):
        return self.weights[-1][0].shape[1]

    @property
    def final_loss(self):
        return self.loss_history[-1] if self.loss_history else None


def init_weights(input_width, n_classes, seed, hidden_sizes=HIDDEN_SIZES):
    """Uniform fan-based (Glorot-style) initialization, biases zero."""
    rng = np.random.default_rng(seed)
    sizes = (input_width, *hidden_sizes, n_classes)
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        weights.append((W, b))
    return tuple(weights)


def _forward(weights, X):
    """Returns (activations per layer incl. input, output probabilities)."""
    acts = [X]
    a = X
    for W, b in weights[:-1]:
        a = np.maximum(a @ W + b, 0.0)
        acts.append(a)
    W, b = weights[-1]
    logits = a @ W + b
    probs = _softmax(logits)
    return acts, probs


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _cross_entropy(probs, Y):
    return float(-np.mean(np.log(np.clip((probs * Y).sum(axis=1), 1e-300, None))))


def gradients(weights, X, Y):
    """Analytic gradients of mean cross-entropy w.r.t. every W and b."""
    acts, probs = _forward(weights, X)
    return _unrolled_backward(weights, acts, probs, Y)


def loss(weights, X, Y) -> float:
    """Mean categorical cross-entropy of the network on (X, Y)."""
    _, probs = _forward(weights, X)
    return _cross_entropy(probs, Y)


def _as_matrices(examples):
    if isinstance(examples, tuple) and len(examples) == 2 \
            and isinstance(examples[0], np.ndarray):
        X, Y = examples
    else:
        pairs = list(examples)
        if not pairs:
            raise ValueError("no training examples")
        X = np.asarray([p[0] for p in pairs], dtype=np.float64)
        Y = np.asarray([p[1] for p in pairs], dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError(f"bad example shapes {X.shape} / {Y.shape}")
    if X.shape[0] == 0:
        raise ValueError("no training examples")
    return X, Y


def train(examples, config: TrainConfig = TrainConfig(), seed: int = 0,
          schema: FeatureSchema | None = None,
          hidden_sizes=HIDDEN_SIZES) -> MlpModel:
    """Train from scratch with mini-batch Adam over per-epoch reshuffled data.

    ``examples`` is either an (X, Y) matrix pair or a sequence of
    (vector, one-hot) pairs. Deterministic for fixed (data, config, seed).
    """
    X, Y = _as_matrices(examples)
    if schema is not None and X.shape[1] != schema.width:
        raise ValueError(f"example width {X.shape[1]} does not match schema "
                         f"width {schema.width}")
    weights = init_weights(X.shape[1], Y.shape[1], seed, hidden_sizes)
    weights, history = _optimize(weights, X, Y, config, seed)
    return MlpModel(weights=weights, seed=seed, config=config, schema=schema,
                    loss_history=tuple(history), hidden_sizes=tuple(hidden_sizes))


def fine_tune(model: MlpModel, examples, config: TrainConfig) -> MlpModel:
    """Continue optimizing a trained model's weights with fresh Adam state.

    Returns an updated copy; the input model is left untouched so before and
    after behaviour can be compared.
    """
    X, Y = _as_matrices(examples)
    if X.shape[1] != model.input_width:
        raise ValueError(f"example width {X.shape[1]} does not match model "
                         f"input width {model.input_width}")
    if Y.shape[1] != model.n_classes:
        raise ValueError(f"target width {Y.shape[1]} does not match model "
                         f"output width {model.n_classes}")
    seed = config.shuffle_seed if config.shuffle_seed is not None else model.seed + 1
    weights = tuple((W.copy(), b.copy()) for W, b in model.weights)
    weights, history = _optimize(weights, X, Y, config, seed)
    return replace(model, weights=weights, config=config,
                   loss_history=tuple(history))


def _optimize(weights, X, Y, config, shuffle_seed):
    weights = [(W.copy(), b.copy()) for W, b in weights]
    m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in weights]
    v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in weights]
    t = 0
    n = X.shape[0]
    rng = np.random.default_rng(
        config.shuffle_seed if config.shuffle_seed is not None else shuffle_seed)
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = X[idx], Y[idx]
            acts, probs = _forward(weights, xb)
            epoch_loss += _cross_entropy(probs, yb) * len(idx)
            grads = _unrolled_backward(weights, acts, probs, yb)
            t += 1
            lr_t = config.learning_rate * (
                np.sqrt(1 - config.beta2 ** t) / (1 - config.beta1 ** t))
            for layer, (gW, gb) in enumerate(grads):
                W, b = weights[layer]
                mW, mb = m[layer]
                vW, vb = v[layer]
                mW *= config.beta1
                mW += (1 - config.beta1) * gW
                mb *= config.beta1
                mb += (1 - config.beta1) * gb
                vW *= config.beta2
                vW += (1 - config.beta2) * gW * gW
                vb *= config.beta2
                vb += (1 - config.beta2) * gb * gb
                W -= lr_t * mW / (np.sqrt(vW) + config.eps)
                b -= lr_t * mb / (np.sqrt(vb) + config.eps)
        history.append(epoch_loss / n)
    return tuple((W, b) for W, b in weights), history


def _unrolled_backward(weights, acts, probs, yb):
    n = yb.shape[0]
    grads = [None] * len(weights)
    delta = (probs - yb) / n
    for layer in range(len(weights) - 1, -1, -1):
        W, _ = weights[layer]
        grads[layer] = (acts[layer].T @ delta, delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ W.T) * (acts[layer] > 0)
    return grads


def predict_proba(model: MlpModel, x) -> np.ndarray:
    """Probability vector(s) over the prediction alphabet; rows sum to 1."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != model.input_width:
        raise ValueError(f"input width {X.shape[1]} does not match model "
                         f"input width {model.input_width}")
    _, probs = _forward(model.weights, X)
    return probs[0] if single else probs


def predict_index(model: MlpModel, x) -> np.ndarray:
    """Argmax class index; ties resolve to the lowest index."""
    probs = predict_proba(model, x)
    return np.argmax(probs, axis=-1)


def predict(model: MlpModel, x):
    """Predicted activity label(s); requires a schema-carrying model."""
    if model.schema is None:
        raise ValueError("model carries no schema; use predict_index")
    idx = predict_index(model, x)
    alphabet = model.schema.prediction_alphabet
    if np.ndim(idx) == 0:
        return alphabet[int(idx)]
    return [alphabet[int(i)] for i in idx]


# -- checkpoint container -----------------------------------------------------

CHECKPOINT_FORMAT = "fairpm-mlp/1"


def save_model(model: MlpModel, path) -> None:
    """Write a versioned JSON checkpoint; weights as little-endian float64."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "seed": model.seed,
        "hidden_sizes": list(model.hidden_sizes),
        "layer_shapes": [[list(W.shape), list(b.shape)] for W, b in model.weights],
        "weights": [
            {"W": _enc(W), "b": _enc(b)} for W, b in model.weights
        ],
        "config": {
            "epochs": model.config.epochs,
            "batch_size": model.config.batch_size,
            "learning_rate": model.config.learning_rate,
            "beta1": model.config.beta1,
            "beta2": model.config.beta2,
            "eps": model.config.eps,
            "shuffle_seed": model.config.shuffle_seed,
        },
        "loss_history": list(model.loss_history),
        "schema_hash": model.schema.content_hash() if model.schema else None,
        "schema": model.schema.to_json() if model.schema else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path) -> MlpModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    weights = []
    for entry, (w_shape, b_shape) in zip(doc["weights"], doc["layer_shapes"]):
        weights.append((_dec(entry["W"], w_shape), _dec(entry["b"], b_shape)))
    schema = FeatureSchema.from_json(doc["schema"]) if doc.get("schema") else None
    if schema is not None and doc.get("schema_hash") != schema.content_hash():
        raise ValueError("checkpoint schema hash mismatch")
    cfg = TrainConfig(**doc["config"])
    return MlpModel(weights=tuple(weights), seed=doc["seed"], config=cfg,
                    schema=schema, loss_history=tuple(doc["loss_history"]),
                    hidden_sizes=tuple(doc["hidden_sizes"]))


def _enc(arr):
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode()


def _dec(text, shape):
    return np.frombuffer(base64.b64decode(text), dtype="<f8").reshape(shape).copy()
