"""Feed-forward classifier head over sentence embeddings.

Three fully connected layers (m -> h1 -> h2 -> c), rectifier activations on
the hidden layers and a softmax output. Row-vector convention: a batch is an
``(n, m)`` matrix and layer ``i`` computes ``A_i = f(A_{i-1} @ W_i + b_i)``.
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.core.vocabulary import LabelSet
from src.utils.errors import DimensionMismatch, NonFiniteLoss


@dataclass
class MlpClassifier:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    label_set: LabelSet
    backend_name: str = "hashing"

    def __post_init__(self):
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise ValueError("the classifier has exactly 3 fully connected layers")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: bias shape {b.shape} does not match weights {w.shape}")
            if i and w.shape[0] != self.weights[i - 1].shape[1]:
                raise ValueError(f"layer {i}: input width {w.shape[0]} != previous output {self.weights[i - 1].shape[1]}")
        if self.weights[-1].shape[1] != len(self.label_set):
            raise ValueError(f"output width {self.weights[-1].shape[1]} != {len(self.label_set)} classes")

    @classmethod
    def initialize(cls, embedding_dim: int, hidden: Tuple[int, int], label_set: LabelSet,
                   seed: int = 0, backend_name: str = "hashing") -> "MlpClassifier":
        """Seeded uniform init in +-1/sqrt(fan_in); zero biases."""
        rng = np.random.default_rng(seed)
        dims = [embedding_dim, hidden[0], hidden[1], len(label_set)]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out, dtype=np.float64))
        return cls(weights, biases, label_set, backend_name)

    @property
    def layer_dims(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def embedding_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.label_set)

    def parameters(self) -> List[np.ndarray]:
        """Parameters in the fixed order W1, b1, W2, b2, W3, b3."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def set_parameters(self, params: Sequence[np.ndarray]) -> None:
        self.weights = [np.array(p, dtype=np.float64) for p in params[0::2]]
        self.biases = [np.array(p, dtype=np.float64) for p in params[1::2]]

    def copy(self) -> "MlpClassifier":
        return MlpClassifier([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                             self.label_set, self.backend_name)

    # -- forward ------------------------------------------------------------

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.embedding_dim:
            raise DimensionMismatch(self.embedding_dim, X.shape[1])
        return X

    def _forward(self, X: np.ndarray):
        """Returns (pre-activations, activations, logits)."""
        activations = [X]
        pre = []
        A = X
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            Z = A @ w + b
            pre.append(Z)
            if i < 2:
                A = np.maximum(Z, 0.0)
                activations.append(A)
        return pre, activations, pre[-1]

    def logits(self, X: np.ndarray) -> np.ndarray:
        return self._forward(self._check(X))[2]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Softmax probabilities, one row per input."""
        return softmax(self.logits(X))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def forward(model: MlpClassifier, vector: np.ndarray) -> np.ndarray:
    """Probability vector over the model's classes for one embedding.

    Raises:
        DimensionMismatch: the vector is not of dimension m.
    """
    vector = np.asarray(vector, dtype=np.float64)
    if vector.ndim != 1:
        raise ValueError("forward takes a single embedding vector")
    return model.predict_proba(vector)[0]


def argmax(probabilities: np.ndarray) -> int:
    """Index of the largest probability; the lowest index wins ties."""
    return int(np.argmax(probabilities))


def loss_and_gradients(model: MlpClassifier, X: np.ndarray,
                       labels: Sequence[int]) -> Tuple[float, List[np.ndarray]]:
    """Mean cross-entropy over the batch and its exact gradients.

    Gradients come back in ``model.parameters()`` order.

    Raises:
        NonFiniteLoss: the loss is NaN or infinite (training diverged).
    """
    X = model._check(X)
    y = np.asarray(labels, dtype=np.int64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("loss_and_gradients needs a nonempty batch")
    if y.shape != (n,) or y.min() < 0 or y.max() >= model.n_classes:
        raise ValueError("labels must be one valid class index per row")

    pre, activations, logits = model._forward(X)
    log_probs = log_softmax(logits)
    loss = float(-np.mean(log_probs[np.arange(n), y]))
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"cross-entropy loss is {loss}")

    # d(mean CE)/d(logits) = (softmax - onehot) / n
    delta = np.exp(log_probs)
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grads_w = [None] * 3
    grads_b = [None] * 3
    for i in (2, 1, 0):
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ model.weights[i].T) * (pre[i - 1] > 0)

    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads.extend([gw, gb])
    return loss, grads


def evaluate_batch(model: MlpClassifier, X: np.ndarray, labels: Sequence[int]) -> Tuple[float, float]:
    """(mean cross-entropy, accuracy) without gradients."""
    if len(labels) == 0:
        return float("nan"), float("nan")
    X = model._check(X)
    y = np.asarray(labels, dtype=np.int64)
    log_probs = log_softmax(model.logits(X))
    loss = float(-np.mean(log_probs[np.arange(len(y)), y]))
    accuracy = float(np.mean(np.argmax(log_probs, axis=1) == y))
    return loss, accuracy
