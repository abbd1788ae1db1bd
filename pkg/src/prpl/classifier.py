"""Shared softmax classifier: forward pass, losses, analytic gradients, SGD.

The default head is a single affine layer followed by softmax; extracted
features are already high-level, so a linear head keeps every gradient
hand-derivable. An optional one-hidden-layer (tanh) variant exists for
experimentation and is excluded from the serialized format.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import (
    DimensionMismatchError,
    LabelOutOfRangeError,
    MalformedHeaderError,
    NonFiniteGradientError,
    ValidationError,
)

HEAD_MAGIC = b"PRPLHD01"
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ClassifierHead:
    """Affine softmax head: logits = X @ W + b."""

    W: np.ndarray  # (d, C) float64
    b: np.ndarray  # (C,) float64

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if W.ndim != 2 or b.shape != (W.shape[1],):
            raise DimensionMismatchError(
                f"inconsistent head shapes W{W.shape}, b{b.shape}"
            )
        if not (np.isfinite(W).all() and np.isfinite(b).all()):
            raise ValidationError("head contains non-finite entries")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def num_classes(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class MLPHead:
    """Experimental head with one tanh hidden layer; not serializable."""

    W1: np.ndarray  # (d, h)
    b1: np.ndarray  # (h,)
    W2: np.ndarray  # (h, C)
    b2: np.ndarray  # (C,)

    def __post_init__(self):
        for name in ("W1", "b1", "W2", "b2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.isfinite(arr).all():
                raise ValidationError(f"head field {name} contains non-finite entries")
            object.__setattr__(self, name, arr)
        if (
            self.W1.ndim != 2
            or self.b1.shape != (self.W1.shape[1],)
            or self.W2.shape[0] != self.W1.shape[1]
            or self.b2.shape != (self.W2.shape[1],)
        ):
            raise DimensionMismatchError("inconsistent MLP head shapes")

    @property
    def d(self) -> int:
        return self.W1.shape[0]

    @property
    def num_classes(self) -> int:
        return self.W2.shape[1]


Head = Union[ClassifierHead, MLPHead]


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings for one training stage."""

    learning_rate: float = 0.001
    batch_size: int = 64
    epochs: int = 9
    seed: int = 0
    mmd_weight: float = 1.0
    l2_normalize_inputs: bool = False
    hidden_width: Optional[int] = None  # experimental MLP head, off by default

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.mmd_weight < 0:
            raise ValidationError("mmd_weight must be >= 0")
        # a within-domain MMD term over a single point is meaningless
        min_batch = 2 if self.mmd_weight > 0 else 1
        if self.batch_size < min_batch:
            raise ValidationError(
                f"batch_size must be >= {min_batch} (mmd_weight={self.mmd_weight})"
            )
        if self.hidden_width is not None and self.hidden_width < 1:
            raise ValidationError("hidden_width must be >= 1 when set")

    def without_mmd(self) -> "TrainConfig":
        return replace(self, mmd_weight=0.0)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_head(d: int, num_classes: int, seed: int) -> ClassifierHead:
    """Glorot-uniform W, zero b; deterministic per seed."""
    if d < 1 or num_classes < 1:
        raise ValidationError("need d >= 1 and num_classes >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    return ClassifierHead(W=_glorot(rng, d, num_classes), b=np.zeros(num_classes))


def init_mlp_head(d: int, hidden: int, num_classes: int, seed: int) -> MLPHead:
    rng = np.random.Generator(np.random.PCG64(seed))
    return MLPHead(
        W1=_glorot(rng, d, hidden),
        b1=np.zeros(hidden),
        W2=_glorot(rng, hidden, num_classes),
        b2=np.zeros(num_classes),
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_input(head: Head, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != head.d:
        raise DimensionMismatchError(
            f"input shape {X.shape} does not match head d={head.d}"
        )
    return X


def forward(head: Head, X: np.ndarray) -> np.ndarray:
    """Row-wise class probabilities, via max-subtracted softmax of the logits."""
    X = _check_input(head, X)
    if isinstance(head, ClassifierHead):
        return _softmax(X @ head.W + head.b)
    H = np.tanh(X @ head.W1 + head.b1)
    return _softmax(H @ head.W2 + head.b2)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-probability of the true class, log clamped at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise DimensionMismatchError(
            f"probs {probs.shape} incompatible with labels {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise LabelOutOfRangeError(
            f"label outside [0, {probs.shape[1]})"
        )
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


def _onehot_residual(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    G = probs.copy()
    G[np.arange(len(labels)), labels] -= 1.0
    return G / len(labels)


def grad_source_loss(head: Head, X: np.ndarray, labels: np.ndarray):
    """Analytic gradient of the cross-entropy loss w.r.t. the head parameters.

    Returns (dW, db) for the linear head, (dW1, db1, dW2, db2) for the MLP.
    """
    X = _check_input(head, X)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= head.num_classes:
        raise LabelOutOfRangeError(f"label outside [0, {head.num_classes})")
    if isinstance(head, ClassifierHead):
        dZ = _onehot_residual(_softmax(X @ head.W + head.b), labels)
        return X.T @ dZ, dZ.sum(axis=0)
    H = np.tanh(X @ head.W1 + head.b1)
    dZ2 = _onehot_residual(_softmax(H @ head.W2 + head.b2), labels)
    dH = dZ2 @ head.W2.T
    dZ1 = dH * (1.0 - H * H)
    return X.T @ dZ1, dZ1.sum(axis=0), H.T @ dZ2, dZ2.sum(axis=0)


def backprop_output_grad(head: Head, X: np.ndarray, dP: np.ndarray):
    """Push a gradient w.r.t. the softmax output back onto the head parameters.

    Used to train through losses (like MMD) defined on the probability
    outputs: for each row, dZ = p * (dP - <dP, p>).
    """
    X = _check_input(head, X)
    P = forward(head, X)
    dZ = P * (dP - np.sum(dP * P, axis=1, keepdims=True))
    if isinstance(head, ClassifierHead):
        return X.T @ dZ, dZ.sum(axis=0)
    H = np.tanh(X @ head.W1 + head.b1)
    dH = dZ @ head.W2.T
    dZ1 = dH * (1.0 - H * H)
    return X.T @ dZ1, dZ1.sum(axis=0), H.T @ dZ, dZ.sum(axis=0)


def sgd_step(head: Head, grads, learning_rate: float) -> Head:
    """One vanilla SGD update; rejects non-finite gradients."""
    grads = tuple(np.asarray(g, dtype=np.float64) for g in grads)
    if any(not np.isfinite(g).all() for g in grads):
        raise NonFiniteGradientError("gradient contains NaN or infinity")
    if isinstance(head, ClassifierHead):
        dW, db = grads
        return ClassifierHead(W=head.W - learning_rate * dW, b=head.b - learning_rate * db)
    dW1, db1, dW2, db2 = grads
    return MLPHead(
        W1=head.W1 - learning_rate * dW1,
        b1=head.b1 - learning_rate * db1,
        W2=head.W2 - learning_rate * dW2,
        b2=head.b2 - learning_rate * db2,
    )


def add_grads(a, b, scale: float = 1.0):
    return tuple(x + scale * y for x, y in zip(a, b))


# -- head serialization ------------------------------------------------------


def save_head(head: ClassifierHead, path) -> None:
    """Binary head format: magic, u32 d, u32 C, W row-major f64, then b f64."""
    if not isinstance(head, ClassifierHead):
        raise ValidationError("only the linear head is serializable")
    buf = io.BytesIO()
    buf.write(HEAD_MAGIC)
    buf.write(struct.pack("<II", head.d, head.num_classes))
    buf.write(head.W.astype("<f8").tobytes(order="C"))
    buf.write(head.b.astype("<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_head(path) -> ClassifierHead:
    raw = Path(path).read_bytes()
    if not raw.startswith(HEAD_MAGIC):
        raise MalformedHeaderError(f"{path}: not a classifier head file")
    if len(raw) < len(HEAD_MAGIC) + 8:
        raise MalformedHeaderError(f"{path}: truncated head file")
    d, C = struct.unpack_from("<II", raw, len(HEAD_MAGIC))
    offset = len(HEAD_MAGIC) + 8
    expected = offset + 8 * (d * C + C)
    if len(raw) != expected:
        raise DimensionMismatchError(
            f"head payload is {len(raw) - offset} bytes, expected {expected - offset}"
        )
    W = np.frombuffer(raw, dtype="<f8", count=d * C, offset=offset).reshape(d, C)
    b = np.frombuffer(raw, dtype="<f8", count=C, offset=offset + 8 * d * C)
    return ClassifierHead(W=W.copy(), b=b.copy())
