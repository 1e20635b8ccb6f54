"""Logistic-regression credit model: training, plaintext scoring, encrypted scoring."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ckks
from .data import NormalizationStats


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 256  # 0 means full batch
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 0:
            raise ValueError("batch_size must be >= 0")


@dataclass(frozen=True, eq=False)
class ModelBundle:
    """Weights over normalized features plus the normalization itself."""

    weights: np.ndarray
    bias: float
    means: np.ndarray
    stds: np.ndarray
    schema_hash: str = ""

    def __post_init__(self):
        for name in ("weights", "means", "stds"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        d = self.weights.shape
        if len(d) != 1 or self.means.shape != d or self.stds.shape != d:
            raise ValueError("weights, means and stds must be equal-length vectors")
        if not np.all(self.stds > 0):
            raise ValueError("stds must be positive")
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return len(self.weights)

    @property
    def stats(self) -> NormalizationStats:
        return NormalizationStats(self.means, self.stds)

    def to_json(self) -> str:
        return json.dumps({
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "schema_hash": self.schema_hash,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ModelBundle":
        doc = json.loads(text)
        return cls(np.array(doc["weights"]), doc["bias"], np.array(doc["means"]),
                   np.array(doc["stds"]), doc.get("schema_hash", ""))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ModelBundle":
        return cls.from_json(Path(path).read_text())


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def log_loss(w, b, X, y) -> float:
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def log_loss_grad(w, b, X, y):
    r = sigmoid(X @ w + b) - y
    return X.T @ r / len(y), float(np.mean(r))


def gradient_descent(X, y, cfg: TrainConfig):
    """Mini-batch gradient descent from zero; returns (w, b, per-epoch full losses)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValueError("X must be (n, d) with n matching labels")
    if not np.all(np.isfinite(X)):
        raise ValueError("design matrix contains non-finite values")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    if y.min() == y.max():
        raise ValueError("training labels contain a single class")
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    rng = np.random.default_rng(cfg.seed)
    bs = n if cfg.batch_size == 0 else min(cfg.batch_size, n)
    losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if bs < n else np.arange(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            gw, gb = log_loss_grad(w, b, X[idx], y[idx])
            w -= cfg.learning_rate * gw
            b -= cfg.learning_rate * gb
        losses.append(log_loss(w, b, X, y))
    return w, b, losses


def train(X, y, cfg: TrainConfig = TrainConfig(), stats: NormalizationStats | None = None,
          schema_hash: str = "") -> ModelBundle:
    """Fit on an already normalized design matrix; ``stats`` is bundled as-is."""
    w, b, _ = gradient_descent(X, y, cfg)
    d = len(w)
    if stats is None:
        stats = NormalizationStats(np.zeros(d), np.ones(d))
    return ModelBundle(w, b, stats.means, stats.stds, schema_hash)


def _check_dim(x, model: ModelBundle) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise ValueError(f"expected {model.dim} features, got {x.shape[-1]}")
    return x


def logit_plain(x, model: ModelBundle):
    """bias + weights . ((x - means) / stds) for raw features (row or matrix)."""
    x = _check_dim(x, model)
    z = (x - model.means) / model.stds @ model.weights + model.bias
    return z if np.ndim(z) else float(z)


def predict_plain(x, model: ModelBundle):
    return sigmoid(logit_plain(x, model))


def decide(probability) -> np.ndarray | int:
    out = (np.asarray(probability) >= 0.5).astype(int)
    return out if out.ndim else int(out)


def accuracy(model: ModelBundle, X_raw, y) -> float:
    return float(np.mean(decide(predict_plain(X_raw, model)) == np.asarray(y)))


def evaluate_encrypted(ct: ckks.Ciphertext, model: ModelBundle, pctx: ckks.PublicContext) -> ckks.Ciphertext:
    """Encrypted logit in slot 0 of the result.

    Multiplies by the weights, folds the slots with rotations while still at
    the product scale, rescales once and adds the bias at the rescaled scale.
    The sigmoid is left to the key owner.
    """
    if ct.level < 1:
        raise ckks.LevelMismatchError("need one level for the weight product")
    w = ckks.encode(model.weights, pctx, level=ct.level)
    acc = ckks.mul_plain(ct, w)
    acc = ckks.sum_slots(acc, model.dim, pctx)
    acc = ckks.rescale(acc)
    bias = ckks.encode(np.full(pctx.params.slot_count, model.bias), pctx,
                       level=acc.level, scale=acc.scale)
    return ckks.add_plain(acc, bias)
