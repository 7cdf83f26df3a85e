"""Linear sentiment regressor trained by mini-batch SGD on the MSE loss.

Features are z-scored with training-set statistics before the linear map;
the bias is left out of the L2 penalty and starts at the mean training
label on a cold start.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from coverlens import _backend
from coverlens.errors import DatasetError, DimensionError, ModelFileError
from coverlens.features import FeatureKind, FeatureVector
from coverlens.serialize import write_json

MODEL_FORMAT = "coverlens_model_v1"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    tolerance: float = 0.003
    l2_alpha: float = 0.0001
    max_epochs: int = 100
    batch_size: int = 1
    patience: int = 5
    warm_start: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.tolerance < 0 or self.l2_alpha < 0:
            raise ValueError("learning_rate, tolerance and l2_alpha must be non-negative")
        if self.max_epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("max_epochs, batch_size and patience must be positive")


@dataclass
class TrainHistory:
    train_mse: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    diverged: bool = False
    best_epoch: int = 0
    stopped_early: bool = False

    def __len__(self):
        return len(self.train_mse)

    def as_dict(self) -> dict:
        return {
            "train_mse": list(self.train_mse),
            "val_mse": list(self.val_mse),
            "diverged": self.diverged,
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
        }


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    scaler_means: np.ndarray
    scaler_stds: np.ndarray
    kind: FeatureKind
    pinned: np.ndarray | None = None
    train_config: TrainConfig | None = None
    history: TrainHistory | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        means = np.array(self.scaler_means, dtype=np.float64)
        stds = np.array(self.scaler_stds, dtype=np.float64)
        if not (w.shape == means.shape == stds.shape) or w.ndim != 1:
            raise DimensionError("weights and scaler must be 1-D and of equal length")
        if np.any(stds <= 0):
            raise ValueError("scaler standard deviations must be positive")
        pinned = np.zeros(len(w), bool) if self.pinned is None else np.array(self.pinned, dtype=bool)
        for name, val in (("weights", w), ("scaler_means", means), ("scaler_stds", stds), ("pinned", pinned)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "kind", FeatureKind(self.kind))
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return len(self.weights)

    def scale(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise DimensionError(f"model expects {self.dim} features, got {X.shape[-1]}")
        return (X - self.scaler_means) / self.scaler_stds

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "kind": self.kind.value,
            "weights": self.weights,
            "bias": self.bias,
            "scaler_means": self.scaler_means,
            "scaler_stds": self.scaler_stds,
            "pinned": [int(i) for i in np.flatnonzero(self.pinned)],
            "train_config": asdict(self.train_config) if self.train_config else None,
            "history": self.history.as_dict() if self.history else None,
        }


def save_model(model: LinearModel, path) -> None:
    write_json(model.to_dict(), path)


def load_model(path) -> LinearModel:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read model {path}: {exc}") from None
    if raw.get("format") != MODEL_FORMAT:
        raise ModelFileError(f"{path}: not a {MODEL_FORMAT} file")
    try:
        dim = len(raw["weights"])
        pinned = np.zeros(dim, bool)
        pinned[raw.get("pinned", [])] = True
        hist = raw.get("history")
        history = None
        if hist:
            history = TrainHistory(
                [math.nan if v is None else v for v in hist["train_mse"]],
                [math.nan if v is None else v for v in hist["val_mse"]],
                hist["diverged"], hist["best_epoch"], hist.get("stopped_early", False),
            )
        cfg = TrainConfig(**raw["train_config"]) if raw.get("train_config") else None
        return LinearModel(raw["weights"], raw["bias"], raw["scaler_means"], raw["scaler_stds"],
                           FeatureKind(raw["kind"]), pinned, cfg, history)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"{path}: malformed model ({exc})") from None


def as_arrays(examples) -> tuple[np.ndarray, np.ndarray]:
    """Stack (x, y) examples into a design matrix and label vector."""
    examples = list(examples)
    if not examples:
        raise DatasetError("no examples")
    X = np.stack([_values(ex.x) for ex in examples])
    y = np.array([ex.y for ex in examples], dtype=np.float64)
    return X, y


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)


def fit_scaler(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column means and population stds; constant columns get std 1 and are pinned."""
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # relative test so float noise on a constant column still counts as constant
    pinned = stds <= 1e-12 * np.maximum(1.0, np.abs(means))
    stds = np.where(pinned, 1.0, stds)
    return means, stds, pinned


def predict(model: LinearModel, x) -> float | np.ndarray:
    """``weights . scale(x) + bias`` for one vector or a stack of them."""
    z = model.scale(_values(x))
    return z @ model.weights + model.bias


def mse(model: LinearModel, examples) -> float:
    X, y = as_arrays(examples)
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.mean((y - predict(model, X)) ** 2))


def rmse(model: LinearModel, examples) -> float:
    return math.sqrt(mse(model, examples))


def evaluate(model: LinearModel, examples) -> dict:
    examples = list(examples)
    m = mse(model, examples)
    return {"rmse": math.sqrt(m) if math.isfinite(m) else math.inf, "mse": m, "n": len(examples)}


def gradient(model: LinearModel, batch, l2_alpha: float = 0.0001) -> tuple[np.ndarray, float]:
    """Gradient of the batch MSE plus ``l2_alpha * ||w||^2`` w.r.t. scaled-space weights and bias."""
    X, y = as_arrays(batch)
    Z = model.scale(X)
    resid = y - (Z @ model.weights + model.bias)
    scale = -2.0 / len(y)
    grad_w = scale * (Z.T @ resid) + 2.0 * l2_alpha * model.weights
    grad_w[model.pinned] = 0.0
    return grad_w, scale * float(resid.sum())


def _mse_arrays(Z, y, theta, bias) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.mean((y - (Z @ theta + bias)) ** 2))


def fit(model: LinearModel | None, train, val, cfg: TrainConfig = TrainConfig(),
        kind: FeatureKind | None = None) -> tuple[LinearModel, TrainHistory]:
    """Train by mini-batch SGD, keeping the weights of the best validation epoch.

    Training stops after ``cfg.patience`` consecutive epochs in which the
    monitored MSE (validation, or training when ``val`` is empty) fails to
    beat its best value by more than ``cfg.tolerance``.  A non-finite loss
    ends training with ``history.diverged`` set.
    """
    X, y = as_arrays(train)
    if val:
        Xv, yv = as_arrays(val)
    else:
        Xv = yv = None
    if kind is None:
        first = list(train)[0].x
        kind = first.kind if isinstance(first, FeatureVector) else FeatureKind.MFCC

    if cfg.warm_start and model is not None:
        if model.dim != X.shape[1]:
            raise DimensionError(f"warm-start model has {model.dim} features, data has {X.shape[1]}")
        means, stds, pinned = model.scaler_means, model.scaler_stds, model.pinned
        theta = np.array(model.weights)
        bias = model.bias
    else:
        means, stds, pinned = fit_scaler(X)
        theta = np.zeros(X.shape[1])
        bias = float(y.mean())

    Z = np.ascontiguousarray((X - means) / stds)
    Zv = None if Xv is None else (Xv - means) / stds
    active = np.ascontiguousarray(~pinned, dtype=np.uint8)
    rng = np.random.default_rng(cfg.seed)
    history = TrainHistory()

    def snapshot(th, b):
        return LinearModel(th.copy(), b, means, stds, kind, pinned, cfg, history)

    best = snapshot(theta, bias)
    best_loss = math.inf
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(y)).astype(np.intp)
        with np.errstate(over="ignore", invalid="ignore"):
            bias = _backend.sgd_epoch(Z, y, order, theta, bias, cfg.learning_rate, cfg.l2_alpha,
                                      cfg.batch_size, active)
        train_loss = _mse_arrays(Z, y, theta, bias)
        val_loss = _mse_arrays(Zv, yv, theta, bias) if Zv is not None else math.nan
        history.train_mse.append(train_loss)
        history.val_mse.append(val_loss)
        monitored = val_loss if Zv is not None else train_loss
        if not (math.isfinite(monitored) and math.isfinite(train_loss) and math.isfinite(bias)
                and np.all(np.isfinite(theta))):
            history.diverged = True
            break
        if monitored < best_loss - cfg.tolerance:
            stale = 0
        else:
            stale += 1
        if monitored < best_loss:
            best_loss = monitored
            best = snapshot(theta, bias)
            history.best_epoch = epoch
        if stale >= cfg.patience:
            history.stopped_early = epoch < cfg.max_epochs
            break
    return best, history
