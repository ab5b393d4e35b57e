"""Mini-batch gradient descent training and the persisted regressor bundle."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .network import MLPParams, forward, init_params, loss_and_grads
from .scaler import Scaler, fit_scaler, inverse_transform, transform

BUNDLE_FORMAT = "freqreg-mlp/1"


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (100, 100, 100)
    learning_rate: float = 0.01
    l2_alpha: float = 0.001
    max_epochs: int = 2000
    batch_size: int = 32
    seed: int = 0
    patience: int | None = None
    validation_fraction: float = 0.1
    init: str = "glorot-uniform"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.init != "glorot-uniform":
            raise ValueError(f"unknown init scheme {self.init!r}")

    def replace(self, **kw) -> "TrainConfig":
        d = asdict(self)
        d.update(kw)
        d["hidden"] = tuple(d["hidden"])
        return TrainConfig(**d)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RegressorBundle:
    x_scaler: Scaler
    y_scaler: Scaler
    params: MLPParams
    feature_names: list[str]
    target_names: list[str]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = self.params.layer_sizes
        if sizes[0] != self.x_scaler.n_columns or sizes[-1] != self.y_scaler.n_columns:
            raise ValueError("scaler widths do not match the network boundary layers")
        if len(self.feature_names) != sizes[0] or len(self.target_names) != sizes[-1]:
            raise ValueError("column names do not match the network boundary layers")

    def to_dict(self) -> dict:
        return {
            "format": BUNDLE_FORMAT,
            "layer_sizes": self.params.layer_sizes,
            "weights": [W.tolist() for W in self.params.weights],
            "biases": [b.tolist() for b in self.params.biases],
            "x_scaler": self.x_scaler.to_dict(),
            "y_scaler": self.y_scaler.to_dict(),
            "feature_names": list(self.feature_names),
            "target_names": list(self.target_names),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressorBundle":
        if d.get("format") != BUNDLE_FORMAT:
            raise ValueError(f"not a regressor bundle (format {d.get('format')!r})")
        params = MLPParams([np.array(W, dtype=float) for W in d["weights"]],
                           [np.array(b, dtype=float) for b in d["biases"]])
        if params.layer_sizes != list(d["layer_sizes"]):
            raise ValueError("layer_sizes disagree with stored weights")
        return cls(Scaler.from_dict(d["x_scaler"]), Scaler.from_dict(d["y_scaler"]), params,
                   list(d["feature_names"]), list(d["target_names"]), d.get("metadata", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RegressorBundle":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _sgd(params: MLPParams, z_x, z_y, config: TrainConfig, rng, val=None):
    n = z_x.shape[0]
    lr, alpha, bs = config.learning_rate, config.l2_alpha, config.batch_size
    curve, val_curve = [], []
    best, best_params, stale = np.inf, params, 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, gW, gb = loss_and_grads(params, z_x[idx], z_y[idx], alpha)
            total += loss * len(idx)
            for k in range(len(gW)):
                params.weights[k] -= lr * gW[k]
                params.biases[k] -= lr * gb[k]
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(epoch)
        curve.append(epoch_loss)
        if val is not None:
            err = forward(params, val[0]) - val[1]
            v = 0.5 * float(np.mean(np.sum(err * err, axis=1)))
            val_curve.append(v)
            if v < best:
                best, best_params, stale = v, params.copy(), 0
            else:
                stale += 1
                if stale >= config.patience:
                    return best_params, curve, val_curve
    if val is not None and best_params is not params:
        return best_params, curve, val_curve
    return params, curve, val_curve


def train(x, y, config: TrainConfig = TrainConfig(),
          feature_names: Sequence[str] | None = None,
          target_names: Sequence[str] | None = None) -> RegressorBundle:
    """Fit scalers and an MLP on raw-scale rows."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] < 1 or x.shape[0] != y.shape[0]:
        raise ValueError("need at least one row and matching x/y row counts")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    xs = fit_scaler(x, on_constant="pass")
    ys = fit_scaler(y, on_constant="pass")
    zx, zy = transform(xs, x), transform(ys, y)
    rng = np.random.default_rng(config.seed)
    params = init_params([x.shape[1], *config.hidden, y.shape[1]], rng)

    val = None
    if config.patience is not None:
        perm = rng.permutation(len(zx))
        k = max(1, int(round(config.validation_fraction * len(zx))))
        if k >= len(zx):
            raise ValueError("validation slice would leave no training rows")
        val = (zx[perm[:k]], zy[perm[:k]])
        zx, zy = zx[perm[k:]], zy[perm[k:]]

    params, curve, val_curve = _sgd(params, zx, zy, config, rng, val)
    meta = {"config": {**asdict(config), "hidden": list(config.hidden)},
            "config_hash": config.digest(), "seed": config.seed,
            "loss_curve": curve, "n_rows": int(x.shape[0])}
    if val is not None:
        meta["validation_curve"] = val_curve
    fn = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(x.shape[1])]
    tn = list(target_names) if target_names is not None else [f"y{i}" for i in range(y.shape[1])]
    return RegressorBundle(xs, ys, params, fn, tn, meta)


def predict(bundle: RegressorBundle, x) -> np.ndarray:
    """Raw-scale predictions; accepts one row or a batch."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != bundle.x_scaler.n_columns:
        raise ValueError(f"expected {bundle.x_scaler.n_columns} features, got {x.shape[-1]}")
    return inverse_transform(bundle.y_scaler, forward(bundle.params, transform(bundle.x_scaler, x)))
