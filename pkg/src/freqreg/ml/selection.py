"""Error metric, k-fold cross-validation and exhaustive grid search."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scaler import fit_scaler, transform
from .training import TrainConfig, predict, train


def rmse(y, y_hat) -> np.ndarray:
    """Per-column root mean squared error."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch {y.shape} vs {y_hat.shape}")
    if y.shape[0] == 0:
        raise ValueError("rmse of an empty set")
    return np.sqrt(np.mean((y - y_hat) ** 2, axis=0))


def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the row count {n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


@dataclass
class CVResult:
    config: TrainConfig
    fold_scores: list[float]
    folds: list[np.ndarray]

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_scores))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_scores))


def _score(y_true, y_pred, y_train) -> float:
    # mean RMSE over targets, in units of the training targets' spread
    s = fit_scaler(y_train, on_constant="pass")
    return float(np.mean(rmse(transform(s, y_true), transform(s, y_pred))))


def kfold_cv(x, y, k: int = 5, config: TrainConfig = TrainConfig(), seed: int = 0) -> CVResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    folds = kfold_indices(len(x), k, seed)
    scores = []
    for j, held in enumerate(folds):
        rest = np.concatenate([f for i, f in enumerate(folds) if i != j])
        cfg = config.replace(seed=config.seed + 1000 * (j + 1))
        bundle = train(x[rest], y[rest], cfg)
        scores.append(_score(y[held], predict(bundle, x[held]), y[rest]))
    return CVResult(config, scores, folds)


def n_parameters(config: TrainConfig, n_in: int, n_out: int) -> int:
    sizes = [n_in, *config.hidden, n_out]
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def grid_search(x, y, grid: Sequence[dict], base: TrainConfig = TrainConfig(), k: int = 5,
                seed: int = 0) -> tuple[TrainConfig, list[dict]]:
    """Cross-validate each candidate; lowest mean score wins, ties go to fewer parameters then grid order."""
    if not grid:
        raise ValueError("empty parameter grid")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    y2 = y if y.ndim == 2 else y[:, None]
    table = []
    for order, overrides in enumerate(grid):
        cfg = base.replace(**overrides)
        res = kfold_cv(x, y, k, cfg, seed)
        table.append({"order": order, "params": dict(overrides), "mean": res.mean, "std": res.std,
                      "fold_scores": res.fold_scores,
                      "n_parameters": n_parameters(cfg, x.shape[1], y2.shape[1])})
    best = min(table, key=lambda r: (r["mean"], r["n_parameters"], r["order"]))
    return base.replace(**best["params"]), table
