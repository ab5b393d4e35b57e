"""Fully connected ReLU network with an identity output layer.

Weights are stored as (fan_in, fan_out) so a layer computes ``x @ W + b``
on row-major batches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MLPParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need matching, nonempty weight and bias lists")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValueError(f"layer {k}: bias shape {b.shape} does not match W {W.shape}")
            if k and self.weights[k - 1].shape[1] != W.shape[0]:
                raise ValueError(f"layer {k}: input width {W.shape[0]} breaks the shape chain")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def copy(self) -> "MLPParams":
        return MLPParams([W.copy() for W in self.weights], [b.copy() for b in self.biases])


def init_params(sizes: list[int], rng: np.random.Generator) -> MLPParams:
    """Glorot-uniform weights, zero biases."""
    Ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        Ws.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return MLPParams(Ws, bs)


def forward(params: MLPParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None] if single else x
    if h.shape[1] != params.weights[0].shape[0]:
        raise ValueError(f"input width {h.shape[1]} != {params.weights[0].shape[0]}")
    last = len(params.weights) - 1
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ W + b
        if k < last:
            h = np.maximum(h, 0.0)
    return h[0] if single else h


def loss_and_grads(params: MLPParams, x: np.ndarray, y: np.ndarray, alpha: float = 0.0):
    """Loss 1/(2B) sum|yhat - y|^2 + alpha/(2B) sum|W|^2 and its gradients."""
    B = x.shape[0]
    acts = [x]
    pre = []
    h = x
    last = len(params.weights) - 1
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ W + b
        pre.append(z)
        h = np.maximum(z, 0.0) if k < last else z
        acts.append(h)
    err = h - y
    loss = 0.5 * np.sum(err * err) / B
    if alpha:
        loss += 0.5 * alpha * sum(np.sum(W * W) for W in params.weights) / B

    gW = [None] * len(params.weights)
    gb = [None] * len(params.weights)
    delta = err / B
    for k in range(last, -1, -1):
        gW[k] = acts[k].T @ delta + (alpha / B) * params.weights[k]
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ params.weights[k].T) * (pre[k - 1] > 0)
    return loss, gW, gb
