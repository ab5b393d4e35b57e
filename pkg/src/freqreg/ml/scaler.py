"""Per-column standardisation z = s * (x - mu) / sigma."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ScalerError(ValueError):
    pass


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    scale: np.ndarray
    constant: np.ndarray  # columns that had zero variance at fit (std forced to 1)

    @property
    def n_columns(self) -> int:
        return len(self.mean)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "scale": self.scale.tolist(), "constant": self.constant.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float),
                   np.array(d["scale"], dtype=float), np.array(d["constant"], dtype=bool))


def fit_scaler(x, scale=1.0, on_constant: str = "raise") -> Scaler:
    """Fit column means and population standard deviations.

    ``on_constant="raise"`` rejects zero-variance columns; ``"pass"`` keeps
    them with sigma = 1 so they map to a constant zero.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ScalerError("need a 2-D array with at least two rows")
    if on_constant not in ("raise", "pass"):
        raise ValueError("on_constant must be 'raise' or 'pass'")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if constant.any():
        if on_constant == "raise":
            raise ScalerError(f"zero-variance columns: {np.flatnonzero(constant).tolist()}")
        std = np.where(constant, 1.0, std)
    s = np.broadcast_to(np.asarray(scale, dtype=float), mean.shape).copy()
    if (s == 0).any():
        raise ScalerError("scale factors must be nonzero")
    return Scaler(mean, std, s, constant)


def _check(scaler: Scaler, x: np.ndarray) -> None:
    if x.shape[-1] != scaler.n_columns:
        raise ScalerError(f"expected {scaler.n_columns} columns, got {x.shape[-1]}")


def transform(scaler: Scaler, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check(scaler, x)
    return scaler.scale * (x - scaler.mean) / scaler.std


def inverse_transform(scaler: Scaler, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    _check(scaler, z)
    return z / scaler.scale * scaler.std + scaler.mean
