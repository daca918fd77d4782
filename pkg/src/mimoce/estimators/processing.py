"""Network input/output processing.

Networks see the angular domain with real and imaginary parts split; only the
inputs are standardised, targets stay in raw units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import Observation
from ..numerics import dft_shift_matrix

__all__ = [
    "Normalizer",
    "split_complex",
    "merge_complex",
    "raw_features",
    "preprocess",
    "postprocess",
    "angular_targets",
]

STD_FLOOR = 1e-8


def split_complex(z: np.ndarray, layout: str = "pairs") -> np.ndarray:
    """(..., N) complex -> (..., N, 2) for ``"pairs"`` or (..., 2N) for ``"flat"``."""
    if layout == "pairs":
        return np.stack([z.real, z.imag], axis=-1)
    if layout == "flat":
        return np.concatenate([z.real, z.imag], axis=-1)
    raise ValueError(f"unknown layout {layout!r}")


def merge_complex(a: np.ndarray, layout: str = "pairs") -> np.ndarray:
    if layout == "pairs":
        if a.shape[-1] != 2:
            raise ValueError(f"expected trailing axis of 2, got shape {a.shape}")
        return a[..., 0] + 1j * a[..., 1]
    if layout == "flat":
        if a.shape[-1] % 2:
            raise ValueError(f"flat layout needs an even trailing axis, got {a.shape}")
        n = a.shape[-1] // 2
        return a[..., :n] + 1j * a[..., n:]
    raise ValueError(f"unknown layout {layout!r}")


@dataclass
class Normalizer:
    """Z-score fitted on training inputs.

    By default every feature gets its own mean and std. With
    ``pool_positions=True`` (for (N, 2) conv inputs) the statistics are shared
    along the position axis, so a shifted input is normalised identically.
    """

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray, pool_positions: bool = False) -> "Normalizer":
        features = np.asarray(features, dtype=np.float64)
        axes = (0, 1) if pool_positions else (0,)
        mean = features.mean(axis=axes, keepdims=True)[0]
        std = np.maximum(features.std(axis=axes, keepdims=True)[0], STD_FLOOR)
        shape = features.shape[1:]
        return cls(np.broadcast_to(mean, shape).copy(), np.broadcast_to(std, shape).copy())

    def _check(self, features):
        if features.shape[1:] != self.mean.shape:
            raise ValueError(f"normalizer fitted on feature shape {self.mean.shape}, got {features.shape[1:]}")

    def transform(self, features: np.ndarray) -> np.ndarray:
        self._check(features)
        return (features - self.mean) / self.std

    def inverse(self, features: np.ndarray) -> np.ndarray:
        self._check(features)
        return features * self.std + self.mean

    def to_dict(self) -> dict:
        return {"shape": list(self.mean.shape), "mean": self.mean.ravel().tolist(), "std": self.std.ravel().tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        shape = tuple(d["shape"])
        return cls(np.asarray(d["mean"], dtype=np.float64).reshape(shape),
                   np.asarray(d["std"], dtype=np.float64).reshape(shape))


def raw_features(obs: Observation, layout: str | None = None) -> np.ndarray:
    """Un-normalised network input.

    Full-array observations become ``F h_LS`` in pairs layout (N, 2); HAD
    observations become ``[Re y, Im y]`` of length 2M.
    """
    data = np.atleast_2d(obs.data)
    if obs.mode == "full":
        x_ls = data @ dft_shift_matrix(data.shape[-1]).T
        return split_complex(x_ls, layout or "pairs")
    if layout == "pairs":
        return split_complex(data, "pairs")
    return split_complex(data, "flat")


def preprocess(obs: Observation, normalizer: Normalizer | None = None, layout: str | None = None) -> np.ndarray:
    feats = raw_features(obs, layout)
    return feats if normalizer is None else normalizer.transform(feats)


def postprocess(net_out: np.ndarray, layout: str = "pairs") -> tuple[np.ndarray, np.ndarray]:
    """Recombine network output into ``(x_hat, h_hat)`` with ``h_hat = F^H x_hat``."""
    net_out = np.asarray(net_out, dtype=np.float64)
    x_hat = merge_complex(net_out, layout)
    n = x_hat.shape[-1]
    h_hat = x_hat @ dft_shift_matrix(n).conj()
    return x_hat, h_hat


def angular_targets(x: np.ndarray, layout: str = "pairs") -> np.ndarray:
    return split_complex(np.asarray(x), layout)
