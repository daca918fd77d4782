"""Uniform estimator objects used by the harness and experiment runner.

Every estimator turns one dataset split at one SNR point into antenna-domain
estimates of shape (B, N). Splits are duck-typed: they expose ``channels``,
``indices``, ``cfg``, ``observation(j, mode)``, ``noise_var(j)`` and
``snr_db``.
"""

from __future__ import annotations

import numpy as np

from ..channel import generate_pilots
from ..nn import Model, load_checkpoint, save_checkpoint
from ..numerics import RngStream
from .classical import fit_ccm_bank, estimate_ccm, mmse_regional, mmse_single, separate_ls
from .processing import Normalizer, postprocess, raw_features

__all__ = [
    "Estimator",
    "LSEstimator",
    "MMSESingleEstimator",
    "MMSERegionalEstimator",
    "SeparateLSEstimator",
    "NeuralEstimator",
]

SEPARATE_LS_COMPONENT = 1000


class Estimator:
    name = "estimator"
    mode = "full"

    def fit(self, split) -> "Estimator":
        return self

    def estimate(self, split, j: int) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class LSEstimator(Estimator):
    name = "ls"

    def estimate(self, split, j):
        return split.observation(j, "full").h_ls.copy()


class MMSESingleEstimator(Estimator):
    name = "mmse-single"

    def __init__(self, ccm: np.ndarray | None = None):
        self.ccm = ccm

    def fit(self, split):
        self.ccm = estimate_ccm(split.channels)
        return self

    def estimate(self, split, j):
        return mmse_single(split.observation(j, "full"), self.ccm, 1.0 / split.noise_var(j))


class MMSERegionalEstimator(Estimator):
    def __init__(self, width_deg: float = 3.0, sine_sharing: bool = True, bank=None):
        self.width_deg, self.sine_sharing, self.bank = width_deg, sine_sharing, bank
        self.name = f"mmse-regional-{width_deg:g}deg"

    def fit(self, split):
        self.bank = fit_ccm_bank(split.channels, self.width_deg, self.sine_sharing)
        return self

    def estimate(self, split, j):
        return mmse_regional(split.observation(j, "full"), self.bank, split.channels.mean_aoa,
                             1.0 / split.noise_var(j))


class SeparateLSEstimator(Estimator):
    """N/M switched LS rounds; noise comes from stream ``(seed, ordinal, 1000 + j)``."""

    name = "separate-ls"
    mode = "had"

    def __init__(self, n_rf: int):
        self.n_rf = n_rf

    def estimate(self, split, j):
        cfg = split.cfg
        pilot = generate_pilots(1, cfg.pilot_length)
        nv = split.noise_var(j)
        out = np.empty_like(split.channels.h)
        for k, (i, h) in enumerate(zip(split.indices, split.channels.h)):
            stream = RngStream(cfg.master_seed, int(i), SEPARATE_LS_COMPONENT + j)
            out[k], _ = separate_ls(h, self.n_rf, nv, stream, pilot)
        return out


class NeuralEstimator(Estimator):
    """A trained network plus its frozen input normaliser.

    ``in_layout``/``out_layout`` are ``"pairs"`` ((N, 2) tensors) or
    ``"flat"`` ((2N,) vectors).
    """

    def __init__(self, model: Model, normalizer: Normalizer | None, mode: str, in_layout: str, out_layout: str,
                 name: str | None = None):
        self.model, self.normalizer = model, normalizer
        self.mode, self.in_layout, self.out_layout = mode, in_layout, out_layout
        self.name = name or model.name

    def features(self, split, j) -> np.ndarray:
        feats = raw_features(split.observation(j, self.mode), self.in_layout)
        return feats if self.normalizer is None else self.normalizer.transform(feats)

    def predict_angular(self, split, j) -> np.ndarray:
        out = self.model.predict(self.features(split, j))
        x_hat, _ = postprocess(out, self.out_layout)
        return x_hat

    def estimate(self, split, j):
        out = self.model.predict(self.features(split, j))
        return postprocess(out, self.out_layout)[1]

    def save(self, path) -> None:
        self.model.meta = {
            "estimator": self.name, "mode": self.mode, "in_layout": self.in_layout, "out_layout": self.out_layout,
            "normalizer": None if self.normalizer is None else self.normalizer.to_dict(),
        }
        save_checkpoint(self.model, path)

    @classmethod
    def load(cls, path) -> "NeuralEstimator":
        model = load_checkpoint(path)
        m = model.meta
        norm = None if m.get("normalizer") is None else Normalizer.from_dict(m["normalizer"])
        return cls(model, norm, m["mode"], m["in_layout"], m["out_layout"], m.get("estimator"))
