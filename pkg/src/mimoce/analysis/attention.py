"""Attention-map capture and mean-AoA bucketed statistics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..nn import Model

__all__ = ["AttentionMapRecord", "AttentionAnalysis", "attention_analysis", "capture_attention_maps",
           "DEFAULT_SINE_BUCKETS", "SATURATION_TOL"]

# two neighbouring narrow ranges and a distant one
DEFAULT_SINE_BUCKETS = ((0.2, 0.3), (0.3, 0.4), (-0.7, -0.6))
SATURATION_TOL = 1e-6


@dataclass(frozen=True)
class AttentionMapRecord:
    model_id: str
    layer: int
    sample: int
    map: np.ndarray
    sine: float
    bucket: int


@dataclass
class AttentionAnalysis:
    model_id: str
    layers: list[int]
    buckets: list[tuple[float, float]]
    maps: dict[int, np.ndarray]              # layer -> (B, C)
    sines: np.ndarray
    bucket_ids: np.ndarray                   # -1 for samples outside every bucket
    bucket_means: dict[int, np.ndarray]      # layer -> (n_buckets, C), NaN rows for empty buckets
    bucket_counts: list[int]
    distances: dict[int, np.ndarray]         # layer -> (n_buckets, n_buckets) L2 distances
    saturated: dict[int, bool]
    warnings: list[str] = field(default_factory=list)

    def records(self):
        """Yield one record per (layer, sample)."""
        for layer in self.layers:
            for i, m in enumerate(self.maps[layer]):
                yield AttentionMapRecord(self.model_id, layer, i, m, float(self.sines[i]), int(self.bucket_ids[i]))

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "layers": self.layers,
            "buckets": [list(b) for b in self.buckets],
            "bucket_counts": self.bucket_counts,
            "bucket_means": {str(k): v.tolist() for k, v in self.bucket_means.items()},
            "distances": {str(k): v.tolist() for k, v in self.distances.items()},
            "saturated": {str(k): v for k, v in self.saturated.items()},
            "warnings": self.warnings,
        }


def capture_attention_maps(model: Model, inputs: np.ndarray, batch_size: int = 2000) -> dict[int, np.ndarray]:
    """Run evaluation-mode inference and return every attention layer's maps."""
    att = model.attention_layers()
    if not att:
        raise ValueError(f"model {model.name!r} has no attention module")
    maps = {i: [] for i, _ in att}
    for _, layer in att:
        layer.capture = True
    try:
        for lo in range(0, inputs.shape[0], batch_size):
            model.forward(inputs[lo:lo + batch_size])
            for i, layer in att:
                maps[i].append(layer.last_map)
    finally:
        for _, layer in att:
            layer.capture = False
            layer.last_map = None
    return {i: np.concatenate(v) for i, v in maps.items()}


def attention_analysis(model: Model, inputs: np.ndarray, mean_aoa: np.ndarray, buckets=DEFAULT_SINE_BUCKETS,
                       model_id: str | None = None) -> AttentionAnalysis:
    """Bucket samples by ``sin(mean AoA)`` and summarise attention maps per bucket.

    A layer is flagged saturated when every captured value is within 1e-6 of
    0.5, i.e. its excitation input is identically zero.
    """
    maps = capture_attention_maps(model, np.asarray(inputs))
    sines = np.sin(np.asarray(mean_aoa, dtype=np.float64))
    buckets = [tuple(map(float, b)) for b in buckets]
    bucket_ids = np.full(sines.shape[0], -1, dtype=np.int64)
    for k, (lo, hi) in enumerate(buckets):
        bucket_ids[(bucket_ids < 0) & (sines >= lo) & (sines < hi)] = k
    counts = [int((bucket_ids == k).sum()) for k in range(len(buckets))]
    notes = []
    for k, c in enumerate(counts):
        if c == 0:
            msg = f"sine bucket {buckets[k]} holds no samples"
            warnings.warn(msg, stacklevel=2)
            notes.append(msg)
    means, dists, sat = {}, {}, {}
    for layer, m in maps.items():
        if np.any(m <= 0.0) or np.any(m >= 1.0):
            raise AssertionError(f"attention layer {layer} produced values outside (0, 1)")
        rows = []
        for k in range(len(buckets)):
            sel = bucket_ids == k
            rows.append(m[sel].mean(axis=0) if sel.any() else np.full(m.shape[1], np.nan))
        mu = np.stack(rows)
        means[layer] = mu
        dists[layer] = np.linalg.norm(mu[:, None, :] - mu[None, :, :], axis=-1)
        sat[layer] = bool(np.max(np.abs(m - 0.5)) < SATURATION_TOL)
    return AttentionAnalysis(model_id or model.name, sorted(maps), buckets, maps, sines, bucket_ids, means, counts,
                             dists, sat, notes)
