"""Builders for the convolutional and fully connected estimation networks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nn import Model

__all__ = ["EstimatorKind", "build_cnn", "build_fnn", "build_had_cnn", "cnn_spec", "fnn_spec"]

NEURAL_TAGS = ("cnn", "cnn-att", "fnn", "fnn-att", "had-cnn", "had-cnn-att")
CLASSICAL_TAGS = ("ls", "mmse-single", "mmse-regional", "separate-ls")


@dataclass(frozen=True)
class EstimatorKind:
    """Estimator tag plus architecture hyperparameters.

    CNN: ``n_blocks`` blocks of ``filters`` filters with kernel sizes
    ``l_in`` (first block), ``l_hidden`` (others) and ``l_out`` (output).
    FNN with attention: one hidden layer of ``hidden[0] * hidden[1]`` neurons
    reshaped to ``hidden = (F, C)``. Plain FNN: ``plain_widths`` hidden layers.
    """

    tag: str
    n_blocks: int = 4
    filters: int = 96
    l_in: int = 7
    l_hidden: int = 5
    l_out: int = 1
    stride: int = 1
    reduction: int = 2
    hidden: tuple[int, int] = (16, 192)
    plain_widths: tuple[int, ...] = (256, 512)
    region_width_deg: float = 3.0
    sine_sharing: bool = True
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.tag not in NEURAL_TAGS + CLASSICAL_TAGS:
            raise ValueError(f"unknown estimator tag {self.tag!r}")

    @property
    def attention(self) -> bool:
        return self.tag.endswith("-att")

    @property
    def neural(self) -> bool:
        return self.tag in NEURAL_TAGS

    @property
    def mode(self) -> str:
        """Observation mode the estimator consumes."""
        if self.tag in ("fnn-att", "had-cnn", "had-cnn-att", "separate-ls"):
            return "had"
        if self.tag == "fnn":
            return self.extra.get("mode", "had")
        return "full"


def _conv_blocks(in_channels: int, n_blocks: int, filters: int, l_in: int, l_hidden: int, stride: int,
                 attention: bool, reduction: int) -> list[dict]:
    spec = []
    cin = in_channels
    for b in range(n_blocks):
        spec += [
            {"kind": "conv1d", "in_channels": cin, "filters": filters,
             "kernel_size": l_in if b == 0 else l_hidden, "stride": stride},
            {"kind": "batch_norm", "channels": filters},
            {"kind": "relu"},
        ]
        if attention:
            spec.append({"kind": "attention", "channels": filters, "reduction": reduction})
        cin = filters
    return spec


def cnn_spec(kind: EstimatorKind) -> list[dict]:
    spec = _conv_blocks(2, kind.n_blocks, kind.filters, kind.l_in, kind.l_hidden, kind.stride,
                        kind.attention, kind.reduction)
    spec.append({"kind": "conv1d", "in_channels": kind.filters, "filters": 2, "kernel_size": kind.l_out,
                 "stride": kind.stride})
    return spec


def build_cnn(kind: EstimatorKind, n_antennas: int, seed: int = 0, dtype=np.float32) -> Model:
    """Angular-domain refinement CNN: (N, 2) LS input -> (N, 2) estimate."""
    if kind.tag not in ("cnn", "cnn-att"):
        raise ValueError(f"build_cnn cannot build {kind.tag!r}")
    model = Model.from_spec(cnn_spec(kind), (n_antennas, 2), kind.tag, seed, dtype)
    if model.output_shape != (n_antennas, 2):
        raise ValueError(f"stride {kind.stride} does not preserve the antenna axis")
    return model


def fnn_spec(kind: EstimatorKind, in_features: int, out_features: int) -> list[dict]:
    if kind.tag == "fnn-att":
        f, c = kind.hidden
        if c % kind.reduction:
            raise ValueError(f"channel count {c} is not divisible by reduction ratio {kind.reduction}")
        return [
            {"kind": "dense", "in_features": in_features, "units": f * c},
            {"kind": "relu"},
            {"kind": "batch_norm", "channels": f * c},
            {"kind": "reshape", "shape": [f, c]},
            {"kind": "attention", "channels": c, "reduction": kind.reduction},
            {"kind": "flatten"},
            {"kind": "dense", "in_features": f * c, "units": out_features},
        ]
    if kind.tag == "fnn":
        spec, d = [], in_features
        for width in kind.plain_widths:
            spec += [
                {"kind": "dense", "in_features": d, "units": width},
                {"kind": "relu"},
                {"kind": "batch_norm", "channels": width},
            ]
            d = width
        spec.append({"kind": "dense", "in_features": d, "units": out_features})
        return spec
    raise ValueError(f"fnn_spec cannot build {kind.tag!r}")


def build_fnn(kind: EstimatorKind, in_features: int, n_antennas: int, seed: int = 0, dtype=np.float32) -> Model:
    """FC estimator mapping ``in_features`` inputs to the flat (2N,) angular channel.

    Under HAD ``in_features = 2M``; the plain FNN can also take the flattened
    full-array LS input (``2N``).
    """
    return Model.from_spec(fnn_spec(kind, in_features, 2 * n_antennas), (in_features,), kind.tag, seed, dtype)


def build_had_cnn(kind: EstimatorKind, n_rf: int, n_antennas: int, seed: int = 0, dtype=np.float32) -> Model:
    """HAD CNN baseline: conv blocks over the (M, 2) received vector, then an FC head to 2N."""
    if kind.tag not in ("had-cnn", "had-cnn-att"):
        raise ValueError(f"build_had_cnn cannot build {kind.tag!r}")
    spec = _conv_blocks(2, kind.n_blocks, kind.filters, kind.l_in, kind.l_hidden, 1,
                        kind.attention, kind.reduction)
    spec += [{"kind": "flatten"}, {"kind": "dense", "in_features": n_rf * kind.filters, "units": 2 * n_antennas}]
    return Model.from_spec(spec, (n_rf, 2), kind.tag, seed, dtype)
