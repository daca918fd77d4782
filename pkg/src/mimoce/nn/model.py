"""Sequential models and the binary checkpoint format."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..numerics import RngStream
from .layers import Attention, BatchNorm, Layer, layer_from_config
from .tensor import Tensor, check_finite

__all__ = ["Model", "save_checkpoint", "load_checkpoint", "CHECKPOINT_VERSION"]

CHECKPOINT_MAGIC = b"MIMOCEK1"
CHECKPOINT_VERSION = 1


class Model:
    """A static chain of layers with a fixed per-sample input shape."""

    def __init__(self, layers: list[Layer], input_shape, name: str = "model", dtype=np.float32):
        self.layers = list(layers)
        self.input_shape = tuple(int(s) for s in input_shape)
        self.name = name
        self.dtype = np.dtype(dtype)
        self.meta: dict = {}

    @classmethod
    def from_spec(cls, spec: list[dict], input_shape, name="model", seed: int | None = 0,
                  dtype=np.float32) -> "Model":
        """Build layers from ``[{"kind": ..., **config}, ...]``.

        Weights are Xavier-initialised from stream ``(seed, 0)``; with
        ``seed=None`` they start at zero (used when loading a checkpoint).
        """
        stream = None if seed is None else RngStream(seed, 0, 7)
        layers = []
        for entry in spec:
            entry = dict(entry)
            kind = entry.pop("kind")
            layers.append(layer_from_config(kind, entry, stream, dtype))
        return cls(layers, input_shape, name, dtype)

    def spec(self) -> list[dict]:
        return [{"kind": layer.kind, **layer.config()} for layer in self.layers]

    def __call__(self, x, train: bool = False) -> Tensor:
        return self.forward(x, train)

    def forward(self, x, train: bool = False) -> Tensor:
        t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=self.dtype))
        if tuple(t.data.shape[1:]) != self.input_shape:
            raise ValueError(f"{self.name} expects per-sample shape {self.input_shape}, got {t.data.shape[1:]}")
        for layer in self.layers:
            t = layer(t, train)
        check_finite(t.data, f"{self.name} forward output")
        return t

    def predict(self, x: np.ndarray, batch_size: int = 2000) -> np.ndarray:
        """Evaluation-mode inference in chunks."""
        x = np.asarray(x, dtype=self.dtype)
        outs = [self.forward(x[i:i + batch_size]).data for i in range(0, x.shape[0], batch_size)]
        return np.concatenate(outs) if outs else np.zeros((0,) + self.output_shape, self.dtype)

    @property
    def output_shape(self) -> tuple:
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        return tuple(shape)

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [(f"{i}.{k}", t) for i, layer in enumerate(self.layers) for k, t in layer.params.items()]

    def buffers(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{i}.{k}", v) for i, layer in enumerate(self.layers) for k, v in layer.buffers.items()]

    def zero_grad(self) -> None:
        for _, p in self.parameters():
            p.grad = None

    def check_gradients(self) -> None:
        for name, p in self.parameters():
            if p.grad is not None:
                check_finite(p.grad, f"gradient of {name}")

    def astype(self, dtype) -> "Model":
        for layer in self.layers:
            layer.astype(dtype)
        self.dtype = np.dtype(dtype)
        return self

    def state(self) -> dict[str, np.ndarray]:
        """Copy of every parameter and buffer, keyed by ``layer.name``."""
        out = {k: t.data.copy() for k, t in self.parameters()}
        out.update({f"{k}@": v.copy() for k, v in self.buffers()})
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for i, layer in enumerate(self.layers):
            for k, t in layer.params.items():
                t.data = np.array(state[f"{i}.{k}"], dtype=self.dtype)
            for k in layer.buffers:
                layer.buffers[k] = np.array(state[f"{i}.{k}@"], dtype=self.dtype)

    def attention_layers(self) -> list[tuple[int, Attention]]:
        return [(i, layer) for i, layer in enumerate(self.layers) if isinstance(layer, Attention)]

    def param_counts(self) -> dict[str, int]:
        """Trainable counts split the way closed-form complexity formulas see them.

        ``weights`` covers conv/dense kernels outside attention modules,
        ``attention`` the two attention kernels, ``biases`` the bias vectors and
        ``batch_norm`` the affine BN terms.
        """
        counts = {"weights": 0, "attention": 0, "biases": 0, "batch_norm": 0}
        for layer in self.layers:
            for k, t in layer.params.items():
                if isinstance(layer, Attention):
                    counts["attention"] += t.data.size
                elif isinstance(layer, BatchNorm):
                    counts["batch_norm"] += t.data.size
                elif k == "bias":
                    counts["biases"] += t.data.size
                else:
                    counts["weights"] += t.data.size
        counts["total"] = sum(counts.values())
        return counts

    def __repr__(self):
        inner = "\n".join(f"  {layer!r}" for layer in self.layers)
        return f"Model({self.name!r}, input={self.input_shape},\n{inner}\n)"


def save_checkpoint(model: Model, path) -> None:
    """Write ``magic | u64 header length | JSON header | float32 LE blob``."""
    state = model.state()
    tensors, chunks, offset = [], [], 0
    for name, arr in state.items():
        a = np.ascontiguousarray(arr, dtype="<f4")
        tensors.append({"name": name, "shape": list(a.shape), "offset": offset, "count": int(a.size)})
        chunks.append(a.tobytes())
        offset += a.size
    header = {
        "format_version": CHECKPOINT_VERSION,
        "name": model.name,
        "input_shape": list(model.input_shape),
        "layers": model.spec(),
        "tensors": tensors,
        "dtype": "<f4",
        "meta": model.meta,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(raw)))
        f.write(raw)
        f.write(b"".join(chunks))


def load_checkpoint(path, dtype=np.float32) -> Model:
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not a model checkpoint")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen].decode("utf-8"))
    if header["format_version"] != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header['format_version']}")
    blob = np.frombuffer(data[16 + hlen:], dtype="<f4")
    model = Model.from_spec(header["layers"], header["input_shape"], header["name"], seed=None, dtype=dtype)
    state = {t["name"]: blob[t["offset"]:t["offset"] + t["count"]].reshape(t["shape"]) for t in header["tensors"]}
    model.load_state(state)
    model.meta = header.get("meta", {})
    return model
