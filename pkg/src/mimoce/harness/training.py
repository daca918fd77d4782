"""Mini-batch Adam training with plateau LR decay, early stopping and best-weight restore."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..estimators.interface import NeuralEstimator
from ..estimators.processing import Normalizer, angular_targets, raw_features
from ..nn import Adam, Model, NonFiniteError, mse_loss, weighted_mse_loss
from ..numerics import RngStream

__all__ = [
    "TrainConfig",
    "TrainReport",
    "PlateauSchedule",
    "TrainingDiverged",
    "estimator_io",
    "fit",
    "train",
    "train_mixed_snr",
    "MIXED_SNR_DB",
]

log = logging.getLogger(__name__)

MIXED_SNR_DB = (0.0, 5.0, 10.0, 15.0, 20.0)
SHUFFLE_COMPONENT = 800


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 500
    learning_rate: float = 1e-3
    decay_factor: float = 0.1
    decay_patience: int = 10
    stop_patience: int = 25
    max_epochs: int = 500
    split_ratio: tuple[int, int, int] = (3, 1, 1)
    snr_db: float | tuple[float, ...] = 20.0
    loss: str = "mse"
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.stop_patience <= self.decay_patience:
            raise ValueError("early-stop patience must exceed the LR-decay patience")
        if self.loss not in ("mse", "weighted-mse"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.batch_size < 2:
            raise ValueError("batch size must be >= 2 for batch norm")


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    lr_change_epochs: list[int] = field(default_factory=list)
    stop_epoch: int = -1
    best_epoch: int = -1
    best_val_loss: float = math.inf
    early_stopped: bool = False
    wall_time: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for e, (tl, vl, lr) in enumerate(zip(self.train_loss, self.val_loss, self.lr)):
            w.writerow([e, repr(tl), repr(vl), repr(lr)])
        return buf.getvalue()


class PlateauSchedule:
    """Tracks validation loss against the best value seen so far.

    ``step`` returns ``(improved, decay, stop)``. A decay fires every
    ``decay_patience`` epochs without improvement; training stops after
    ``stop_patience`` such epochs.
    """

    def __init__(self, decay_patience: int = 10, stop_patience: int = 25):
        self.decay_patience, self.stop_patience = decay_patience, stop_patience
        self.best = math.inf
        self.since_best = 0
        self.since_decay = 0

    def step(self, val_loss: float) -> tuple[bool, bool, bool]:
        if val_loss < self.best:
            self.best = val_loss
            self.since_best = self.since_decay = 0
            return True, False, False
        self.since_best += 1
        self.since_decay += 1
        decay = self.since_decay >= self.decay_patience
        if decay:
            self.since_decay = 0
        return False, decay, self.since_best >= self.stop_patience


def _loss(pred, target, weights):
    return mse_loss(pred, target) if weights is None else weighted_mse_loss(pred, target, weights)


def evaluate_loss(model: Model, x: np.ndarray, y: np.ndarray, weights=None, batch_size: int = 2000) -> float:
    """Evaluation-mode loss accumulated in fixed-size chunks."""
    total = 0.0
    n = x.shape[0]
    for lo in range(0, n, batch_size):
        hi = min(n, lo + batch_size)
        pred = model.forward(x[lo:hi]).data.astype(np.float64)
        d = (pred - y[lo:hi]).reshape(hi - lo, -1)
        per = (d * d).sum(axis=1)
        if weights is not None:
            per = per * weights[lo:hi]
        total += per.sum()
    return total / n


def fit(model: Model, x_train, y_train, x_val, y_val, tcfg: TrainConfig, w_train=None, w_val=None,
        progress=None) -> tuple[dict, TrainReport]:
    """Train ``model`` in place; returns (best-epoch state, report).

    The model is left holding the best-epoch weights.
    """
    dtype = np.dtype(tcfg.dtype)
    if model.dtype != dtype:
        model.astype(dtype)
    x_train = np.asarray(x_train, dtype=dtype)
    y_train = np.asarray(y_train, dtype=dtype)
    x_val = np.asarray(x_val, dtype=dtype)
    y_val = np.asarray(y_val, dtype=np.float64)
    n = x_train.shape[0]
    if tcfg.batch_size > n:
        raise ValueError(f"batch size {tcfg.batch_size} exceeds the {n} training samples")
    if (w_train is None) != (tcfg.loss == "mse"):
        raise ValueError("weighted-mse needs per-sample weights; mse takes none")

    opt = Adam([p for _, p in model.parameters()], lr=tcfg.learning_rate)
    sched = PlateauSchedule(tcfg.decay_patience, tcfg.stop_patience)
    report = TrainReport()
    best_state = model.state()
    t0 = time.perf_counter()
    for epoch in range(tcfg.max_epochs):
        perm = RngStream(tcfg.seed, epoch, SHUFFLE_COMPONENT).permutation(n)
        running, seen = 0.0, 0
        for lo in range(0, n, tcfg.batch_size):
            idx = perm[lo:lo + tcfg.batch_size]
            if idx.size < 2:
                continue
            opt.zero_grad()
            pred = model.forward(x_train[idx], train=True)
            loss = _loss(pred, y_train[idx], None if w_train is None else w_train[idx])
            if not np.isfinite(loss.data):
                raise TrainingDiverged(f"loss became {float(loss.data)} at epoch {epoch}")
            loss.backward()
            try:
                model.check_gradients()
            except NonFiniteError as exc:
                raise TrainingDiverged(f"epoch {epoch}: {exc}") from exc
            opt.step()
            running += float(loss.data) * idx.size
            seen += idx.size
        train_loss = running / max(seen, 1)
        val_loss = float(evaluate_loss(model, x_val, y_val, w_val))
        if not math.isfinite(val_loss):
            raise TrainingDiverged(f"validation loss became {val_loss} at epoch {epoch}")
        report.train_loss.append(train_loss)
        report.val_loss.append(val_loss)
        report.lr.append(opt.lr)
        improved, decay, stop = sched.step(val_loss)
        if improved:
            best_state = model.state()
            report.best_epoch, report.best_val_loss = epoch, val_loss
        if progress is not None:
            progress(epoch, train_loss, val_loss, opt.lr)
        if stop:
            report.early_stopped = True
            break
        if decay:
            opt.lr *= tcfg.decay_factor
            report.lr_change_epochs.append(epoch)
    report.stop_epoch = len(report.val_loss) - 1
    report.wall_time = time.perf_counter() - t0
    model.load_state(best_state)
    return best_state, report


def estimator_io(tag: str) -> tuple[str, str, str]:
    """(observation mode, input layout, output layout) for a network tag."""
    if tag in ("cnn", "cnn-att"):
        return "full", "pairs", "pairs"
    if tag in ("fnn", "fnn-att"):
        return "had", "flat", "flat"
    if tag in ("had-cnn", "had-cnn-att"):
        return "had", "pairs", "flat"
    if tag == "fnn-full":
        return "full", "flat", "flat"
    raise ValueError(f"no I/O convention for {tag!r}")


def _arrays(split, snr_indices, mode, in_layout, out_layout):
    xs, ys, snrs = [], [], []
    for j in snr_indices:
        xs.append(raw_features(split.observation(j, mode), in_layout))
        ys.append(angular_targets(split.channels.x, out_layout))
        snrs.append(np.full(len(split), split.snr_db[j]))
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(snrs)


def train(model: Model, dataset, tcfg: TrainConfig, io_tag: str | None = None,
          progress=None) -> tuple[NeuralEstimator, TrainReport]:
    """Train on a single SNR point (``tcfg.snr_db``) with plain or weighted MSE."""
    snr = tcfg.snr_db if np.ndim(tcfg.snr_db) == 0 else None
    if snr is None:
        raise ValueError("train() takes a single SNR point; use train_mixed_snr for a schedule")
    return _train(model, dataset, tcfg, [float(snr)], io_tag, progress)


def train_mixed_snr(model: Model, dataset, tcfg: TrainConfig, io_tag: str | None = None,
                    progress=None) -> tuple[NeuralEstimator, TrainReport]:
    """Train on every SNR point of ``tcfg.snr_db`` at once, one copy of each training channel per point.

    With ``loss="weighted-mse"`` each sample's squared error is scaled by its
    linear SNR.
    """
    points = [float(s) for s in np.atleast_1d(tcfg.snr_db)]
    return _train(model, dataset, tcfg, points, io_tag, progress)


def _train(model, dataset, tcfg, points, io_tag, progress):
    mode, in_layout, out_layout = estimator_io(io_tag or model.name)
    tr, va = dataset.train, dataset.val
    try:
        jt = [tr.snr_index(s) for s in points]
        jv = [va.snr_index(s) for s in points]
    except KeyError as exc:
        raise ValueError(f"dataset lacks SNR tags for {points}: {exc}") from None
    x_tr, y_tr, s_tr = _arrays(tr, jt, mode, in_layout, out_layout)
    x_va, y_va, s_va = _arrays(va, jv, mode, in_layout, out_layout)
    norm = Normalizer.fit(x_tr, pool_positions=in_layout == "pairs")
    x_tr, x_va = norm.transform(x_tr), norm.transform(x_va)
    w_tr = w_va = None
    if tcfg.loss == "weighted-mse":
        w_tr, w_va = 10.0 ** (s_tr / 10.0), 10.0 ** (s_va / 10.0)
    _, report = fit(model, x_tr, y_tr, x_va, y_va, tcfg, w_tr, w_va, progress)
    est = NeuralEstimator(model, norm, mode, in_layout, out_layout, model.name)
    return est, report
