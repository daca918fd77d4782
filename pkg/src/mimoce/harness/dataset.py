"""Dataset generation, 3:1:1 splitting and the manifest + record file pair.

Record layout (little-endian float64, one record per sample)::

    mean_aoa, aoa[N_p], Re gain[N_p], Im gain[N_p],
    Re h[N], Im h[N], Re x[N], Im x[N],
    then for every SNR point in the manifest order:
        Re h_LS[N], Im h_LS[N]        (if "full" in modes)
        Re y[M],    Im y[M]           (if "had" in modes)
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..channel import ChannelBatch, Observation, SystemConfig, generate_pilots, noise_variance, sample_channels
from ..numerics import RngStream, zadoff_chu_combiner

__all__ = ["DatasetSplit", "Dataset", "build_dataset", "load_split", "split_counts", "FORMAT_VERSION"]

FORMAT_VERSION = 1
SPLIT_NAMES = ("train", "val", "test")
# stream components beyond the channel draw (component 0)
NOISE_COMPONENT_BASE = 1
SPLIT_COMPONENT = 900


def split_counts(count: int, ratio=(3, 1, 1)) -> tuple[int, ...]:
    total = sum(ratio)
    if any(r < 0 for r in ratio) or total <= 0:
        raise ValueError(f"invalid split ratio {ratio}")
    if count % total:
        raise ValueError(f"count {count} is not divisible by {total} for ratio {ratio}")
    unit = count // total
    return tuple(r * unit for r in ratio)


def ls_observations(cfg: SystemConfig, channels: ChannelBatch, ordinals: np.ndarray, snr_db: float,
                    snr_index: int) -> np.ndarray:
    """Single-user LS estimates ``(h p + N) p^H``; sample ``i`` draws noise from ``(seed, i, 1 + j)``."""
    pilot = generate_pilots(1, cfg.pilot_length)[0]
    nv = noise_variance(snr_db)
    n, lp = cfg.n_antennas, cfg.pilot_length
    noise = np.empty((len(ordinals), n, lp), dtype=np.complex128)
    for k, i in enumerate(ordinals):
        noise[k] = RngStream(cfg.master_seed, int(i), NOISE_COMPONENT_BASE + snr_index).complex_normal((n, lp), nv)
    y = channels.h[:, :, None] * pilot[None, None, :] + noise
    return y @ pilot.conj()


@dataclass
class DatasetSplit:
    """One split: ground truth plus LS estimates at each SNR point.

    HAD vectors are ``W h_LS`` (the combiner is applied to the same received
    block), so they are derived rather than stored separately in memory.
    """

    name: str
    cfg: SystemConfig
    indices: np.ndarray
    channels: ChannelBatch
    snr_db: tuple[float, ...]
    h_ls: np.ndarray                     # (S, B, N)
    combiner: np.ndarray | None = None   # (M, N)
    modes: tuple[str, ...] = ("full", "had")
    _y: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.indices)

    def snr_index(self, snr_db: float) -> int:
        for j, s in enumerate(self.snr_db):
            if abs(s - snr_db) < 1e-9:
                return j
        raise KeyError(f"SNR {snr_db} dB not in dataset ({self.snr_db})")

    def noise_var(self, j: int) -> float:
        return noise_variance(self.snr_db[j])

    def y(self, j: int) -> np.ndarray:
        if self.combiner is None:
            raise ValueError("dataset has no HAD combiner")
        if j not in self._y:
            self._y[j] = self.h_ls[j] @ self.combiner.T
        return self._y[j]

    def observation(self, j: int, mode: str = "full") -> Observation:
        data = self.h_ls[j] if mode == "full" else self.y(j)
        return Observation(mode, data, self.noise_var(j), self.snr_db[j])

    def subset(self, sel) -> "DatasetSplit":
        return DatasetSplit(self.name, self.cfg, self.indices[sel], self.channels[sel], self.snr_db,
                            self.h_ls[:, sel], self.combiner, self.modes)

    # -- file pair -------------------------------------------------------
    def record_layout(self) -> list[tuple[str, int]]:
        n, p, m = self.cfg.n_antennas, self.cfg.n_paths, self.cfg.n_rf
        fields = [("mean_aoa", 1), ("aoa", p), ("gain_re", p), ("gain_im", p),
                  ("h_re", n), ("h_im", n), ("x_re", n), ("x_im", n)]
        for j, s in enumerate(self.snr_db):
            if "full" in self.modes:
                fields += [(f"snr{j}.h_ls_re", n), (f"snr{j}.h_ls_im", n)]
            if "had" in self.modes:
                fields += [(f"snr{j}.y_re", m), (f"snr{j}.y_im", m)]
        return fields

    def records(self) -> np.ndarray:
        c = self.channels
        cols = [c.mean_aoa[:, None], c.aoas, c.gains.real, c.gains.imag, c.h.real, c.h.imag, c.x.real, c.x.imag]
        for j in range(len(self.snr_db)):
            if "full" in self.modes:
                cols += [self.h_ls[j].real, self.h_ls[j].imag]
            if "had" in self.modes:
                yj = self.y(j)
                cols += [yj.real, yj.imag]
        return np.concatenate(cols, axis=1).astype("<f8")

    def manifest(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "split": self.name,
            "config": self.cfg.to_dict(),
            "master_seed": self.cfg.master_seed,
            "count": len(self),
            "snr_db": list(self.snr_db),
            "modes": list(self.modes),
            "combiner": {"kind": "zadoff-chu", "root": 1, "shift_step": self.cfg.n_antennas // self.cfg.n_rf},
            "record_layout": [[name, width] for name, width in self.record_layout()],
            "record_floats": sum(w for _, w in self.record_layout()),
            "dtype": "<f8",
            "indices": [int(i) for i in self.indices],
        }

    def save(self, directory) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        bin_path = directory / f"{self.name}.bin"
        json_path = directory / f"{self.name}.json"
        raw = self.records().tobytes()
        bin_path.write_bytes(raw)
        man = self.manifest()
        man["records_file"] = bin_path.name
        man["sha256"] = hashlib.sha256(raw).hexdigest()
        json_path.write_text(json.dumps(man, indent=1, sort_keys=True), encoding="utf-8")
        return json_path, bin_path


def load_split(manifest_path) -> DatasetSplit:
    manifest_path = Path(manifest_path)
    man = json.loads(manifest_path.read_text(encoding="utf-8"))
    if man["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset format {man['format_version']}")
    cfg_d = dict(man["config"])
    cfg = SystemConfig(**cfg_d)
    raw = np.frombuffer((manifest_path.parent / man["records_file"]).read_bytes(), dtype="<f8")
    rec = raw.reshape(man["count"], man["record_floats"])
    cols, pos = {}, 0
    for name, width in man["record_layout"]:
        cols[name] = rec[:, pos:pos + width]
        pos += width
    channels = ChannelBatch(
        cols["gain_re"] + 1j * cols["gain_im"], cols["aoa"].copy(), cols["mean_aoa"][:, 0].copy(),
        cols["h_re"] + 1j * cols["h_im"], cols["x_re"] + 1j * cols["x_im"])
    snr = tuple(man["snr_db"])
    modes = tuple(man["modes"])
    combiner = zadoff_chu_combiner(cfg.n_rf, cfg.n_antennas)
    if "full" in modes:
        h_ls = np.stack([cols[f"snr{j}.h_ls_re"] + 1j * cols[f"snr{j}.h_ls_im"] for j in range(len(snr))])
    else:
        h_ls = np.full((len(snr), man["count"], cfg.n_antennas), np.nan + 0j)
    split = DatasetSplit(man["split"], cfg, np.asarray(man["indices"], dtype=np.int64), channels, snr, h_ls,
                         combiner, modes)
    if "had" in modes:
        for j in range(len(snr)):
            split._y[j] = cols[f"snr{j}.y_re"] + 1j * cols[f"snr{j}.y_im"]
    return split


@dataclass
class Dataset:
    cfg: SystemConfig
    train: DatasetSplit
    val: DatasetSplit
    test: DatasetSplit

    @property
    def splits(self) -> dict[str, DatasetSplit]:
        return {"train": self.train, "val": self.val, "test": self.test}

    def save(self, directory) -> list[Path]:
        paths = []
        for split in self.splits.values():
            paths += list(split.save(directory))
        return paths

    @classmethod
    def load(cls, directory) -> "Dataset":
        directory = Path(directory)
        parts = {name: load_split(directory / f"{name}.json") for name in SPLIT_NAMES}
        return cls(parts["train"].cfg, parts["train"], parts["val"], parts["test"])


def build_dataset(cfg: SystemConfig, count: int, snr_schedule=None, ratio=(3, 1, 1),
                  modes=("full", "had"), out_dir=None) -> Dataset:
    """Generate ``count`` samples with observations at every scheduled SNR and split them.

    Sample ``i`` (global ordinal) is fully determined by ``(master_seed, i)``;
    the split assignment comes from a seeded permutation.
    """
    snr = tuple(float(s) for s in (cfg.snr_points if snr_schedule is None else np.atleast_1d(snr_schedule)))
    sizes = split_counts(count, ratio)
    channels = sample_channels(cfg, count)
    ordinals = np.arange(count)
    h_ls = np.stack([ls_observations(cfg, channels, ordinals, s, j) for j, s in enumerate(snr)])
    combiner = zadoff_chu_combiner(cfg.n_rf, cfg.n_antennas)
    perm = RngStream(cfg.master_seed, 0, SPLIT_COMPONENT).permutation(count)
    parts, lo = [], 0
    for name, size in zip(SPLIT_NAMES, sizes):
        idx = np.sort(perm[lo:lo + size])
        lo += size
        parts.append(DatasetSplit(name, cfg, idx, channels[idx], snr, h_ls[:, idx], combiner, tuple(modes)))
    ds = Dataset(cfg, *parts)
    if out_dir is not None:
        ds.save(out_dir)
    return ds
