"""Classical estimators: LS, CCM-based MMSE (single and per-region) and separate LS."""

from __future__ import annotations

import json
import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..channel import ChannelBatch, ChannelSample, Observation
from ..numerics import RngStream, hermitian_solve

__all__ = [
    "CcmBank",
    "estimate_ccm",
    "fit_ccm_bank",
    "mmse_single",
    "mmse_regional",
    "separate_ls",
    "separate_ls_rounds",
    "save_ccm_bank",
    "load_ccm_bank",
]

CCM_MAGIC = b"MIMOCEC1"


def _as_channels(samples) -> np.ndarray:
    if isinstance(samples, ChannelBatch):
        return samples.h
    if isinstance(samples, np.ndarray):
        return np.atleast_2d(samples)
    return np.stack([s.h for s in samples])


def estimate_ccm(samples) -> np.ndarray:
    """Sample channel correlation ``mean(h h^H)``, Hermitian-symmetrised."""
    h = _as_channels(samples)
    if h.shape[0] == 0:
        raise ValueError("cannot estimate a CCM from zero samples")
    if h.shape[0] < h.shape[1]:
        warnings.warn(f"CCM from {h.shape[0]} samples is rank deficient for N={h.shape[1]}", stacklevel=2)
    r = h.T @ h.conj() / h.shape[0]
    return 0.5 * (r + r.conj().T)


def _check_ccm(r: np.ndarray) -> None:
    if np.max(np.abs(r - r.conj().T)) > 1e-10:
        raise ValueError("CCM is not Hermitian")
    if np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() < -1e-8:
        raise ValueError("CCM is not positive semi-definite")


@dataclass
class CcmBank:
    """CCMs keyed by mean-AoA region.

    ``width_deg`` of 360 (or more) gives a single global region. With
    ``sine_sharing`` the mean AoA is folded to ``arcsin(sin theta)`` before
    binning, so angles with the same sine share one matrix.
    """

    n_antennas: int
    width_deg: float = 360.0
    sine_sharing: bool = True
    matrices: dict[int, np.ndarray] = field(default_factory=dict)
    counts: dict[int, int] = field(default_factory=dict)

    @property
    def n_regions(self) -> int:
        span = 180.0 if self.sine_sharing else 360.0
        return max(1, math.ceil(span / self.width_deg - 1e-9))

    def region_of(self, mean_aoa) -> np.ndarray:
        theta = np.asarray(mean_aoa, dtype=np.float64)
        if self.sine_sharing:
            deg = np.degrees(np.arcsin(np.clip(np.sin(theta), -1.0, 1.0))) + 90.0
        else:
            deg = np.degrees(np.mod(theta, 2 * np.pi))
        idx = np.floor(deg / self.width_deg).astype(np.int64)
        return np.clip(idx, 0, self.n_regions - 1)

    def matrix(self, region: int) -> np.ndarray:
        try:
            return self.matrices[int(region)]
        except KeyError:
            raise KeyError(f"region {region} is not covered by the CCM bank") from None


def fit_ccm_bank(channels: ChannelBatch, width_deg: float = 360.0, sine_sharing: bool = True) -> CcmBank:
    bank = CcmBank(channels.n_antennas, float(width_deg), bool(sine_sharing))
    regions = bank.region_of(channels.mean_aoa)
    for r in range(bank.n_regions):
        mask = regions == r
        if mask.any():
            bank.matrices[r] = estimate_ccm(channels.h[mask])
            bank.counts[r] = int(mask.sum())
    return bank


def mmse_single(obs: Observation | np.ndarray, ccm: np.ndarray, snr_linear: float) -> np.ndarray:
    """LS refinement ``R (R + I/SNR)^{-1} h_LS`` applied to every row."""
    h_ls = obs.h_ls if isinstance(obs, Observation) else np.asarray(obs)
    single = h_ls.ndim == 1
    h_ls = np.atleast_2d(h_ls)
    _check_ccm(ccm)
    n = ccm.shape[0]
    a = ccm + np.eye(n) / snr_linear
    out = (ccm @ hermitian_solve(a, h_ls.T)).T
    return out[0] if single else out


def mmse_regional(obs: Observation | np.ndarray, bank: CcmBank, mean_aoa, snr_linear: float) -> np.ndarray:
    """Per-sample MMSE with the CCM of the region holding the (true) mean AoA."""
    h_ls = obs.h_ls if isinstance(obs, Observation) else np.asarray(obs)
    single = h_ls.ndim == 1
    h_ls = np.atleast_2d(h_ls)
    regions = np.atleast_1d(bank.region_of(mean_aoa))
    if regions.shape[0] != h_ls.shape[0]:
        raise ValueError("need one mean AoA per observation")
    out = np.empty_like(h_ls, dtype=np.complex128)
    for r in np.unique(regions):
        mask = regions == r
        sel = h_ls if mask.all() else h_ls[mask]
        out[mask] = mmse_single(sel, bank.matrix(r), snr_linear)
    return out[0] if single else out


def separate_ls_rounds(n_antennas: int, n_rf: int) -> list[np.ndarray]:
    """Antenna index groups switched on per round (last group may be short)."""
    return [np.arange(lo, min(lo + n_rf, n_antennas)) for lo in range(0, n_antennas, n_rf)]


def separate_ls(channel, n_rf: int, noise_var: float, stream: RngStream | None,
                pilot: np.ndarray | None = None) -> tuple[np.ndarray, int]:
    """LS over ``ceil(N/M)`` rounds, each seeing only ``M`` antennas.

    Round ``r`` switches the combiner to a selection of antennas
    ``rM .. rM+M-1``, receives ``h p + noise`` on those RF chains and
    de-spreads with the pilot. Returns the stitched estimate and the number
    of rounds.
    """
    h = channel.h if isinstance(channel, ChannelSample) else np.asarray(channel)
    n = h.shape[-1]
    if pilot is None:
        pilot = np.ones((1, 1), dtype=np.complex128)
    pilot = np.atleast_2d(pilot)
    groups = separate_ls_rounds(n, n_rf)
    est = np.empty(n, dtype=np.complex128)
    for g in groups:
        w = np.zeros((len(g), n))
        w[np.arange(len(g)), g] = 1.0
        y = w @ np.outer(h, pilot[0])
        if noise_var > 0:
            y = y + stream.complex_normal(y.shape, noise_var)
        est[g] = y @ pilot[0].conj()
    return est, len(groups)


def save_ccm_bank(bank: CcmBank, path) -> None:
    """``magic | u64 header length | JSON header | complex128 LE blob`` (row-major per region)."""
    regions = sorted(bank.matrices)
    header = {
        "format_version": 1,
        "n_antennas": bank.n_antennas,
        "width_deg": bank.width_deg,
        "sine_sharing": bank.sine_sharing,
        "regions": regions,
        "counts": {str(r): bank.counts.get(r, 0) for r in regions},
        "dtype": "<c16",
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CCM_MAGIC)
        f.write(struct.pack("<Q", len(raw)))
        f.write(raw)
        for r in regions:
            f.write(np.ascontiguousarray(bank.matrices[r], dtype="<c16").tobytes())


def load_ccm_bank(path) -> CcmBank:
    data = Path(path).read_bytes()
    if data[:8] != CCM_MAGIC:
        raise ValueError(f"{path} is not a CCM bank file")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen].decode("utf-8"))
    n = header["n_antennas"]
    blob = np.frombuffer(data[16 + hlen:], dtype="<c16").reshape(-1, n, n)
    bank = CcmBank(n, header["width_deg"], header["sine_sharing"])
    for k, r in enumerate(header["regions"]):
        bank.matrices[r] = blob[k].astype(np.complex128)
        bank.counts[r] = header["counts"][str(r)]
    return bank
