"""Geometric uplink channel model and pilot-based observations.

A channel is a sum of ``N_p`` plane waves whose angles of arrival are spread
uniformly around a mean AoA. ``x = F h`` is the angular-domain view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import RngStream, dft_shift_matrix, steering_vector

__all__ = [
    "SystemConfig",
    "ChannelSample",
    "ChannelBatch",
    "Observation",
    "noise_variance",
    "sample_channel",
    "sample_channels",
    "generate_pilots",
    "observe_full",
    "observe_had",
    "COMPONENT_CHANNEL",
]

# stream components: 0 for channel draws, 1 + j for noise at the j-th SNR point
COMPONENT_CHANNEL = 0


def noise_variance(snr_db):
    """Noise variance for unit pilot power."""
    if np.ndim(snr_db):
        return 10.0 ** (-np.asarray(snr_db, dtype=np.float64) / 10.0)
    return 10.0 ** (-float(snr_db) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    n_antennas: int = 128
    n_rf: int = 32
    n_users: int = 10
    pilot_length: int = 10
    n_paths: int = 20
    angular_spread: float = math.radians(5.0)
    snr_db: float | tuple[float, ...] = 20.0
    master_seed: int = 0

    def __post_init__(self):
        if isinstance(self.snr_db, list):
            object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if not 1 <= self.n_rf <= self.n_antennas:
            raise ValueError(f"need 1 <= M <= N, got M={self.n_rf}, N={self.n_antennas}")
        if self.n_users < 1 or self.pilot_length < self.n_users:
            raise ValueError(f"need L_p >= K >= 1, got L_p={self.pilot_length}, K={self.n_users}")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0.0 <= self.angular_spread < math.pi / 2:
            raise ValueError("angular_spread must lie in [0, pi/2)")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")

    @property
    def snr_points(self) -> tuple[float, ...]:
        if isinstance(self.snr_db, tuple):
            return self.snr_db
        return (float(self.snr_db),)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["snr_db"] = list(self.snr_points) if isinstance(self.snr_db, tuple) else self.snr_db
        return d


def _channel_from_paths(gains: np.ndarray, aoas: np.ndarray, n_antennas: int) -> np.ndarray:
    # gains, aoas: (..., N_p) -> h: (..., N)
    a = steering_vector(aoas, n_antennas)
    return np.einsum("...p,...pn->...n", gains, a) / math.sqrt(gains.shape[-1])


@dataclass
class ChannelSample:
    """Ground truth for one user: path parameters plus both channel views."""

    gains: np.ndarray
    aoas: np.ndarray
    mean_aoa: float
    h: np.ndarray
    x: np.ndarray
    angular_spread: float | None = None

    def __post_init__(self):
        n = self.h.shape[-1]
        expected = _channel_from_paths(self.gains, self.aoas, n)
        if np.max(np.abs(expected - self.h), initial=0.0) > 1e-10:
            raise ValueError("h is inconsistent with the path parameters")
        if np.max(np.abs(dft_shift_matrix(n) @ self.h - self.x), initial=0.0) > 1e-10:
            raise ValueError("x is not the angular transform of h")
        if self.angular_spread is not None:
            if np.max(np.abs(self.aoas - self.mean_aoa)) > self.angular_spread + 1e-12:
                raise ValueError("AoA outside the angular spread")

    @classmethod
    def from_paths(cls, gains, aoas, mean_aoa: float, n_antennas: int, angular_spread=None) -> "ChannelSample":
        gains = np.atleast_1d(np.asarray(gains, dtype=np.complex128))
        aoas = np.atleast_1d(np.asarray(aoas, dtype=np.float64))
        h = _channel_from_paths(gains, aoas, n_antennas)
        return cls(gains, aoas, float(mean_aoa), h, dft_shift_matrix(n_antennas) @ h, angular_spread)


@dataclass
class ChannelBatch:
    """Structure-of-arrays collection of channel samples (leading sample axis)."""

    gains: np.ndarray      # (B, N_p) complex
    aoas: np.ndarray       # (B, N_p)
    mean_aoa: np.ndarray   # (B,)
    h: np.ndarray          # (B, N) complex
    x: np.ndarray          # (B, N) complex

    def __len__(self):
        return self.h.shape[0]

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return ChannelSample(self.gains[i], self.aoas[i], float(self.mean_aoa[i]), self.h[i], self.x[i])
        return ChannelBatch(self.gains[i], self.aoas[i], self.mean_aoa[i], self.h[i], self.x[i])

    @property
    def n_antennas(self) -> int:
        return self.h.shape[1]

    @classmethod
    def concatenate(cls, batches) -> "ChannelBatch":
        batches = list(batches)
        return cls(*(np.concatenate([getattr(b, f) for b in batches]) for f in ("gains", "aoas", "mean_aoa", "h", "x")))


def _draw_paths(cfg: SystemConfig, stream: RngStream):
    mean_aoa = stream.uniform(0.0, 2.0 * math.pi)
    aoas = stream.uniform(mean_aoa - cfg.angular_spread, mean_aoa + cfg.angular_spread, cfg.n_paths)
    gains = stream.complex_normal(cfg.n_paths)
    return mean_aoa, aoas, gains


def sample_channel(cfg: SystemConfig, stream: RngStream) -> ChannelSample:
    """Draw one channel: mean AoA ~ U[0, 2pi), AoAs uniform within the spread, CN(0,1) gains."""
    mean_aoa, aoas, gains = _draw_paths(cfg, stream)
    return ChannelSample.from_paths(gains, aoas, mean_aoa, cfg.n_antennas, cfg.angular_spread)


def sample_channels(cfg: SystemConfig, count: int, start: int = 0) -> ChannelBatch:
    """Draw samples ``start .. start+count-1``; sample ``i`` uses stream ``(seed, i)``.

    The result for any ordinal does not depend on ``start`` or ``count``.
    """
    mean = np.empty(count)
    aoas = np.empty((count, cfg.n_paths))
    gains = np.empty((count, cfg.n_paths), dtype=np.complex128)
    for k in range(count):
        stream = RngStream(cfg.master_seed, start + k, COMPONENT_CHANNEL)
        mean[k], aoas[k], gains[k] = _draw_paths(cfg, stream)
    h = np.empty((count, cfg.n_antennas), dtype=np.complex128)
    # chunked to bound the (chunk, N_p, N) steering tensor
    for lo in range(0, count, 2048):
        hi = min(count, lo + 2048)
        h[lo:hi] = _channel_from_paths(gains[lo:hi], aoas[lo:hi], cfg.n_antennas)
    x = h @ dft_shift_matrix(cfg.n_antennas).T
    return ChannelBatch(gains, aoas, mean, h, x)


def generate_pilots(n_users: int, pilot_length: int) -> np.ndarray:
    """Orthonormal pilot rows taken from the unitary DFT of size ``pilot_length``."""
    if n_users < 1 or pilot_length < n_users:
        raise ValueError(f"need L_p >= K >= 1, got L_p={pilot_length}, K={n_users}")
    k = np.arange(n_users)[:, None]
    l = np.arange(pilot_length)[None, :]
    return np.exp(-2j * np.pi * k * l / pilot_length) / math.sqrt(pilot_length)


@dataclass
class Observation:
    """What the receiver sees for a set of users (leading axis = user/sample).

    ``mode == "full"``: ``data`` holds LS estimates of shape (..., N).
    ``mode == "had"``: ``data`` holds compressed vectors of shape (..., M).
    """

    mode: str
    data: np.ndarray
    noise_var: float | np.ndarray
    snr_db: float | np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mode not in ("full", "had"):
            raise ValueError(f"unknown observation mode {self.mode!r}")
        if self.snr_db is None:
            with np.errstate(divide="ignore"):
                self.snr_db = -10.0 * np.log10(self.noise_var)

    @property
    def h_ls(self) -> np.ndarray:
        if self.mode != "full":
            raise AttributeError("HAD observations carry no LS estimate")
        return self.data

    @property
    def y(self) -> np.ndarray:
        if self.mode != "had":
            raise AttributeError("full-array observations carry no compressed vector")
        return self.data

    def __len__(self):
        return self.data.shape[0]

    def __getitem__(self, i):
        nv = self.noise_var[i] if np.ndim(self.noise_var) else self.noise_var
        snr = self.snr_db[i] if np.ndim(self.snr_db) else self.snr_db
        return Observation(self.mode, self.data[i], nv, snr)


def _channel_matrix(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return np.atleast_2d(samples)
    if isinstance(samples, ChannelBatch):
        return samples.h
    return np.stack([s.h for s in samples])


def _received_block(hs, pilots, noise_var, stream):
    if hs.shape[0] != pilots.shape[0]:
        raise ValueError(f"{hs.shape[0]} channels but {pilots.shape[0]} pilot rows")
    y = hs.T @ pilots
    if noise_var > 0:
        y = y + stream.complex_normal(y.shape, noise_var)
    return y


def observe_full(samples, pilots: np.ndarray, noise_var: float, stream: RngStream | None) -> Observation:
    """Superimposed pilot reception and per-user LS de-spreading.

    Forms ``Y = sum_k h_k p_k + noise`` and returns ``Y p_k^H`` for every user
    (row ``k`` of the observation data).
    """
    hs = _channel_matrix(samples)
    y = _received_block(hs, pilots, noise_var, stream)
    return Observation("full", (y @ pilots.conj().T).T, noise_var)


def observe_had(samples, pilots: np.ndarray, combiner: np.ndarray, noise_var: float, stream: RngStream | None) -> Observation:
    """Same reception through the analog combiner: ``y_k = W Y p_k^H``."""
    hs = _channel_matrix(samples)
    if combiner.shape[1] != hs.shape[1]:
        raise ValueError(f"combiner is {combiner.shape} but channels have N={hs.shape[1]}")
    y = _received_block(hs, pilots, noise_var, stream)
    return Observation("had", (combiner @ y @ pilots.conj().T).T, noise_var)
