"""Complex linear-algebra primitives, special matrices and random streams.

Everything here works in complex128 / float64.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

__all__ = [
    "NotPositiveDefiniteError",
    "RngStream",
    "rng_stream",
    "steering_vector",
    "dft_shift_matrix",
    "angular_grid",
    "zadoff_chu_sequence",
    "zadoff_chu_combiner",
    "hermitian_solve",
]

PIVOT_FLOOR = 1e-14


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot falls below the floor."""


class RngStream:
    """Counter-based random stream keyed by ``(seed, index, component)``.

    Backed by the Philox counter generator, so any stream can be built
    independently of every other one; the draw order inside one stream is the
    only state. A stream is meant for a single consumer.
    """

    def __init__(self, seed: int, index: int = 0, component: int = 0):
        if seed < 0 or index < 0 or component < 0:
            raise ValueError("seed, index and component must be non-negative")
        self.seed = int(seed)
        self.index = int(index)
        self.component = int(component)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.index, self.component))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, index={self.index}, component={self.component})"

    def standard_normal(self, size=None) -> np.ndarray:
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self.generator.uniform(low, high, size)

    def complex_normal(self, size=None, variance: float = 1.0) -> np.ndarray:
        """Circularly-symmetric CN(0, variance) draws."""
        re = self.generator.standard_normal(size)
        im = self.generator.standard_normal(size)
        return (re + 1j * im) * math.sqrt(variance / 2.0)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)


def rng_stream(seed: int, index: int = 0, component: int = 0) -> RngStream:
    return RngStream(seed, index, component)


def steering_vector(theta, n_antennas: int) -> np.ndarray:
    """ULA response with half-wavelength spacing.

    ``theta`` may be a scalar or an array of angles; the antenna axis is
    always last, so an array of shape ``S`` yields ``S + (n_antennas,)``.
    """
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    theta = np.asarray(theta, dtype=np.float64)
    n = np.arange(n_antennas)
    return np.exp(1j * np.pi * np.sin(theta)[..., None] * n)


def angular_grid(n_antennas: int) -> np.ndarray:
    """Sine-grid ``(-N+1)/N, (-N+3)/N, ..., (N-1)/N`` of the shifted DFT."""
    n = n_antennas
    return (2.0 * np.arange(n) - n + 1) / n


def dft_shift_matrix(n_antennas: int) -> np.ndarray:
    """Unitary shifted DFT mapping antenna-domain channels to the angular domain."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    eta = angular_grid(n_antennas)
    n = np.arange(n_antennas)
    return np.exp(-1j * np.pi * np.outer(eta, n)) / math.sqrt(n_antennas)


def zadoff_chu_sequence(length: int, root: int = 1) -> np.ndarray:
    """Unit-modulus Zadoff-Chu base sequence of the given length."""
    if math.gcd(root, length) != 1:
        raise ValueError(f"root {root} is not coprime with length {length}")
    n = np.arange(length, dtype=np.float64)
    if length % 2 == 0:
        phase = root * n * n
    else:
        phase = root * n * (n + 1)
    return np.exp(-1j * np.pi * phase / length)


def zadoff_chu_combiner(n_rf: int, n_antennas: int, root: int = 1, shift_step: int | None = None) -> np.ndarray:
    """Analog combining matrix whose rows are cyclic shifts of one ZC sequence.

    Row ``m`` is the base sequence cyclically shifted by ``m * shift_step``
    (default ``N // M``) and scaled by ``1/sqrt(N)`` so every entry has the
    same modulus, as phase shifters require.
    """
    if not 1 <= n_rf <= n_antennas:
        raise ValueError(f"need 1 <= M <= N, got M={n_rf}, N={n_antennas}")
    if shift_step is None:
        shift_step = n_antennas // n_rf
    z = zadoff_chu_sequence(n_antennas, root)
    rows = [np.roll(z, m * shift_step) for m in range(n_rf)]
    return np.stack(rows) / math.sqrt(n_antennas)


def hermitian_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A X = B`` for Hermitian positive-definite ``A`` via Cholesky.

    Raises
    ------
    NotPositiveDefiniteError
        If the factorisation fails or a pivot (squared diagonal of the
        factor) drops below 1e-14.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"A must be square, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"row mismatch: A is {a.shape}, B is {b.shape}")
    try:
        c, lower = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    pivots = np.abs(np.diag(c)) ** 2
    if pivots.min() < PIVOT_FLOOR:
        raise NotPositiveDefiniteError(f"pivot {pivots.min():.3e} below {PIVOT_FLOOR}")
    return scipy.linalg.cho_solve((c, lower), b)
