"""Test-set MSE tables."""

from __future__ import annotations

import math

import numpy as np

from ..numerics import dft_shift_matrix

__all__ = ["evaluate_mse", "mse_row", "DomainMismatch"]


class DomainMismatch(AssertionError):
    """Angular- and antenna-domain MSE disagree beyond round-off."""


def mse_row(h_hat: np.ndarray, h: np.ndarray, x: np.ndarray | None = None, tol: float = 1e-10) -> dict:
    """MSE statistics of one estimate batch, cross-checked across domains."""
    n = h.shape[0]
    if n == 0:
        raise ValueError("empty test set")
    f = dft_shift_matrix(h.shape[1])
    x = h @ f.T if x is None else x
    x_hat = h_hat @ f.T
    err_ang = np.sum(np.abs(x_hat - x) ** 2, axis=1)
    err_ant = np.sum(np.abs(h_hat - h) ** 2, axis=1)
    mse = float(err_ang.mean())
    mse_ant = float(err_ant.mean())
    if abs(mse - mse_ant) > tol * max(mse, mse_ant, 1e-300):
        raise DomainMismatch(f"angular MSE {mse!r} vs antenna MSE {mse_ant!r}")
    stderr = float(err_ang.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return {
        "mse_linear": mse,
        "mse_db": 10.0 * math.log10(mse) if mse > 0 else float("-inf"),
        "mse_antenna": mse_ant,
        "nmse": mse / float(np.mean(np.sum(np.abs(h) ** 2, axis=1))),
        "stderr": stderr,
        "n": n,
    }


def evaluate_mse(estimator, split, snr_points=None) -> list[dict]:
    """One row per SNR point: mean ``||x_hat - x||^2`` with standard error."""
    points = split.snr_db if snr_points is None else [float(s) for s in np.atleast_1d(snr_points)]
    rows = []
    for s in points:
        j = split.snr_index(s)
        h_hat = estimator.estimate(split, j)
        row = {"estimator": estimator.name, "snr_db": float(s)}
        row.update(mse_row(h_hat, split.channels.h, split.channels.x))
        rows.append(row)
    return rows
