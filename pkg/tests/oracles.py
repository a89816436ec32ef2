"""Independent reference computations used to check the product code.

These deliberately avoid the library's own signal path: the DFT here is the
textbook sum evaluated directly, not an FFT call into the estimator.
"""

from __future__ import annotations

import numpy as np


def direct_dft(x: np.ndarray, bins: np.ndarray | list[int]) -> np.ndarray:
    """X[k] = sum_n x[n] * exp(-2j*pi*k*n/N) evaluated straight from the
    definition at the requested bins."""
    x = np.asarray(x, dtype=float)
    n = np.arange(len(x))
    k = np.asarray(bins)[:, None]
    return (x[None, :] * np.exp(-2j * np.pi * k * n[None, :] / len(x))).sum(axis=1)


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Biased autocorrelation for non-negative lags."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    full = np.correlate(x, x, mode="full")
    return full[len(x) - 1 :]
