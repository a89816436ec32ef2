"""Streaming heart-rate estimation from BVP.

Mirrors the device pipeline: max-normalize a 30 s window (3000 samples at
100 Hz), FFT, keep only bins between 40 and 300 bpm, pick the dominant bin,
and emit a value every 7.5 s of signal (75% window overlap). Two selection
modes exist: "real-part" picks the bin with the largest |Re(X[k])| exactly as
the original device script did; "magnitude" picks the largest |X[k]| and is
the robust default. A peak-interval estimator is kept alongside purely as an
independent cross-check of the spectral path.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import find_peaks

BAND_BPM = (40.0, 300.0)
MODES = ("magnitude", "real-part")

# Peak magnitude below this * N means the band held nothing but numerical
# residue (e.g. a constant input); the estimate is still returned, flagged.
LOW_CONFIDENCE_FRACTION = 1e-9


class StreamError(RuntimeError):
    """Sample arrived out of order or after a gap (lost data)."""


class WindowSizeError(ValueError):
    """estimate_window got a window of the wrong length."""


class NoDominantFrequencyError(RuntimeError):
    """Window carries no signal at all (all zeros)."""


class InsufficientPeaksError(RuntimeError):
    """Fewer than two detectable beats in the window."""


@dataclass(frozen=True)
class HrEstimate:
    bpm: float
    bin_index: int | None  # None for peak-interval estimates
    bin_width_bpm: float | None
    window_end_t: int | None  # ms timestamp of the window's last sample
    mode: str
    low_confidence: bool = False


def bin_width_bpm(sample_rate_hz: float, n_samples: int) -> float:
    """Frequency resolution in bpm: (rate / N) * 60. 2.0 for the defaults."""
    return sample_rate_hz / n_samples * 60.0


def estimate_window(
    values: Sequence[float] | np.ndarray,
    sample_rate_hz: float = 100.0,
    mode: str = "magnitude",
    window_end_t: int | None = None,
    expected_samples: int = 3000,
) -> HrEstimate:
    """Estimate heart rate from one full window.

    Steps: divide by the maximum absolute sample, DFT, restrict to bins whose
    frequency lies within 40-300 bpm, take the arg-max of the mode's score
    (ties break toward the lower bin), convert the bin to bpm.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or len(x) != expected_samples:
        raise WindowSizeError(f"expected {expected_samples} samples, got {x.shape}")
    n = len(x)
    peak_abs = np.max(np.abs(x))
    if peak_abs == 0.0:
        raise NoDominantFrequencyError("window is all zeros")
    spectrum = np.fft.rfft(x / peak_abs)

    df = sample_rate_hz / n
    k_lo = int(math.ceil(BAND_BPM[0] / 60.0 / df - 1e-9))
    k_hi = min(int(math.floor(BAND_BPM[1] / 60.0 / df + 1e-9)), len(spectrum) - 1)
    if k_lo > k_hi:
        raise NoDominantFrequencyError("band holds no DFT bins at this rate")

    if mode == "real-part":
        score = np.abs(spectrum.real[k_lo : k_hi + 1])
    else:
        score = np.abs(spectrum[k_lo : k_hi + 1])
    k = k_lo + int(np.argmax(score))  # first max wins = lower bin on ties

    return HrEstimate(
        bpm=k * df * 60.0,
        bin_index=k,
        bin_width_bpm=df * 60.0,
        window_end_t=window_end_t,
        mode=mode,
        low_confidence=bool(abs(spectrum[k]) < LOW_CONFIDENCE_FRACTION * n),
    )


class SlidingWindow:
    """Ring of the most recent samples; fires an estimate once full and then
    every hop thereafter. Single-writer.

    Defaults follow the device pipeline: 30 s window, 75% overlap, so
    capacity 3000 and hop 750 at 100 Hz.
    """

    def __init__(
        self,
        sample_rate_hz: float = 100.0,
        window_seconds: float = 30.0,
        overlap: float = 0.75,
        mode: str = "magnitude",
    ):
        if sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be > 0")
        if not 0 <= overlap < 1:
            raise ValueError("overlap must be in [0, 1)")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.sample_rate_hz = sample_rate_hz
        self.capacity = round(window_seconds * sample_rate_hz)
        self.hop = round(self.capacity * (1.0 - overlap))
        if self.capacity <= 0 or self.hop <= 0:
            raise ValueError("window/overlap give an empty window or hop")
        self.mode = mode
        self.total_pushed = 0
        self._buffer: deque[float] = deque(maxlen=self.capacity)
        self._last_t: int | None = None
        self._period_ms = 1000.0 / sample_rate_hz

    def reset(self) -> None:
        """Drop buffered samples and restart the warm-up (after a stream error)."""
        self._buffer.clear()
        self.total_pushed = 0
        self._last_t = None

    def push(self, sample: tuple[int, float]) -> HrEstimate | None:
        """Feed one sample; returns an estimate exactly on hop boundaries.

        Raises StreamError for a non-increasing timestamp or a spacing of more
        than one sample period (data was lost upstream).
        """
        t, value = sample
        if self._last_t is not None:
            delta = t - self._last_t
            if delta <= 0:
                raise StreamError(f"out-of-order timestamp {t} after {self._last_t}")
            if delta > self._period_ms + 1.0:
                raise StreamError(
                    f"gap of {delta} ms between samples (period {self._period_ms:g} ms)"
                )
        self._last_t = t
        self._buffer.append(float(value))
        self.total_pushed += 1
        if (
            self.total_pushed >= self.capacity
            and (self.total_pushed - self.capacity) % self.hop == 0
        ):
            return estimate_window(
                np.asarray(self._buffer),
                self.sample_rate_hz,
                self.mode,
                window_end_t=t,
                expected_samples=self.capacity,
            )
        return None


def estimate_stream(
    samples: Iterable[tuple[int, float]],
    sample_rate_hz: float = 100.0,
    mode: str = "magnitude",
    window_seconds: float = 30.0,
    overlap: float = 0.75,
) -> list[HrEstimate]:
    """Batch helper: run a whole stream through a SlidingWindow."""
    window = SlidingWindow(sample_rate_hz, window_seconds, overlap, mode)
    out = []
    for sample in samples:
        estimate = window.push(sample)
        if estimate is not None:
            out.append(estimate)
    return out


def _refine_peak(x: np.ndarray, i: int) -> float:
    """Sub-sample peak position by parabolic fit through the three points
    around i; keeps interval estimates honest at high heart rates."""
    if i <= 0 or i >= len(x) - 1:
        return float(i)
    y0, y1, y2 = x[i - 1], x[i], x[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0:
        return float(i)
    offset = 0.5 * (y0 - y2) / denom
    return float(i) + float(np.clip(offset, -0.5, 0.5))


def oracle_peak_interval(
    values: Sequence[float] | np.ndarray,
    sample_rate_hz: float = 100.0,
    window_end_t: int | None = None,
) -> HrEstimate:
    """Heart rate from inter-peak timing: the abandoned device approach, kept
    as an independent oracle for the spectral estimator.

    Peaks are local maxima above 60% of the window max after max-normalization,
    at least 0.2 s apart (the 300 bpm bound); bpm = 60 / median interval.
    """
    x = np.asarray(values, dtype=float)
    peak_abs = np.max(np.abs(x)) if len(x) else 0.0
    if peak_abs == 0.0:
        raise InsufficientPeaksError("window is flat")
    xn = x / peak_abs
    height = 0.6 * float(np.max(xn))
    distance = max(1, round(0.2 * sample_rate_hz))
    peaks, _ = find_peaks(xn, height=height, distance=distance)
    if len(peaks) < 2:
        raise InsufficientPeaksError(f"found {len(peaks)} peaks, need at least 2")
    positions = np.array([_refine_peak(xn, int(i)) for i in peaks])
    median_interval_s = float(np.median(np.diff(positions))) / sample_rate_hz
    return HrEstimate(
        bpm=60.0 / median_interval_s,
        bin_index=None,
        bin_width_bpm=None,
        window_end_t=window_end_t,
        mode="peak-interval",
    )
