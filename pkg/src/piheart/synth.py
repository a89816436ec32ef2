"""Synthetic blood-volume-pulse signals.

Stands in for the optical pulse sensor: produces a 100 Hz BVP stream whose
beats have one dominant raised-cosine systolic peak and a smaller dicrotic
bump, plus optional Gaussian noise and movement-artifact bursts. All
randomness comes from a seeded numpy PCG64 generator, so the same config and
seed always give a bit-identical stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

CSV_HEADER = "t_ms,value"


class ConfigError(ValueError):
    """Invalid synthesis configuration."""


class ReplayError(ValueError):
    """BVP CSV file missing or malformed; message carries the line number."""


class BvpSample(NamedTuple):
    t: int  # ms since stream start
    value: float


@dataclass(frozen=True)
class PulseShape:
    """Per-beat waveform parameters, all widths/delays as beat-period fractions."""

    systolic_amplitude: float = 1.0
    notch_amplitude: float = 0.5  # relative to the systolic peak
    notch_delay: float = 0.40  # where the dicrotic bump peaks
    systolic_width: float = 0.30
    notch_width: float = 0.20

    def validate(self) -> None:
        if self.systolic_amplitude <= 0:
            raise ConfigError("systolic_amplitude must be > 0")
        if self.notch_amplitude < 0:
            raise ConfigError("notch_amplitude must be >= 0")
        if not 0 < self.systolic_width <= 1:
            raise ConfigError("systolic_width must be in (0, 1]")
        if not 0 < self.notch_width <= 1:
            raise ConfigError("notch_width must be in (0, 1]")
        if not 0 < self.notch_delay < 1:
            raise ConfigError("notch_delay must be in (0, 1)")
        if self.notch_delay + self.notch_width / 2 > 1:
            raise ConfigError("dicrotic bump must end within the beat period")


@dataclass(frozen=True)
class HrProfile:
    """Target heart rate over time: hold (piecewise-constant) or linear ramp.

    ``points`` are (time_s, bpm) breakpoints with ascending times; the value
    before the first point and after the last is clamped.
    """

    points: tuple[tuple[float, float], ...]
    ramp: bool = False

    def __post_init__(self) -> None:
        if not self.points:
            raise ConfigError("hr_profile needs at least one (time, bpm) point")
        last_t = -math.inf
        for t_s, bpm in self.points:
            if t_s <= last_t:
                raise ConfigError("hr_profile times must be strictly increasing")
            if not 0 < bpm <= 300:
                raise ConfigError(f"hr_profile bpm {bpm} outside (0, 300]")
            last_t = t_s

    @classmethod
    def constant(cls, bpm: float) -> "HrProfile":
        return cls(points=((0.0, float(bpm)),))

    def bpm_at(self, t_s: float) -> float:
        pts = self.points
        if t_s <= pts[0][0]:
            return pts[0][1]
        for i in range(len(pts) - 1):
            t0, b0 = pts[i]
            t1, b1 = pts[i + 1]
            if t_s < t1:
                if not self.ramp:
                    return b0
                return b0 + (b1 - b0) * (t_s - t0) / (t1 - t0)
        return pts[-1][1]


@dataclass(frozen=True)
class BvpConfig:
    sample_rate_hz: float = 100.0
    hr_profile: HrProfile = field(default_factory=lambda: HrProfile.constant(60.0))
    pulse_shape: PulseShape = field(default_factory=PulseShape)
    noise_sigma: float = 0.0
    artifact_rate_per_min: float = 0.0
    artifact_burst_amplitude: float = 4.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be > 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.artifact_rate_per_min < 0:
            raise ConfigError("artifact_rate_per_min must be >= 0")
        if self.artifact_burst_amplitude < 0:
            raise ConfigError("artifact_burst_amplitude must be >= 0")
        self.pulse_shape.validate()


def _beat_schedule(profile: HrProfile, duration_s: float) -> list[tuple[float, float]]:
    """(start_s, period_s) per beat. Rate changes apply at beat boundaries only,
    so the waveform never jumps mid-beat."""
    beats = []
    t = 0.0
    while t < duration_s:
        period = 60.0 / profile.bpm_at(t)
        beats.append((t, period))
        t += period
    return beats


def _beat_values(phase: np.ndarray, shape: PulseShape) -> np.ndarray:
    """Evaluate one beat at phase in [0, 1): systolic raised cosine, then the
    dicrotic bump, shifted so a full beat integrates to zero."""
    a = shape.systolic_amplitude
    out = np.zeros_like(phase)
    in_sys = phase < shape.systolic_width
    out[in_sys] = a * 0.5 * (1.0 - np.cos(2.0 * np.pi * phase[in_sys] / shape.systolic_width))
    n0 = shape.notch_delay - shape.notch_width / 2
    in_notch = (phase >= n0) & (phase < n0 + shape.notch_width)
    out[in_notch] += (
        a
        * shape.notch_amplitude
        * 0.5
        * (1.0 - np.cos(2.0 * np.pi * (phase[in_notch] - n0) / shape.notch_width))
    )
    mean = a * (shape.systolic_width + shape.notch_amplitude * shape.notch_width) / 2.0
    return out - mean


def _render(config: BvpConfig, duration_s: float) -> np.ndarray:
    fs = config.sample_rate_hz
    n = int(math.floor(duration_s * fs))
    values = np.zeros(n)
    for start_s, period_s in _beat_schedule(config.hr_profile, duration_s):
        i0 = int(math.ceil(start_s * fs - 1e-9))
        i1 = min(n, int(math.ceil((start_s + period_s) * fs - 1e-9)))
        if i0 >= i1:
            continue
        phase = (np.arange(i0, i1) / fs - start_s) / period_s
        values[i0:i1] = _beat_values(phase, config.pulse_shape)
    return values


def sample_times_ms(n: int, sample_rate_hz: float) -> np.ndarray:
    """Timestamp of sample k is round(k * 1000 / rate) ms."""
    return np.rint(np.arange(n) * 1000.0 / sample_rate_hz).astype(np.int64)


def synthesize(config: BvpConfig, duration_s: float) -> list[BvpSample]:
    """Generate floor(duration_s * rate) samples of synthetic BVP."""
    if duration_s <= 0:
        raise ConfigError("duration_s must be > 0")
    values = _render(config, duration_s)
    if config.noise_sigma > 0:
        rng = np.random.default_rng(config.seed)
        values = values + rng.normal(0.0, config.noise_sigma, values.shape)
    if config.artifact_rate_per_min > 0 and config.artifact_burst_amplitude > 0:
        plan = plan_artifact_bursts(
            len(values) / config.sample_rate_hz, config.artifact_rate_per_min, config.seed
        )
        values = _apply_artifacts(
            values, config.sample_rate_hz, plan, config.artifact_burst_amplitude
        )
    t_ms = sample_times_ms(len(values), config.sample_rate_hz)
    return [BvpSample(int(t), float(v)) for t, v in zip(t_ms, values)]


def signal_rms(config: BvpConfig, duration_s: float = 30.0) -> float:
    """RMS of the clean waveform; handy for picking noise_sigma for a target SNR."""
    clean = _render(config, duration_s)
    return float(np.sqrt(np.mean(clean**2)))


@dataclass(frozen=True)
class ArtifactBurst:
    """One planned movement artifact: a low-frequency sway (kept below the
    40 bpm band edge) plus a few broadband spikes inside it."""

    start_s: float
    duration_s: float
    freq_hz: float
    spike_offsets_s: tuple[float, ...]
    spike_gains: tuple[float, ...]


def plan_artifact_bursts(
    duration_s: float, rate_per_min: float, seed: int
) -> list[ArtifactBurst]:
    """Draw the artifact schedule for a stream. Deterministic under seed; tests
    re-run this to know exactly where inject_artifacts touched the signal."""
    rng = np.random.default_rng(seed)
    count = int(rng.poisson(rate_per_min * duration_s / 60.0))
    bursts = []
    for _ in range(count):
        start = float(rng.uniform(0.0, duration_s))
        dur = float(rng.uniform(2.0, 4.0))
        freq = float(rng.uniform(0.2, 0.55))  # < 40/60 Hz, outside the estimator band
        n_spikes = int(rng.poisson(2.0))
        offsets = tuple(float(x) for x in np.sort(rng.uniform(0.0, dur, n_spikes)))
        gains = tuple(
            float(g) for g in rng.uniform(0.5, 1.5, n_spikes) * (rng.integers(0, 2, n_spikes) * 2 - 1)
        )
        bursts.append(ArtifactBurst(start, dur, freq, offsets, gains))
    return sorted(bursts, key=lambda b: b.start_s)


def _apply_artifacts(
    values: np.ndarray, fs: float, plan: Sequence[ArtifactBurst], amplitude: float
) -> np.ndarray:
    out = values.copy()
    n = len(out)
    for burst in plan:
        i0 = max(0, int(math.ceil(burst.start_s * fs)))
        i1 = min(n, int(math.floor((burst.start_s + burst.duration_s) * fs)))
        if i0 >= i1:
            continue
        t_rel = np.arange(i0, i1) / fs - burst.start_s
        envelope = 0.5 * (1.0 - np.cos(2.0 * np.pi * t_rel / burst.duration_s))
        out[i0:i1] += amplitude * envelope * np.sin(2.0 * np.pi * burst.freq_hz * t_rel)
        for off, gain in zip(burst.spike_offsets_s, burst.spike_gains):
            i = int(round((burst.start_s + off) * fs))
            if 0 <= i < n:
                out[i] += amplitude * gain
    return out


def inject_artifacts(
    samples: Sequence[BvpSample],
    artifact_rate_per_min: float,
    burst_amplitude: float,
    seed: int,
    sample_rate_hz: float = 100.0,
) -> list[BvpSample]:
    """Overlay movement artifacts on an existing stream. Rate or amplitude of
    zero returns the input unchanged."""
    if artifact_rate_per_min < 0:
        raise ConfigError("artifact_rate_per_min must be >= 0")
    if burst_amplitude < 0:
        raise ConfigError("burst_amplitude must be >= 0")
    samples = list(samples)
    if artifact_rate_per_min == 0 or burst_amplitude == 0 or not samples:
        return samples
    values = np.array([s.value for s in samples])
    plan = plan_artifact_bursts(len(samples) / sample_rate_hz, artifact_rate_per_min, seed)
    values = _apply_artifacts(values, sample_rate_hz, plan, burst_amplitude)
    return [BvpSample(s.t, float(v)) for s, v in zip(samples, values)]


def write_csv(samples: Iterable[BvpSample], path: str | Path) -> None:
    """Write the BVP CSV schema: `t_ms,value` header, one sample per row, LF."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(CSV_HEADER + "\n")
        for s in samples:
            f.write(f"{s.t},{s.value:.6g}\n")


def replay(path: str | Path) -> list[BvpSample]:
    """Read samples back from a BVP CSV file, in file order.

    The `t_ms,value` header row is skipped when present; an empty file is an
    empty stream. Malformed rows raise ReplayError naming the file line.
    """
    p = Path(path)
    if not p.exists():
        raise ReplayError(f"no such file: {p}")
    samples = []
    with open(p, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            row = line.strip()
            if not row:
                continue
            if lineno == 1 and row == CSV_HEADER:
                continue
            parts = row.split(",")
            if len(parts) != 2:
                raise ReplayError(f"line {lineno}: expected 't_ms,value', got {row!r}")
            try:
                samples.append(BvpSample(int(parts[0]), float(parts[1])))
            except ValueError:
                raise ReplayError(f"line {lineno}: cannot parse {row!r}") from None
    return samples
