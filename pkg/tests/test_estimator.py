import numpy as np
import pytest

from piheart.estimator import (
    InsufficientPeaksError,
    NoDominantFrequencyError,
    SlidingWindow,
    StreamError,
    WindowSizeError,
    bin_width_bpm,
    estimate_stream,
    estimate_window,
    oracle_peak_interval,
)
from piheart.synth import BvpConfig, HrProfile, signal_rms, synthesize

from oracles import direct_dft

FS = 100.0
N = 3000


def cosine(freq_hz: float, n: int = N, fs: float = FS, phase: float = 0.0) -> np.ndarray:
    return np.cos(2 * np.pi * freq_hz * np.arange(n) / fs + phase)


def bvp_values(bpm: float, duration_s: float, noise_sigma: float = 0.0, seed: int = 0):
    config = BvpConfig(hr_profile=HrProfile.constant(bpm), noise_sigma=noise_sigma, seed=seed)
    return synthesize(config, duration_s)


class TestEstimateWindow:
    def test_pure_1hz_cosine_hits_bin_30_in_both_modes(self):
        x = cosine(1.0)
        # independent check: the direct DFT over the band peaks at bin 30
        band = np.arange(20, 151)
        assert band[np.argmax(np.abs(direct_dft(x, band)))] == 30
        for mode in ("magnitude", "real-part"):
            est = estimate_window(x, FS, mode)
            assert est.bin_index == 30
            assert est.bpm == pytest.approx(60.0)

    def test_1p2hz_cosine_hits_bin_36(self):
        x = cosine(1.2)
        band = np.arange(20, 151)
        assert band[np.argmax(np.abs(direct_dft(x, band)))] == 36
        for mode in ("magnitude", "real-part"):
            est = estimate_window(x, FS, mode)
            assert est.bin_index == 36
            assert est.bpm == pytest.approx(72.0)

    def test_bin_width_is_2bpm(self):
        assert bin_width_bpm(FS, N) == pytest.approx(2.0)
        assert estimate_window(cosine(1.0), FS).bin_width_bpm == pytest.approx(2.0)

    def test_bin_exactness_across_band(self):
        # every exact bin center in [40, 300] bpm, zero phase, both modes
        for k in range(20, 151, 5):
            x = cosine(k * FS / N)
            for mode in ("magnitude", "real-part"):
                assert estimate_window(x, FS, mode).bin_index == k, (k, mode)

    def test_scale_invariance(self):
        x = cosine(1.4) + 0.2 * cosine(2.9)
        base = estimate_window(x, FS).bin_index
        for c in (1e-6, 0.5, 3.0, 1e6):
            assert estimate_window(c * x, FS).bin_index == base

    def test_band_restriction(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            x = rng.normal(size=N)
            est = estimate_window(x, FS)
            assert 40.0 <= est.bpm <= 300.0
        # strong out-of-band tones never win
        x = 10.0 * cosine(0.3) + 10.0 * cosine(8.0) + 0.5 * cosine(1.5)
        assert estimate_window(x, FS).bpm == pytest.approx(90.0)

    def test_constant_signal_flagged_low_confidence(self):
        est = estimate_window(np.full(N, 2.5), FS)
        assert est.low_confidence
        assert 40.0 <= est.bpm <= 300.0

    def test_all_zero_window_raises(self):
        with pytest.raises(NoDominantFrequencyError):
            estimate_window(np.zeros(N), FS)

    def test_wrong_length_raises(self):
        with pytest.raises(WindowSizeError):
            estimate_window(np.ones(2999), FS)

    def test_tie_breaks_to_lower_bin(self):
        # a unit impulse has |X[k]| = Re X[k] = 1 at every bin: full tie
        x = np.zeros(N)
        x[0] = 1.0
        for mode in ("magnitude", "real-part"):
            assert estimate_window(x, FS, mode).bin_index == 20

    def test_mode_agreement_under_noise(self):
        rng = np.random.default_rng(7)
        agree = 0
        trials = 300
        for _ in range(trials):
            freq = rng.uniform(40.0, 300.0) / 60.0
            x = cosine(freq)
            x = x + rng.normal(0.0, np.sqrt(0.5) / 10.0, N)  # 20 dB SNR
            same = (
                estimate_window(x, FS, "magnitude").bin_index
                == estimate_window(x, FS, "real-part").bin_index
            )
            agree += same
        assert agree / trials >= 0.99


class TestSlidingWindow:
    def feed(self, window, samples):
        return [est for est in (window.push((s.t, s.value)) for s in samples) if est]

    def test_warmup_and_cadence(self):
        window = SlidingWindow()
        assert window.capacity == 3000
        assert window.hop == 750
        samples = bvp_values(72.0, 60.0)
        emitted_at = []
        for i, s in enumerate(samples):
            if window.push((s.t, s.value)) is not None:
                emitted_at.append(i + 1)
        assert emitted_at == [3000, 3750, 4500, 5250, 6000]

    def test_no_estimate_before_3000(self):
        window = SlidingWindow()
        samples = bvp_values(60.0, 30.0)
        assert self.feed(window, samples[:2999]) == []
        est = window.push((samples[2999].t, samples[2999].value))
        assert est is not None
        assert est.window_end_t == samples[2999].t

    def test_streaming_equals_batch_slices(self):
        samples = bvp_values(88.0, 75.0)
        streamed = estimate_stream((s.t, s.value) for s in samples)
        v = np.array([s.value for s in samples])
        for j, est in enumerate(streamed):
            end = 3000 + j * 750
            ref = estimate_window(v[end - 3000 : end], FS, window_end_t=samples[end - 1].t)
            assert est == ref

    def test_out_of_order_rejected(self):
        window = SlidingWindow()
        window.push((0, 0.1))
        window.push((10, 0.1))
        with pytest.raises(StreamError, match="out-of-order"):
            window.push((10, 0.2))

    def test_gap_rejected_then_reset_recovers(self):
        window = SlidingWindow()
        window.push((0, 0.1))
        with pytest.raises(StreamError, match="gap"):
            window.push((30, 0.2))
        window.reset()
        assert window.total_pushed == 0
        window.push((30, 0.2))
        assert window.total_pushed == 1


class TestPeakIntervalOracle:
    def test_60bpm_clean(self):
        samples = bvp_values(60.0, 30.0)
        est = oracle_peak_interval([s.value for s in samples], FS)
        assert est.mode == "peak-interval"
        assert est.bpm == pytest.approx(60.0, abs=0.5)

    def test_150bpm_clean(self):
        samples = bvp_values(150.0, 30.0)
        est = oracle_peak_interval([s.value for s in samples], FS)
        assert est.bpm == pytest.approx(150.0, abs=1.0)

    def test_flat_zero_raises(self):
        with pytest.raises(InsufficientPeaksError):
            oracle_peak_interval(np.zeros(N), FS)

    def test_single_beat_raises(self):
        samples = bvp_values(60.0, 30.0)
        v = np.array([s.value for s in samples])
        v[50:] = v.min()  # keep only the first systolic peak
        with pytest.raises(InsufficientPeaksError):
            oracle_peak_interval(v, FS)


class TestEstimatorAgainstOracle:
    def test_agreement_on_clean_bvp_across_band(self):
        # constant HR over [45, 295], staying half a bin off the band edges
        for bpm in (45.0, 61.0, 90.0, 123.0, 177.0, 240.0, 295.0):
            samples = bvp_values(bpm, 30.0)
            v = [s.value for s in samples]
            stft = estimate_window(v, FS, "magnitude")
            peaks = oracle_peak_interval(v, FS)
            assert abs(stft.bpm - peaks.bpm) <= 3.0, bpm

    def test_agreement_under_20db_noise(self):
        hits = 0
        total = 0
        for bpm in (60.0, 90.0, 150.0):
            sigma = signal_rms(BvpConfig(hr_profile=HrProfile.constant(bpm))) / 10.0
            samples = bvp_values(bpm, 120.0, noise_sigma=sigma, seed=3)
            v = np.array([s.value for s in samples])
            for end in range(3000, len(v) + 1, 750):
                window = v[end - 3000 : end]
                stft = estimate_window(window, FS, "magnitude")
                peaks = oracle_peak_interval(window, FS)
                total += 1
                hits += abs(stft.bpm - peaks.bpm) <= 4.0
        assert hits / total >= 0.90
