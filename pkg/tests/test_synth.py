import numpy as np
import pytest

from piheart.synth import (
    BvpConfig,
    BvpSample,
    ConfigError,
    HrProfile,
    PulseShape,
    ReplayError,
    inject_artifacts,
    plan_artifact_bursts,
    replay,
    sample_times_ms,
    signal_rms,
    synthesize,
    write_csv,
)

from oracles import autocorrelation, direct_dft


def clean_config(bpm: float, seed: int = 0) -> BvpConfig:
    return BvpConfig(hr_profile=HrProfile.constant(bpm), seed=seed)


def values(samples) -> np.ndarray:
    return np.array([s.value for s in samples])


class TestSynthesize:
    def test_sample_count_and_exact_1hz_fundamental_at_60bpm(self):
        samples = synthesize(clean_config(60.0), 30.0)
        assert len(samples) == 3000
        # 60 bpm = 1 Hz: bin 30 of a 3000-sample window at 100 Hz
        spectrum = np.abs(direct_dft(values(samples), np.arange(1, 1501)))
        assert 1 + np.argmax(spectrum) == 30

    def test_72bpm_autocorrelation_period(self):
        samples = synthesize(clean_config(72.0), 30.0)
        acf = autocorrelation(values(samples))
        # period 60/72 s = 83.33 samples at 100 Hz
        lag = 40 + np.argmax(acf[40:130])
        assert lag in (83, 84)

    def test_same_seed_same_stream(self):
        config = BvpConfig(
            hr_profile=HrProfile.constant(70.0), noise_sigma=0.05, artifact_rate_per_min=3.0, seed=42
        )
        assert synthesize(config, 20.0) == synthesize(config, 20.0)

    def test_different_seed_differs(self):
        base = dict(hr_profile=HrProfile.constant(70.0), noise_sigma=0.05)
        a = synthesize(BvpConfig(seed=1, **base), 10.0)
        b = synthesize(BvpConfig(seed=2, **base), 10.0)
        assert a != b

    def test_timestamps_follow_rate(self):
        samples = synthesize(clean_config(60.0), 2.0)
        assert [s.t for s in samples] == [round(k * 1000 / 100.0) for k in range(200)]
        odd_rate = BvpConfig(sample_rate_hz=80.0, hr_profile=HrProfile.constant(60.0))
        samples = synthesize(odd_rate, 1.0)
        assert [s.t for s in samples] == list(sample_times_ms(80, 80.0))

    def test_waveform_has_dominant_systolic_peak_and_smaller_notch(self):
        samples = synthesize(clean_config(60.0), 1.0)
        v = values(samples)
        # one beat: global max at the systolic peak (15% of period), second
        # bump at the dicrotic delay (40%), clearly smaller
        assert np.argmax(v) == 15
        notch_height = v[40] - v.min()
        systolic_height = v[15] - v.min()
        assert 0.3 < notch_height / systolic_height < 0.7

    def test_spectral_purity_across_window_offsets(self):
        # noise-free constant HR: over any 3000-sample window, the DFT peak
        # sits within one bin of hr/60 Hz
        for bpm in (43.0, 55.0, 72.0, 101.0, 144.0, 201.0, 270.0, 295.0):
            samples = synthesize(clean_config(bpm), 40.0)
            v = values(samples)
            for offset in (0, 333, 617, 1000):
                window = v[offset : offset + 3000]
                spectrum = np.abs(direct_dft(window, np.arange(1, 1501)))
                peak_hz = (1 + np.argmax(spectrum)) * (100.0 / 3000.0)
                assert abs(peak_hz - bpm / 60.0) <= 100.0 / 3000.0 + 1e-12, bpm

    def test_hr_profile_ramp_and_hold(self):
        hold = HrProfile(points=((0.0, 60.0), (10.0, 90.0)))
        assert hold.bpm_at(5.0) == 60.0
        assert hold.bpm_at(10.0) == 90.0
        ramp = HrProfile(points=((0.0, 60.0), (10.0, 90.0)), ramp=True)
        assert ramp.bpm_at(5.0) == pytest.approx(75.0)
        assert ramp.bpm_at(20.0) == 90.0

    def test_rate_change_applies_at_beat_boundary(self):
        profile = HrProfile(points=((0.0, 60.0), (2.5, 120.0)))
        samples = synthesize(BvpConfig(hr_profile=profile), 6.0)
        v = values(samples)
        # beats start at 0,1,2 s under 60 bpm; the 2.5 s change waits for the
        # boundary at 3 s; beats then start every 0.5 s with the systolic
        # peak 15% into each beat
        for expected in (15, 115, 215, 307.5, 357.5, 407.5):
            lo = int(expected) - 8
            pos = lo + np.argmax(v[lo : int(expected) + 9])
            assert abs(pos - expected) <= 1.0, expected

    def test_invalid_configs_rejected(self):
        with pytest.raises(ConfigError):
            BvpConfig(sample_rate_hz=0.0)
        with pytest.raises(ConfigError):
            BvpConfig(noise_sigma=-0.1)
        with pytest.raises(ConfigError):
            HrProfile.constant(0.0)
        with pytest.raises(ConfigError):
            HrProfile.constant(301.0)
        with pytest.raises(ConfigError):
            PulseShape(notch_delay=0.95, notch_width=0.2).validate()
        with pytest.raises(ConfigError):
            synthesize(clean_config(60.0), 0.0)

    def test_signal_rms_positive_and_stable(self):
        rms = signal_rms(clean_config(60.0))
        assert 0.1 < rms < 1.0


class TestArtifacts:
    def test_zero_rate_is_identity(self):
        samples = synthesize(clean_config(60.0), 10.0)
        assert inject_artifacts(samples, 0.0, 4.0, seed=7) == samples

    def test_zero_amplitude_is_identity(self):
        samples = synthesize(clean_config(60.0), 10.0)
        assert inject_artifacts(samples, 6.0, 0.0, seed=7) == samples

    def test_seeded_burst_count_matches_plan(self):
        # rate 6/min on 60 s: expected count 6; the plan is the oracle for
        # what a given seed actually drew
        plan = plan_artifact_bursts(60.0, 6.0, seed=123)
        samples = synthesize(clean_config(60.0), 60.0)
        touched = inject_artifacts(samples, 6.0, 4.0, seed=123)
        assert touched == inject_artifacts(samples, 6.0, 4.0, seed=123)
        assert len(plan) > 0
        counts = [len(plan_artifact_bursts(60.0, 6.0, seed=s)) for s in range(200)]
        assert 5.0 < np.mean(counts) < 7.0

    def test_modification_confined_to_planned_bursts(self):
        samples = synthesize(clean_config(60.0), 60.0)
        seed = 9
        plan = plan_artifact_bursts(60.0, 6.0, seed=seed)
        touched = inject_artifacts(samples, 6.0, 4.0, seed=seed)
        changed = [i for i, (a, b) in enumerate(zip(samples, touched)) if a.value != b.value]
        assert changed
        for i in changed:
            t_s = samples[i].t / 1000.0
            assert any(
                b.start_s - 0.02 <= t_s <= b.start_s + b.duration_s + 0.02 for b in plan
            ), f"sample {i} changed outside any planned burst"

    def test_burst_sway_stays_below_band(self):
        for burst in plan_artifact_bursts(300.0, 6.0, seed=5):
            assert burst.freq_hz < 40.0 / 60.0

    def test_negative_amplitude_rejected(self):
        with pytest.raises(ConfigError):
            inject_artifacts([BvpSample(0, 0.0)], 1.0, -1.0, seed=0)


class TestReplay:
    def test_roundtrip(self, tmp_path):
        samples = synthesize(clean_config(64.0), 5.0)
        path = tmp_path / "bvp.csv"
        write_csv(samples, path)
        back = replay(path)
        assert [s.t for s in back] == [s.t for s in samples]
        assert values(back) == pytest.approx(values(samples), abs=1e-6)

    def test_plain_rows_without_header(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("0,0.10\n10,0.30\n")
        assert replay(path) == [BvpSample(0, 0.10), BvpSample(10, 0.30)]

    def test_empty_file_is_empty_stream(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        assert replay(path) == []

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("10,abc\n")
        with pytest.raises(ReplayError, match="line 1"):
            replay(path)
        path.write_text("t_ms,value\n0,0.5\n10\n")
        with pytest.raises(ReplayError, match="line 3"):
            replay(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ReplayError, match="no such file"):
            replay(tmp_path / "nope.csv")
