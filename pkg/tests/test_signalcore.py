"""Waveform synthesis unit tests."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spoofsim.signalcore import (
    BasebandSignal,
    ChirpParams,
    NoiseSpec,
    apply_doppler_phase,
    make_chirp,
    make_noise,
    make_spoof_train,
    rng_stream,
)

FS = 68.266667e6  # 8x the 8.533 MSa/s beat rate, used for raw-domain tests


def default_params(**kw):
    return ChirpParams(**kw)


class TestChirpParams:
    def test_table_values(self):
        p = default_params()
        assert p.slope == pytest.approx(1e13)
        assert p.t_rep == pytest.approx(33e-6)
        assert p.frame_period == pytest.approx(128 * 33e-6)

    def test_phase_at_sweep_end_is_9000_pi(self):
        # pi * slope * t_chirp^2 for the default sweep
        p = default_params()
        assert np.pi * p.slope * p.t_chirp**2 == pytest.approx(9000 * np.pi)

    def test_rejects_bad_phi_length(self):
        with pytest.raises(ValueError):
            ChirpParams(phi_init=np.zeros(5))

    def test_rejects_phi_outside_range(self):
        phi = np.zeros(128)
        phi[3] = 7.0
        with pytest.raises(ValueError):
            ChirpParams(phi_init=phi)

    def test_rejects_short_frame_period(self):
        with pytest.raises(ValueError):
            ChirpParams(frame_period=1e-3)


class TestMakeChirp:
    def test_sample_count(self):
        sig = make_chirp(default_params(), 0, FS)
        assert sig.samples.size == round(30e-6 * FS)

    def test_unit_magnitude(self):
        sig = make_chirp(default_params(), 0, FS)
        assert np.allclose(np.abs(sig.samples), 1.0)

    def test_starts_at_phi_init(self):
        phi = np.zeros(128)
        phi[5] = 1.25
        sig = make_chirp(default_params(phi_init=phi), 5, FS)
        assert np.angle(sig.samples[0]) == pytest.approx(1.25)

    def test_last_sample_matches_formula(self):
        p = default_params()
        sig = make_chirp(p, 0, FS)
        n = sig.samples.size
        t_last = (n - 1) / FS
        expect = np.exp(1j * np.pi * p.slope * t_last**2)
        assert sig.samples[-1] == pytest.approx(expect)

    def test_rejects_bad_index(self):
        with pytest.raises(ValueError):
            make_chirp(default_params(), 128, FS)

    def test_instantaneous_frequency_follows_slope(self):
        # the raw sweep aliases above Nyquist at this rate, so check only the
        # leading unaliased stretch: f(t) = slope * t
        p = default_params()
        sig = make_chirp(p, 0, FS)
        freq = np.diff(np.unwrap(np.angle(sig.samples))) * FS / (2 * np.pi)
        t_mid = np.arange(freq.size) / FS + 0.5 / FS
        keep = t_mid < 0.4 * FS / p.slope  # stay well below fs/2
        assert np.allclose(freq[keep], p.slope * t_mid[keep], rtol=1e-6)

    @given(idx=st.integers(0, 127))
    @settings(max_examples=20, deadline=None)
    def test_deterministic(self, idx):
        a = make_chirp(default_params(), idx, FS)
        b = make_chirp(default_params(), idx, FS)
        assert np.array_equal(a.samples, b.samples)


class TestSpoofTrain:
    def test_zero_delay_identity(self):
        p = default_params()
        train = make_spoof_train(p, [0.0], FS)
        single = make_chirp(p, 0, FS)
        assert np.allclose(train.samples, single.samples)

    def test_superposition_linearity(self):
        p = default_params()
        a, b = 1.0e-6, 2.5e-6
        ab = make_spoof_train(p, [a, b], FS)
        sa = make_spoof_train(p, [a], FS)
        sb = make_spoof_train(p, [b], FS)
        n = ab.samples.size
        summed = np.zeros(n, dtype=complex)
        summed[: sa.samples.size] += sa.samples
        summed[: sb.samples.size] += sb.samples
        assert np.allclose(ab.samples, summed / np.sqrt(2), atol=1e-12)

    def test_carrier_phase_term(self):
        # the delayed component must carry exp(-j*2*pi*f_start*tau)
        p = default_params()
        tau = 64 / FS  # integer-sample delay, so shapes align exactly
        train = make_spoof_train(p, [tau], FS)
        single = make_chirp(p, 0, FS)
        shifted = np.zeros(train.samples.size, dtype=complex)
        shifted[64 : 64 + single.samples.size] = single.samples
        expect = shifted * np.exp(-1j * 2 * np.pi * p.f_start * tau)
        assert np.allclose(train.samples, expect, atol=1e-9)

    def test_rejects_delay_past_sweep(self):
        with pytest.raises(ValueError):
            make_spoof_train(default_params(), [40e-6], FS)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            make_spoof_train(default_params(), [], FS)

    @given(
        taus=st.lists(st.floats(0, 20e-6, allow_nan=False), min_size=1, max_size=4),
    )
    @settings(max_examples=25, deadline=None)
    def test_power_normalization_bounded(self, taus):
        # 1/sqrt(N) scaling keeps total energy within N of a single chirp
        p = default_params()
        train = make_spoof_train(p, taus, FS)
        single = make_chirp(p, 0, FS)
        e_train = np.sum(np.abs(train.samples) ** 2)
        e_single = np.sum(np.abs(single.samples) ** 2)
        assert e_train <= len(taus) * e_single * (1 + 1e-9) + 1e-6


class TestNoise:
    def test_white_power(self):
        sig = make_noise(NoiseSpec("white", 1.0, seed=1), 0.1, 1e7)
        p = np.mean(np.abs(sig.samples) ** 2)
        assert 0.99 < p < 1.01

    def test_filtered_power_exact(self):
        sig = make_noise(NoiseSpec("filtered", 2.0, cutoff=1e6, seed=2), 0.01, 1e7)
        assert np.mean(np.abs(sig.samples) ** 2) == pytest.approx(2.0)

    def test_filtered_spectrum_confined(self):
        fs = 1e7
        sig = make_noise(NoiseSpec("filtered", 1.0, cutoff=1e6, seed=3), 0.05, fs)
        spec = np.abs(np.fft.fft(sig.samples)) ** 2
        freqs = np.abs(np.fft.fftfreq(sig.samples.size, 1 / fs))
        inband = spec[freqs < 1e6].sum()
        assert inband / spec.sum() > 0.95

    def test_same_seed_reproduces(self):
        a = make_noise(NoiseSpec("white", 1.0, seed=7), 0.01, 1e7)
        b = make_noise(NoiseSpec("white", 1.0, seed=7), 0.01, 1e7)
        assert np.array_equal(a.samples, b.samples)

    def test_different_seeds_uncorrelated(self):
        n = 100_000
        fs = 1e7
        a = make_noise(NoiseSpec("white", 1.0, seed=10), n / fs, fs)
        b = make_noise(NoiseSpec("white", 1.0, seed=11), n / fs, fs)
        xc = np.abs(np.vdot(a.samples, b.samples)) / (
            np.linalg.norm(a.samples) * np.linalg.norm(b.samples)
        )
        assert xc < 0.1

    def test_autocorrelation_peak_at_zero(self):
        sig = make_noise(NoiseSpec("white", 1.0, seed=4), 0.01, 1e7)
        x = sig.samples
        full = np.correlate(x, x, mode="full")
        assert np.argmax(np.abs(full)) == x.size - 1

    def test_rejects_bad_kind(self):
        with pytest.raises(ValueError):
            NoiseSpec("pink", 1.0)

    def test_rejects_filtered_without_cutoff(self):
        with pytest.raises(ValueError):
            NoiseSpec("filtered", 1.0)


class TestDopplerPhase:
    def test_known_increment_at_10mps(self):
        # 4*pi*f_start*v*t_rep/c with v=10: about 0.866 rad per chirp
        p = default_params()
        sig = make_chirp(p, 0, FS)
        r1 = apply_doppler_phase(sig, 1, 10.0, p)
        dphi = np.angle(r1.samples[0] / sig.samples[0])
        assert dphi == pytest.approx(0.866, abs=2e-3)

    def test_phase_linear_in_chirp_index(self):
        p = default_params()
        sig = make_chirp(p, 0, FS)
        r2 = apply_doppler_phase(sig, 2, 5.0, p)
        r4 = apply_doppler_phase(sig, 4, 5.0, p)
        d2 = np.angle(r2.samples[0] / sig.samples[0])
        d4 = np.angle(r4.samples[0] / sig.samples[0])
        assert d4 == pytest.approx(2 * d2, abs=1e-9)

    @given(v=st.floats(-35, 35, allow_nan=False), idx=st.integers(0, 127))
    @settings(max_examples=30, deadline=None)
    def test_magnitude_preserved(self, v, idx):
        p = default_params()
        sig = make_chirp(p, 0, FS)
        out = apply_doppler_phase(sig, idx, v, p)
        assert np.allclose(np.abs(out.samples), np.abs(sig.samples))

    def test_zero_velocity_identity(self):
        p = default_params()
        sig = make_chirp(p, 0, FS)
        out = apply_doppler_phase(sig, 7, 0.0, p)
        assert np.array_equal(out.samples, sig.samples)


class TestRngStream:
    def test_deterministic(self):
        assert rng_stream(1, 2, 3).integers(1 << 30) == rng_stream(1, 2, 3).integers(1 << 30)

    def test_distinct_streams(self):
        a = rng_stream(1, 2, 3).integers(1 << 30)
        b = rng_stream(1, 2, 4).integers(1 << 30)
        assert a != b


class TestBasebandSignal:
    def test_duration(self):
        sig = BasebandSignal(np.ones(100, dtype=complex), 1e6)
        assert sig.duration == pytest.approx(1e-4)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            BasebandSignal(np.array([]), 1e6)
