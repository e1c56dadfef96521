"""Tests for the EQ / pitch / formant perturbation chain.

Frequency-domain claims are checked against signal-measurement oracles
written from scratch here: FFT peak location with parabolic refinement,
a cepstral envelope extractor at a different transform size than the
implementation uses, and an autocorrelation pitch tracker.
"""

import numpy as np
import pytest
from scipy.signal import lfilter

from srave.audio import AudioBuffer, Prng, gen_noise, gen_sine
from srave.errors import InputError
from srave.perturb import (
    BiquadSection,
    apply_formant_shift,
    apply_peq,
    apply_pitch_shift,
    identity_params,
    perturb,
    sample_params,
)

SR = 48000


def rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x.astype(np.float64)))))


def spectral_peak_hz(buf: AudioBuffer) -> float:
    """Dominant frequency via windowed FFT argmax plus parabolic refinement."""
    x = buf.samples.astype(np.float64)
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    k = int(np.argmax(spec))
    if 0 < k < len(spec) - 1:
        a, b, c = np.log(spec[k - 1 : k + 2] + 1e-300)
        k = k + 0.5 * (a - c) / (a - 2 * b + c)
    return k * buf.sample_rate / len(x)


def formant_peak_hz(buf: AudioBuffer, f0: float, lo: float, hi: float) -> float:
    """Spectral-envelope maximum inside [lo, hi] Hz, read from the harmonic
    amplitudes of an f0-periodic signal (log-parabolic refinement)."""
    x = buf.samples.astype(np.float64)
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    harmonics = np.arange(1, int(buf.sample_rate / 2 / f0))
    # 1 s at integer f0 puts every harmonic exactly on a bin
    bin_idx = np.rint(harmonics * f0 * len(x) / buf.sample_rate).astype(int)
    amps = np.log(spec[bin_idx] + 1e-12)
    freqs = harmonics * f0
    sel = np.flatnonzero((freqs >= lo) & (freqs <= hi))
    i = sel[int(np.argmax(amps[sel]))]
    a, b, c = amps[i - 1 : i + 2]
    denom = a - 2 * b + c
    off = float(np.clip(0.5 * (a - c) / denom, -1.0, 1.0)) if denom < 0 else 0.0
    return (harmonics[i] + off) * f0


def autocorr_lag(x: np.ndarray, lo: int = 160, hi: int = 640) -> int:
    """Fundamental period in samples from the autocorrelation peak."""
    x = x.astype(np.float64) - x.mean()
    f = np.fft.rfft(x, 2 * len(x))
    ac = np.fft.irfft(f * np.conj(f))[: len(x)]
    return lo + int(np.argmax(ac[lo:hi]))


def make_vowel(f0: float = 100.0, formants=((700.0, 120.0), (1200.0, 150.0)),
               duration: float = 1.0, sample_rate: int = SR) -> AudioBuffer:
    """Pulse train through cascaded two-pole resonators."""
    x = np.zeros(int(duration * sample_rate))
    x[:: int(round(sample_rate / f0))] = 1.0
    for fc, bw in formants:
        r = np.exp(-np.pi * bw / sample_rate)
        x = lfilter([1.0 - r], [1.0, -2.0 * r * np.cos(2.0 * np.pi * fc / sample_rate), r * r], x)
    return AudioBuffer(sample_rate, (x / np.abs(x).max()).astype(np.float32))


def make_pulse_train(f0: float = 150.0, duration: float = 1.0, sample_rate: int = SR) -> AudioBuffer:
    x = np.zeros(int(duration * sample_rate), dtype=np.float32)
    x[:: int(round(sample_rate / f0))] = 1.0
    return AudioBuffer(sample_rate, x)


def speechy_noise(seed: int, duration: float = 1.0) -> AudioBuffer:
    flat = gen_noise(seed, duration, SR, amplitude=0.25)
    shaped = lfilter([1.0], [1.0, -0.9], flat.samples.astype(np.float64))
    return AudioBuffer(SR, (0.25 * shaped / rms(shaped)).astype(np.float32))


class TestSampleParams:
    def test_same_seed_same_params(self):
        p1, _ = sample_params(Prng(11))
        p2, _ = sample_params(Prng(11))
        assert p1 == p2

    def test_state_advances(self):
        prng = Prng(11)
        p1, prng = sample_params(prng)
        p2, _ = sample_params(prng)
        assert p1 != p2

    def test_layout(self):
        params, _ = sample_params(Prng(0))
        kinds = [s.kind for s in params.peq]
        assert kinds == ["low_shelf"] + ["peaking"] * 8 + ["high_shelf"]
        assert params.peq[0].freq_hz == 60.0
        assert params.peq[-1].freq_hz == 10000.0

    def test_ranges_over_many_draws(self):
        prng = Prng(123)
        pitches, formants = [], []
        for _ in range(10_000):
            params, prng = sample_params(prng)
            pitches.append(params.pitch_ratio)
            formants.append(params.formant_ratio)
            for s in params.peq:
                assert -12.0 <= s.gain_db <= 12.0
                assert 2.0 <= s.q <= 5.0
                assert 60.0 <= s.freq_hz <= 10000.0
        pitches = np.array(pitches)
        formants = np.array(formants)
        assert np.all((pitches >= 0.5) & (pitches <= 2.0))
        assert np.all((formants >= 1.0 / 1.4) & (formants <= 1.4))
        # both signs of each shift must occur
        assert np.any(pitches > 1.0) and np.any(pitches < 1.0)
        assert np.any(formants > 1.0) and np.any(formants < 1.0)

    def test_median_absolute_log2_pitch(self):
        prng = Prng(42)
        vals = []
        for _ in range(10_000):
            params, prng = sample_params(prng)
            vals.append(abs(np.log2(params.pitch_ratio)))
        assert abs(np.median(vals) - 0.54) < 0.05

    def test_center_frequencies_log_uniform(self):
        prng = Prng(9)
        fcs = []
        for _ in range(2_000):
            params, prng = sample_params(prng)
            fcs.extend(s.freq_hz for s in params.peq if s.kind == "peaking")
        # log-uniform on [60, 10000] has its median at the geometric mean
        geo = np.sqrt(60.0 * 10000.0)
        assert geo * 0.9 < np.median(fcs) < geo * 1.1


class TestPeq:
    def test_zero_gains_unity(self):
        x = gen_noise(3, 0.5, SR)
        out = apply_peq(x, identity_params().peq)
        assert out.sample_rate == SR
        assert len(out) == len(x)
        assert np.max(np.abs(out.samples - x.samples)) < 1e-6

    def test_peaking_gain_at_center(self):
        # at the center frequency the peaking section's gain is exactly
        # 10^(gain_db/20), independent of Q
        x = gen_sine(1000.0, 1.0, SR, amplitude=0.1)
        out = apply_peq(x, [BiquadSection("peaking", 1000.0, 2.0, 12.0)])
        gain_db = 20.0 * np.log10(rms(out.samples) / rms(x.samples))
        assert abs(gain_db - 12.0) < 0.5

    def test_peaking_cut_at_center(self):
        x = gen_sine(2500.0, 1.0, SR, amplitude=0.1)
        out = apply_peq(x, [BiquadSection("peaking", 2500.0, 3.0, -9.0)])
        gain_db = 20.0 * np.log10(rms(out.samples) / rms(x.samples))
        assert abs(gain_db + 9.0) < 0.5

    def test_far_from_center_unchanged(self):
        # a Q=5 peaking boost at 4 kHz leaves a 100 Hz tone essentially alone
        x = gen_sine(100.0, 1.0, SR, amplitude=0.1)
        out = apply_peq(x, [BiquadSection("peaking", 4000.0, 5.0, 12.0)])
        gain_db = 20.0 * np.log10(rms(out.samples) / rms(x.samples))
        assert abs(gain_db) < 0.1

    def test_length_preserved(self):
        x = gen_noise(4, 0.123, SR)
        params, _ = sample_params(Prng(5))
        assert len(apply_peq(x, params.peq)) == len(x)

    def test_unstable_section_rejected(self):
        with pytest.raises(InputError, match="unstable"):
            apply_peq(gen_noise(0, 0.01, SR), [BiquadSection("peaking", 1000.0, -2.0, 6.0)])

    def test_unknown_kind_rejected(self):
        with pytest.raises(InputError, match="unknown"):
            apply_peq(gen_noise(0, 0.01, SR), [BiquadSection("bandpass", 1000.0, 2.0, 0.0)])


class TestPitchShift:
    def test_identity_ratio(self):
        x = gen_sine(440.0, 1.0, SR)
        out = apply_pitch_shift(x, 1.0)
        assert len(out) == len(x)
        assert rms(out.samples - x.samples) < 1e-3

    def test_spec_example_220_to_440(self):
        out = apply_pitch_shift(gen_sine(220.0, 1.0, SR), 2.0)
        assert abs(spectral_peak_hz(out) - 440.0) < 0.01 * 440.0

    @pytest.mark.parametrize("ratio", [0.5, 0.8, 1.25, 2.0])
    def test_frequency_law(self, ratio):
        out = apply_pitch_shift(gen_sine(330.0, 1.0, SR), ratio)
        expected = 330.0 * ratio
        assert abs(spectral_peak_hz(out) - expected) < 0.01 * expected

    @pytest.mark.parametrize("length", [4800, 12345, 48000])
    @pytest.mark.parametrize("ratio", [0.5, 1.0, 1.37, 2.0])
    def test_length_exact(self, length, ratio):
        x = AudioBuffer(SR, gen_noise(1, 1.1, SR).samples[:length])
        assert len(apply_pitch_shift(x, ratio)) == length

    @pytest.mark.parametrize("ratio", [0.49, 2.01, 0.0, -1.0])
    def test_ratio_out_of_range(self, ratio):
        with pytest.raises(InputError, match="pitch ratio"):
            apply_pitch_shift(gen_sine(440.0, 0.1, SR), ratio)


class TestFormantShift:
    def test_identity_ratio(self):
        x = make_vowel()
        out = apply_formant_shift(x, 1.0)
        assert len(out) == len(x)
        assert rms(out.samples - x.samples) < 1e-3

    def test_oracle_reads_unshifted_vowel(self):
        x = make_vowel()
        assert abs(formant_peak_hz(x, 100.0, 450.0, 950.0) - 700.0) < 0.05 * 700.0
        assert abs(formant_peak_hz(x, 100.0, 950.0, 1500.0) - 1200.0) < 0.05 * 1200.0

    def test_vowel_formants_shift_up(self):
        out = apply_formant_shift(make_vowel(), 1.2)
        assert abs(formant_peak_hz(out, 100.0, 600.0, 1100.0) - 840.0) < 0.05 * 840.0
        assert abs(formant_peak_hz(out, 100.0, 1150.0, 1800.0) - 1440.0) < 0.05 * 1440.0

    def test_vowel_formants_shift_down(self):
        ratio = 1.0 / 1.2
        out = apply_formant_shift(make_vowel(), ratio)
        assert abs(formant_peak_hz(out, 100.0, 420.0, 720.0) - 700.0 * ratio) < 0.05 * 700.0 * ratio
        assert abs(formant_peak_hz(out, 100.0, 750.0, 1250.0) - 1200.0 * ratio) < 0.05 * 1200.0 * ratio

    @pytest.mark.parametrize("ratio", [1.0 / 1.4, 1.3, 1.4])
    def test_fundamental_preserved(self, ratio):
        out = apply_formant_shift(make_pulse_train(150.0), ratio)
        lag = autocorr_lag(out.samples)
        assert abs(lag - 320) <= 0.02 * 320

    @pytest.mark.parametrize("ratio", [0.5, 0.7, 1.5, 2.0])
    def test_ratio_out_of_range(self, ratio):
        with pytest.raises(InputError, match="formant ratio"):
            apply_formant_shift(make_vowel(duration=0.1), ratio)

    def test_length_preserved(self):
        x = AudioBuffer(SR, gen_noise(2, 0.5, SR).samples[:20011])
        assert len(apply_formant_shift(x, 1.25)) == 20011


class TestPerturb:
    def test_identity_params(self):
        x = speechy_noise(6)
        out = perturb(x, identity_params())
        assert len(out) == len(x)
        assert rms(out.samples - x.samples) < 1e-2

    def test_composition_is_exact_staging(self):
        x = speechy_noise(7, duration=0.5)
        params, _ = sample_params(Prng(7))
        staged = apply_formant_shift(
            apply_pitch_shift(apply_peq(x, params.peq), params.pitch_ratio),
            params.formant_ratio,
        )
        # guard must not fire here, else the comparison is against clipped output
        assert np.abs(staged.samples).max() <= 4.0 * np.abs(x.samples).max()
        assert np.array_equal(perturb(x, params).samples, staged.samples)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_length_for_random_params(self, seed):
        x = speechy_noise(seed, duration=0.37)
        params, _ = sample_params(Prng(seed))
        assert len(perturb(x, params)) == len(x)

    def test_peak_guard(self):
        # all-boost EQ on a resonant signal; output must respect 4x input peak
        x = make_vowel(duration=0.5)
        params, _ = sample_params(Prng(3))
        for s in params.peq:
            s.gain_db = 12.0
        out = perturb(x, params)
        assert np.abs(out.samples).max() <= 4.0 * np.abs(x.samples).max()

    def test_empty_input(self):
        x = AudioBuffer(SR, np.zeros(0, dtype=np.float32))
        params, _ = sample_params(Prng(1))
        assert len(perturb(x, params)) == 0
