"""Information-perturbation chain: parametric EQ, then pitch shift, then
formant shift. The chain audibly scrambles voice identity while leaving
the spoken content intact; parameters are drawn fresh per utterance.

Pitch shifting is a phase-vocoder time stretch followed by resampling.
Formant shifting warps the cepstral spectral envelope of each frame while
keeping the excitation (harmonic structure and phase) fixed. Every stage
preserves length exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import sosfilt

from .audio import AudioBuffer, Prng
from .errors import InputError

LOW_SHELF_HZ = 60.0
HIGH_SHELF_HZ = 10000.0
PEAKING_SECTIONS = 8
GAIN_RANGE_DB = 12.0
Q_RANGE = (2.0, 5.0)
N_FFT = 2048
HOP = 512
# envelope must stay below the glottal period (>= 5 ms for speech-range
# pitch) yet resolve formants a few hundred hertz apart
FORMANT_QUEFRENCY_S = 2.5e-3
ENVELOPE_FIT_STEPS = 30
PEAK_GUARD = 4.0


@dataclass
class BiquadSection:
    kind: str  # "low_shelf", "peaking", "high_shelf"
    freq_hz: float
    q: float
    gain_db: float


@dataclass
class PerturbParams:
    peq: list[BiquadSection]
    pitch_ratio: float
    formant_ratio: float


def identity_params() -> PerturbParams:
    """Parameters under which every stage is a unity system."""
    sections = [BiquadSection("low_shelf", LOW_SHELF_HZ, 3.0, 0.0)]
    sections += [BiquadSection("peaking", 1000.0, 3.0, 0.0) for _ in range(PEAKING_SECTIONS)]
    sections.append(BiquadSection("high_shelf", HIGH_SHELF_HZ, 3.0, 0.0))
    return PerturbParams(sections, 1.0, 1.0)


def sample_params(prng: Prng) -> tuple[PerturbParams, Prng]:
    """Draw a random perturbation. The draw order is fixed: pitch magnitude
    and sign, formant magnitude and sign, then per-section gain/Q (plus a
    log-uniform center frequency for the peaking sections)."""
    r = 1.0 + prng.uniform()
    pitch = r if prng.uniform() < 0.5 else 1.0 / r
    f = 1.0 + 0.4 * prng.uniform()
    formant = f if prng.uniform() < 0.5 else 1.0 / f

    def gain_q():
        gain = GAIN_RANGE_DB * (2.0 * prng.uniform() - 1.0)
        q = Q_RANGE[0] + (Q_RANGE[1] - Q_RANGE[0]) * prng.uniform()
        return gain, q

    gain, q = gain_q()
    sections = [BiquadSection("low_shelf", LOW_SHELF_HZ, q, gain)]
    ratio = HIGH_SHELF_HZ / LOW_SHELF_HZ
    for _ in range(PEAKING_SECTIONS):
        fc = LOW_SHELF_HZ * ratio**prng.uniform()
        gain, q = gain_q()
        sections.append(BiquadSection("peaking", fc, q, gain))
    gain, q = gain_q()
    sections.append(BiquadSection("high_shelf", HIGH_SHELF_HZ, q, gain))
    return PerturbParams(sections, pitch, formant), prng


def _rbj_coefficients(section: BiquadSection, sample_rate: float) -> np.ndarray:
    """Audio-EQ-cookbook biquad, returned as one normalized SOS row."""
    a_lin = 10.0 ** (section.gain_db / 40.0)
    w0 = 2.0 * np.pi * section.freq_hz / sample_rate
    cw, sw = np.cos(w0), np.sin(w0)
    alpha = sw / (2.0 * section.q)
    sq = 2.0 * np.sqrt(a_lin) * alpha
    if section.kind == "peaking":
        b = [1 + alpha * a_lin, -2 * cw, 1 - alpha * a_lin]
        a = [1 + alpha / a_lin, -2 * cw, 1 - alpha / a_lin]
    elif section.kind == "low_shelf":
        b = [
            a_lin * ((a_lin + 1) - (a_lin - 1) * cw + sq),
            2 * a_lin * ((a_lin - 1) - (a_lin + 1) * cw),
            a_lin * ((a_lin + 1) - (a_lin - 1) * cw - sq),
        ]
        a = [
            (a_lin + 1) + (a_lin - 1) * cw + sq,
            -2 * ((a_lin - 1) + (a_lin + 1) * cw),
            (a_lin + 1) + (a_lin - 1) * cw - sq,
        ]
    elif section.kind == "high_shelf":
        b = [
            a_lin * ((a_lin + 1) + (a_lin - 1) * cw + sq),
            -2 * a_lin * ((a_lin - 1) + (a_lin + 1) * cw),
            a_lin * ((a_lin + 1) + (a_lin - 1) * cw - sq),
        ]
        a = [
            (a_lin + 1) - (a_lin - 1) * cw + sq,
            2 * ((a_lin - 1) - (a_lin + 1) * cw),
            (a_lin + 1) - (a_lin - 1) * cw - sq,
        ]
    else:
        raise InputError(f"unknown EQ section kind {section.kind!r}")
    row = np.array(b + a, dtype=np.float64) / a[0]
    poles = np.roots(row[3:])
    if np.any(np.abs(poles) >= 1.0):
        raise InputError(
            f"unstable EQ section: {section.kind} at {section.freq_hz:.0f} Hz, "
            f"Q {section.q:.2f}, gain {section.gain_db:.1f} dB"
        )
    return row


def apply_peq(x: AudioBuffer, sections: list[BiquadSection]) -> AudioBuffer:
    """Run the biquad cascade; zero gains make it a unity system."""
    sos = np.stack([_rbj_coefficients(s, x.sample_rate) for s in sections])
    if len(x) == 0:
        return AudioBuffer(x.sample_rate, x.samples.copy())
    out = sosfilt(sos, x.samples.astype(np.float64))
    return AudioBuffer(x.sample_rate, out.astype(np.float32))


def _hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _stft(x: np.ndarray, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    frames = 1 + (len(x) - n_fft) // hop
    idx = hop * np.arange(frames)[:, None] + np.arange(n_fft)
    return np.fft.rfft(x[idx] * _hann(n_fft), axis=1).T


def _istft(spec: np.ndarray, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """Windowed overlap-add with exact squared-window normalization."""
    window = _hann(n_fft)
    frames = spec.shape[1]
    length = (frames - 1) * hop + n_fft
    out = np.zeros(length)
    env = np.zeros(length)
    chunks = np.fft.irfft(spec.T, n=n_fft, axis=1) * window
    wsq = window * window
    for i in range(frames):
        out[i * hop : i * hop + n_fft] += chunks[i]
        env[i * hop : i * hop + n_fft] += wsq
    return out / np.where(env > 1e-10, env, 1.0)


def _phase_vocoder(spec: np.ndarray, rate: float, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """Resample the frame axis by `rate` while advancing phase coherently."""
    n_bins, n_frames = spec.shape
    steps = np.arange(0.0, n_frames, rate)
    omega = 2.0 * np.pi * np.arange(n_bins) * hop / n_fft
    padded = np.concatenate([spec, np.zeros((n_bins, 1), dtype=spec.dtype)], axis=1)
    mags = np.abs(padded)
    phases = np.angle(padded)
    out = np.empty((n_bins, len(steps)), dtype=np.complex128)
    acc = phases[:, 0].copy()
    for i, step in enumerate(steps):
        t = int(step)
        frac = step - t
        out[:, i] = ((1.0 - frac) * mags[:, t] + frac * mags[:, t + 1]) * np.exp(1j * acc)
        dphase = phases[:, t + 1] - phases[:, t] - omega
        dphase -= 2.0 * np.pi * np.round(dphase / (2.0 * np.pi))
        acc += omega + dphase
    return out


def apply_pitch_shift(x: AudioBuffer, ratio: float) -> AudioBuffer:
    """Scale all frequencies by `ratio` at unchanged duration: phase-vocoder
    stretch by `ratio`, then resample back by the same factor."""
    if not 0.5 <= ratio <= 2.0:
        raise InputError(f"pitch ratio {ratio} outside [0.5, 2]")
    length = len(x)
    if length == 0:
        return AudioBuffer(x.sample_rate, x.samples.copy())
    padded = np.concatenate([np.zeros(N_FFT), x.samples.astype(np.float64), np.zeros(2 * N_FFT)])
    stretched_full = _istft(_phase_vocoder(_stft(padded), 1.0 / ratio))
    start = int(round(N_FFT * ratio))
    want = int(round(length * ratio))
    stretched = stretched_full[start : start + want]
    pos = np.arange(length) * ratio
    out = np.interp(pos, np.arange(len(stretched)), stretched)
    return AudioBuffer(x.sample_rate, out.astype(np.float32))


def _lifter(logmag: np.ndarray, cutoff: int) -> np.ndarray:
    """Low-quefrency projection of per-frame log spectra [bins, frames]."""
    cep = np.fft.irfft(logmag, n=N_FFT, axis=0)
    cep[cutoff + 1 : N_FFT - cutoff] = 0.0
    return np.fft.rfft(cep, n=N_FFT, axis=0).real


def _spectral_envelope(logmag: np.ndarray, cutoff: int) -> np.ndarray:
    """Quefrency-limited envelope fitted to ride the spectral peaks.

    A single liftering pass averages harmonic peaks with the leakage
    valleys between them and lands well under the formants; iterating
    lifter(max(logmag, env)) converges onto the peaks instead.
    """
    env = _lifter(logmag, cutoff)
    for _ in range(ENVELOPE_FIT_STEPS):
        env = _lifter(np.maximum(logmag, env), cutoff)
    return env


def apply_formant_shift(x: AudioBuffer, ratio: float) -> AudioBuffer:
    """Scale the spectral envelope's frequency axis by `ratio` per frame,
    keeping excitation magnitude and phase, so formants move while pitch
    stays put."""
    if not 1.0 / 1.4 - 1e-9 <= ratio <= 1.4 + 1e-9:
        raise InputError(f"formant ratio {ratio} outside [1/1.4, 1.4]")
    length = len(x)
    if length == 0:
        return AudioBuffer(x.sample_rate, x.samples.copy())
    padded = np.concatenate([np.zeros(N_FFT), x.samples.astype(np.float64), np.zeros(2 * N_FFT)])
    spec = _stft(padded)
    cutoff = int(round(FORMANT_QUEFRENCY_S * x.sample_rate))

    logmag = np.log(np.abs(spec) + 1e-10)
    env = _spectral_envelope(logmag, cutoff)

    bins = np.arange(spec.shape[0], dtype=np.float64)
    warped = np.empty_like(env)
    src = bins / ratio
    for i in range(env.shape[1]):
        warped[:, i] = np.interp(src, bins, env[:, i])
    new_spec = np.exp(logmag + (warped - env)) * np.exp(1j * np.angle(spec))
    out = _istft(new_spec)[N_FFT : N_FFT + length]
    return AudioBuffer(x.sample_rate, out.astype(np.float32))


def perturb(x: AudioBuffer, params: PerturbParams) -> AudioBuffer:
    """Exact composition formant(pitch(peq(x))), with a 4x input-peak guard
    against pathological EQ resonance."""
    out = apply_formant_shift(apply_pitch_shift(apply_peq(x, params.peq), params.pitch_ratio),
                              params.formant_ratio)
    peak_in = float(np.abs(x.samples).max()) if len(x) else 0.0
    peak_out = float(np.abs(out.samples).max()) if len(out) else 0.0
    limit = PEAK_GUARD * peak_in
    if peak_in > 0.0 and peak_out > limit:
        # clip mops up one-ulp overshoot from the float32 rescale
        scaled = np.clip(out.samples * (limit / peak_out), -limit, limit)
        out = AudioBuffer(out.sample_rate, scaled.astype(np.float32))
    return out
