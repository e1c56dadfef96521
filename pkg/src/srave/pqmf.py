"""Pseudo-QMF analysis/synthesis filterbank.

A cosine-modulated bank of num_bands filters built from one Kaiser-windowed
low-pass prototype. Analysis filters then decimates by num_bands; synthesis
upsamples, filters with the time-reversed bank, and sums. The cascade is a
pure delay of taps-1 samples up to the design's reconstruction ripple.

Both directions run on the causal conv layers, so the streaming forms reuse
their cached state and match the offline path exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import kaiser_beta

from .audio import AudioBuffer
from .errors import InputError, ModelError
from .nn import Conv1d, ConvTranspose1d


@dataclass
class BandMatrix:
    """Critically sampled band signals, one row per band."""

    bands: np.ndarray
    band_rate: float

    @property
    def num_bands(self) -> int:
        return self.bands.shape[0]

    @property
    def frames(self) -> int:
        return self.bands.shape[1]


@dataclass
class PqmfBank:
    num_bands: int
    taps: int
    prototype: np.ndarray
    analysis: Conv1d
    synthesis: ConvTranspose1d
    group_delay: int


def _prototype(taps: int, beta: float, rho: float) -> np.ndarray:
    """Windowed-sinc low pass with cutoff rho in Nyquist units, unit DC gain."""
    n = np.arange(taps, dtype=np.float64)
    center = (taps - 1) / 2.0
    h = rho * np.sinc(rho * (n - center)) * np.kaiser(taps, beta)
    return h / h.sum()


def _modulated(prototype: np.ndarray, num_bands: int, sign: float) -> np.ndarray:
    """Cosine modulation lifting the prototype to the band centers."""
    taps = len(prototype)
    n = np.arange(taps, dtype=np.float64)
    center = (taps - 1) / 2.0
    b = np.arange(num_bands, dtype=np.float64)[:, None]
    phase = (2 * b + 1) * (np.pi / (2 * num_bands)) * (n - center)
    phase = phase + sign * ((-1.0) ** b) * (np.pi / 4)
    return 2.0 * prototype[None, :] * np.cos(phase)


def _impulse_error(prototype: np.ndarray, num_bands: int) -> tuple[float, float]:
    """Deviation of the analysis/synthesis cascade from a pure delay over
    all impulse positions modulo the decimation factor: (worst absolute
    sample, mean error energy per impulse).

    An impulse at n0 yields band samples y[k, m] = h[k, m*M - n0], so the
    reconstruction is assembled directly from the filter taps with no
    signal-length convolutions.
    """
    m_bands = num_bands
    taps = len(prototype)
    h = _modulated(prototype, m_bands, +1.0)
    g = h[:, ::-1]
    delay = taps - 1
    worst = 0.0
    energies = []
    for shift in range(m_bands):
        n0 = taps + shift
        m_lo = -(-n0 // m_bands)
        m_hi = (taps - 1 + n0) // m_bands
        ms = np.arange(m_lo, m_hi + 1)
        coeff = h[:, ms * m_bands - n0]
        out = np.zeros((m_hi + 1) * m_bands + taps, dtype=np.float64)
        for j, m in enumerate(ms):
            out[m * m_bands : m * m_bands + taps] += coeff[:, j] @ g
        out *= m_bands
        out[n0 + delay] -= 1.0
        worst = max(worst, float(np.abs(out).max()))
        energies.append(np.sum(out * out))
    return worst, float(np.mean(energies))


def design_bank(num_bands: int = 16, attenuation_db: float = 100.0, taps: int = 512) -> PqmfBank:
    """Design the modulated bank, tuning the prototype cutoff by scalar
    search to minimize worst-case reconstruction error."""
    if num_bands < 1 or num_bands & (num_bands - 1):
        raise InputError(f"num_bands must be a power of two, got {num_bands}")
    if taps < 1 or taps % num_bands:
        raise InputError(f"taps ({taps}) must be a positive multiple of num_bands ({num_bands})")

    if num_bands == 1:
        analysis = Conv1d(1, 1, 1)
        analysis.weight[0, 0, 0] = 1.0
        synthesis = ConvTranspose1d(1, 1, 1, 1)
        synthesis.weight[0, 0, 0] = 1.0
        return PqmfBank(1, 1, np.ones(1), analysis, synthesis, 0)

    beta = kaiser_beta(attenuation_db)
    lo, hi = 0.7 / (2 * num_bands), 1.5 / (2 * num_bands)
    # minimizing the mean error energy maximizes broadband round-trip SNR;
    # the worst-sample norm gates feasibility below
    result = minimize_scalar(
        lambda rho: _impulse_error(_prototype(taps, beta, rho), num_bands)[1],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10},
    )
    prototype = _prototype(taps, beta, float(result.x))
    achieved = _impulse_error(prototype, num_bands)[0]
    target = 10.0 ** (-(attenuation_db - 40.0) / 20.0)
    if achieved > target:
        raise ModelError(
            f"filterbank design infeasible: {num_bands} bands with {taps} taps reached "
            f"reconstruction error {achieved:.2e}, target {target:.2e} for {attenuation_db} dB"
        )

    # sqrt(M) on each side preserves energy per direction and gives the
    # cascade its required total gain of M
    scale = np.sqrt(num_bands)
    analysis = Conv1d(1, num_bands, taps, stride=num_bands)
    analysis.compute_dtype = np.float64
    analysis.weight[:, 0, :] = (scale * _modulated(prototype, num_bands, +1.0)).astype(np.float32)
    # time-reversing the analysis bank equals the -pi/4 phase variant and
    # makes each synthesis filter the matched filter of its band
    synthesis = ConvTranspose1d(num_bands, 1, taps, stride=num_bands)
    synthesis.compute_dtype = np.float64
    synthesis.weight[:, 0, :] = (scale * _modulated(prototype, num_bands, +1.0)[:, ::-1]).astype(
        np.float32
    )
    return PqmfBank(num_bands, taps, prototype, analysis, synthesis, taps - 1)


def _check_aligned(length: int, num_bands: int) -> None:
    if length % num_bands:
        raise InputError(f"length {length} is not a multiple of {num_bands} bands")


def analyze(bank: PqmfBank, x: AudioBuffer) -> BandMatrix:
    """Split audio into critically sampled bands, [num_bands x len/num_bands]."""
    _check_aligned(len(x), bank.num_bands)
    bands = bank.analysis.forward(x.samples[None, :])
    return BandMatrix(bands, x.sample_rate / bank.num_bands)


def synthesize(bank: PqmfBank, b: BandMatrix) -> AudioBuffer:
    """Rebuild audio from bands; the cascade with analyze delays the signal
    by group_delay samples."""
    if b.num_bands != bank.num_bands:
        raise InputError(f"band count mismatch: bank has {bank.num_bands}, input {b.num_bands}")
    samples = bank.synthesis.forward(np.asarray(b.bands, dtype=np.float32))[0]
    return AudioBuffer(sample_rate=int(round(b.band_rate * bank.num_bands)), samples=samples)


def init_analysis_state(bank: PqmfBank) -> np.ndarray:
    return bank.analysis.init_state()


def init_synthesis_state(bank: PqmfBank) -> np.ndarray:
    return bank.synthesis.init_state()


def analyze_streaming(bank: PqmfBank, state: np.ndarray, chunk, sample_rate: float = 48000.0):
    """Chunked analyze; concatenated outputs equal the offline path."""
    if isinstance(chunk, AudioBuffer):
        sample_rate = chunk.sample_rate
        chunk = chunk.samples
    chunk = np.asarray(chunk, dtype=np.float32)
    _check_aligned(chunk.shape[-1], bank.num_bands)
    bands, state = bank.analysis.step(chunk[None, :], state)
    return BandMatrix(bands, sample_rate / bank.num_bands), state


def synthesize_streaming(bank: PqmfBank, state: np.ndarray, bands: np.ndarray):
    """Chunked synthesize over [num_bands x frames] blocks."""
    bands = np.asarray(bands, dtype=np.float32)
    if bands.shape[0] != bank.num_bands:
        raise InputError(f"band count mismatch: bank has {bank.num_bands}, input {bands.shape[0]}")
    samples, state = bank.synthesis.step(bands, state)
    return samples[0], state
