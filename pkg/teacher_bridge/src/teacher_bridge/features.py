"""Log-mel front end shared by both teachers.

Frames are left-aligned with a zero-padded tail, so the frame count obeys
frames = ceil(samples / HOP): 1 s of 16 kHz audio gives exactly 50 frames.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InputError

SAMPLE_RATE = 16000
HOP = 320
WINDOW = 640
N_FFT = 1024
N_MELS = 40
FRAME_RATE = SAMPLE_RATE / HOP  # 50.0 Hz


def frame_count(samples: int) -> int:
    """The exported length law; defined for positive sample counts."""
    if samples <= 0:
        raise InputError(f"cannot frame {samples} samples")
    return -(-samples // HOP)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int = N_MELS, n_fft: int = N_FFT, sample_rate: int = SAMPLE_RATE
) -> np.ndarray:
    """Triangular filters on the mel scale, [n_mels, n_fft//2 + 1]."""
    edges = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(sample_rate / 2), n_mels + 2))
    bins = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    bank = np.zeros((n_mels, bins.size), dtype=np.float64)
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bins - lo) / max(mid - lo, 1e-9)
        falling = (hi - bins) / max(hi - mid, 1e-9)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


_BANK = mel_filterbank()
_WINDOW_FN = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(WINDOW) / WINDOW)


def log_mel(samples: np.ndarray) -> np.ndarray:
    """Per-frame log mel power, [N_MELS, frame_count(len(samples))]."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    frames = frame_count(x.size)
    needed = (frames - 1) * HOP + WINDOW
    padded = np.pad(x, (0, needed - x.size))
    windows = sliding_window_view(padded, WINDOW)[::HOP][:frames]
    spectra = np.fft.rfft(windows * _WINDOW_FN, n=N_FFT, axis=1)
    power = np.abs(spectra) ** 2
    return np.log(_BANK @ power.T + 1e-10)
