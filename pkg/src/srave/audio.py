"""Audio buffers, WAV file I/O and the engine's reproducible PRNG.

All signals are mono float32 in nominal [-1, 1]. WAV support covers
little-endian RIFF with PCM16, PCM24 and IEEE float32 codecs, including
the WAVE_FORMAT_EXTENSIBLE wrappers around those. Multi-channel files are
reduced to channel 0 with a warning; resampling is deliberately absent.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


@dataclass
class AudioBuffer:
    """Mono time-domain signal plus its sample rate."""

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise InputError(f"sample_rate must be positive, got {self.sample_rate}")
        self.samples = np.asarray(self.samples, dtype=np.float32).reshape(-1)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


class Prng:
    """SplitMix64 generator with Box-Muller normal draws.

    The stream is a pure function of the seed, identical across platforms.
    Each ``gauss`` consumes exactly two raw draws, so the vectorized batch
    methods reproduce the scalar stream element for element.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def clone(self) -> "Prng":
        c = Prng(0)
        c.state = self.state
        return c

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        # 53-bit mantissa in [0, 1)
        return (self.next_u64() >> 11) * 2.0**-53

    def gauss(self) -> float:
        # routed through the array path so scalar and batch draws agree bitwise
        return float(self.gauss_array(1)[0])

    def u64_array(self, n: int) -> np.ndarray:
        """Next n raw draws as uint64, advancing the state as n scalar calls would."""
        if n == 0:
            return np.empty(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self.state) + steps * np.uint64(_GOLDEN)  # wraps mod 2**64
        self.state = int(z[-1])
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def gauss_array(self, n: int) -> np.ndarray:
        raw = self.u64_array(2 * n)
        u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def gen_sine(freq: float, duration: float, sample_rate: int, amplitude: float = 1.0) -> AudioBuffer:
    """Pure tone: samples[n] = amplitude * sin(2*pi*freq*n/sample_rate)."""
    if not 0 < freq < sample_rate / 2:
        raise InputError(f"frequency {freq} Hz outside (0, {sample_rate / 2}) at {sample_rate} Hz")
    n = np.arange(round(duration * sample_rate), dtype=np.float64)
    samples = amplitude * np.sin(2.0 * np.pi * freq * n / sample_rate)
    return AudioBuffer(sample_rate, samples.astype(np.float32))


def gen_noise(seed: int, duration: float, sample_rate: int, amplitude: float = 0.5) -> AudioBuffer:
    """Deterministic Gaussian noise scaled by ``amplitude`` (std, not peak)."""
    n = round(duration * sample_rate)
    samples = Prng(seed).gauss_array(n) * amplitude
    return AudioBuffer(sample_rate, samples.astype(np.float32))


def _parse_fmt(payload: bytes) -> tuple[int, int, int, int]:
    if len(payload) < 16:
        raise InputError("malformed header: fmt chunk too short")
    fmt_tag, channels, sample_rate, _, _, bits = struct.unpack("<HHIIHH", payload[:16])
    if fmt_tag == 0xFFFE:
        # WAVE_FORMAT_EXTENSIBLE: actual codec lives in the SubFormat GUID
        if len(payload) < 40:
            raise InputError("malformed header: extensible fmt chunk too short")
        fmt_tag = struct.unpack("<H", payload[24:26])[0]
    return fmt_tag, channels, sample_rate, bits


def load_wav(path) -> AudioBuffer:
    """Load a RIFF/WAVE file as float32 in [-1, 1).

    Integer PCM is scaled by 2**(bits-1); float32 data is passed through.
    Only PCM16, PCM24 and IEEE float32 are accepted.
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise InputError(f"malformed header: not a RIFF/WAVE file: {path}")

    fmt = None
    raw = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4 : pos + 8])
        body = data[pos + 8 : pos + 8 + size]
        if cid == b"fmt ":
            fmt = _parse_fmt(body)
        elif cid == b"data":
            raw = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise InputError(f"malformed header: missing fmt chunk: {path}")
    if raw is None or len(raw) == 0:
        raise InputError(f"empty data chunk: {path}")
    fmt_tag, channels, sample_rate, bits = fmt
    if channels < 1:
        raise InputError("malformed header: zero channels")

    if fmt_tag == 1 and bits == 16:
        x = np.frombuffer(raw[: len(raw) // 2 * 2], dtype="<i2").astype(np.float32) / 32768.0
    elif fmt_tag == 1 and bits == 24:
        b = np.frombuffer(raw[: len(raw) // 3 * 3], dtype=np.uint8).reshape(-1, 3)
        x = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int8).astype(np.int32) << 16)
        ).astype(np.float32) / 8388608.0
    elif fmt_tag == 3 and bits == 32:
        x = np.frombuffer(raw[: len(raw) // 4 * 4], dtype="<f4").astype(np.float32)
    else:
        raise InputError(f"unsupported codec: format tag {fmt_tag}, {bits} bits")

    if channels > 1:
        warnings.warn(f"{path}: {channels} channels, keeping channel 0")
        x = x[::channels].copy()
    return AudioBuffer(sample_rate, x)


def save_wav(buffer: AudioBuffer, path, bits=16) -> None:
    """Write PCM16 (``bits=16``) or IEEE float32 (``bits="32f"``).

    Float32 round-trips exactly; PCM16 rounds to the nearest step of
    1/32768 with saturation at the integer limits.
    """
    if len(buffer) == 0:
        raise InputError("refusing to write an empty buffer")
    if bits == 16:
        fmt_tag, width = 1, 2
        q = np.clip(np.rint(buffer.samples.astype(np.float64) * 32768.0), -32768, 32767)
        payload = q.astype("<i2").tobytes()
    elif bits == "32f":
        fmt_tag, width = 3, 4
        payload = buffer.samples.astype("<f4").tobytes()
    else:
        raise InputError(f"unsupported bit depth: {bits!r} (use 16 or '32f')")

    sr = buffer.sample_rate
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        fmt_tag,
        1,
        sr,
        sr * width,
        width,
        width * 8,
        b"data",
        len(payload),
    )
    with open(path, "wb") as f:
        f.write(header + payload)
