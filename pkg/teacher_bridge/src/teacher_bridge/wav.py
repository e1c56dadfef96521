"""Minimal wav reading for teacher input: PCM16 mono at the teacher rate."""

import os
import wave

import numpy as np

from .errors import InputError

TEACHER_RATE = 16000


def read_teacher_wav(path) -> np.ndarray:
    """Load a wav as float32 in [-1, 1), enforcing the teacher's input
    contract: PCM16, mono, 16 kHz, non-empty."""
    if not os.path.isfile(path):
        raise InputError(f"input file not found: {path}")
    try:
        with wave.open(str(path), "rb") as f:
            channels = f.getnchannels()
            width = f.getsampwidth()
            rate = f.getframerate()
            frames = f.readframes(f.getnframes())
    except wave.Error as exc:
        raise InputError(f"not a readable wav file: {path}: {exc}") from exc
    if channels != 1:
        raise InputError(f"expected mono input, got {channels} channels: {path}")
    if width != 2:
        raise InputError(f"expected 16-bit PCM input, got {8 * width}-bit: {path}")
    if rate != TEACHER_RATE:
        raise InputError(
            f"input is {rate} Hz but the teachers run at {TEACHER_RATE} Hz; "
            f"downsample it to {TEACHER_RATE} Hz first: {path}"
        )
    samples = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    if samples.size == 0:
        raise InputError(f"empty wav file: {path}")
    return samples
