"""Registered feature teachers.

Each teacher is addressed by a documented identifier; the identifier fully
determines its weights, so exports are reproducible anywhere. Unknown
identifiers raise TeacherUnavailableError rather than downloading anything.

`melvq100-v1` quantizes per-utterance-normalized log-mel frames against a
100-entry codebook. `ltsp512-v1` projects the long-term spectral profile
(per-band mean and deviation over time) to a unit-norm 512-dim vector.
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, TeacherUnavailableError
from .features import FRAME_RATE, N_MELS, log_mel

DEFAULT_UNIT_TEACHER = "melvq100-v1"
DEFAULT_SPEAKER_TEACHER = "ltsp512-v1"
DEFAULT_ALIGNED_RATE = 48000 / 1024  # latent frame rate of the conversion engine

_UNIT_CLASSES = {"melvq100-v1": 100}
_SPEAKER_DIMS = {"ltsp512-v1": 512}


def _seed_from(identifier: str) -> int:
    return int.from_bytes(hashlib.sha256(identifier.encode("utf-8")).digest()[:8], "little")


@dataclass(frozen=True)
class UnitTeacher:
    identifier: str
    num_classes: int
    frame_rate: float
    codebook: np.ndarray  # [num_classes, N_MELS]


@dataclass(frozen=True)
class SpeakerTeacher:
    identifier: str
    dim: int
    projection: np.ndarray  # [dim, 2 * N_MELS]


def unit_teacher(identifier: str = DEFAULT_UNIT_TEACHER) -> UnitTeacher:
    if identifier not in _UNIT_CLASSES:
        known = ", ".join(sorted(_UNIT_CLASSES))
        raise TeacherUnavailableError(f"unit teacher {identifier!r} unavailable; known: {known}")
    classes = _UNIT_CLASSES[identifier]
    rng = np.random.default_rng(_seed_from(identifier))
    codebook = rng.standard_normal((classes, N_MELS))
    return UnitTeacher(identifier, classes, FRAME_RATE, codebook)


def speaker_teacher(identifier: str = DEFAULT_SPEAKER_TEACHER) -> SpeakerTeacher:
    if identifier not in _SPEAKER_DIMS:
        known = ", ".join(sorted(_SPEAKER_DIMS))
        raise TeacherUnavailableError(
            f"speaker teacher {identifier!r} unavailable; known: {known}"
        )
    dim = _SPEAKER_DIMS[identifier]
    rng = np.random.default_rng(_seed_from(identifier))
    projection = rng.standard_normal((dim, 2 * N_MELS))
    return SpeakerTeacher(identifier, dim, projection)


def extract_units(teacher: UnitTeacher, samples: np.ndarray) -> np.ndarray:
    """Class id per teacher frame, int64 in [0, num_classes)."""
    feats = log_mel(samples)  # [N_MELS, frames]
    mean = feats.mean(axis=1, keepdims=True)
    std = feats.std(axis=1, keepdims=True)
    normed = (feats - mean) / (std + 1e-5)
    # nearest codebook row by euclidean distance
    sq = (teacher.codebook**2).sum(axis=1, keepdims=True)
    scores = sq - 2.0 * (teacher.codebook @ normed)
    return np.argmin(scores, axis=0).astype(np.int64)


def align_ids(ids: np.ndarray, teacher_rate: float, aligned_rate: float) -> np.ndarray:
    """Nearest-frame-in-time resampling of an id sequence to aligned_rate.

    The aligned count is ceil(duration * aligned_rate), so the two streams
    never differ in duration by more than one aligned frame period.
    """
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if ids.size == 0:
        raise InputError("cannot align an empty id sequence")
    if teacher_rate <= 0 or aligned_rate <= 0:
        raise InputError(f"frame rates must be positive, got {teacher_rate}, {aligned_rate}")
    duration = ids.size / teacher_rate
    count = max(1, math.ceil(duration * aligned_rate - 1e-9))
    centers = (np.arange(count) + 0.5) / aligned_rate
    nearest = np.rint(centers * teacher_rate - 0.5).astype(np.int64)
    return ids[np.clip(nearest, 0, ids.size - 1)]


def extract_embedding(teacher: SpeakerTeacher, samples: np.ndarray) -> np.ndarray:
    """Unit-norm float32 voice profile of one utterance."""
    feats = log_mel(samples)
    if float(feats.std()) < 1e-9:
        # constant feature matrix: digital silence or a flat synthetic signal
        raise InputError("input has no spectral variation to profile a voice")
    stats = np.concatenate([feats.mean(axis=1), feats.std(axis=1)])
    spread = float(stats.std())
    if spread < 1e-9:
        raise InputError("input too uniform to profile a voice")
    stats = (stats - stats.mean()) / spread
    v = teacher.projection @ stats
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise InputError("degenerate voice profile")
    return (v / norm).astype(np.float32)
