"""Speaker-embedding utilities: normalization, averaging, cosine scoring,
FiLM parameter generation, and a directory-backed embedding store.

The store keeps one container file per utterance at
<root>/<speaker>/<utterance>.srav with a single "embedding" entry, so a
speaker's identity is the normalized mean over whatever utterances have
been collected. Reads may run concurrently; writers must coordinate so
each speaker directory has a single writer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContainerError, InputError, ModelError
from .nn import FiLMParams, Linear, load_container, save_container

_ID_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


def _checked_id(value: str, what: str) -> str:
    # doubles as a path-traversal guard for ids arriving from the CLI
    if not _ID_PATTERN.match(value):
        raise InputError(f"invalid {what} {value!r}: use letters, digits, '_', '-', '.'")
    return value


@dataclass
class SpeakerEmbedding:
    """Fixed-length voice-identity vector, optionally unit-normalized."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32).reshape(-1)
        if self.values.size == 0:
            raise InputError("empty speaker embedding")

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def normalize(e: SpeakerEmbedding) -> SpeakerEmbedding:
    values = e.values.astype(np.float64)
    norm = float(np.linalg.norm(values))
    if norm < 1e-12:
        raise InputError("cannot normalize a zero embedding")
    return SpeakerEmbedding((values / norm).astype(np.float32), normalized=True)


def average(embeddings) -> SpeakerEmbedding:
    """Arithmetic mean followed by normalization."""
    embeddings = list(embeddings)
    if not embeddings:
        raise InputError("cannot average an empty set of embeddings")
    dim = embeddings[0].dim
    for e in embeddings:
        if e.dim != dim:
            raise InputError(f"embedding dimension mismatch: {e.dim} != {dim}")
    mean = np.mean([e.values.astype(np.float64) for e in embeddings], axis=0)
    if np.linalg.norm(mean) < 1e-12:
        raise InputError("averaged embedding is the zero vector")
    return normalize(SpeakerEmbedding(mean))


def cosine_similarity(a: SpeakerEmbedding, b: SpeakerEmbedding) -> float:
    if a.dim != b.dim:
        raise InputError(f"embedding dimension mismatch: {a.dim} != {b.dim}")
    av = a.values.astype(np.float64)
    bv = b.values.astype(np.float64)
    norm_a = np.linalg.norm(av)
    norm_b = np.linalg.norm(bv)
    if norm_a < 1e-12 or norm_b < 1e-12:
        raise InputError("cosine similarity of a zero embedding")
    return float(np.clip(np.dot(av, bv) / (norm_a * norm_b), -1.0, 1.0))


def film_from_embedding(e, layer: Linear) -> FiLMParams:
    """Affine conditioning parameters from one linear map: the first half of
    the output is the per-channel scale, the second half the offset."""
    values = e.values if isinstance(e, SpeakerEmbedding) else np.asarray(e, dtype=np.float32)
    if layer.out_features % 2 != 0:
        raise ModelError(f"conditioning layer must emit an even count, got {layer.out_features}")
    out = layer.forward(values.reshape(-1))
    half = layer.out_features // 2
    return FiLMParams(out[:half], out[half:])


class SpeakerStore:
    """Embeddings on disk, one file per utterance, grouped by speaker."""

    def __init__(self, root):
        self.root = Path(root)

    def dim(self) -> int | None:
        """Dimension shared by everything in the store; None when empty."""
        for path in sorted(self.root.glob("*/*.srav")):
            return self._load(path).dim
        return None

    def _load(self, path: Path) -> SpeakerEmbedding:
        entries = load_container(path)
        if "embedding" not in entries:
            raise ContainerError(f"no embedding entry in {path}")
        return SpeakerEmbedding(entries["embedding"])

    def put(self, speaker_id: str, utterance_id: str, e: SpeakerEmbedding) -> Path:
        stored = self.dim()
        if stored is not None and stored != e.dim:
            raise InputError(f"store holds {stored}-dim embeddings, got {e.dim}")
        speaker_dir = self.root / _checked_id(speaker_id, "speaker id")
        speaker_dir.mkdir(parents=True, exist_ok=True)
        path = speaker_dir / (_checked_id(utterance_id, "utterance id") + ".srav")
        save_container({"embedding": e.values}, path)
        return path

    def speakers(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir() and any(p.glob("*.srav")))

    def utterances(self, speaker_id: str) -> list[str]:
        speaker_dir = self.root / _checked_id(speaker_id, "speaker id")
        return sorted(p.stem for p in speaker_dir.glob("*.srav")) if speaker_dir.is_dir() else []

    def get_utterance(self, speaker_id: str, utterance_id: str) -> SpeakerEmbedding:
        path = (
            self.root
            / _checked_id(speaker_id, "speaker id")
            / (_checked_id(utterance_id, "utterance id") + ".srav")
        )
        if not path.is_file():
            raise InputError(f"unknown utterance {speaker_id}/{utterance_id}")
        return self._load(path)

    def get_speaker(self, speaker_id: str) -> SpeakerEmbedding:
        """Normalized mean over all of the speaker's utterances."""
        names = self.utterances(speaker_id)
        if not names:
            raise InputError(f"unknown speaker {speaker_id!r}")
        return average(self.get_utterance(speaker_id, n) for n in names)
