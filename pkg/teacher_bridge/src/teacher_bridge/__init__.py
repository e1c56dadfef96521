"""Offline export of discrete-unit targets and speaker embeddings.

Runs feature teachers over 16 kHz wav files and writes the results as
float32 tensor containers in the format the conversion engine loads. The
engine itself is never imported; the container files and its CLI are the
only contact surface.
"""

from .errors import BridgeError, InputError, TeacherUnavailableError
from .manifest import ExportManifest
from .teachers import (
    DEFAULT_ALIGNED_RATE,
    DEFAULT_SPEAKER_TEACHER,
    DEFAULT_UNIT_TEACHER,
    align_ids,
    extract_embedding,
    extract_units,
    speaker_teacher,
    unit_teacher,
)

__all__ = [
    "BridgeError",
    "InputError",
    "TeacherUnavailableError",
    "ExportManifest",
    "DEFAULT_ALIGNED_RATE",
    "DEFAULT_SPEAKER_TEACHER",
    "DEFAULT_UNIT_TEACHER",
    "align_ids",
    "extract_embedding",
    "extract_units",
    "speaker_teacher",
    "unit_teacher",
]
