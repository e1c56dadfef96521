"""Export job description, read from and written as JSON."""

import json
import os
from dataclasses import asdict, dataclass

from .errors import InputError
from .features import FRAME_RATE
from .teachers import DEFAULT_ALIGNED_RATE, DEFAULT_SPEAKER_TEACHER, DEFAULT_UNIT_TEACHER


@dataclass
class ExportManifest:
    inputs: list[str]
    output_dir: str
    unit_teacher: str = DEFAULT_UNIT_TEACHER
    speaker_teacher: str = DEFAULT_SPEAKER_TEACHER
    teacher_rate: float = FRAME_RATE
    aligned_rate: float = DEFAULT_ALIGNED_RATE

    def __post_init__(self):
        self.inputs = [str(p) for p in self.inputs]
        if not self.inputs:
            raise InputError("manifest lists no inputs")
        if not self.output_dir:
            raise InputError("manifest has no output directory")
        if self.teacher_rate <= 0 or self.aligned_rate <= 0:
            raise InputError("manifest frame rates must be positive")
        stems = [os.path.splitext(os.path.basename(p))[0] for p in self.inputs]
        if len(set(stems)) != len(stems):
            raise InputError("two inputs share a base name; outputs would collide")

    @classmethod
    def from_json(cls, path) -> "ExportManifest":
        if not os.path.isfile(path):
            raise InputError(f"manifest not found: {path}")
        with open(path, encoding="utf-8") as f:
            try:
                data = json.load(f)
            except ValueError as exc:
                raise InputError(f"malformed manifest {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError(f"manifest must be a JSON object: {path}")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown manifest keys {sorted(unknown)}: {path}")
        missing = {"inputs", "output_dir"} - set(data)
        if missing:
            raise InputError(f"manifest missing keys {sorted(missing)}: {path}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InputError(f"malformed manifest {path}: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)
