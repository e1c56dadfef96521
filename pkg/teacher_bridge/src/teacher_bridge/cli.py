"""Batch export CLI.

Exit codes: 0 success, 2 bad input, 3 teacher unavailable, 4 internal
failure. Written output paths go to stdout, one per line; diagnostics go
to stderr. Next to the containers, each run writes a JSON record of what
was exported with which teacher.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from .containers import save_container
from .errors import BridgeError, InputError, TeacherUnavailableError
from .manifest import ExportManifest
from .teachers import align_ids, extract_embedding, extract_units, speaker_teacher, unit_teacher
from .wav import read_teacher_wav


def _resolve_manifest(args, teacher_field: str) -> ExportManifest:
    if args.manifest:
        if args.inputs or args.out_dir or args.teacher:
            raise InputError("pass either --manifest or inputs with --out-dir, not both")
        return ExportManifest.from_json(args.manifest)
    if not args.inputs or not args.out_dir:
        raise InputError("need input wav paths and --out-dir, or a --manifest file")
    kwargs = {}
    if args.teacher:
        kwargs[teacher_field] = args.teacher
    if getattr(args, "aligned_rate", None) is not None:
        kwargs["aligned_rate"] = args.aligned_rate
    return ExportManifest(list(args.inputs), args.out_dir, **kwargs)


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _write_record(manifest: ExportManifest, command: str, outputs) -> None:
    record = {"command": command, "manifest": asdict(manifest), "outputs": outputs}
    path = os.path.join(manifest.output_dir, f"{command}.manifest.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(record, f, indent=2)
        f.write("\n")


def cmd_export_units(args) -> int:
    manifest = _resolve_manifest(args, "unit_teacher")
    teacher = unit_teacher(manifest.unit_teacher)
    if abs(manifest.teacher_rate - teacher.frame_rate) > 1e-9:
        raise InputError(
            f"manifest teacher_rate {manifest.teacher_rate} does not match "
            f"{teacher.identifier}'s {teacher.frame_rate}"
        )
    os.makedirs(manifest.output_dir, exist_ok=True)
    outputs = []
    for path in manifest.inputs:
        samples = read_teacher_wav(path)
        ids = extract_units(teacher, samples)
        aligned = align_ids(ids, teacher.frame_rate, manifest.aligned_rate)
        out_path = os.path.join(manifest.output_dir, _stem(path) + ".units.srav")
        save_container(
            {
                "class_ids": ids.astype("<f4"),
                "frame_rate": np.float32(teacher.frame_rate),
                "aligned_ids": aligned.astype("<f4"),
                "aligned_rate": np.float32(manifest.aligned_rate),
                "num_classes": np.float32(teacher.num_classes),
            },
            out_path,
        )
        outputs.append(
            {
                "input": path,
                "output": out_path,
                "teacher_frames": int(ids.size),
                "aligned_frames": int(aligned.size),
            }
        )
        print(out_path)
    _write_record(manifest, "export-units", outputs)
    print(f"exported units for {len(outputs)} files with {teacher.identifier}", file=sys.stderr)
    return 0


def cmd_export_speaker(args) -> int:
    manifest = _resolve_manifest(args, "speaker_teacher")
    teacher = speaker_teacher(manifest.speaker_teacher)
    os.makedirs(manifest.output_dir, exist_ok=True)
    outputs = []
    for path in manifest.inputs:
        samples = read_teacher_wav(path)
        embedding = extract_embedding(teacher, samples)
        out_path = os.path.join(manifest.output_dir, _stem(path) + ".speaker.srav")
        save_container({"embedding": embedding}, out_path)
        outputs.append({"input": path, "output": out_path, "dim": int(embedding.size)})
        print(out_path)
    _write_record(manifest, "export-speaker", outputs)
    print(
        f"exported embeddings for {len(outputs)} files with {teacher.identifier}",
        file=sys.stderr,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teacher-bridge",
        description="Export discrete-unit targets and speaker embeddings from 16 kHz wavs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("inputs", nargs="*", help="input wav files (PCM16 mono 16 kHz)")
        p.add_argument("--out-dir", help="directory for the exported containers")
        p.add_argument("--manifest", help="JSON job description instead of flags")
        p.add_argument("--teacher", help="teacher identifier override")

    p = sub.add_parser("export-units", help="per-frame class ids at teacher and aligned rates")
    add_common(p)
    p.add_argument("--aligned-rate", type=float, help="aligned frame rate (default 46.875)")
    p.set_defaults(func=cmd_export_units)

    p = sub.add_parser("export-speaker", help="one unit-norm voice embedding per utterance")
    add_common(p)
    p.set_defaults(func=cmd_export_speaker)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except TeacherUnavailableError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except BridgeError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # pragma: no cover - last-resort diagnostic
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
