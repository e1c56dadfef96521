"""Command line front end.

Exit codes: 0 success, 2 bad input, 3 model or container problem, 4 internal
failure. Diagnostics go to stderr; stdout carries only data (JSON, numbers,
or the raw sample stream).
"""

import argparse
import json
import os
import sys

import numpy as np

from .audio import AudioBuffer, Prng, gen_noise, load_wav, save_wav
from .errors import InputError, ModelError, SraveError
from .losses import (
    DiscriminatorSet,
    DsuTargets,
    LossWeights,
    adv_generator_loss,
    discriminator_loss,
    discriminator_scores,
    loss_content,
    loss_mstft,
    total_generator_loss,
)
from .model import Model, ModelConfig, convert, load_model, save_model
from .nn import BatchNorm, load_container, save_container
from .perturb import BiquadSection, PerturbParams, perturb, sample_params
from .pqmf import analyze, design_bank, synthesize
from .speaker import SpeakerEmbedding, SpeakerStore, cosine_similarity
from .stream import bench, open_session, process_chunk


def _require_file(path, what: str) -> str:
    if not path:
        raise InputError(f"no {what} given")
    if not os.path.isfile(path):
        raise InputError(f"{what} not found: {path}")
    return path


def _model_path(args) -> str:
    path = getattr(args, "model", None) or os.environ.get("SRAVE_MODEL")
    if not path:
        raise InputError("no model given: pass --model or set SRAVE_MODEL")
    return _require_file(path, "model file")


def _load(args) -> Model:
    return load_model(_model_path(args))


def _embedding_values(ref: str, store_root) -> np.ndarray:
    """A speaker reference is either a container file holding an `embedding`
    entry or a speaker id resolved against the store directory."""
    if os.path.isfile(ref):
        entries = load_container(ref)
        if "embedding" not in entries:
            raise InputError(f"no embedding entry in {ref}")
        return entries["embedding"].reshape(-1)
    if store_root and os.path.isdir(store_root):
        return SpeakerStore(store_root).get_speaker(ref).values
    raise InputError(f"unknown speaker {ref!r}: not an embedding file and no store at {store_root!r}")


def _target_voice(args) -> np.ndarray:
    # a speaker that cannot be resolved is a missing model asset, not bad input
    try:
        return _embedding_values(args.speaker, args.store)
    except InputError as err:
        raise ModelError(str(err)) from err


def cmd_convert(args) -> int:
    model = _load(args)
    x = load_wav(_require_file(args.input, "input file"))
    e = _target_voice(args)
    bank = design_bank(model.config.num_bands)
    out = convert(model, bank, x, e)
    save_wav(out, args.output, bits="32f")
    print(f"wrote {len(out)} samples to {args.output}", file=sys.stderr)
    return 0


def cmd_stream(args) -> int:
    model = _load(args)
    e = _target_voice(args)
    bank = design_bank(model.config.num_bands)
    session = open_session(model, e, args.chunk, bank=bank)
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    chunk_bytes = 4 * args.chunk
    while True:
        data = stdin.read(chunk_bytes)
        if not data:
            break
        if len(data) % 4:
            raise InputError("stream ended mid-sample: stdin must carry whole float32 values")
        samples = np.frombuffer(data, dtype="<f4")
        if samples.size == args.chunk:
            out = process_chunk(session, samples)
        else:
            padded = np.zeros(args.chunk, dtype=np.float32)
            padded[: samples.size] = samples
            out = process_chunk(session, padded)[: samples.size]
        stdout.write(out.astype("<f4").tobytes())
        stdout.flush()
        if samples.size < args.chunk:
            break
    return 0


def cmd_bench(args) -> int:
    model = _load(args)
    bank = design_bank(model.config.num_bands)
    report = bench(
        model,
        args.duration,
        trials=args.trials,
        mode=args.mode,
        chunk_size=args.chunk,
        bank=bank,
        seed=args.seed,
    )
    if args.json:
        print(report.to_json())
    else:
        print(f"synthesis speed: {report.synthesis_speed:.0f} samples/s")
        print(f"rtf: {report.rtf:.4f}")
        print(f"trials: {report.trials}")
        print(f"chunk: {report.chunk_size}")
        print(f"threads: {report.thread_mode}")
    return 0


def _layer_shape(layer) -> list[int]:
    arr = layer.mean if isinstance(layer, BatchNorm) else layer.weight
    return list(arr.shape)


def _losses_report(args, model: Model) -> dict[str, float]:
    for flag in ("reference", "converted", "targets", "logits"):
        if getattr(args, flag) is None:
            raise InputError("--losses needs --reference, --converted, --targets and --logits")
    reference = load_wav(_require_file(args.reference, "reference file"))
    converted = load_wav(_require_file(args.converted, "converted file"))
    t_entries = load_container(_require_file(args.targets, "targets file"))
    if "class_ids" not in t_entries or "frame_rate" not in t_entries:
        raise InputError(f"targets file needs class_ids and frame_rate entries: {args.targets}")
    num_classes = model.config.num_classes
    if "num_classes" in t_entries:
        num_classes = int(round(float(t_entries["num_classes"].reshape(-1)[0])))
    targets = DsuTargets(
        np.rint(t_entries["class_ids"].reshape(-1)).astype(np.int64),
        float(t_entries["frame_rate"].reshape(-1)[0]),
        num_classes,
    )
    l_entries = load_container(_require_file(args.logits, "logits file"))
    if "z_p" not in l_entries:
        raise InputError(f"logits file needs a z_p entry: {args.logits}")
    z_p = l_entries["z_p"]
    if z_p.ndim != 2:
        raise InputError(f"z_p must be [classes, frames], got shape {list(z_p.shape)}")
    weights = LossWeights(args.msd_weight)
    disc = DiscriminatorSet.build(seed=args.seed)
    real = discriminator_scores(disc, reference)
    fake = discriminator_scores(disc, converted)
    mstft = loss_mstft(reference, converted)
    content = loss_content(targets, z_p, logit_rate=model.config.latent_rate)
    adv = adv_generator_loss(fake, weights)
    return {
        "mstft": mstft,
        "content": content,
        "adv_generator": adv,
        "total_generator": total_generator_loss(adv, mstft, content),
        "discriminator": discriminator_loss(real, fake, weights),
    }


def cmd_inspect(args) -> int:
    model = _load(args)
    if args.losses:
        report = _losses_report(args, model)
        if args.json:
            print(json.dumps(report))
        else:
            for name, value in report.items():
                print(f"{name}: {value:.6f}")
        return 0
    config = {}
    for line in model.config.to_text().splitlines():
        key, _, value = line.partition("=")
        config[key] = value
    layers = [
        {
            "name": name,
            "kind": type(layer).__name__,
            "shape": _layer_shape(layer),
            "params": layer.param_count(),
        }
        for name, layer in model.named_layers()
    ]
    breakdown = model.param_breakdown()
    if args.json:
        print(json.dumps({"config": config, "layers": layers, "params": breakdown}))
        return 0
    for key, value in config.items():
        print(f"{key} = {value}")
    print()
    for row in layers:
        shape = "x".join(str(d) for d in row["shape"])
        print(f"{row['name']:<16} {row['kind']:<16} {shape:<14} {row['params']}")
    print()
    print(f"encoder params: {breakdown['encoder']}")
    print(f"decoder params: {breakdown['decoder']}")
    print(f"projection params (training only): {breakdown['projection']}")
    print(f"param_count: {breakdown['total']}")
    return 0


def cmd_init(args) -> int:
    model = Model.build(ModelConfig(), seed=args.seed)
    save_model(model, args.output)
    print(f"wrote model with {model.param_count()} params to {args.output}", file=sys.stderr)
    return 0


def cmd_pqmf_check(args) -> int:
    bank = design_bank(args.bands, taps=args.taps)
    worst = float("inf")
    for seed in range(args.seeds):
        x = gen_noise(seed, args.duration, 48000)
        hop = bank.num_bands
        total = -(-(len(x) + bank.group_delay) // hop) * hop
        padded = np.zeros(total, dtype=np.float32)
        padded[: len(x)] = x.samples
        y = synthesize(bank, analyze(bank, AudioBuffer(x.sample_rate, padded)))
        aligned = y.samples[bank.group_delay : bank.group_delay + len(x)].astype(np.float64)
        ref = x.samples.astype(np.float64)
        noise = float(np.sum((ref - aligned) ** 2))
        snr = float("inf") if noise == 0.0 else 10.0 * np.log10(np.sum(ref**2) / noise)
        worst = min(worst, snr)
    if args.json:
        print(json.dumps({"worst_snr_db": worst, "seeds": args.seeds}))
    else:
        print(f"worst round-trip snr over {args.seeds} seeds: {worst:.2f} dB")
    return 0


def _params_from_json(path: str) -> PerturbParams:
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except ValueError as err:
            raise InputError(f"malformed parameter file {path}: {err}") from err
    try:
        peq = [
            BiquadSection(s["kind"], float(s["freq_hz"]), float(s["q"]), float(s["gain_db"]))
            for s in data.get("peq", [])
        ]
        return PerturbParams(
            peq,
            float(data.get("pitch_ratio", 1.0)),
            float(data.get("formant_ratio", 1.0)),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"malformed parameter file {path}: {err}") from err


def cmd_perturb(args) -> int:
    if (args.seed is None) == (args.params is None):
        raise InputError("pass exactly one of --seed or --params")
    x = load_wav(_require_file(args.input, "input file"))
    if args.seed is not None:
        params, _ = sample_params(Prng(args.seed))
    else:
        params = _params_from_json(_require_file(args.params, "parameter file"))
    save_wav(perturb(x, params), args.output, bits="32f")
    print(
        f"pitch x{params.pitch_ratio:.4f}, formants x{params.formant_ratio:.4f}, "
        f"{len(params.peq)} eq sections",
        file=sys.stderr,
    )
    return 0


def cmd_embed_put(args) -> int:
    entries = load_container(_require_file(args.file, "embedding file"))
    if "embedding" not in entries:
        raise InputError(f"no embedding entry in {args.file}")
    e = SpeakerEmbedding(entries["embedding"].reshape(-1))
    path = SpeakerStore(args.store).put(args.speaker, args.utterance, e)
    print(f"stored {args.speaker}/{args.utterance} at {path}", file=sys.stderr)
    return 0


def cmd_embed_get(args) -> int:
    store = SpeakerStore(args.store)
    if args.utterance is not None:
        e = store.get_utterance(args.speaker, args.utterance)
    else:
        e = store.get_speaker(args.speaker)
    save_container({"embedding": e.values}, args.output)
    print(f"wrote {e.dim}-dim embedding to {args.output}", file=sys.stderr)
    return 0


def cmd_embed_sim(args) -> int:
    a = SpeakerEmbedding(_embedding_values(args.a, args.store))
    b = SpeakerEmbedding(_embedding_values(args.b, args.store))
    print(f"{cosine_similarity(a, b):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srave",
        description="Streaming any-to-one voice conversion toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model(p):
        p.add_argument("--model", help="model container path (default: $SRAVE_MODEL)")

    def add_speaker(p):
        p.add_argument("--speaker", required=True, help="speaker id or embedding container path")
        p.add_argument("--store", default="speakers", help="embedding store directory")

    p = sub.add_parser("convert", help="convert a wav file to the target voice")
    add_model(p)
    add_speaker(p)
    p.add_argument("input", help="input wav (48 kHz mono)")
    p.add_argument("output", help="output wav path")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stream", help="convert raw float32 mono samples stdin -> stdout")
    add_model(p)
    add_speaker(p)
    p.add_argument("--chunk", type=int, default=1024, help="samples per chunk")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("bench", help="measure synthesis speed and real-time factor")
    add_model(p)
    p.add_argument("--duration", type=float, default=10.0, help="synthesized seconds per trial")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--mode", choices=("offline", "streaming"), default="offline")
    p.add_argument("--chunk", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="print model structure, or loss values with --losses")
    add_model(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("--losses", action="store_true", help="evaluate losses on the files below")
    p.add_argument("--reference", help="reference wav")
    p.add_argument("--converted", help="converted wav")
    p.add_argument("--targets", help="container with class_ids and frame_rate entries")
    p.add_argument("--logits", help="container with a z_p entry [classes, frames]")
    p.add_argument("--seed", type=int, default=0, help="discriminator build seed")
    p.add_argument("--msd-weight", type=float, default=0.1)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("init", help="build a freshly initialized model container")
    p.add_argument("output")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("pqmf-check", help="filter bank round-trip accuracy on seeded noise")
    p.add_argument("--bands", type=int, default=16)
    p.add_argument("--taps", type=int, default=512)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_pqmf_check)

    p = sub.add_parser("perturb", help="pitch/formant/eq perturbation of a wav file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--seed", type=int, help="draw random parameters from this seed")
    p.add_argument("--params", help="JSON file with pitch_ratio, formant_ratio, peq")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("embed", help="speaker embedding store operations")
    esub = p.add_subparsers(dest="embed_command", required=True)

    q = esub.add_parser("put", help="add one utterance embedding to the store")
    q.add_argument("--store", required=True)
    q.add_argument("speaker")
    q.add_argument("utterance")
    q.add_argument("file", help="container with an embedding entry")
    q.set_defaults(func=cmd_embed_put)

    q = esub.add_parser("get", help="write a speaker's normalized mean embedding")
    q.add_argument("--store", required=True)
    q.add_argument("--utterance", help="fetch this single utterance instead of the mean")
    q.add_argument("speaker")
    q.add_argument("output")
    q.set_defaults(func=cmd_embed_get)

    q = esub.add_parser("sim", help="cosine similarity of two embeddings")
    q.add_argument("--store", help="resolve bare speaker ids against this store")
    q.add_argument("a")
    q.add_argument("b")
    q.set_defaults(func=cmd_embed_sim)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        try:  # keep interpreter shutdown from re-raising on the dead pipe
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        except Exception:
            pass
        return 0
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except ModelError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except SraveError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # pragma: no cover - last-resort diagnostic
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
