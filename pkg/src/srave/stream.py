"""Chunked real-time conversion sessions and the synthesis-speed benchmark.

A session owns per-layer convolution caches plus the filterbank state, so
feeding a file chunk by chunk reproduces the offline conversion output
sample for sample (the stream lags it by the filterbank group delay). The
benchmark times the synthesis half (latent to audio) over repeated trials
and reports samples per second and the real-time factor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from .audio import Prng
from .errors import InputError
from .model import LatentSequence, Model
from .nn import BatchNorm, Linear, film_apply, leaky_relu, sigmoid
from .pqmf import (
    PqmfBank,
    analyze_streaming,
    design_bank,
    init_analysis_state,
    init_synthesis_state,
    synthesize,
    synthesize_streaming,
)


def _zero_caches(model: Model) -> dict:
    caches = {}
    for name, layer in model.named_layers():
        if isinstance(layer, (BatchNorm, Linear)):
            continue
        caches[name] = layer.init_state()
    return caches


def _embedding_array(model: Model, e) -> np.ndarray:
    values = np.asarray(getattr(e, "values", e), dtype=np.float32).reshape(-1)
    if values.shape[0] != model.config.speaker_dim:
        raise InputError(
            f"speaker embedding dim {values.shape[0]} != {model.config.speaker_dim}"
        )
    return values


def _encode_step(model: Model, caches: dict, bands_chunk: np.ndarray) -> np.ndarray:
    slope = model.config.lrelu_slope
    x, caches["enc.in"] = model.enc_in.step(bands_chunk, caches["enc.in"])
    x = leaky_relu(model.enc_in_bn.forward(x), slope)
    for i, (conv, bn) in enumerate(model.enc_stages):
        x, caches[f"enc.s{i}"] = conv.step(x, caches[f"enc.s{i}"])
        x = leaky_relu(bn.forward(x), slope)
    z, caches["enc.out"] = model.enc_out.step(x, caches["enc.out"])
    return z


def _decode_step(model: Model, caches: dict, films: list, z_chunk: np.ndarray) -> np.ndarray:
    slope = model.config.lrelu_slope
    x, caches["dec.in"] = model.dec_in.step(z_chunk, caches["dec.in"])
    for i, stage in enumerate(model.dec_stages):
        h = leaky_relu(x, slope)
        x, caches[f"dec.s{i}.up"] = stage.up.step(h, caches[f"dec.s{i}.up"])
        for u, (c1, c2) in enumerate(stage.units):
            a = leaky_relu(x, slope)
            a, caches[f"dec.s{i}.r{u}.c1"] = c1.step(a, caches[f"dec.s{i}.r{u}.c1"])
            a = leaky_relu(a, slope)
            a, caches[f"dec.s{i}.r{u}.c2"] = c2.step(a, caches[f"dec.s{i}.r{u}.c2"])
            x = film_apply(x + a, films[i])
    x = leaky_relu(x, slope)
    w, caches["head.wave"] = model.wave_head.step(x, caches["head.wave"])
    v, caches["head.env"] = model.env_head.step(x, caches["head.env"])
    return w * sigmoid(v)


@dataclass
class StreamSession:
    """Single-owner conversion stream; all mutable state lives here."""

    model: Model
    bank: PqmfBank
    embedding: np.ndarray
    chunk_size: int
    algorithmic_latency: int
    films: list
    caches: dict
    analysis_state: np.ndarray
    synthesis_state: np.ndarray
    closed: bool = False

    def close(self) -> None:
        self.closed = True


def open_session(model: Model, e, chunk_size: int = 1024, bank: PqmfBank | None = None) -> StreamSession:
    """Fresh session with zeroed caches; chunk_size must cover whole latent frames."""
    hop = model.config.latent_hop
    if chunk_size <= 0 or chunk_size % hop:
        raise InputError(f"chunk size must be a positive multiple of {hop}, got {chunk_size}")
    if bank is None:
        bank = design_bank(model.config.num_bands)
    if bank.num_bands != model.config.num_bands:
        raise InputError(f"bank has {bank.num_bands} bands, model expects {model.config.num_bands}")
    embedding = _embedding_array(model, e)
    films = [model.film_for_stage(i, embedding) for i in range(len(model.dec_stages))]
    # every conv in the graph is causal, so the stream lags the input by
    # the filterbank group delay alone
    return StreamSession(
        model=model,
        bank=bank,
        embedding=embedding,
        chunk_size=chunk_size,
        algorithmic_latency=bank.group_delay,
        films=films,
        caches=_zero_caches(model),
        analysis_state=init_analysis_state(bank),
        synthesis_state=init_synthesis_state(bank),
    )


def process_chunk(session: StreamSession, samples) -> np.ndarray:
    """Convert one chunk; emits exactly chunk_size samples.

    Concatenated over a whole signal this equals the offline convert path
    shifted by algorithmic_latency samples.
    """
    if session.closed:
        raise InputError("session closed")
    chunk = np.asarray(getattr(samples, "samples", samples), dtype=np.float32).reshape(-1)
    if chunk.shape[0] != session.chunk_size:
        raise InputError(f"expected {session.chunk_size} samples, got {chunk.shape[0]}")
    model = session.model
    bands, session.analysis_state = analyze_streaming(
        session.bank, session.analysis_state, chunk, model.config.sample_rate
    )
    content = np.ascontiguousarray(bands.bands[: model.config.content_bands], dtype=np.float32)
    z = _encode_step(model, session.caches, content)
    out_bands = _decode_step(model, session.caches, session.films, z)
    out, session.synthesis_state = synthesize_streaming(session.bank, session.synthesis_state, out_bands)
    return out


@dataclass(frozen=True)
class BenchReport:
    """Throughput measurement: samples per second and real-time factor."""

    synthesis_speed: float
    rtf: float
    trials: int
    chunk_size: int
    thread_mode: str = "single"

    def to_json(self) -> str:
        return json.dumps(
            {
                "speed_hz": self.synthesis_speed,
                "rtf": self.rtf,
                "trials": self.trials,
                "chunk": self.chunk_size,
            }
        )


def bench(
    model: Model,
    audio_duration: float,
    trials: int = 100,
    mode: str = "offline",
    chunk_size: int = 1024,
    bank: PqmfBank | None = None,
    seed: int = 0,
) -> BenchReport:
    """Time latent-to-audio synthesis of random inputs over repeated trials.

    One warm-up run is excluded from the timing. The report satisfies
    rtf * synthesis_speed = sample_rate by construction.
    """
    if trials < 1:
        raise InputError(f"need at least one trial, got {trials}")
    if audio_duration <= 0:
        raise InputError(f"audio duration must be positive, got {audio_duration}")
    if mode not in ("offline", "streaming"):
        raise InputError(f"mode must be 'offline' or 'streaming', got {mode!r}")
    hop = model.config.latent_hop
    if chunk_size <= 0 or chunk_size % hop:
        raise InputError(f"chunk size must be a positive multiple of {hop}, got {chunk_size}")
    if bank is None:
        bank = design_bank(model.config.num_bands)
    if bank.num_bands != model.config.num_bands:
        raise InputError(f"bank has {bank.num_bands} bands, model expects {model.config.num_bands}")

    step_frames = chunk_size // hop
    frames = max(1, math.ceil(audio_duration * model.config.latent_rate))
    frames = -(-frames // step_frames) * step_frames
    n = frames * hop
    prng = Prng(seed)
    z = prng.gauss_array(model.config.latent_dim * frames)
    z = z.reshape(model.config.latent_dim, frames).astype(np.float32)
    raw = prng.gauss_array(model.config.speaker_dim)
    e = (raw / np.linalg.norm(raw)).astype(np.float32)
    latent = LatentSequence(z, model.config.latent_rate)

    if mode == "offline":
        def run() -> None:
            synthesize(bank, model.decode(latent, e))
    else:
        films = [model.film_for_stage(i, e) for i in range(len(model.dec_stages))]

        def run() -> None:
            caches = _zero_caches(model)
            synth_state = init_synthesis_state(bank)
            for start in range(0, frames, step_frames):
                out_bands = _decode_step(model, caches, films, z[:, start : start + step_frames])
                _, synth_state = synthesize_streaming(bank, synth_state, out_bands)

    run()
    elapsed = []
    for _ in range(trials):
        t0 = perf_counter()
        run()
        elapsed.append(perf_counter() - t0)
    mean_time = max(sum(elapsed) / trials, 1e-12)
    speed = n / mean_time
    rtf = model.config.sample_rate / speed
    return BenchReport(
        synthesis_speed=speed,
        rtf=rtf,
        trials=trials,
        chunk_size=chunk_size if mode == "streaming" else n,
        thread_mode="single",
    )
