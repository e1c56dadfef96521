"""Voice-conversion graph: content encoder over the low PQMF bands to a
64-dim latent at 46.875 Hz, a projection head to 100 unit classes, and a
speaker-conditioned decoder emitting all 16 bands.

The decoder injects the speaker embedding through one linear layer per
upsampling stage whose output splits into per-channel scale and offset,
applied after every residual unit. The final stage multiplies a waveform
branch by a sigmoid amplitude envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .audio import AudioBuffer, Prng
from .errors import ContainerError, InputError, ModelError
from .nn import (
    BatchNorm,
    Conv1d,
    ConvTranspose1d,
    FiLMParams,
    Linear,
    config_to_entry,
    entry_to_config,
    film_apply,
    init_kaiming,
    leaky_relu,
    load_container,
    save_container,
    sigmoid,
)
from .pqmf import BandMatrix, PqmfBank, analyze, synthesize
from .speaker import film_from_embedding


@dataclass
class ModelConfig:
    sample_rate: int = 48000
    num_bands: int = 16
    content_bands: int = 5
    latent_dim: int = 64
    num_classes: int = 100
    speaker_dim: int = 512
    encoder_channels: tuple[int, ...] = (128, 256, 512, 1024)
    encoder_strides: tuple[int, ...] = (4, 4, 4)
    residual_units: int = 3
    input_kernel: int = 7
    latent_kernel: int = 3
    head_kernel: int = 7
    lrelu_slope: float = 0.2

    @property
    def stride_product(self) -> int:
        return math.prod(self.encoder_strides)

    @property
    def latent_hop(self) -> int:
        """Audio samples per latent frame."""
        return self.num_bands * self.stride_product

    @property
    def latent_rate(self) -> float:
        return self.sample_rate / self.latent_hop

    def validate(self, expected_hop: int | None = 1024) -> None:
        if len(self.encoder_channels) != len(self.encoder_strides) + 1:
            raise ModelError(
                f"need {len(self.encoder_strides) + 1} channel widths for "
                f"{len(self.encoder_strides)} strided stages, got {len(self.encoder_channels)}"
            )
        if self.content_bands > self.num_bands:
            raise ModelError(f"content_bands {self.content_bands} exceeds num_bands {self.num_bands}")
        if expected_hop is not None and self.latent_hop != expected_hop:
            raise ModelError(
                f"stride product {self.stride_product} x {self.num_bands} bands gives hop "
                f"{self.latent_hop}, expected {expected_hop}"
            )

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(i) for i in v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ModelError(f"unknown config key {key!r}")
            kind = str(known[key].type)
            if "tuple" in kind:
                kwargs[key] = tuple(int(p) for p in raw.split(",") if p.strip())
            elif "float" in kind:
                kwargs[key] = float(raw)
            else:
                kwargs[key] = int(raw)
        return cls(**kwargs)


@dataclass
class LatentSequence:
    z: np.ndarray
    frame_rate: float

    @property
    def frames(self) -> int:
        return self.z.shape[1]


@dataclass
class ProjectedLogits:
    z_p: np.ndarray


@dataclass
class _DecoderStage:
    up: ConvTranspose1d
    units: list[tuple[Conv1d, Conv1d]]
    film: Linear


@dataclass
class Model:
    config: ModelConfig
    enc_in: Conv1d
    enc_in_bn: BatchNorm
    enc_stages: list[tuple[Conv1d, BatchNorm]]
    enc_out: Conv1d
    projection: Linear
    dec_in: Conv1d
    dec_stages: list[_DecoderStage]
    wave_head: Conv1d
    env_head: Conv1d

    @classmethod
    def build(
        cls,
        config: ModelConfig,
        seed: int = 0,
        expected_hop: int | None = 1024,
        init_weights: bool = True,
    ) -> "Model":
        """Assemble the graph and draw deterministic random weights."""
        config.validate(expected_hop)
        ch = config.encoder_channels
        enc_in = Conv1d(config.content_bands, ch[0], config.input_kernel)
        enc_in_bn = BatchNorm(ch[0])
        enc_stages = []
        for i, stride in enumerate(config.encoder_strides):
            conv = Conv1d(ch[i], ch[i + 1], 2 * stride, stride=stride)
            enc_stages.append((conv, BatchNorm(ch[i + 1])))
        enc_out = Conv1d(ch[-1], config.latent_dim, config.latent_kernel)
        projection = Linear(config.latent_dim, config.num_classes)

        dec_ch = tuple(reversed(ch))
        dec_in = Conv1d(config.latent_dim, dec_ch[0], config.latent_kernel)
        dec_stages = []
        for i, stride in enumerate(reversed(config.encoder_strides)):
            c_out = dec_ch[i + 1]
            up = ConvTranspose1d(dec_ch[i], c_out, 2 * stride, stride)
            units = []
            for u in range(config.residual_units):
                units.append((Conv1d(c_out, c_out, 3, dilation=3**u), Conv1d(c_out, c_out, 1)))
            dec_stages.append(_DecoderStage(up, units, Linear(config.speaker_dim, 2 * c_out)))
        wave_head = Conv1d(dec_ch[-1], config.num_bands, config.head_kernel)
        env_head = Conv1d(dec_ch[-1], config.num_bands, config.head_kernel)

        model = cls(
            config, enc_in, enc_in_bn, enc_stages, enc_out, projection,
            dec_in, dec_stages, wave_head, env_head,
        )
        if init_weights:
            prng = Prng(seed)
            for _, layer in model.named_layers():
                if not isinstance(layer, BatchNorm):
                    init_kaiming(prng, layer)
        return model

    def named_layers(self):
        """Deterministic (name, layer) walk; the order fixes weight draws."""
        yield "enc.in", self.enc_in
        yield "enc.in.bn", self.enc_in_bn
        for i, (conv, bn) in enumerate(self.enc_stages):
            yield f"enc.s{i}", conv
            yield f"enc.s{i}.bn", bn
        yield "enc.out", self.enc_out
        yield "proj", self.projection
        yield "dec.in", self.dec_in
        for i, stage in enumerate(self.dec_stages):
            yield f"dec.s{i}.up", stage.up
            for u, (c1, c2) in enumerate(stage.units):
                yield f"dec.s{i}.r{u}.c1", c1
                yield f"dec.s{i}.r{u}.c2", c2
            yield f"dec.s{i}.film", stage.film
        yield "head.wave", self.wave_head
        yield "head.env", self.env_head

    def encode(self, bands: BandMatrix) -> LatentSequence:
        """First content_bands rows -> latent [latent_dim x frames/stride_product]."""
        if bands.num_bands < self.config.content_bands:
            raise InputError(
                f"need at least {self.config.content_bands} bands, got {bands.num_bands}"
            )
        if bands.frames % self.config.stride_product:
            raise InputError(
                f"{bands.frames} band frames not divisible by stride product "
                f"{self.config.stride_product}"
            )
        slope = self.config.lrelu_slope
        x = np.ascontiguousarray(bands.bands[: self.config.content_bands], dtype=np.float32)
        x = leaky_relu(self.enc_in_bn.forward(self.enc_in.forward(x)), slope)
        for conv, bn in self.enc_stages:
            x = leaky_relu(bn.forward(conv.forward(x)), slope)
        z = self.enc_out.forward(x)
        return LatentSequence(z, bands.band_rate / self.config.stride_product)

    def project(self, z: LatentSequence) -> ProjectedLogits:
        """Per-frame linear map to class logits; not part of conversion."""
        if z.z.shape[0] != self.config.latent_dim:
            raise InputError(f"latent dim {z.z.shape[0]} != {self.config.latent_dim}")
        return ProjectedLogits(self.projection.weight @ z.z + self.projection.bias[:, None])

    def film_for_stage(self, stage_index: int, e: np.ndarray) -> FiLMParams:
        """Conditioning parameters for one decoder stage from the embedding."""
        return film_from_embedding(e, self.dec_stages[stage_index].film)

    def decode(self, z: LatentSequence, e: np.ndarray) -> BandMatrix:
        e = np.asarray(e, dtype=np.float32).reshape(-1)
        if e.shape[0] != self.config.speaker_dim:
            raise InputError(f"speaker embedding dim {e.shape[0]} != {self.config.speaker_dim}")
        slope = self.config.lrelu_slope
        x = self.dec_in.forward(np.asarray(z.z, dtype=np.float32))
        for i, stage in enumerate(self.dec_stages):
            x = stage.up.forward(leaky_relu(x, slope))
            film = self.film_for_stage(i, e)
            for c1, c2 in stage.units:
                x = x + c2.forward(leaky_relu(c1.forward(leaky_relu(x, slope)), slope))
                x = film_apply(x, film)
        x = leaky_relu(x, slope)
        out = self.wave_head.forward(x) * sigmoid(self.env_head.forward(x))
        return BandMatrix(out, z.frame_rate * self.config.stride_product)

    def param_count(self) -> int:
        """Scalar weights in the conversion graph; the projection head is
        inference-omittable and counted by param_breakdown separately."""
        return sum(l.param_count() for n, l in self.named_layers() if n != "proj")

    def param_breakdown(self) -> dict[str, int]:
        enc = dec = 0
        for name, layer in self.named_layers():
            if name == "proj":
                continue
            if name.startswith("enc"):
                enc += layer.param_count()
            else:
                dec += layer.param_count()
        return {
            "encoder": enc,
            "decoder": dec,
            "total": enc + dec,
            "projection": self.projection.param_count(),
        }


def convert(model: Model, bank: PqmfBank, x: AudioBuffer, e: np.ndarray) -> AudioBuffer:
    """Full pipeline analyze -> encode -> decode -> synthesize, padded to a
    whole number of latent frames and trimmed back so output length equals
    input length with the filterbank delay compensated."""
    if x.sample_rate != model.config.sample_rate:
        raise InputError(
            f"wrong sample rate: model expects {model.config.sample_rate} Hz, got {x.sample_rate}"
        )
    if bank.num_bands != model.config.num_bands:
        raise InputError(f"bank has {bank.num_bands} bands, model expects {model.config.num_bands}")
    hop = model.config.latent_hop
    total = -(-(len(x) + bank.group_delay) // hop) * hop
    padded = np.zeros(total, dtype=np.float32)
    padded[: len(x)] = x.samples
    bands = analyze(bank, AudioBuffer(x.sample_rate, padded))
    out_bands = model.decode(model.encode(bands), e)
    y = synthesize(bank, out_bands)
    return AudioBuffer(x.sample_rate, y.samples[bank.group_delay : bank.group_delay + len(x)])


def save_model(model: Model, path) -> None:
    entries: list[tuple[str, np.ndarray]] = [("__config__", config_to_entry(model.config.to_text()))]
    for name, layer in model.named_layers():
        if isinstance(layer, BatchNorm):
            entries.extend(
                (f"{name}.{k}", getattr(layer, k)) for k in ("mean", "var", "gain", "bias")
            )
        else:
            entries.append((f"{name}.w", layer.weight))
            entries.append((f"{name}.b", layer.bias))
    save_container(entries, path)


def load_model(path, expected_hop: int | None = 1024) -> Model:
    entries = load_container(path)
    if "__config__" not in entries:
        raise ContainerError(f"missing __config__ entry: {path}")
    config = ModelConfig.from_text(entry_to_config(entries["__config__"]))
    model = Model.build(config, expected_hop=expected_hop, init_weights=False)
    for name, layer in model.named_layers():
        keys = ("mean", "var", "gain", "bias") if isinstance(layer, BatchNorm) else ("w", "b")
        for k in keys:
            full = f"{name}.{k}"
            if full not in entries:
                raise ContainerError(f"missing entry {full!r}: {path}")
            loaded = entries[full]
            attr = {"w": "weight", "b": "bias"}.get(k, k)
            current = getattr(layer, attr)
            if loaded.shape != current.shape:
                raise ContainerError(
                    f"shape mismatch for {full!r}: file {loaded.shape}, model {current.shape}"
                )
            setattr(layer, attr, loaded)
    return model
