"""Inference-only neural runtime on float32 numpy arrays.

Layers operate on [channels, time] arrays. Every time-aware layer has two
entry points: ``forward`` for whole buffers and ``step`` for chunked
streaming with an explicit carry state, and the two are equivalent: the
concatenation of ``step`` outputs over any chunking of the input matches
``forward`` to float accumulation error.

Causal convolutions look back (kernel-1)*dilation samples and never ahead,
which is what makes the cached streaming form possible.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio import Prng
from .errors import ContainerError, ModelError

CONTAINER_MAGIC = b"SRAV"
CONTAINER_VERSION = 1


@dataclass
class FiLMParams:
    """Per-channel affine modulation: x -> gamma * x + beta."""

    gamma: np.ndarray
    beta: np.ndarray


def leaky_relu(x: np.ndarray, slope: float = 0.2) -> np.ndarray:
    return np.where(x >= 0, x, np.float32(slope) * x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    np.negative(np.abs(x), out=out)
    np.exp(out, out=out)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + out[pos])
    neg = ~pos
    out[neg] = out[neg] / (1.0 + out[neg])
    return out


def film_apply(x: np.ndarray, params: FiLMParams) -> np.ndarray:
    """Scale-then-offset each channel, broadcast over time."""
    gamma = np.asarray(params.gamma, dtype=np.float32)
    beta = np.asarray(params.beta, dtype=np.float32)
    if gamma.shape[0] != x.shape[0] or beta.shape[0] != x.shape[0]:
        raise ModelError(
            f"FiLM channel mismatch: x has {x.shape[0]}, gamma {gamma.shape[0]}, beta {beta.shape[0]}"
        )
    return gamma[:, None] * x + beta[:, None]


def batchnorm_apply(x, mean, var, gain, bias, eps: float = 1e-5) -> np.ndarray:
    """Inference-form batch normalization with stored statistics."""
    mean, var, gain, bias = (np.asarray(v, dtype=np.float32) for v in (mean, var, gain, bias))
    if not (mean.shape[0] == var.shape[0] == gain.shape[0] == bias.shape[0] == x.shape[0]):
        raise ModelError("batchnorm statistic length does not match channel count")
    scale = gain / np.sqrt(var + np.float32(eps))
    return scale[:, None] * (x - mean[:, None]) + bias[:, None]


class Conv1d:
    """1-D convolution, weight [out, in, k], kernel tap i reaching i*dilation
    samples back: out[j] = sum_i w[..,i] * x[.., j*stride - i*dilation].

    Causal mode left-pads with zeros so output j only uses input up to
    j*stride, and output length is exactly T/stride.
    """

    def __init__(self, in_channels, out_channels, kernel, stride=1, dilation=1, causal=True):
        if kernel < 1 or stride < 1 or dilation < 1:
            raise ModelError("kernel, stride and dilation must be >= 1")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.dilation = dilation
        self.causal = causal
        self.weight = np.zeros((out_channels, in_channels, kernel), dtype=np.float32)
        self.bias = np.zeros(out_channels, dtype=np.float32)
        # float64 here buys order-independent accumulation where a module
        # needs streaming and offline paths to agree beyond float32 noise
        self.compute_dtype = np.float32

    @property
    def lookback(self) -> int:
        return (self.kernel - 1) * self.dilation

    def _correlate(self, x: np.ndarray) -> np.ndarray:
        # window j spans x[j*s .. j*s + lookback]; reversing the kernel turns
        # the look-back indexing into a plain forward dot over the window
        span = self.lookback + 1
        x = x.astype(self.compute_dtype, copy=False)
        win = sliding_window_view(x, span, axis=1)[:, :: self.stride, :: self.dilation]
        w = self.weight[:, :, ::-1].astype(self.compute_dtype)
        out = np.tensordot(w, win, axes=([1, 2], [0, 2]))
        out += self.bias[:, None]
        return np.ascontiguousarray(out, dtype=np.float32)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float32)
        if x.ndim != 2 or x.shape[0] != self.in_channels:
            raise ModelError(f"expected [{self.in_channels}, T] input, got {x.shape}")
        if self.causal:
            if x.shape[1] % self.stride != 0:
                raise ModelError(f"time length {x.shape[1]} not divisible by stride {self.stride}")
            x = np.pad(x, ((0, 0), (self.lookback, 0)))
        else:
            if x.shape[1] < self.lookback + 1:
                raise ModelError("input shorter than receptive field")
        return self._correlate(x)

    def init_state(self) -> np.ndarray:
        return np.zeros((self.in_channels, self.lookback), dtype=np.float32)

    def step(self, chunk: np.ndarray, state: np.ndarray):
        if not self.causal:
            raise ModelError("streaming requires a causal convolution")
        chunk = np.asarray(chunk, dtype=np.float32)
        if chunk.shape[1] % self.stride != 0:
            raise ModelError(f"chunk length {chunk.shape[1]} not divisible by stride {self.stride}")
        if chunk.shape[1] == 0:
            return np.zeros((self.out_channels, 0), dtype=np.float32), state
        buf = np.concatenate([state, chunk], axis=1)
        out = self._correlate(buf)
        hist = state.shape[1]
        return out, buf[:, buf.shape[1] - hist :].copy() if hist else state

    def param_count(self) -> int:
        return self.weight.size + self.bias.size


class ConvTranspose1d:
    """Strided transposed convolution, weight [in, out, k].

    The causal convention keeps the first T*stride output samples; the
    kernel tail beyond that is the carry for streaming.
    """

    def __init__(self, in_channels, out_channels, kernel, stride):
        if kernel < stride:
            raise ModelError("kernel must be >= stride for a gapless transposed conv")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.weight = np.zeros((in_channels, out_channels, kernel), dtype=np.float32)
        self.bias = np.zeros(out_channels, dtype=np.float32)
        self.compute_dtype = np.float32

    def _scatter(self, x: np.ndarray) -> np.ndarray:
        t = x.shape[1]
        full = np.zeros((self.out_channels, (t - 1) * self.stride + self.kernel), dtype=self.compute_dtype)
        w = self.weight.astype(self.compute_dtype, copy=False)
        g = np.tensordot(w, x.astype(self.compute_dtype, copy=False), axes=([0], [0]))  # [out, k, t]
        for i in range(self.kernel):
            full[:, i : i + (t - 1) * self.stride + 1 : self.stride] += g[:, i, :]
        return full

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float32)
        if x.ndim != 2 or x.shape[0] != self.in_channels:
            raise ModelError(f"expected [{self.in_channels}, T] input, got {x.shape}")
        if x.shape[1] == 0:
            return np.zeros((self.out_channels, 0), dtype=np.float32)
        out = self._scatter(x)[:, : x.shape[1] * self.stride]
        out += self.bias[:, None]
        return np.ascontiguousarray(out, dtype=np.float32)

    def init_state(self) -> np.ndarray:
        # streaming state holds partial sums, so it lives in compute dtype
        return np.zeros((self.out_channels, self.kernel - self.stride), dtype=self.compute_dtype)

    def step(self, chunk: np.ndarray, state: np.ndarray):
        chunk = np.asarray(chunk, dtype=np.float32)
        t = chunk.shape[1]
        if t == 0:
            return np.zeros((self.out_channels, 0), dtype=np.float32), state
        full = self._scatter(chunk)
        tail = self.kernel - self.stride
        if tail:
            full[:, :tail] += state
        emit = (full[:, : t * self.stride] + self.bias[:, None]).astype(np.float32)
        return emit, full[:, t * self.stride :].copy()

    def param_count(self) -> int:
        return self.weight.size + self.bias.size


class BatchNorm:
    """Stored-statistics batch norm; stateless over time."""

    def __init__(self, channels, eps: float = 1e-5):
        self.channels = channels
        self.eps = eps
        self.mean = np.zeros(channels, dtype=np.float32)
        self.var = np.ones(channels, dtype=np.float32)
        self.gain = np.ones(channels, dtype=np.float32)
        self.bias = np.zeros(channels, dtype=np.float32)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return batchnorm_apply(x, self.mean, self.var, self.gain, self.bias, self.eps)

    def param_count(self) -> int:
        return 4 * self.channels


class Linear:
    """Dense map for vectors, weight [out, in]."""

    def __init__(self, in_features, out_features):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = np.zeros((out_features, in_features), dtype=np.float32)
        self.bias = np.zeros(out_features, dtype=np.float32)

    def forward(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float32)
        if v.shape[-1] != self.in_features:
            raise ModelError(f"expected {self.in_features} inputs, got {v.shape}")
        return self.weight @ v + self.bias

    def param_count(self) -> int:
        return self.weight.size + self.bias.size


def init_kaiming(prng: Prng, layer) -> None:
    """Fan-in scaled Gaussian weights, zero bias, drawn from the shared PRNG."""
    w = layer.weight
    if isinstance(layer, ConvTranspose1d):
        fan_in = w.shape[0] * w.shape[2]
    elif w.ndim == 3:
        fan_in = w.shape[1] * w.shape[2]
    else:
        fan_in = w.shape[1]
    std = np.sqrt(2.0 / fan_in)
    layer.weight = (prng.gauss_array(w.size) * std).astype(np.float32).reshape(w.shape)
    layer.bias = np.zeros_like(layer.bias)


def save_container(entries, path) -> None:
    """Write named float32 tensors to the portable container format.

    Layout: magic "SRAV", u32 version, u32 count, then per entry
    u16 name length + UTF-8 name, u8 rank, u32 dims, float32 LE payload.
    """
    items = list(entries.items()) if isinstance(entries, dict) else list(entries)
    names = [n for n, _ in items]
    if len(set(names)) != len(names):
        raise ContainerError("duplicate name in container entries")
    blob = bytearray(CONTAINER_MAGIC)
    blob += struct.pack("<II", CONTAINER_VERSION, len(items))
    for name, arr in items:
        arr = np.asarray(arr, dtype="<f4")
        if not arr.flags.c_contiguous:
            arr = arr.copy()  # keep rank-0 shapes; ascontiguousarray would promote them
        enc = name.encode("utf-8")
        blob += struct.pack("<H", len(enc)) + enc
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.tobytes()
    with open(path, "wb") as f:
        f.write(blob)


def load_container(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 12:
        raise ContainerError(f"truncated container: {path}")
    if data[:4] != CONTAINER_MAGIC:
        raise ContainerError(f"bad magic {data[:4]!r}: {path}")
    version, count = struct.unpack("<II", data[4:12])
    if version != CONTAINER_VERSION:
        raise ContainerError(f"version mismatch: file has {version}, expected {CONTAINER_VERSION}")
    out: dict[str, np.ndarray] = {}
    pos = 12
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            size = int(np.prod(shape, dtype=np.int64)) if rank else 1
            payload = data[pos : pos + 4 * size]
            if len(payload) < 4 * size:
                raise ContainerError(f"truncated payload for entry {name!r}: {path}")
            pos += 4 * size
            if name in out:
                raise ContainerError(f"duplicate name {name!r}: {path}")
            out[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    except struct.error as exc:
        raise ContainerError(f"truncated container: {path}") from exc
    return out


def config_to_entry(text: str) -> np.ndarray:
    """UTF-8 text as a 1-D float32 tensor of byte values."""
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.float32)


def entry_to_config(arr: np.ndarray) -> str:
    return bytes(np.asarray(arr).astype(np.uint8)).decode("utf-8")
