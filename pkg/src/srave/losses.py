"""Objective functions and discriminator forward passes.

Everything here is a pure forward computation: multi-resolution
log-magnitude spectral distance, frame-wise cross entropy against
discrete unit targets, and hinge adversarial terms over three
discriminator families (multi-scale on raw audio, multi-period on
phase-folded audio, multi-resolution on log-magnitude spectrograms).
No gradients, no parameter updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio import AudioBuffer, Prng
from .errors import InputError
from .nn import Conv1d, init_kaiming, leaky_relu

MAGNITUDE_FLOOR = 1e-7
MPD_PERIODS = (2, 3, 5, 7, 11)
MSD_SCALES = 3
# latent frames per second of a 48 kHz model with hop 1024
DEFAULT_LOGIT_RATE = 48000.0 / 1024.0
FAMILIES = ("msd", "mpd", "mrstft")


@dataclass(frozen=True)
class StftResolution:
    """One spectral analysis setting: FFT size, hop and Hann window length."""

    fft_size: int
    hop: int
    window_length: int

    def __post_init__(self):
        if not 1 <= self.hop <= self.window_length <= self.fft_size:
            raise InputError(f"need 1 <= hop <= window_length <= fft_size, got {self}")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1


DEFAULT_RESOLUTIONS = (
    StftResolution(2048, 512, 2048),
    StftResolution(1024, 256, 1024),
    StftResolution(512, 128, 512),
)


@dataclass
class DsuTargets:
    """Discrete unit class ids emitted at a fixed frame rate."""

    class_ids: np.ndarray
    frame_rate: float
    num_classes: int = 100

    def __post_init__(self):
        ids = np.asarray(self.class_ids, dtype=np.int64).reshape(-1)
        if self.frame_rate <= 0.0:
            raise InputError(f"frame rate must be positive, got {self.frame_rate}")
        if self.num_classes < 1:
            raise InputError(f"need at least one unit class, got {self.num_classes}")
        if ids.size and (ids.min() < 0 or ids.max() >= self.num_classes):
            raise InputError(f"class id out of range [0, {self.num_classes})")
        self.class_ids = ids

    @property
    def frames(self) -> int:
        return int(self.class_ids.size)


@dataclass(frozen=True)
class LossWeights:
    """Scale applied to the multi-scale family in both loss compositions."""

    msd_weight: float = 0.1

    def __post_init__(self):
        if not self.msd_weight >= 0.0:
            raise InputError(f"msd_weight must be >= 0, got {self.msd_weight}")


def _mono_samples(x) -> np.ndarray:
    samples = x.samples if isinstance(x, AudioBuffer) else x
    return np.asarray(samples, dtype=np.float64).reshape(-1)


def _hann_window(length: int) -> np.ndarray:
    k = np.arange(length, dtype=np.float64)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / length)


def stft_logmag(x, res: StftResolution) -> np.ndarray:
    """Log magnitude spectrogram [bins, frames] with frames centered on i*hop.

    The left overhang of the first frames is reflect padded, the right end
    is zero padded, which fixes the frame count at 1 + ceil(len/hop).
    Magnitudes are floored at MAGNITUDE_FLOOR before the log so silence
    stays finite.
    """
    samples = _mono_samples(x)
    n = samples.size
    if n < res.window_length:
        raise InputError(f"signal shorter than one analysis window ({n} < {res.window_length})")
    half = res.window_length // 2
    frames = 1 + math.ceil(n / res.hop)
    needed = res.window_length + res.hop * (frames - 1)
    padded = np.pad(samples, (half, 0), mode="reflect")
    padded = np.pad(padded, (0, needed - padded.size))
    windows = sliding_window_view(padded, res.window_length)[:: res.hop][:frames]
    spec = np.fft.rfft(windows * _hann_window(res.window_length), n=res.fft_size, axis=1)
    return np.log(np.maximum(np.abs(spec), MAGNITUDE_FLOOR)).T


def loss_stft(x, x_hat, res: StftResolution) -> float:
    """Mean absolute log-magnitude difference at one resolution."""
    a = _mono_samples(x)
    b = _mono_samples(x_hat)
    if a.size != b.size:
        raise InputError(f"length mismatch: {a.size} != {b.size}")
    return float(np.mean(np.abs(stft_logmag(a, res) - stft_logmag(b, res))))


def loss_mstft(x, x_hat, resolutions=DEFAULT_RESOLUTIONS) -> float:
    """Arithmetic mean of the single-resolution spectral losses."""
    resolutions = tuple(resolutions)
    if not resolutions:
        raise InputError("need at least one STFT resolution")
    return float(np.mean([loss_stft(x, x_hat, r) for r in resolutions]))


def loss_content(y: DsuTargets, z_p, logit_rate: float = DEFAULT_LOGIT_RATE) -> float:
    """Mean cross entropy of projected logits against unit targets.

    Logits and targets usually run at different frame rates; every logit
    frame reads the target whose center time is nearest. The two streams
    must span the same duration to within one frame.
    """
    values = np.asarray(getattr(z_p, "z_p", z_p), dtype=np.float64)
    if values.ndim != 2:
        raise InputError(f"expected [classes, frames] logits, got shape {values.shape}")
    k, t_logits = values.shape
    if k != y.num_classes:
        raise InputError(f"class count mismatch: targets have {y.num_classes}, logits {k}")
    if t_logits == 0 or y.frames == 0:
        raise InputError("cannot align empty frame sequences")
    if logit_rate <= 0.0:
        raise InputError(f"logit rate must be positive, got {logit_rate}")
    dur_logits = t_logits / logit_rate
    dur_targets = y.frames / y.frame_rate
    if abs(dur_logits - dur_targets) > max(1.0 / logit_rate, 1.0 / y.frame_rate):
        raise InputError(
            "frame mismatch after alignment: "
            f"{t_logits} logit frames span {dur_logits:.4f}s, "
            f"{y.frames} target frames span {dur_targets:.4f}s"
        )
    centers = (np.arange(t_logits) + 0.5) / logit_rate
    nearest = np.rint(centers * y.frame_rate - 0.5).astype(np.int64)
    picked = y.class_ids[np.clip(nearest, 0, y.frames - 1)]
    # max subtraction keeps exp() in range for arbitrarily large logits
    high = values.max(axis=0)
    log_norm = high + np.log(np.exp(values - high).sum(axis=0))
    return float(np.mean(log_norm - values[picked, np.arange(t_logits)]))


# (in_channels, out_channels, kernel, stride) per layer; the last row is the
# score head, every earlier layer is followed by a leaky relu
_MSD_LAYERS = (
    (1, 16, 15, 1),
    (16, 64, 41, 4),
    (64, 256, 41, 4),
    (256, 512, 41, 4),
    (512, 512, 5, 1),
    (512, 1, 3, 1),
)
_MPD_LAYERS = (
    (1, 32, 5, 3),
    (32, 128, 5, 3),
    (128, 256, 5, 3),
    (256, 256, 5, 1),
    (256, 1, 3, 1),
)


def _spectrogram_layers(bins: int):
    return (
        (bins, 32, 3, 1),
        (32, 64, 3, 2),
        (64, 128, 3, 2),
        (128, 128, 3, 1),
        (128, 1, 3, 1),
    )


def _build_stack(prng: Prng, shapes) -> list[Conv1d]:
    stack = []
    for cin, cout, kernel, stride in shapes:
        layer = Conv1d(cin, cout, kernel, stride=stride, causal=False)
        init_kaiming(prng, layer)
        stack.append(layer)
    return stack


@dataclass
class DiscriminatorSet:
    """Three frozen discriminator families drawn from one seed."""

    msd: list
    mpd: dict
    mrstft_d: list
    resolutions: tuple

    @staticmethod
    def build(seed: int = 0, resolutions=DEFAULT_RESOLUTIONS) -> "DiscriminatorSet":
        resolutions = tuple(resolutions)
        if not resolutions:
            raise InputError("need at least one STFT resolution")
        prng = Prng(seed)
        msd = [_build_stack(prng, _MSD_LAYERS) for _ in range(MSD_SCALES)]
        mpd = {p: _build_stack(prng, _MPD_LAYERS) for p in MPD_PERIODS}
        mrstft_d = [_build_stack(prng, _spectrogram_layers(r.bins)) for r in resolutions]
        return DiscriminatorSet(msd, mpd, mrstft_d, resolutions)

    def param_count(self) -> int:
        stacks = [*self.msd, *self.mpd.values(), *self.mrstft_d]
        return sum(layer.param_count() for stack in stacks for layer in stack)


def avg_pool(x, factor: int) -> np.ndarray:
    """Non-overlapping mean pooling; trailing remainder samples are dropped."""
    x = np.asarray(x, dtype=np.float32).reshape(-1)
    if factor < 1:
        raise InputError(f"pool factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    keep = x.size - x.size % factor
    return x[:keep].reshape(-1, factor).mean(axis=1, dtype=np.float32)


def period_slab(x, period: int) -> np.ndarray:
    """Fold a signal into [period, len/period] phase rows, zero padding the tail."""
    if period < 1:
        raise InputError(f"period must be >= 1, got {period}")
    x = np.asarray(x, dtype=np.float32).reshape(-1)
    pad = (-x.size) % period
    return np.pad(x, (0, pad)).reshape(-1, period).T


def _min_frames(stack) -> int:
    # smallest input length that leaves every layer at least one output
    need = 1
    for layer in reversed(stack):
        need = (need - 1) * layer.stride + layer.lookback + 1
    return need


def _run_stack(stack, h: np.ndarray):
    features = []
    for layer in stack[:-1]:
        h = leaky_relu(layer.forward(h))
        features.append(h)
    return stack[-1].forward(h), features


def msd_forward(disc: DiscriminatorSet, x):
    """Score map [T] and feature maps [C, T] per pooled-scale branch."""
    mono = np.asarray(_mono_samples(x), dtype=np.float32)
    scores, features = [], []
    for index, stack in enumerate(disc.msd):
        factor = 2**index
        pooled = avg_pool(mono, factor)
        need = _min_frames(stack)
        if pooled.size < need:
            raise InputError(
                f"input too short for scale branch {index}: "
                f"need {need * factor} samples, got {mono.size}"
            )
        score, feats = _run_stack(stack, pooled[None, :])
        scores.append(score[0])
        features.append(feats)
    return scores, features


def mpd_forward(disc: DiscriminatorSet, x):
    """Score map [p, T] and feature maps [p, C, T] per period branch.

    Each phase row passes through the branch stack with shared weights,
    so the branch acts on the [period, len/period] slab as a 2-D
    convolution whose kernel has width one along the period axis.
    """
    mono = np.asarray(_mono_samples(x), dtype=np.float32)
    scores, features = [], []
    for period, stack in disc.mpd.items():
        slab = period_slab(mono, period)
        need = _min_frames(stack)
        if slab.shape[1] < need:
            raise InputError(
                f"input too short for period branch {period}: "
                f"need {need * period} samples, got {mono.size}"
            )
        row_scores = []
        row_feats = [[] for _ in range(len(stack) - 1)]
        for row in slab:
            score, feats = _run_stack(stack, row[None, :])
            row_scores.append(score[0])
            for i, f in enumerate(feats):
                row_feats[i].append(f)
        scores.append(np.stack(row_scores))
        features.append([np.stack(f) for f in row_feats])
    return scores, features


def mrstftd_forward(disc: DiscriminatorSet, x):
    """Score map [T] and feature maps [C, T] per spectrogram branch."""
    mono = _mono_samples(x)
    scores, features = [], []
    for res, stack in zip(disc.resolutions, disc.mrstft_d):
        need = _min_frames(stack)
        min_len = max(res.window_length, (need - 2) * res.hop + 1)
        if mono.size < min_len:
            raise InputError(
                f"input too short for spectrogram branch (fft {res.fft_size}): "
                f"need {min_len} samples, got {mono.size}"
            )
        spec = stft_logmag(mono, res).astype(np.float32)
        score, feats = _run_stack(stack, spec)
        scores.append(score[0])
        features.append(feats)
    return scores, features


def discriminator_scores(disc: DiscriminatorSet, x) -> dict:
    """Score maps from all three families, keyed by family name."""
    return {
        "msd": msd_forward(disc, x)[0],
        "mpd": mpd_forward(disc, x)[0],
        "mrstft": mrstftd_forward(disc, x)[0],
    }


def _checked_families(scores_per_disc) -> dict:
    for name in FAMILIES:
        if name not in scores_per_disc:
            raise InputError(f"missing discriminator family '{name}'")
        if len(scores_per_disc[name]) == 0:
            raise InputError(f"no score maps for family '{name}'")
    return scores_per_disc


def generator_family_terms(scores_per_disc) -> dict:
    """Hinge generator term per family: mean of -score, averaged over branches."""
    scores = _checked_families(scores_per_disc)
    terms = {}
    for name in FAMILIES:
        branch = [float(np.mean(-np.asarray(m, dtype=np.float64))) for m in scores[name]]
        terms[name] = float(np.mean(branch))
    return terms


def adv_generator_loss(scores_per_disc, w: LossWeights = LossWeights()) -> float:
    """Adversarial generator loss: msd_weight * msd + mpd + mrstft."""
    terms = generator_family_terms(scores_per_disc)
    return w.msd_weight * terms["msd"] + terms["mpd"] + terms["mrstft"]


def total_generator_loss(adv: float, mstft: float, cont: float) -> float:
    """Plain sum of the adversarial, spectral and content objectives."""
    return float(adv) + float(mstft) + float(cont)


def discriminator_family_terms(scores_real, scores_fake) -> dict:
    """Hinge real/fake terms per family, averaged over branches."""
    real = _checked_families(scores_real)
    fake = _checked_families(scores_fake)
    terms = {}
    for name in FAMILIES:
        if len(real[name]) != len(fake[name]):
            raise InputError(
                f"mismatched discriminator families: {len(real[name])} real vs "
                f"{len(fake[name])} fake maps for '{name}'"
            )
        branch = []
        for r, f in zip(real[name], fake[name]):
            r = np.asarray(r, dtype=np.float64)
            f = np.asarray(f, dtype=np.float64)
            branch.append(
                float(np.mean(np.maximum(0.0, 1.0 - r)) + np.mean(np.maximum(0.0, 1.0 + f)))
            )
        terms[name] = float(np.mean(branch))
    return terms


def discriminator_loss(scores_real, scores_fake, w: LossWeights = LossWeights()) -> float:
    """Discriminator hinge loss with the same family weighting as the generator."""
    terms = discriminator_family_terms(scores_real, scores_fake)
    return w.msd_weight * terms["msd"] + terms["mpd"] + terms["mrstft"]
