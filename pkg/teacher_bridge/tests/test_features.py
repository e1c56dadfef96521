import numpy as np
import pytest

from teacher_bridge.errors import InputError
from teacher_bridge.features import (
    FRAME_RATE,
    HOP,
    N_MELS,
    frame_count,
    log_mel,
    mel_filterbank,
)


class TestFrameLaw:
    def test_one_second_is_fifty_frames(self):
        assert frame_count(16000) == 50
        assert FRAME_RATE == 50.0

    @pytest.mark.parametrize(
        "samples,frames",
        [(1, 1), (320, 1), (321, 2), (11200, 35), (16001, 51)],
    )
    def test_ceiling_rule(self, samples, frames):
        assert frame_count(samples) == frames
        assert frames == -(-samples // HOP)

    def test_nonpositive_rejected(self):
        with pytest.raises(InputError):
            frame_count(0)
        with pytest.raises(InputError):
            frame_count(-5)


class TestLogMel:
    def test_shape_follows_frame_law(self):
        x = np.random.default_rng(0).standard_normal(7000)
        feats = log_mel(x)
        assert feats.shape == (N_MELS, frame_count(7000))

    def test_deterministic(self):
        x = np.random.default_rng(1).standard_normal(16000)
        np.testing.assert_array_equal(log_mel(x), log_mel(x))

    def test_silence_is_finite(self):
        feats = log_mel(np.zeros(16000, dtype=np.float32))
        assert feats.shape == (N_MELS, 50)
        assert np.all(np.isfinite(feats))

    def test_tone_peaks_in_matching_band(self):
        t = np.arange(16000) / 16000.0
        tone = 0.5 * np.sin(2.0 * np.pi * 1000.0 * t)
        feats = log_mel(tone).mean(axis=1)
        bank = mel_filterbank()
        freqs = np.fft.rfftfreq(1024, d=1.0 / 16000.0)
        centers = (bank * freqs).sum(axis=1) / np.maximum(bank.sum(axis=1), 1e-9)
        peak_band = int(np.argmax(feats))
        assert abs(centers[peak_band] - 1000.0) < 300.0


class TestFilterbank:
    def test_shape_and_coverage(self):
        bank = mel_filterbank()
        assert bank.shape == (N_MELS, 513)
        assert np.all(bank >= 0.0)
        # interior bins are covered by at least one filter
        coverage = bank.sum(axis=0)
        assert np.all(coverage[5:-5] > 0.0)
