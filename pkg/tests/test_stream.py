"""Streaming session and benchmark checks."""

import inspect
import json

import numpy as np
import pytest

from srave.audio import Prng, gen_noise
from srave.errors import InputError
from srave.model import Model, ModelConfig, convert
from srave.pqmf import design_bank
from srave.speaker import SpeakerEmbedding
from srave.stream import BenchReport, StreamSession, bench, open_session, process_chunk


@pytest.fixture(scope="module")
def voice():
    raw = Prng(21).gauss_array(512)
    return (raw / np.linalg.norm(raw)).astype(np.float32)


@pytest.fixture(scope="module")
def small_setup():
    config = ModelConfig(encoder_channels=(32, 64, 128, 256), residual_units=2)
    model = Model.build(config, seed=5)
    return model, design_bank(config.num_bands)


def run_streamed(model, bank, x, e, chunk):
    session = open_session(model, e, chunk, bank=bank)
    total = -(-(len(x) + session.algorithmic_latency) // chunk) * chunk
    padded = np.zeros(total, dtype=np.float32)
    padded[: len(x)] = x.samples
    outs = [process_chunk(session, padded[i : i + chunk]) for i in range(0, total, chunk)]
    return np.concatenate(outs), session.algorithmic_latency


class TestOpenSession:
    def test_valid_chunk(self, small_setup, voice):
        model, bank = small_setup
        session = open_session(model, voice, 1024, bank=bank)
        assert isinstance(session, StreamSession)
        assert session.chunk_size == 1024
        assert session.algorithmic_latency == bank.group_delay == 511

    @pytest.mark.parametrize("chunk", [1000, 0, -1024, 1536])
    def test_misaligned_chunk_rejected(self, small_setup, voice, chunk):
        model, bank = small_setup
        with pytest.raises(InputError, match="multiple of 1024"):
            open_session(model, voice, chunk, bank=bank)

    def test_latency_constant_across_sessions(self, small_setup, voice):
        model, bank = small_setup
        latencies = {
            open_session(model, voice, c, bank=bank).algorithmic_latency
            for c in (1024, 2048, 4096)
        }
        assert latencies == {511}

    def test_speaker_embedding_accepted(self, small_setup, voice):
        model, bank = small_setup
        session = open_session(model, SpeakerEmbedding(voice, normalized=True), 1024, bank=bank)
        assert np.array_equal(session.embedding, voice)

    def test_wrong_embedding_dim_rejected(self, small_setup):
        model, bank = small_setup
        with pytest.raises(InputError, match="speaker embedding dim"):
            open_session(model, np.ones(100, dtype=np.float32), 1024, bank=bank)

    def test_band_count_mismatch_rejected(self, small_setup, voice):
        model, _ = small_setup
        with pytest.raises(InputError, match="bands"):
            open_session(model, voice, 1024, bank=design_bank(8, taps=256))


class TestProcessChunk:
    def test_emits_chunk_size_samples(self, small_setup, voice):
        model, bank = small_setup
        session = open_session(model, voice, 2048, bank=bank)
        out = process_chunk(session, np.zeros(2048, dtype=np.float32))
        assert out.shape == (2048,)
        assert out.dtype == np.float32

    def test_zero_input_zero_output(self, small_setup):
        # random weights but zero biases keep the whole graph linear at zero;
        # the conditioning offsets vanish too because the embedding is zero
        model, bank = small_setup
        session = open_session(model, np.zeros(512, dtype=np.float32), 1024, bank=bank)
        for _ in range(3):
            out = process_chunk(session, np.zeros(1024, dtype=np.float32))
            assert np.all(out == 0.0)

    def test_wrong_length_rejected(self, small_setup, voice):
        model, bank = small_setup
        session = open_session(model, voice, 1024, bank=bank)
        with pytest.raises(InputError, match="expected 1024 samples"):
            process_chunk(session, np.zeros(1000, dtype=np.float32))

    def test_closed_session_rejected(self, small_setup, voice):
        model, bank = small_setup
        session = open_session(model, voice, 1024, bank=bank)
        session.close()
        with pytest.raises(InputError, match="session closed"):
            process_chunk(session, np.zeros(1024, dtype=np.float32))

    def test_deterministic(self, small_setup, voice):
        model, bank = small_setup
        x = gen_noise(6, 0.1, 48000)
        first, _ = run_streamed(model, bank, x, voice, 1024)
        second, _ = run_streamed(model, bank, x, voice, 1024)
        assert np.array_equal(first, second)

    def test_sessions_are_isolated(self, small_setup, voice):
        model, bank = small_setup
        chunks_a = [gen_noise(s, 1024 / 48000, 48000).samples for s in (1, 2, 3)]
        chunks_b = [gen_noise(s, 1024 / 48000, 48000).samples for s in (7, 8, 9)]

        solo = open_session(model, voice, 1024, bank=bank)
        solo_outs = [process_chunk(solo, c) for c in chunks_a]

        a = open_session(model, voice, 1024, bank=bank)
        b = open_session(model, voice, 1024, bank=bank)
        mixed_outs = []
        for ca, cb in zip(chunks_a, chunks_b):
            mixed_outs.append(process_chunk(a, ca))
            process_chunk(b, cb)
        for expected, got in zip(solo_outs, mixed_outs):
            assert np.array_equal(expected, got)


class TestStreamedOfflineEquivalence:
    @pytest.mark.parametrize("chunk", [1024, 2048, 4096])
    def test_small_model_chunk_sizes(self, small_setup, voice, chunk):
        model, bank = small_setup
        x = gen_noise(10, 0.17, 48000)
        offline = convert(model, bank, x, voice)
        streamed, lag = run_streamed(model, bank, x, voice, chunk)
        diff = np.abs(streamed[lag : lag + len(x)] - offline.samples)
        assert float(diff.max()) <= 1e-4

    def test_full_model(self, default_model, default_bank, voice):
        x = gen_noise(11, 0.23, 48000)
        offline = convert(default_model, default_bank, x, voice)
        streamed, lag = run_streamed(default_model, default_bank, x, voice, 1024)
        diff = np.abs(streamed[lag : lag + len(x)] - offline.samples)
        assert float(diff.max()) <= 1e-4

    def test_odd_input_length(self, small_setup, voice):
        model, bank = small_setup
        x = gen_noise(12, 7777 / 48000, 48000)
        assert len(x) == 7777
        offline = convert(model, bank, x, voice)
        streamed, lag = run_streamed(model, bank, x, voice, 1024)
        diff = np.abs(streamed[lag : lag + len(x)] - offline.samples)
        assert float(diff.max()) <= 1e-4


class TestBench:
    def test_report_identity_and_fields(self, small_setup):
        model, bank = small_setup
        report = bench(model, 0.1, trials=2, bank=bank)
        assert report.trials == 2
        assert report.thread_mode == "single"
        assert report.synthesis_speed > 0
        assert report.rtf * report.synthesis_speed == pytest.approx(48000.0, rel=1e-3)

    def test_default_trials_is_100(self):
        assert inspect.signature(bench).parameters["trials"].default == 100

    def test_json_shape(self, small_setup):
        model, bank = small_setup
        payload = json.loads(bench(model, 0.1, trials=1, bank=bank).to_json())
        assert set(payload) == {"speed_hz", "rtf", "trials", "chunk"}
        assert payload["trials"] == 1

    def test_streaming_mode(self, small_setup):
        model, bank = small_setup
        report = bench(model, 0.1, trials=2, mode="streaming", chunk_size=2048, bank=bank)
        assert report.chunk_size == 2048
        assert report.rtf * report.synthesis_speed == pytest.approx(48000.0, rel=1e-3)

    def test_offline_chunk_covers_whole_signal(self, small_setup):
        model, bank = small_setup
        report = bench(model, 0.1, trials=1, bank=bank)
        assert report.chunk_size % 1024 == 0
        assert report.chunk_size >= 0.1 * 48000

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"trials": 0},
            {"audio_duration": 0.0},
            {"mode": "turbo"},
            {"chunk_size": 1000},
        ],
    )
    def test_bad_arguments_rejected(self, small_setup, kwargs):
        model, bank = small_setup
        call = {"audio_duration": 0.1, "trials": 1, "bank": bank}
        call.update(kwargs)
        with pytest.raises(InputError):
            bench(model, **call)

    def test_report_is_frozen(self):
        report = BenchReport(1.0, 1.0, 1, 1024)
        with pytest.raises(AttributeError):
            report.rtf = 2.0
