import pytest

from _voices import SPEAKERS, make_voice, write_pcm16


@pytest.fixture(scope="session")
def probe_set(tmp_path_factory):
    """Three speakers, two utterances each, as 16 kHz PCM16 files."""
    root = tmp_path_factory.mktemp("probe")
    files = {}
    for s, (name, formants) in enumerate(SPEAKERS.items()):
        for u, (f0, duration) in enumerate(((105.0, 1.0), (128.0, 0.8))):
            path = root / f"{name}_u{u}.wav"
            write_pcm16(path, make_voice(formants, f0, duration, seed=10 * s + u))
            files[(name, f"u{u}")] = str(path)
    return files
