#!/usr/bin/env python3
"""Self-contained conversion demo.

Builds a freshly initialized model, synthesizes a noisy test signal, converts
it to a random target voice both offline and chunk by chunk, and writes the
results next to each other so the two paths can be compared by ear or by
diff. No external data is needed.
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from srave.audio import AudioBuffer, Prng, gen_noise, gen_sine, save_wav
from srave.model import Model, ModelConfig, convert
from srave.pqmf import design_bank
from srave.stream import open_session, process_chunk


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="demo_out")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--duration", type=float, default=1.0)
    parser.add_argument("--chunk", type=int, default=2048)
    args = parser.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    config = ModelConfig(encoder_channels=(32, 64, 128, 256), residual_units=2)
    model = Model.build(config, seed=args.seed)
    bank = design_bank(config.num_bands)

    tone = gen_sine(220.0, args.duration, 48000, amplitude=0.3)
    noise = gen_noise(args.seed, args.duration, 48000, amplitude=0.1)
    x = AudioBuffer(48000, tone.samples + noise.samples)
    save_wav(x, os.path.join(args.out_dir, "input.wav"), bits="32f")

    voice = Prng(args.seed + 1).gauss_array(config.speaker_dim)
    voice = (voice / np.linalg.norm(voice)).astype(np.float32)

    offline = convert(model, bank, x, voice)
    save_wav(offline, os.path.join(args.out_dir, "offline.wav"), bits="32f")

    session = open_session(model, voice, args.chunk, bank=bank)
    total = -(-(len(x) + session.algorithmic_latency) // args.chunk) * args.chunk
    padded = np.zeros(total, dtype=np.float32)
    padded[: len(x)] = x.samples
    chunks = [
        process_chunk(session, padded[i : i + args.chunk]) for i in range(0, total, args.chunk)
    ]
    streamed = np.concatenate(chunks)
    lag = session.algorithmic_latency
    save_wav(
        AudioBuffer(48000, streamed[lag : lag + len(x)]),
        os.path.join(args.out_dir, "streamed.wav"),
        bits="32f",
    )

    diff = float(np.max(np.abs(streamed[lag : lag + len(x)] - offline.samples)))
    print(f"wrote input/offline/streamed wavs to {args.out_dir}/")
    print(f"streamed vs offline max deviation: {diff:.3e} (latency {lag} samples)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
