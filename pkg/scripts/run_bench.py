#!/usr/bin/env python3
"""Synthesis-speed benchmark over both execution modes and several chunk
sizes, printed as one JSON line per run."""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from srave.model import Model, ModelConfig
from srave.pqmf import design_bank
from srave.stream import bench


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--duration", type=float, default=2.0)
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    model = Model.build(ModelConfig(), seed=args.seed)
    bank = design_bank(model.config.num_bands)

    report = bench(model, args.duration, trials=args.trials, bank=bank, seed=args.seed)
    print(f'{{"mode": "offline", "report": {report.to_json()}}}')
    for chunk in (1024, 2048, 4096):
        report = bench(
            model,
            args.duration,
            trials=args.trials,
            mode="streaming",
            chunk_size=chunk,
            bank=bank,
            seed=args.seed,
        )
        print(f'{{"mode": "streaming", "report": {report.to_json()}}}')
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
