#!/usr/bin/env python3
"""Parameter sweeps on one dataset: budget factor, K, epsilon, momentum decay."""
import argparse
import os

from mghga.experiment import Construction, ExperimentConfig, sweep


DEFAULT_AXES = {
    "lambda": [0.01, 0.03, 0.05, 0.08, 0.1],
    "K": [5, 10, 15],
    "eps": [0.3, 0.5, 0.8],
    "mu": [0.0, 0.4, 0.8, 1.0, 1.4],
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset", default="data/cora")
    parser.add_argument("--attack", default="mghga")
    parser.add_argument("--axes", nargs="*", default=["lambda", "mu"],
                        choices=sorted(DEFAULT_AXES))
    parser.add_argument("--construction", default="knn:10")
    parser.add_argument("--repeats", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/sweeps")
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    construction = Construction.parse(args.construction)
    for axis in args.axes:
        cfg = ExperimentConfig(
            dataset=args.dataset,
            surrogate_construction=construction,
            victim_construction=construction,
            attack=args.attack,
            n_repeats=args.repeats,
            seed=args.seed,
        )
        out = os.path.join(args.out, f"sweep_{axis}.jsonl")
        sweep(cfg, axis, DEFAULT_AXES[axis], output=out)
        print(f"{axis}: {out}")


if __name__ == "__main__":
    main()
