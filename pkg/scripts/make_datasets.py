#!/usr/bin/env python3
"""Generate the shipped synthetic datasets into data/ (deterministic seeds)."""
import argparse

from mghga.synth import SHIPPED, write_shipped_datasets


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output root directory")
    parser.add_argument("--names", nargs="*", default=None,
                        help=f"subset of {sorted(SHIPPED)} (default: all)")
    args = parser.parse_args()
    written = write_shipped_datasets(args.out, names=args.names)
    for name, path in written.items():
        print(f"{name}: {path}")


if __name__ == "__main__":
    main()
