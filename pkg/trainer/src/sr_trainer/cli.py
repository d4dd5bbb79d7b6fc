"""Worker entry point: `sr-trainer --dataset DIR [--device cpu] [--seed K]`."""

from __future__ import annotations

import argparse
import sys

import torch

from .serve import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sr-trainer",
                                     description="external evaluation worker")
    parser.add_argument("--dataset", required=True, help="directory of HR patch images")
    parser.add_argument("--device", default="cpu", choices=["cpu"],
                        help="compute device (CPU only)")
    parser.add_argument("--seed", type=int, default=0, help="base seed")
    args = parser.parse_args(argv)
    torch.set_num_threads(1)
    serve(args.dataset, base_seed=args.seed)
    return 0


if __name__ == "__main__":
    sys.exit(main())
