"""Generates deterministic synthetic patches for desk-scale runs.

Each patch mixes random sinusoidal gratings with soft blobs, giving
structure that bicubic interpolation degrades measurably.

Usage: python3 -m sr_trainer.make_synthetic OUT_DIR [--count N] [--size S] [--seed K]
"""

from __future__ import annotations

import argparse
import os

import numpy as np
from PIL import Image


def synthetic_patch(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    img = np.zeros((size, size))
    for _ in range(4):
        fx, fy = rng.uniform(1, 14, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        img += rng.uniform(0.3, 1.0) * np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
    for _ in range(3):
        cx, cy = rng.uniform(0.1, 0.9, size=2)
        width = rng.uniform(0.05, 0.25)
        img += rng.uniform(0.5, 1.5) * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * width**2))
    img -= img.min()
    img /= max(img.max(), 1e-9)
    return (img * 255).astype(np.uint8)


def generate(out_dir: str, count: int = 8, size: int = 64, seed: int = 0) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    names = []
    for i in range(count):
        name = f"patch_{i:03d}.png"
        Image.fromarray(synthetic_patch(rng, size), mode="L").save(os.path.join(out_dir, name))
        names.append(name)
    return names


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir")
    parser.add_argument("--count", type=int, default=8)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    names = generate(args.out_dir, args.count, args.size, args.seed)
    print(f"wrote {len(names)} patches to {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
