"""Paired LR/HR patch loading.

High-resolution images come from a directory; low-resolution counterparts
are produced on the fly by bicubic downsampling.  Everything is
luminance-only in [0, 1].

The held-out split is positional and documented: the first
max(1, round(0.1 * N)) patches in sorted filename order are the
evaluation set, the rest train.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass
class PatchSet:
    lr: np.ndarray  # (N, 1, h, w) float32 in [0, 1]
    hr: np.ndarray  # (N, 1, h*scale, w*scale)
    names: list[str]

    def __len__(self) -> int:
        return self.hr.shape[0]


def load_patches(dataset_path: str, scale: int = 2) -> PatchSet:
    if not os.path.isdir(dataset_path):
        raise FileNotFoundError(f"dataset directory not found: {dataset_path}")
    names = sorted(
        f for f in os.listdir(dataset_path) if f.lower().endswith(IMAGE_EXTENSIONS)
    )
    if not names:
        raise FileNotFoundError(f"no images in {dataset_path}")
    lrs, hrs = [], []
    for name in names:
        img = Image.open(os.path.join(dataset_path, name)).convert("L")
        w, h = img.size
        w -= w % scale
        h -= h % scale
        img = img.crop((0, 0, w, h))
        lr = img.resize((w // scale, h // scale), Image.BICUBIC)
        hrs.append(np.asarray(img, dtype=np.float32)[None] / 255.0)
        lrs.append(np.asarray(lr, dtype=np.float32)[None] / 255.0)
    return PatchSet(lr=np.stack(lrs), hr=np.stack(hrs), names=names)


def holdout_split(n: int, fraction: float = 0.1) -> tuple[list[int], list[int]]:
    """(eval_indices, train_indices); eval is the first chunk, never empty."""
    k = max(1, round(fraction * n))
    if k >= n:  # degenerate tiny sets still train on something
        k = max(1, n - 1) if n > 1 else n
    return list(range(k)), list(range(k, n))
