"""Short training runs for one evaluation request.

Recipe per request: build the exported graph as a network, init conv
weights N(0, init_std) with zero biases, minimize L1 with Adam at the
requested learning rate/betas for the requested epochs, then report
MSE/PSNR on the held-out split.

Runs are deterministic: the torch seed is derived from the trainer's base
seed and a content hash of the request, so identical requests score
identically regardless of their ids.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass

import numpy as np
import torch

from .data import PatchSet, holdout_split, load_patches
from .graph_net import build_network

torch.set_num_threads(1)  # determinism on CPU


@dataclass
class TrainResult:
    score: float  # PSNR in dB
    mse: float
    params: int


def request_seed(base_seed: int, request: dict) -> int:
    content = {k: request.get(k) for k in ("chromosome", "graph", "train_config")}
    digest = zlib.crc32(json.dumps(content, sort_keys=True).encode("utf-8"))
    return (base_seed ^ digest) & 0x7FFFFFFF


def evaluate_mse(net: torch.nn.Module, lr: torch.Tensor, hr: torch.Tensor) -> float:
    net.eval()
    with torch.no_grad():
        out = net(lr).clamp(0.0, 1.0)
        return float(torch.mean((out - hr) ** 2))


def run_request(request: dict, dataset_path: str, base_seed: int,
                patches: PatchSet | None = None) -> TrainResult:
    config = request.get("train_config", {})
    epochs = int(config.get("epochs", 200))
    batch_size = int(config.get("batch_size", 16))
    lr_rate = float(config.get("lr", 1e-4))
    betas = (float(config.get("beta1", 0.9)), float(config.get("beta2", 0.999)))
    init_std = float(config.get("init_std", 0.02))
    loss_name = config.get("loss", "L1")
    if loss_name != "L1":
        raise ValueError(f"unsupported loss {loss_name!r}")

    data = patches if patches is not None else load_patches(
        config.get("dataset_path") or dataset_path)
    eval_idx, train_idx = holdout_split(len(data))

    seed = request_seed(base_seed, request)
    generator = torch.Generator().manual_seed(seed)
    net = build_network(request["graph"], init_std=init_std, generator=generator)

    lr_all = torch.from_numpy(data.lr)
    hr_all = torch.from_numpy(data.hr)
    lr_train, hr_train = lr_all[train_idx], hr_all[train_idx]
    lr_eval, hr_eval = lr_all[eval_idx], hr_all[eval_idx]

    if epochs > 0 and len(train_idx) > 0:
        optimizer = torch.optim.Adam(net.parameters(), lr=lr_rate, betas=betas)
        loss_fn = torch.nn.L1Loss()
        order_rng = np.random.default_rng(seed)
        net.train()
        for _ in range(epochs):
            order = order_rng.permutation(len(train_idx))
            for start in range(0, len(order), batch_size):
                batch = order[start:start + batch_size]
                optimizer.zero_grad()
                out = net(lr_train[batch])
                loss = loss_fn(out, hr_train[batch])
                loss.backward()
                optimizer.step()

    mse = evaluate_mse(net, lr_eval, hr_eval)
    psnr = 10.0 * math.log10(1.0 / mse) if mse > 0 else float("inf")
    return TrainResult(score=psnr, mse=mse, params=net.parameter_count())


def bicubic_psnr(lr: np.ndarray, hr: np.ndarray, scale: int = 2) -> float:
    """Baseline: bicubic upscale of the LR patches, PSNR against HR."""
    up = torch.nn.functional.interpolate(
        torch.from_numpy(lr), scale_factor=scale, mode="bicubic", align_corners=False
    ).clamp(0.0, 1.0)
    mse = float(torch.mean((up - torch.from_numpy(hr)) ** 2))
    return 10.0 * math.log10(1.0 / mse) if mse > 0 else float("inf")
