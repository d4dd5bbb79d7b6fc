import json
import math
import subprocess
import sys

import numpy as np
import pytest
import torch

from sr_trainer.data import holdout_split, load_patches
from sr_trainer.graph_net import build_network
from sr_trainer.make_synthetic import generate
from sr_trainer.training import bicubic_psnr, request_seed, run_request


def test_synthetic_patches_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    generate(str(a), count=3, size=32, seed=5)
    generate(str(b), count=3, size=32, seed=5)
    for name in ("patch_000.png", "patch_002.png"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_holdout_split_rule():
    assert holdout_split(8) == ([0], list(range(1, 8)))
    assert holdout_split(20) == ([0, 1], list(range(2, 20)))
    assert holdout_split(1) == ([0], [])


def test_load_patches_shapes(patch_dir):
    patches = load_patches(patch_dir)
    assert len(patches) == 8
    assert patches.hr.shape == (8, 1, 64, 64)
    assert patches.lr.shape == (8, 1, 32, 32)
    assert patches.hr.max() <= 1.0 and patches.hr.min() >= 0.0
    assert patches.names == sorted(patches.names)


def test_built_network_parameter_count_matches_export_exactly(graph):
    net = build_network(graph)
    assert net.parameter_count() == graph["params"]


def test_built_network_rejects_corrupted_export(graph):
    corrupted = json.loads(json.dumps(graph))
    corrupted["params"] += 1
    with pytest.raises(ValueError, match="parameters"):
        build_network(corrupted)


def test_forward_upscales_by_two(graph):
    net = build_network(graph, init_std=0.02, generator=torch.Generator().manual_seed(0))
    out = net(torch.rand(2, 1, 24, 24))
    assert out.shape == (2, 1, 48, 48)


def test_untrained_evaluation_path(request_payload, patch_dir):
    result = run_request(request_payload(epochs=0), patch_dir, base_seed=0)
    assert math.isfinite(result.score)
    assert result.mse > 0


def test_identical_requests_score_identically(request_payload, patch_dir):
    first = run_request(request_payload(req_id="a"), patch_dir, base_seed=3)
    second = run_request(request_payload(req_id="b"), patch_dir, base_seed=3)
    assert first.score == second.score  # seed comes from content, not id
    assert first.mse == second.mse


def test_request_seed_ignores_id(request_payload):
    a, b = request_payload(req_id="a"), request_payload(req_id="b")
    assert request_seed(7, a) == request_seed(7, b)
    different = request_payload(epochs=5)
    assert request_seed(7, a) != request_seed(7, different)


def test_two_epoch_training_beats_bicubic(request_payload, patch_dir):
    patches = load_patches(patch_dir)
    eval_idx, _ = holdout_split(len(patches))
    baseline = bicubic_psnr(patches.lr[eval_idx], patches.hr[eval_idx])
    wins = 0
    for seed in range(10):
        result = run_request(request_payload(epochs=2, lr=1e-3), patch_dir, base_seed=seed)
        assert math.isfinite(result.score)
        wins += result.score > baseline
    assert wins >= 8, f"only {wins}/10 seeds beat the bicubic baseline ({baseline:.2f} dB)"


def test_unsupported_loss_is_rejected(request_payload, patch_dir):
    with pytest.raises(ValueError, match="loss"):
        run_request(request_payload(loss="L2"), patch_dir, base_seed=0)


def serve_lines(lines, dataset, timeout=300):
    proc = subprocess.run(
        [sys.executable, "-m", "sr_trainer.cli", "--dataset", dataset, "--seed", "0"],
        input="\n".join(lines) + "\n",
        capture_output=True,
        text=True,
        timeout=timeout,
    )
    return [json.loads(line) for line in proc.stdout.splitlines() if line.strip()]


def test_serve_loop_protocol_conformance(request_payload, patch_dir):
    good = request_payload(req_id="ok-1", epochs=0)
    broken_graph = request_payload(req_id="bad-graph", epochs=0)
    broken_graph["graph"] = {"format_version": 1, "scale": 2, "params": 1, "blocks": []}
    lines = [
        json.dumps(good),
        "this is not json",
        json.dumps(broken_graph),
        json.dumps(request_payload(req_id="ok-2", epochs=0)),
    ]
    responses = serve_lines(lines, patch_dir)
    assert len(responses) == len(lines)  # one response per request line
    by_id = {r["id"]: r for r in responses}
    assert by_id["ok-1"]["status"] == "ok" and math.isfinite(by_id["ok-1"]["score"])
    assert by_id["ok-2"]["status"] == "ok"
    assert by_id["bad-graph"]["status"] == "error"
    assert any(r["status"] == "error" and r["id"] == "" for r in responses)


def test_serve_loop_deterministic_scores(request_payload, patch_dir):
    line = json.dumps(request_payload(req_id="same", epochs=1))
    first = serve_lines([line], patch_dir)
    second = serve_lines([line], patch_dir)
    assert first[0]["score"] == second[0]["score"]
