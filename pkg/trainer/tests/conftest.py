import json
import shutil
import subprocess

import pytest

from sr_trainer.make_synthetic import generate

# a 3-cell chromosome in the search engine's published text grammar
CHROMOSOME_TEXT = """\
conv_f32_k3_b2_isskip
invertBotConE2_f16_k3_b1_isskip
groupConG2_f32_k3_b2_noskip
macro=010011
"""

# the same architecture in the wire protocol's structured form
CHROMOSOME_JSON = {
    "cells": [
        {"kind": "conv", "channels": 32, "kernel": 3, "residual": True, "repeats": 2},
        {"kind": "invertBotConE2", "channels": 16, "kernel": 3, "residual": True, "repeats": 1},
        {"kind": "groupConG2", "channels": 32, "kernel": 3, "residual": False, "repeats": 2},
    ],
    "macro": "010011",
}

SEARCH_CLI = shutil.which("search")


@pytest.fixture(scope="session")
def patch_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("patches")
    generate(str(path), count=8, size=64, seed=0)
    return str(path)


@pytest.fixture(scope="session")
def graph(tmp_path_factory):
    """Graph export produced through the search engine's CLI."""
    if SEARCH_CLI is None:
        pytest.skip("search CLI not installed")
    work = tmp_path_factory.mktemp("graph")
    model = work / "model.txt"
    model.write_text(CHROMOSOME_TEXT)
    out = work / "graph.json"
    subprocess.run(
        [SEARCH_CLI, "cost", "--model", str(model), "--graph-out", str(out)],
        check=True,
        capture_output=True,
    )
    return json.loads(out.read_text())


@pytest.fixture
def request_payload(graph, patch_dir):
    def make(req_id="req-0", epochs=2, lr=1e-3, **overrides):
        config = {
            "epochs": epochs,
            "batch_size": 16,
            "lr": lr,
            "beta1": 0.9,
            "beta2": 0.999,
            "loss": "L1",
            "init_std": 0.02,
            "dataset_path": patch_dir,
        }
        config.update(overrides)
        return {
            "id": req_id,
            "chromosome": CHROMOSOME_JSON,
            "graph": graph,
            "train_config": config,
        }

    return make
