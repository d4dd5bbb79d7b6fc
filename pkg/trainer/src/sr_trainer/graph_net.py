"""Materializes an exported compute-graph JSON as a trainable torch module.

The graph export is authoritative: every conv layer in it becomes exactly
one Conv2d (bias included), so the built network's parameter count equals
the export's `params` field with zero tolerance.

Materialization choices that carry no parameters:
  * ReLU after every layer inside a cell stack; merges, projections, the
    upsampler, and the final conv stay linear;
  * the restored image is predicted as a correction on top of a bicubic
    upscale of the input (a parameter-free global residual).
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


def _conv_from_spec(spec: dict) -> nn.Conv2d:
    k = spec["kernel"]
    return nn.Conv2d(
        spec["in_channels"],
        spec["out_channels"],
        kernel_size=k,
        padding=k // 2,
        groups=spec.get("groups", 1),
        bias=True,
    )


class _Block(nn.Module):
    def __init__(self, block: dict):
        super().__init__()
        self.inputs = list(block["inputs"])
        self.merge = block["merge"]
        self.input_name = block["input_name"]
        self.output = block["output"]
        self.residual = block["residual"]
        self.is_cell = block["name"].startswith("cell_")

        self.input_projections = nn.ModuleList()
        self._has_projection = []
        for proj in block["input_projections"]:
            if proj is None:
                self._has_projection.append(False)
                self.input_projections.append(nn.Identity())
            else:
                self._has_projection.append(True)
                self.input_projections.append(_conv_from_spec(proj))

        layers = []
        self.shuffle_positions = set()
        for idx, spec in enumerate(block["layers"]):
            if spec["kind"] == "pixel_shuffle":
                layers.append(nn.PixelShuffle(spec["shuffle_factor"]))
                self.shuffle_positions.add(idx)
            else:
                layers.append(_conv_from_spec(spec))
        self.layers = nn.ModuleList(layers)

        if block["residual_projection"] is not None:
            self.residual_projection = _conv_from_spec(block["residual_projection"])
        else:
            self.residual_projection = None

    def forward(self, tensors: dict) -> None:
        parts = [proj(tensors[name]) for name, proj in zip(self.inputs, self.input_projections)]
        merged = torch.cat(parts, dim=1) if self.merge == "concat" else sum(parts)
        tensors[self.input_name] = merged
        x = merged
        for idx, layer in enumerate(self.layers):
            x = layer(x)
            if self.is_cell and idx not in self.shuffle_positions:
                x = F.relu(x)
        if self.residual == "identity":
            x = x + merged
        elif self.residual == "project":
            x = x + self.residual_projection(merged)
        tensors[self.output] = x


class GraphNetwork(nn.Module):
    """Super-resolution network rebuilt from a graph export."""

    def __init__(self, graph: dict):
        super().__init__()
        if graph.get("format_version") != 1:
            raise ValueError(f"unsupported graph format {graph.get('format_version')!r}")
        self.scale = graph["scale"]
        self.expected_params = graph["params"]
        self.blocks = nn.ModuleList(_Block(b) for b in graph["blocks"])
        self.final_output = graph["blocks"][-1]["output"]

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        base = F.interpolate(image, scale_factor=self.scale, mode="bicubic",
                             align_corners=False)
        tensors = {"image": image}
        for block in self.blocks:
            block.forward(tensors)
        return base + tensors[self.final_output]

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def init_weights(self, std: float, generator: torch.Generator) -> None:
        """Conv weights ~ N(0, std), biases zero."""
        for module in self.modules():
            if isinstance(module, nn.Conv2d):
                with torch.no_grad():
                    module.weight.normal_(0.0, std, generator=generator)
                    module.bias.zero_()


def build_network(graph: dict, init_std: float | None = None,
                  generator: torch.Generator | None = None) -> GraphNetwork:
    net = GraphNetwork(graph)
    actual = net.parameter_count()
    if actual != net.expected_params:
        raise ValueError(
            f"built network has {actual} parameters but the graph export "
            f"declares {net.expected_params}"
        )
    if init_std is not None:
        net.init_weights(init_std, generator or torch.Generator())
    return net
