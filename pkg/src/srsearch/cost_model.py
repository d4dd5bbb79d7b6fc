"""Decodes a chromosome into an explicit compute graph and prices it.

The graph mirrors the fixed super-resolution template: a 3x3 feature
extractor (1 -> 32 channels), n cell blocks joined by the macro skip
connections, and a subpixel upsampler (conv -> pixel shuffle -> 3x3 conv
with a single output filter at high resolution).

Conventions (documented knobs, see build_graph):
  * skip payloads are the *input* tensor of the source block;
  * block inputs merge by channel concatenation by default ("concat");
    the alternative "project_sum" projects every non-backbone source to
    the backbone width with a 1x1 conv and sums;
  * the backbone edge is always active, so the diagonal connection bit
    is cost-neutral;
  * the upsampler always consumes the final cell output concatenated
    with the extractor output;
  * an in-cell residual adds the block input around the repeated stack,
    through a 1x1 projection when the widths differ.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .genome import CellGene, Chromosome, ConvKind

CONCAT = "concat"
PROJECT_SUM = "project_sum"
AGGREGATIONS = (CONCAT, PROJECT_SUM)

EXTRACTOR_CHANNELS = 32
DEFAULT_EVAL_SIZE = (480, 480)

CONV = "conv"
GROUP_CONV = "group_conv"
POINTWISE_CONV = "pointwise_conv"
DEPTHWISE_CONV = "depthwise_conv"
PIXEL_SHUFFLE = "pixel_shuffle"

IMAGE = "image"
EXTRACTOR_OUT = "extractor_out"


class CostModelError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    """One priced layer; all convs carry a bias term."""

    kind: str
    in_channels: int
    out_channels: int
    kernel: int
    groups: int = 1
    at_hr: bool = False
    shuffle_factor: int = 0

    def __post_init__(self) -> None:
        if self.kind == PIXEL_SHUFFLE:
            if self.in_channels != self.out_channels * self.shuffle_factor**2:
                raise CostModelError(
                    f"pixel shuffle must divide channels by r^2: "
                    f"{self.in_channels} -> {self.out_channels} (r={self.shuffle_factor})"
                )
            return
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise CostModelError(
                f"{self.kind} channels ({self.in_channels} -> {self.out_channels}) "
                f"not divisible by groups={self.groups}"
            )

    @property
    def params(self) -> int:
        if self.kind == PIXEL_SHUFFLE:
            return 0
        weights = self.out_channels * (self.in_channels // self.groups) * self.kernel**2
        return weights + self.out_channels  # bias

    def mult_adds(self, h: int, w: int, scale: int) -> int:
        if self.kind == PIXEL_SHUFFLE:
            return 0
        hh, ww = (h * scale, w * scale) if self.at_hr else (h, w)
        return self.out_channels * (self.in_channels // self.groups) * self.kernel**2 * hh * ww


@dataclass(frozen=True)
class BlockSpec:
    """One graph block: merged inputs, a layer stack, optional residual.

    `inputs` name previously produced tensors; `input_projections` runs
    parallel to `inputs` (1x1 convs under project_sum, None otherwise).
    `input_name` labels the merged tensor so later blocks can reference it
    as a skip payload.
    """

    name: str
    inputs: tuple[str, ...]
    input_projections: tuple[LayerSpec | None, ...]
    merge: str
    input_name: str
    layers: tuple[LayerSpec, ...]
    residual: str | None  # None | "identity" | "project"
    residual_projection: LayerSpec | None
    output: str

    def iter_priced_layers(self):
        for proj in self.input_projections:
            if proj is not None:
                yield proj
        yield from self.layers
        if self.residual_projection is not None:
            yield self.residual_projection


@dataclass(frozen=True)
class ModelGraph:
    scale: int
    n_cells: int
    aggregation: str
    blocks: tuple[BlockSpec, ...]

    def iter_priced_layers(self):
        for block in self.blocks:
            yield from block.iter_priced_layers()


@dataclass(frozen=True)
class CostReport:
    params: int
    mult_adds: int


def cell_stack(gene: CellGene, input_width: int) -> tuple[LayerSpec, ...]:
    """The repeated layer pattern of one cell; first copy eats the merged input."""
    layers: list[LayerSpec] = []
    out = gene.channels
    for copy in range(gene.repeats):
        cin = input_width if copy == 0 else out
        if gene.conv_kind is ConvKind.CONV2D:
            layers.append(LayerSpec(CONV, cin, out, gene.kernel))
        elif gene.conv_kind in (ConvKind.GROUP_CONV_G2, ConvKind.GROUP_CONV_G4):
            layers.append(LayerSpec(GROUP_CONV, cin, out, gene.kernel, groups=gene.conv_kind.groups))
        else:  # inverted bottleneck, expansion 2 on the output width
            mid = 2 * out
            layers.append(LayerSpec(POINTWISE_CONV, cin, mid, 1))
            layers.append(LayerSpec(DEPTHWISE_CONV, mid, mid, gene.kernel, groups=mid))
            layers.append(LayerSpec(POINTWISE_CONV, mid, out, 1))
    return tuple(layers)


def _cell_block(index: int, gene: CellGene, sources: list[str], widths: dict[str, int],
                aggregation: str) -> BlockSpec:
    backbone = sources[0]
    if aggregation == CONCAT:
        projections: list[LayerSpec | None] = [None] * len(sources)
        in_width = sum(widths[s] for s in sources)
    else:
        in_width = widths[backbone]
        projections = [None]
        for src in sources[1:]:
            projections.append(LayerSpec(POINTWISE_CONV, widths[src], in_width, 1))
    layers = cell_stack(gene, in_width)
    residual = None
    residual_projection = None
    if gene.residual:
        if in_width == gene.channels:
            residual = "identity"
        else:
            residual = "project"
            residual_projection = LayerSpec(POINTWISE_CONV, in_width, gene.channels, 1)
    input_name = f"cell_in_{index}"
    widths[input_name] = in_width
    output = f"cell_out_{index}"
    widths[output] = gene.channels
    return BlockSpec(
        name=f"cell_{index}",
        inputs=tuple(sources),
        input_projections=tuple(projections),
        merge=CONCAT if aggregation == CONCAT else "sum",
        input_name=input_name,
        layers=layers,
        residual=residual,
        residual_projection=residual_projection,
        output=output,
    )


def build_graph(c: Chromosome, scale: int = 2, aggregation: str = CONCAT) -> ModelGraph:
    """Decodes a chromosome into the full compute graph.

    Every block has at least its backbone input, so the graph is connected
    for any bit pattern.
    """
    if aggregation not in AGGREGATIONS:
        raise CostModelError(f"unknown aggregation {aggregation!r}; expected one of {AGGREGATIONS}")
    n = c.n
    widths: dict[str, int] = {IMAGE: 1, EXTRACTOR_OUT: EXTRACTOR_CHANNELS}
    blocks: list[BlockSpec] = [
        BlockSpec(
            name="extractor",
            inputs=(IMAGE,),
            input_projections=(None,),
            merge=CONCAT,
            input_name=IMAGE,
            layers=(LayerSpec(CONV, 1, EXTRACTOR_CHANNELS, 3),),
            residual=None,
            residual_projection=None,
            output=EXTRACTOR_OUT,
        )
    ]
    for j in range(1, n + 1):
        sources = [EXTRACTOR_OUT if j == 1 else f"cell_out_{j - 1}"]
        # skip payloads: the *input* of every earlier block wired to j
        for i in range(1, j):
            if c.macro.get(i, j):
                sources.append(f"cell_in_{i}")
        blocks.append(_cell_block(j, c.micro[j - 1], sources, widths, aggregation))

    up_in = widths[f"cell_out_{n}"] + EXTRACTOR_CHANNELS
    shuffled = EXTRACTOR_CHANNELS * scale**2
    blocks.append(
        BlockSpec(
            name="upsampler",
            inputs=(f"cell_out_{n}", EXTRACTOR_OUT),
            input_projections=(None, None),
            merge=CONCAT,
            input_name="upsampler_in",
            layers=(
                LayerSpec(CONV, up_in, shuffled, 3),
                LayerSpec(PIXEL_SHUFFLE, shuffled, EXTRACTOR_CHANNELS, 0, shuffle_factor=scale),
                LayerSpec(CONV, EXTRACTOR_CHANNELS, 1, 3, at_hr=True),
            ),
            residual=None,
            residual_projection=None,
            output="restored",
        )
    )
    return ModelGraph(scale=scale, n_cells=n, aggregation=aggregation, blocks=tuple(blocks))


def count_params(g: ModelGraph) -> int:
    return sum(layer.params for layer in g.iter_priced_layers())


def count_mult_adds(g: ModelGraph, h: int, w: int) -> int:
    if h < 1 or w < 1:
        raise CostModelError(f"input size must be >= 1, got {h}x{w}")
    return sum(layer.mult_adds(h, w, g.scale) for layer in g.iter_priced_layers())


@lru_cache(maxsize=65536)
def _cached_graph(c: Chromosome, scale: int, aggregation: str) -> ModelGraph:
    return build_graph(c, scale=scale, aggregation=aggregation)


def cost_report(c: Chromosome, h: int = DEFAULT_EVAL_SIZE[0], w: int = DEFAULT_EVAL_SIZE[1],
                scale: int = 2, aggregation: str = CONCAT) -> CostReport:
    g = _cached_graph(c, scale, aggregation)
    return CostReport(params=count_params(g), mult_adds=count_mult_adds(g, h, w))


def standalone_cell_cost(gene: CellGene, input_width: int) -> CostReport:
    """Cost of one cell block in isolation; mult-adds at a 1x1 spatial unit.

    Used to weight the cost-aware mutation over the operator set.
    """
    widths = {"in": input_width}
    block = _cell_block(0, gene, ["in"], widths, CONCAT)
    params = sum(layer.params for layer in block.iter_priced_layers())
    ma = sum(layer.mult_adds(1, 1, 1) for layer in block.iter_priced_layers())
    return CostReport(params=params, mult_adds=ma)


def layer_to_json(layer: LayerSpec) -> dict:
    return {
        "kind": layer.kind,
        "in_channels": layer.in_channels,
        "out_channels": layer.out_channels,
        "kernel": layer.kernel,
        "groups": layer.groups,
        "at_hr": layer.at_hr,
        "shuffle_factor": layer.shuffle_factor,
    }


def graph_to_json(g: ModelGraph) -> dict:
    """JSON export consumed by external trainers; the params field is the
    authoritative weight count the built network must match exactly."""
    return {
        "format_version": 1,
        "scale": g.scale,
        "n_cells": g.n_cells,
        "aggregation": g.aggregation,
        "params": count_params(g),
        "mult_adds_480": count_mult_adds(g, *DEFAULT_EVAL_SIZE),
        "blocks": [
            {
                "name": b.name,
                "inputs": list(b.inputs),
                "input_projections": [
                    None if p is None else layer_to_json(p) for p in b.input_projections
                ],
                "merge": b.merge,
                "input_name": b.input_name,
                "layers": [layer_to_json(l) for l in b.layers],
                "residual": b.residual,
                "residual_projection": (
                    None if b.residual_projection is None else layer_to_json(b.residual_projection)
                ),
                "output": b.output,
            }
            for b in g.blocks
        ],
    }
