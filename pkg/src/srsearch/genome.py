"""Architecture chromosomes: the cell operator set, connection bit-field,
text/JSON serialization, and search configuration.

A network is described by two genomes.  The *micro* genome picks one
operator per cell block out of a finite set of 192 convolution patterns;
the *macro* genome is a triangular bit-field of skip connections between
cell-block inputs and later blocks.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

CHANNEL_CHOICES = (16, 32, 48, 64)
KERNEL_CHOICES = (1, 3)
REPEAT_CHOICES = (1, 2, 4)

OPERATOR_COUNT = 192  # 4 conv kinds x 4 channels x 2 kernels x 2 residual x 3 repeats


class ConvKind(Enum):
    """Convolution pattern of a cell block; values are the text-format tokens."""

    CONV2D = "conv"
    GROUP_CONV_G2 = "groupConG2"
    GROUP_CONV_G4 = "groupConG4"
    INVERTED_BOTTLENECK_E2 = "invertBotConE2"

    @property
    def groups(self) -> int:
        if self is ConvKind.GROUP_CONV_G2:
            return 2
        if self is ConvKind.GROUP_CONV_G4:
            return 4
        return 1


_KIND_BY_TOKEN = {k.value: k for k in ConvKind}


class GenomeError(ValueError):
    """Invalid genome construction or decode failure."""


@dataclass(frozen=True)
class CellGene:
    """One cell block: a repeated convolution pattern, optionally residual."""

    conv_kind: ConvKind
    channels: int
    kernel: int
    residual: bool
    repeats: int

    def __post_init__(self) -> None:
        if self.channels not in CHANNEL_CHOICES:
            raise GenomeError(f"channels {self.channels} not in {CHANNEL_CHOICES}")
        if self.kernel not in KERNEL_CHOICES:
            raise GenomeError(f"kernel {self.kernel} not in {KERNEL_CHOICES}")
        if self.repeats not in REPEAT_CHOICES:
            raise GenomeError(f"repeats {self.repeats} not in {REPEAT_CHOICES}")

    def token(self) -> str:
        skip = "isskip" if self.residual else "noskip"
        return f"{self.conv_kind.value}_f{self.channels}_k{self.kernel}_b{self.repeats}_{skip}"

    def __str__(self) -> str:  # pragma: no cover - debugging aid
        return self.token()


_TOKEN_RE = re.compile(r"^(?P<kind>[A-Za-z0-9]+)_f(?P<f>\d+)_k(?P<k>\d+)_b(?P<b>\d+)_(?P<skip>isskip|noskip)$")


def parse_gene(token: str) -> CellGene:
    """Parses one cell token; the error message names the offending part."""
    m = _TOKEN_RE.match(token.strip())
    if m is None:
        raise GenomeError(f"malformed cell token {token!r}")
    kind = _KIND_BY_TOKEN.get(m.group("kind"))
    if kind is None:
        raise GenomeError(f"unknown conv kind {m.group('kind')!r} in token {token!r}")
    channels = int(m.group("f"))
    if channels not in CHANNEL_CHOICES:
        raise GenomeError(f"out-of-domain field 'f{m.group('f')}' in token {token!r}")
    kernel = int(m.group("k"))
    if kernel not in KERNEL_CHOICES:
        raise GenomeError(f"out-of-domain field 'k{m.group('k')}' in token {token!r}")
    repeats = int(m.group("b"))
    if repeats not in REPEAT_CHOICES:
        raise GenomeError(f"out-of-domain field 'b{m.group('b')}' in token {token!r}")
    return CellGene(kind, channels, kernel, m.group("skip") == "isskip", repeats)


@lru_cache(maxsize=1)
def operator_set() -> tuple[CellGene, ...]:
    """All 192 cell operators in a fixed lexicographic order.

    Order is (conv_kind, channels, kernel, residual, repeats); stable across
    calls and processes, so operator indices are portable.
    """
    genes = tuple(
        CellGene(kind, ch, k, res, rep)
        for kind in ConvKind
        for ch in CHANNEL_CHOICES
        for k in KERNEL_CHOICES
        for res in (False, True)
        for rep in REPEAT_CHOICES
    )
    assert len(genes) == OPERATOR_COUNT
    return genes


@lru_cache(maxsize=1)
def _operator_index() -> dict[CellGene, int]:
    return {g: i for i, g in enumerate(operator_set())}


def operator_index(gene: CellGene) -> int:
    """Index of a gene within operator_set()."""
    return _operator_index()[gene]


def macro_length(n: int) -> int:
    return n * (n + 1) // 2


def macro_index(n: int, i: int, j: int) -> int:
    """Flat 0-based index of the connection bit from block i to block j.

    i and j are 1-based with 1 <= i <= j <= n; bits are laid out row-major,
    row i covering targets j = i..n.
    """
    if not (1 <= i <= j <= n):
        raise GenomeError(f"connection indices ({i}, {j}) out of range for n={n}")
    offset = (i - 1) * n - (i - 1) * (i - 2) // 2
    return offset + (j - i)


def macro_row_span(n: int, i: int) -> tuple[int, int]:
    """Half-open [start, stop) slice of row i's bits within the flat layout."""
    start = macro_index(n, i, i)
    return start, start + (n - i + 1)


@dataclass(frozen=True)
class MacroGenome:
    """Triangular connection bit-field for n cell blocks."""

    n: int
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise GenomeError(f"cell count must be >= 1, got {self.n}")
        if len(self.bits) != macro_length(self.n):
            raise GenomeError(
                f"macro bit-length mismatch: expected {macro_length(self.n)} "
                f"for n={self.n}, got {len(self.bits)}"
            )
        if any(b not in (0, 1) for b in self.bits):
            raise GenomeError("macro bits must be 0 or 1")

    def get(self, i: int, j: int) -> int:
        return self.bits[macro_index(self.n, i, j)]

    def row(self, i: int) -> tuple[int, ...]:
        start, stop = macro_row_span(self.n, i)
        return self.bits[start:stop]

    def as_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_string(cls, n: int, s: str) -> "MacroGenome":
        s = s.strip()
        if len(s) != macro_length(n):
            raise GenomeError(
                f"macro bitstring length {len(s)} does not match n={n} "
                f"(expected {macro_length(n)})"
            )
        if set(s) - {"0", "1"}:
            bad = next(ch for ch in s if ch not in "01")
            raise GenomeError(f"invalid macro bit {bad!r} in {s!r}")
        return cls(n, tuple(int(ch) for ch in s))


@dataclass(frozen=True)
class Chromosome:
    """A full architecture: one gene per cell plus the connection bits."""

    micro: tuple[CellGene, ...]
    macro: MacroGenome

    def __post_init__(self) -> None:
        if len(self.micro) != self.macro.n:
            raise GenomeError(
                f"micro length {len(self.micro)} does not match macro n={self.macro.n}"
            )

    @property
    def n(self) -> int:
        return self.macro.n


def space_size(n: int) -> int:
    """Exact number of distinct architectures with n cell blocks."""
    if n < 0:
        raise GenomeError(f"cell count must be >= 0, got {n}")
    return OPERATOR_COUNT**n * 2 ** macro_length(n)


def sample_random(n: int, rng) -> Chromosome:
    """Uniform chromosome: genes uniform over the operator set, bits fair coins."""
    ops = operator_set()
    micro = tuple(ops[int(i)] for i in rng.integers(0, OPERATOR_COUNT, size=n))
    bits = tuple(int(b) for b in rng.integers(0, 2, size=macro_length(n)))
    return Chromosome(micro, MacroGenome(n, bits))


def encode(c: Chromosome) -> str:
    """Canonical text form: one cell token per line, then the macro bitstring."""
    lines = [g.token() for g in c.micro]
    lines.append(f"macro={c.macro.as_string()}")
    return "\n".join(lines)


def encode_compact(c: Chromosome) -> str:
    """Single-line variant (';'-separated), used in CSV exports."""
    return ";".join([g.token() for g in c.micro] + [f"macro={c.macro.as_string()}"])


def decode(text: str) -> Chromosome:
    """Parses either the canonical or the compact text form."""
    parts = [p.strip() for p in re.split(r"[;\n]", text) if p.strip()]
    if not parts:
        raise GenomeError("empty chromosome text")
    if not parts[-1].startswith("macro="):
        raise GenomeError("missing trailing 'macro=<bits>' line")
    macro_str = parts[-1][len("macro=") :]
    genes = tuple(parse_gene(tok) for tok in parts[:-1])
    if not genes:
        raise GenomeError("chromosome has no cell tokens")
    macro = MacroGenome.from_string(len(genes), macro_str)
    return Chromosome(genes, macro)


def chromosome_to_json(c: Chromosome) -> dict:
    """Structured form used on the evaluation wire protocol."""
    return {
        "cells": [
            {
                "kind": g.conv_kind.value,
                "channels": g.channels,
                "kernel": g.kernel,
                "residual": g.residual,
                "repeats": g.repeats,
            }
            for g in c.micro
        ],
        "macro": c.macro.as_string(),
    }


def chromosome_from_json(obj: dict) -> Chromosome:
    try:
        cells = obj["cells"]
        macro_str = obj["macro"]
    except (KeyError, TypeError) as exc:
        raise GenomeError(f"malformed chromosome object: missing {exc}") from exc
    genes = []
    for cell in cells:
        kind = _KIND_BY_TOKEN.get(cell.get("kind"))
        if kind is None:
            raise GenomeError(f"unknown conv kind {cell.get('kind')!r}")
        genes.append(
            CellGene(
                kind,
                int(cell["channels"]),
                int(cell["kernel"]),
                bool(cell["residual"]),
                int(cell["repeats"]),
            )
        )
    return Chromosome(tuple(genes), MacroGenome.from_string(len(genes), macro_str))


@dataclass(frozen=True)
class Constraints:
    """Feasibility bounds: a quality floor and a compute ceiling."""

    min_score: float = 26.0
    max_mult_adds: float = 300e9


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the evolutionary search.

    p_r / p_den drive the categorical choice of initial connection patterns
    (random / dense / none); p_mr / p_mf are the cumulative thresholds of the
    mutation-strategy draw (random / cost-weighted-by-flops /
    cost-weighted-by-params).
    """

    n: int = 7
    population_size: int = 64
    p_r: float = 0.3
    p_den: float = 0.3
    p_mr: float = 0.6
    p_mf: float = 0.8
    constraints: Constraints = field(default_factory=Constraints)
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise GenomeError(f"n must be >= 1, got {self.n}")
        if self.population_size < 2:
            raise GenomeError("population_size must be >= 2")
        if not (0.0 <= self.p_r <= self.p_r + self.p_den <= 1.0):
            raise GenomeError(f"invalid init probabilities p_r={self.p_r}, p_den={self.p_den}")
        if not (0.0 <= self.p_mr <= self.p_mf <= 1.0):
            raise GenomeError(f"invalid mutation thresholds p_mr={self.p_mr}, p_mf={self.p_mf}")


def config_to_json(cfg: SearchConfig) -> dict:
    return {
        "n": cfg.n,
        "population_size": cfg.population_size,
        "p_r": cfg.p_r,
        "p_den": cfg.p_den,
        "p_mr": cfg.p_mr,
        "p_mf": cfg.p_mf,
        "constraints": {
            "min_score": cfg.constraints.min_score,
            "max_mult_adds": cfg.constraints.max_mult_adds,
        },
        "rng_seed": cfg.rng_seed,
    }


def config_from_json(obj: dict) -> SearchConfig:
    cons = obj.get("constraints", {})
    return SearchConfig(
        n=int(obj.get("n", 7)),
        population_size=int(obj.get("population_size", 64)),
        p_r=float(obj.get("p_r", 0.3)),
        p_den=float(obj.get("p_den", 0.3)),
        p_mr=float(obj.get("p_mr", 0.6)),
        p_mf=float(obj.get("p_mf", 0.8)),
        constraints=Constraints(
            min_score=float(cons.get("min_score", 26.0)),
            max_mult_adds=float(cons.get("max_mult_adds", 300e9)),
        ),
        rng_seed=int(obj.get("rng_seed", 0)),
    )
