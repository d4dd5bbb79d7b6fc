"""Genetic operators: seeded initialization, dual-space single-point
crossover, and the three-way mutation.

Initialization repeats one operator across all cells per model (operators
drawn without replacement while the population fits in the operator set)
and picks the connection pattern from a categorical draw: random bits with
probability p_r, fully dense with p_den, otherwise backbone-only.

Mutation draws a strategy per child: a minimal random step (one gene, one
bit) below p_mr, otherwise a full micro resampling by roulette wheel with
weights derived from per-operator cost (mult-adds below p_mf, parameter
count above), leaving the macro genome untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from . import cost_model
from .genome import (
    OPERATOR_COUNT,
    Chromosome,
    GenomeError,
    MacroGenome,
    SearchConfig,
    macro_length,
    macro_row_span,
    operator_index,
    operator_set,
)


class InitialConnections(Enum):
    RANDOM = "random"
    DENSE = "dense"
    NONE = "none"


class MutationStrategy(Enum):
    RANDOM = "random"
    RWS_FLOPS = "rws_flops"
    RWS_PARAMS = "rws_params"


class RwsObjective(Enum):
    FLOPS = "flops"
    PARAMS = "params"


def draw_initial_connections(p_r: float, p_den: float, rng) -> InitialConnections:
    p = rng.random()
    if p < p_r:
        return InitialConnections.RANDOM
    if p < p_r + p_den:
        return InitialConnections.DENSE
    return InitialConnections.NONE


def sample_initial_macro(n: int, p_r: float, p_den: float, rng) -> MacroGenome:
    kind = draw_initial_connections(p_r, p_den, rng)
    length = macro_length(n)
    if kind is InitialConnections.RANDOM:
        bits = tuple(int(b) for b in rng.integers(0, 2, size=length))
    elif kind is InitialConnections.DENSE:
        bits = (1,) * length
    else:
        bits = (0,) * length
    return MacroGenome(n, bits)


def initialize(config: SearchConfig, rng) -> list[Chromosome]:
    """Seed population: each model is a single operator repeated n times."""
    ops = operator_set()
    count = config.population_size
    if count <= OPERATOR_COUNT:
        op_ids = [int(i) for i in rng.permutation(OPERATOR_COUNT)[:count]]
    else:
        op_ids = [int(i) for i in rng.permutation(OPERATOR_COUNT)]
        op_ids += [int(i) for i in rng.integers(0, OPERATOR_COUNT, size=count - OPERATOR_COUNT)]
    out = []
    for op in op_ids:
        micro = (ops[op],) * config.n
        macro = sample_initial_macro(config.n, config.p_r, config.p_den, rng)
        out.append(Chromosome(micro, macro))
    return out


def crossover(a: Chromosome, b: Chromosome, rng) -> Chromosome:
    """Single-point crossover in both spaces at once.

    The child is parent a with one micro gene and one whole macro row
    (the row's bits taken as a unit) replaced by parent b's.
    """
    if a.n != b.n:
        raise GenomeError(f"crossover parents disagree on n: {a.n} != {b.n}")
    n = a.n
    i = int(rng.integers(1, n + 1))
    j = int(rng.integers(1, n + 1))
    micro = list(a.micro)
    micro[i - 1] = b.micro[i - 1]
    bits = list(a.macro.bits)
    start, stop = macro_row_span(n, j)
    bits[start:stop] = b.macro.bits[start:stop]
    return Chromosome(tuple(micro), MacroGenome(n, tuple(bits)))


def draw_mutation_strategy(p_mr: float, p_mf: float, rng) -> MutationStrategy:
    p = rng.random()
    if p < p_mr:
        return MutationStrategy.RANDOM
    if p < p_mf:
        return MutationStrategy.RWS_FLOPS
    return MutationStrategy.RWS_PARAMS


def rws_weights(costs, toward_cheap: bool = True) -> np.ndarray:
    """Log-anchored roulette weights over operator costs.

    Weights are log(max_cost) + eps - log(cost) (or the mirror image when
    weighting toward expensive operators), normalized to sum 1.  The anchor
    makes the weights invariant under scaling all costs by a constant; eps
    is a thousandth of the log-span so the worst operator keeps a positive
    weight.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if np.any(costs <= 0):
        raise ValueError("operator costs must be positive")
    logs = np.log(costs)
    span = float(logs.max() - logs.min())
    if span == 0.0:
        return np.full(costs.shape, 1.0 / costs.size)
    eps = 1e-3 * span
    raw = (logs.max() + eps - logs) if toward_cheap else (logs - logs.min() + eps)
    return raw / raw.sum()


@dataclass(frozen=True)
class RwsTable:
    objective: RwsObjective
    input_width: int
    weights: np.ndarray
    cumulative: np.ndarray

    def sample(self, rng) -> int:
        u = rng.random()
        idx = int(np.searchsorted(self.cumulative, u, side="right"))
        return min(idx, OPERATOR_COUNT - 1)


@lru_cache(maxsize=64)
def rws_table(objective: RwsObjective, input_width: int = 32,
              toward_cheap: bool = True) -> RwsTable:
    """Roulette table over the 192 operators, costed at the given input width."""
    costs = []
    for gene in operator_set():
        report = cost_model.standalone_cell_cost(gene, input_width)
        costs.append(report.mult_adds if objective is RwsObjective.FLOPS else report.params)
    weights = rws_weights(costs, toward_cheap=toward_cheap)
    return RwsTable(
        objective=objective,
        input_width=input_width,
        weights=weights,
        cumulative=np.cumsum(weights),
    )


def mutate(m: Chromosome, config: SearchConfig, rng, input_width: int = 32,
           toward_cheap: bool = True) -> Chromosome:
    """Applies the strategy drawn from (p_mr, p_mf).

    Random mutation swaps exactly one micro gene (for a different one) and
    flips exactly one macro bit.  The roulette strategies resample every
    micro gene independently and keep the macro genome unchanged.
    """
    strategy = draw_mutation_strategy(config.p_mr, config.p_mf, rng)
    ops = operator_set()
    n = m.n
    if strategy is MutationStrategy.RANDOM:
        pos = int(rng.integers(n))
        current = operator_index(m.micro[pos])
        repl = int(rng.integers(OPERATOR_COUNT - 1))
        if repl >= current:
            repl += 1
        micro = list(m.micro)
        micro[pos] = ops[repl]
        bit = int(rng.integers(macro_length(n)))
        bits = list(m.macro.bits)
        bits[bit] ^= 1
        return Chromosome(tuple(micro), MacroGenome(n, tuple(bits)))
    objective = RwsObjective.FLOPS if strategy is MutationStrategy.RWS_FLOPS else RwsObjective.PARAMS
    table = rws_table(objective, input_width, toward_cheap)
    micro = tuple(ops[table.sample(rng)] for _ in range(n))
    return Chromosome(micro, m.macro)
