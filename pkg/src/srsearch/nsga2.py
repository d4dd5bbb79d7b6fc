"""Constrained multi-objective population machinery.

Individuals carry a (score, mult_adds, params) objective triple (score
maximized, the other two minimized) plus a scalar constraint violation.
Comparison is feasibility first: a lower violation always wins; equal
violations compare by Pareto domination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .genome import Chromosome, Constraints

_EPS = 1e-12


@dataclass(frozen=True)
class ObjectiveVector:
    score: float
    mult_adds: float
    params: float

    def __post_init__(self) -> None:
        for v in (self.score, self.mult_adds, self.params):
            if not math.isfinite(v):
                raise ValueError(f"objectives must be finite, got {self}")
        if self.mult_adds <= 0 or self.params <= 0:
            raise ValueError(f"mult_adds and params must be positive, got {self}")

    def min_key(self) -> tuple[float, float, float]:
        """All-minimized form used by domination and crowding."""
        return (-self.score, self.mult_adds, self.params)


@dataclass
class Individual:
    chromosome: Chromosome
    objectives: ObjectiveVector
    violation: float = 0.0
    rank: int = 0
    crowding: float = 0.0


def violation(obj: ObjectiveVector, constraints: Constraints) -> float:
    """Normalized total constraint violation; 0 iff feasible."""
    score_gap = max(0.0, constraints.min_score - obj.score)
    cost_gap = max(0.0, obj.mult_adds - constraints.max_mult_adds)
    return score_gap / max(constraints.min_score, _EPS) + cost_gap / constraints.max_mult_adds


def dominates(a: Individual, b: Individual) -> bool:
    if a.violation != b.violation:
        return a.violation < b.violation
    ka, kb = a.objectives.min_key(), b.objectives.min_key()
    if any(x > y for x, y in zip(ka, kb)):
        return False
    return any(x < y for x, y in zip(ka, kb))


def _key_matrix(pop: list[Individual]) -> tuple[np.ndarray, np.ndarray]:
    keys = np.array([ind.objectives.min_key() for ind in pop], dtype=np.float64)
    viols = np.array([ind.violation for ind in pop], dtype=np.float64)
    return keys, viols


def fast_nondominated_sort(pop: list[Individual]) -> list[list[int]]:
    """Partitions the population into fronts and sets each individual's rank."""
    if not pop:
        return []
    keys, viols = _key_matrix(pop)
    ranks = kernels.assign_fronts(keys, viols)
    fronts: list[list[int]] = [[] for _ in range(int(ranks.max()) + 1)]
    for idx, rank in enumerate(ranks):
        pop[idx].rank = int(rank)
        fronts[int(rank)].append(idx)
    return fronts


def crowding_distance(front: list[int], pop: list[Individual]) -> np.ndarray:
    """Crowding distances for one front; also stored on the individuals."""
    values = np.array([pop[i].objectives.min_key() for i in front], dtype=np.float64)
    dist = kernels.crowding_distances(values)
    for i, d in zip(front, dist):
        pop[i].crowding = float(d)
    return dist


def rank_population(pop: list[Individual]) -> list[list[int]]:
    """Full NSGA-II bookkeeping: fronts, ranks, and crowding distances."""
    fronts = fast_nondominated_sort(pop)
    for front in fronts:
        crowding_distance(front, pop)
    return fronts


def tournament_select(pop: list[Individual], rng) -> Individual:
    """Binary tournament on (rank, crowding); residual ties flip a fair coin."""
    if len(pop) < 2:
        raise ValueError("tournament selection needs a population of >= 2")
    i = int(rng.integers(len(pop)))
    j = int(rng.integers(len(pop) - 1))
    if j >= i:
        j += 1
    a, b = pop[i], pop[j]
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a if rng.random() < 0.5 else b


def environmental_selection(pop: list[Individual], size: int) -> list[Individual]:
    """Truncates to `size` by whole fronts, splitting the last one by crowding."""
    fronts = rank_population(pop)
    survivors: list[Individual] = []
    for front in fronts:
        if len(survivors) + len(front) <= size:
            survivors.extend(pop[i] for i in front)
            continue
        remaining = size - len(survivors)
        by_crowding = sorted(front, key=lambda i: -pop[i].crowding)
        survivors.extend(pop[i] for i in by_crowding[:remaining])
        break
    return survivors
