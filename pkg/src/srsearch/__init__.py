"""Constrained multi-objective architecture search for lightweight
super-resolution networks: chromosome encoding, exact cost modeling,
NSGA-II population machinery, genetic and learned mutation operators, and
the search pipeline with checkpointing and Pareto exports.
"""

from .genome import (
    CellGene,
    Chromosome,
    Constraints,
    ConvKind,
    MacroGenome,
    SearchConfig,
    decode,
    encode,
    operator_set,
    sample_random,
    space_size,
)
from .cost_model import CostReport, ModelGraph, build_graph, cost_report, count_mult_adds, count_params
from .nsga2 import Individual, ObjectiveVector, dominates, fast_nondominated_sort, tournament_select, violation
from .evaluator import ArchitectureEvaluator, EvaluationRequest, EvaluationResponse, WorkerPool, surrogate_evaluate
from .pipeline import RunConfig, RunState, pareto_front, run, select_final

__version__ = "0.1.0"
