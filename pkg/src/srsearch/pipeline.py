"""Search orchestration: the generation loop, archive, checkpoints, and
Pareto-front exports.

One numpy Generator drives every stochastic choice on the sequential
path, so a fixed seed reproduces a surrogate run bit for bit, including
across a checkpoint/restore interruption.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import controller, cost_model, variation
from .evaluator import ArchitectureEvaluator, EvalOutcome, TrainConfig, WorkerPool
from .genome import (
    Chromosome,
    SearchConfig,
    config_from_json,
    config_to_json,
    decode,
    encode,
    encode_compact,
)
from .nsga2 import (
    Individual,
    ObjectiveVector,
    environmental_selection,
    rank_population,
    tournament_select,
    violation,
)
from . import kernels

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ControllerSettings:
    d_e: int = 32
    d_h: int = 64
    fc_width: int = 128
    lr: float = 1e-3
    sample_fraction: float = 0.25
    baseline_decay: float = 0.95


@dataclass(frozen=True)
class RunConfig:
    search: SearchConfig = field(default_factory=SearchConfig)
    generations: int = -(-10000 // 64)  # paper-scale budget of ~10k models
    controller: ControllerSettings = field(default_factory=ControllerSettings)
    evaluator_mode: str = "surrogate"
    worker_cmd: str = ""
    workers: int = 1
    worker_timeout: float = 3600.0
    train_config: TrainConfig = field(default_factory=TrainConfig)
    aggregation: str = cost_model.CONCAT
    eval_h: int = 480
    eval_w: int = 480
    rws_input_width: int = 32
    rws_toward_cheap: bool = True
    checkpoint_path: str = ""

    def to_json(self) -> dict:
        return {
            "search": config_to_json(self.search),
            "generations": self.generations,
            "controller": {
                "d_e": self.controller.d_e,
                "d_h": self.controller.d_h,
                "fc_width": self.controller.fc_width,
                "lr": self.controller.lr,
                "sample_fraction": self.controller.sample_fraction,
                "baseline_decay": self.controller.baseline_decay,
            },
            "evaluator_mode": self.evaluator_mode,
            "worker_cmd": self.worker_cmd,
            "workers": self.workers,
            "worker_timeout": self.worker_timeout,
            "train_config": self.train_config.to_json(),
            "aggregation": self.aggregation,
            "eval_h": self.eval_h,
            "eval_w": self.eval_w,
            "rws_input_width": self.rws_input_width,
            "rws_toward_cheap": self.rws_toward_cheap,
            "checkpoint_path": self.checkpoint_path,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        ctrl = obj.get("controller", {})
        tc = obj.get("train_config", {})
        return cls(
            search=config_from_json(obj.get("search", {})),
            generations=int(obj.get("generations", -(-10000 // 64))),
            controller=ControllerSettings(
                d_e=int(ctrl.get("d_e", 32)),
                d_h=int(ctrl.get("d_h", 64)),
                fc_width=int(ctrl.get("fc_width", 128)),
                lr=float(ctrl.get("lr", 1e-3)),
                sample_fraction=float(ctrl.get("sample_fraction", 0.25)),
                baseline_decay=float(ctrl.get("baseline_decay", 0.95)),
            ),
            evaluator_mode=obj.get("evaluator_mode", "surrogate"),
            worker_cmd=obj.get("worker_cmd", ""),
            workers=int(obj.get("workers", 1)),
            worker_timeout=float(obj.get("worker_timeout", 3600.0)),
            train_config=TrainConfig(
                epochs=int(tc.get("epochs", 200)),
                batch_size=int(tc.get("batch_size", 16)),
                lr=float(tc.get("lr", 1e-4)),
                beta1=float(tc.get("beta1", 0.9)),
                beta2=float(tc.get("beta2", 0.999)),
                loss=tc.get("loss", "L1"),
                init_std=float(tc.get("init_std", 0.02)),
                dataset_path=tc.get("dataset_path", ""),
            ),
            aggregation=obj.get("aggregation", cost_model.CONCAT),
            eval_h=int(obj.get("eval_h", 480)),
            eval_w=int(obj.get("eval_w", 480)),
            rws_input_width=int(obj.get("rws_input_width", 32)),
            rws_toward_cheap=bool(obj.get("rws_toward_cheap", True)),
            checkpoint_path=obj.get("checkpoint_path", ""),
        )


@dataclass
class RunState:
    config: RunConfig
    generation: int
    population: list[Individual]
    archive: dict[str, Individual]
    controller_params: controller.ControllerParams
    baseline: controller.EmaBaseline
    rng: np.random.Generator


def _make_individual(c: Chromosome, outcome: EvalOutcome, cfg: RunConfig) -> Individual:
    return Individual(
        chromosome=c,
        objectives=outcome.objectives,
        violation=violation(outcome.objectives, cfg.search.constraints),
    )


def _evaluate_into_archive(chroms: list[Chromosome], state: RunState,
                           ev: ArchitectureEvaluator) -> list[Individual]:
    outcomes = ev.evaluate(chroms)
    individuals = []
    for c, outcome in zip(chroms, outcomes):
        ind = _make_individual(c, outcome, state.config)
        individuals.append(ind)
        key = encode(c)
        if key not in state.archive:
            # the archive keeps its own record so population-lifecycle
            # rank/crowding mutations never leak into it
            state.archive[key] = _make_individual(c, outcome, state.config)
    return individuals


def make_evaluator(cfg: RunConfig) -> ArchitectureEvaluator:
    pool = None
    if cfg.evaluator_mode == "external":
        if not cfg.worker_cmd:
            raise ValueError("external evaluator mode needs worker_cmd")
        pool = WorkerPool(cfg.worker_cmd, workers=cfg.workers, timeout=cfg.worker_timeout)
    return ArchitectureEvaluator(
        mode=cfg.evaluator_mode, pool=pool, train_config=cfg.train_config,
        eval_h=cfg.eval_h, eval_w=cfg.eval_w, aggregation=cfg.aggregation,
    )


def init_state(cfg: RunConfig) -> RunState:
    rng = np.random.default_rng(cfg.search.rng_seed)
    params = controller.init_params(
        cfg.search.n, d_e=cfg.controller.d_e, d_h=cfg.controller.d_h,
        fc_width=cfg.controller.fc_width, rng=rng,
    )
    return RunState(
        config=cfg,
        generation=0,
        population=[],
        archive={},
        controller_params=params,
        baseline=controller.EmaBaseline(decay=cfg.controller.baseline_decay),
        rng=rng,
    )


def _step_generation(state: RunState, ev: ArchitectureEvaluator) -> None:
    cfg = state.config
    n_pop = cfg.search.population_size
    n_ctrl = int(round(cfg.controller.sample_fraction * n_pop))
    trajectories: list[controller.Trajectory] = []
    offspring_chroms: list[Chromosome] = []
    for k in range(n_pop):
        if k < n_ctrl:
            traj = controller.sample(state.controller_params, state.rng)
            trajectories.append(traj)
            offspring_chroms.append(traj.chromosome)
        else:
            p1 = tournament_select(state.population, state.rng)
            p2 = tournament_select(state.population, state.rng)
            child = variation.crossover(p1.chromosome, p2.chromosome, state.rng)
            child = variation.mutate(child, cfg.search, state.rng,
                                     input_width=cfg.rws_input_width,
                                     toward_cheap=cfg.rws_toward_cheap)
            offspring_chroms.append(child)
    offspring = _evaluate_into_archive(offspring_chroms, state, ev)

    if trajectories:
        scores = [offspring[i].objectives.score for i in range(len(trajectories))]
        for traj, score in zip(trajectories, scores):
            controller.assign_terminal_reward(traj, state.baseline.advantage(score))
        state.controller_params = controller.reinforce_update(
            state.controller_params, trajectories, cfg.controller.lr)
        state.baseline.update(float(np.mean(scores)))

    combined = state.population + offspring
    state.population = environmental_selection(combined, n_pop)


def run(cfg: RunConfig, resume: str | None = None,
        evaluator: ArchitectureEvaluator | None = None) -> RunState:
    """Executes the configured number of generations, checkpointing each one."""
    ev = evaluator or make_evaluator(cfg)
    if resume:
        state = load_checkpoint(resume)
        # the resumed run honors the new generation budget but nothing else
        state.config = replace(state.config, generations=cfg.generations,
                               checkpoint_path=cfg.checkpoint_path or state.config.checkpoint_path)
    else:
        state = init_state(cfg)
        initial = variation.initialize(cfg.search, state.rng)
        state.population = _evaluate_into_archive(initial, state, ev)
        rank_population(state.population)
        _checkpoint_if_configured(state)
    while state.generation < cfg.generations:
        _step_generation(state, ev)
        state.generation += 1
        _checkpoint_if_configured(state)
    return state


def _checkpoint_if_configured(state: RunState) -> None:
    if state.config.checkpoint_path:
        save_checkpoint(state, state.config.checkpoint_path)


# ---------------------------------------------------------------------------
# Pareto-front utilities


@dataclass
class ParetoFront:
    individuals: list[Individual]
    feasible_only: bool  # False flags the fallback to infeasible members


def pareto_front(archive: dict[str, Individual] | list[Individual]) -> ParetoFront:
    """Nondominated feasible archive members, ordered by mult-adds.

    Falls back to the nondominated infeasible set (flagged) when nothing
    is feasible.
    """
    members = list(archive.values()) if isinstance(archive, dict) else list(archive)
    if not members:
        raise ValueError("empty archive")
    feasible = [ind for ind in members if ind.violation == 0.0]
    pool = feasible if feasible else members
    keys = np.array([ind.objectives.min_key() for ind in pool], dtype=np.float64)
    viols = np.zeros(len(pool)) if feasible else np.array([i.violation for i in pool])
    mask = kernels.nondominated_mask(keys, viols)
    front = [ind for ind, keep in zip(pool, mask) if keep]
    front.sort(key=lambda ind: (ind.objectives.mult_adds, ind.objectives.params,
                                encode(ind.chromosome)))
    return ParetoFront(front, feasible_only=bool(feasible))


def select_final(front: list[Individual], k: int) -> list[Individual]:
    """The k most spread-out front members over (score, mult_adds) only."""
    if k > len(front):
        raise ValueError(f"cannot select {k} from a front of {len(front)}")
    values = np.array(
        [(-ind.objectives.score, ind.objectives.mult_adds) for ind in front],
        dtype=np.float64,
    )
    dist = kernels.crowding_distances(values)
    order = sorted(range(len(front)), key=lambda i: (
        0 if math.isinf(dist[i]) else 1,  # boundaries first
        -dist[i] if math.isfinite(dist[i]) else 0.0,
        front[i].objectives.mult_adds,
    ))
    return [front[i] for i in order[:k]]


def hypervolume(points: np.ndarray, reference: np.ndarray) -> float:
    """Exact dominated hypervolume for 3-objective minimization.

    Sweeps the third coordinate, maintaining the 2-D staircase of the
    first two; contributions beyond the reference point are clipped out.
    """
    points = np.asarray(points, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError("hypervolume expects (N, 3) points")
    points = points[np.all(points <= reference, axis=1)]
    if points.size == 0:
        return 0.0
    order = np.lexsort((points[:, 1], points[:, 0], points[:, 2]))
    points = points[order]

    xs: list[float] = []  # staircase x ascending; y strictly descending
    ys: list[float] = []

    def area() -> float:
        total = 0.0
        for idx, (x, y) in enumerate(zip(xs, ys)):
            next_x = xs[idx + 1] if idx + 1 < len(xs) else reference[0]
            total += (next_x - x) * (reference[1] - y)
        return total

    def insert(x: float, y: float) -> None:
        pos = bisect.bisect_left(xs, x)
        if pos > 0 and ys[pos - 1] <= y:
            return  # dominated in 2-D
        while pos < len(xs) and ys[pos] >= y:
            xs.pop(pos)
            ys.pop(pos)
        xs.insert(pos, x)
        ys.insert(pos, y)

    volume = 0.0
    i = 0
    n = len(points)
    prev_z = None
    while i < n:
        z = points[i, 2]
        if prev_z is not None:
            volume += area() * (z - prev_z)
        while i < n and points[i, 2] == z:
            insert(points[i, 0], points[i, 1])
            i += 1
        prev_z = z
    volume += area() * (reference[2] - prev_z)
    return volume


def archive_hypervolume(archive, reference: np.ndarray) -> float:
    front = pareto_front(archive)
    pts = np.array([ind.objectives.min_key() for ind in front.individuals], dtype=np.float64)
    return hypervolume(pts, reference)


# ---------------------------------------------------------------------------
# Checkpointing


def _individual_to_json(ind: Individual) -> dict:
    return {
        "chromosome": encode_compact(ind.chromosome),
        "score": ind.objectives.score,
        "mult_adds": ind.objectives.mult_adds,
        "params": ind.objectives.params,
        "violation": ind.violation,
        "rank": ind.rank,
        "crowding": ind.crowding,
    }


def _individual_from_json(obj: dict) -> Individual:
    return Individual(
        chromosome=decode(obj["chromosome"]),
        objectives=ObjectiveVector(
            score=obj["score"], mult_adds=obj["mult_adds"], params=obj["params"]),
        violation=obj["violation"],
        rank=obj["rank"],
        crowding=obj["crowding"],
    )


def save_checkpoint(state: RunState, path: str) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": state.config.to_json(),
        "generation": state.generation,
        "baseline": state.baseline.value,
        "rng_state": state.rng.bit_generator.state,
        "population": [_individual_to_json(ind) for ind in state.population],
        "archive": [_individual_to_json(ind) for ind in state.archive.values()],
        "controller": controller.params_to_json(state.controller_params),
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> RunState:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    cfg = RunConfig.from_json(payload["config"])
    rng = np.random.default_rng()
    rng.bit_generator.state = payload["rng_state"]
    archive_list = [_individual_from_json(o) for o in payload["archive"]]
    state = RunState(
        config=cfg,
        generation=int(payload["generation"]),
        population=[_individual_from_json(o) for o in payload["population"]],
        archive={encode(ind.chromosome): ind for ind in archive_list},
        controller_params=controller.params_from_json(payload["controller"]),
        baseline=controller.EmaBaseline(
            decay=cfg.controller.baseline_decay, value=float(payload["baseline"])),
        rng=rng,
    )
    return state


# ---------------------------------------------------------------------------
# Exports


def export_front_csv(state: RunState, path: str) -> None:
    front = pareto_front(state.archive)
    rank_population(front.individuals)  # fresh rank/crowding over the front
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# aggregation={state.config.aggregation} "
                 f"eval_size={state.config.eval_h}x{state.config.eval_w} "
                 f"scale=2 feasible_only={front.feasible_only}\n")
        writer = csv.writer(fh)
        writer.writerow(["encoding", "score", "mult_adds", "params", "rank", "crowding"])
        for ind in front.individuals:
            writer.writerow([
                encode_compact(ind.chromosome),
                repr(ind.objectives.score),
                repr(ind.objectives.mult_adds),
                repr(ind.objectives.params),
                ind.rank,
                repr(ind.crowding),
            ])


def export_front_json(state: RunState, path: str) -> None:
    front = pareto_front(state.archive)
    rank_population(front.individuals)
    payload = {
        "conventions": {
            "aggregation": state.config.aggregation,
            "eval_h": state.config.eval_h,
            "eval_w": state.config.eval_w,
            "scale": 2,
        },
        "feasible_only": front.feasible_only,
        "front": [_individual_to_json(ind) for ind in front.individuals],
        "archive_size": len(state.archive),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
