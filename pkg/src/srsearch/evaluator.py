"""Scoring chromosomes.

Two routes produce the quality score: a deterministic built-in surrogate
(so search dynamics are testable without any training) and an external
trainer pool speaking line-delimited JSON over stdin/stdout.  The two
cheap objectives always come from the cost model.

Wire protocol (UTF-8, one JSON object per line):
  request:  {"id", "chromosome", "graph", "train_config"}
  response: {"id", "status": "ok"|"error", "score", "mse"?, "message"?}
"""

from __future__ import annotations

import json
import logging
import math
import queue
import shlex
import subprocess
import threading
import uuid
from dataclasses import dataclass, field

from . import cost_model
from .genome import Chromosome, chromosome_to_json, encode
from .nsga2 import ObjectiveVector

logger = logging.getLogger(__name__)

SURROGATE_BASE = 30.0
SURROGATE_PARAMS_WEIGHT = 40.0
SURROGATE_SPARSITY_WEIGHT = 2.0
SURROGATE_DIVERSITY_WEIGHT = 1.0


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 16
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    loss: str = "L1"
    init_std: float = 0.02
    dataset_path: str = ""

    def to_json(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "loss": self.loss,
            "init_std": self.init_std,
            "dataset_path": self.dataset_path,
        }


@dataclass(frozen=True)
class EvaluationRequest:
    id: str
    chromosome: Chromosome
    train_config: TrainConfig = field(default_factory=TrainConfig)
    scale: int = 2
    aggregation: str = cost_model.CONCAT

    def to_json_line(self) -> str:
        graph = cost_model.build_graph(self.chromosome, scale=self.scale,
                                       aggregation=self.aggregation)
        payload = {
            "id": self.id,
            "chromosome": chromosome_to_json(self.chromosome),
            "graph": cost_model.graph_to_json(graph),
            "train_config": self.train_config.to_json(),
        }
        return json.dumps(payload)


@dataclass(frozen=True)
class EvaluationResponse:
    id: str
    status: str
    score: float = float("nan")
    mse: float | None = None
    message: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok" and math.isfinite(self.score)


def parse_response_line(line: str, expected_id: str) -> EvaluationResponse:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return EvaluationResponse(expected_id, "error", message=f"malformed response line: {line!r}")
    if not isinstance(obj, dict) or obj.get("id") != expected_id:
        return EvaluationResponse(expected_id, "error", message=f"response id mismatch: {line!r}")
    status = obj.get("status", "error")
    score = obj.get("score", float("nan"))
    try:
        score = float(score)
    except (TypeError, ValueError):
        return EvaluationResponse(expected_id, "error", message=f"non-numeric score: {line!r}")
    mse = obj.get("mse")
    return EvaluationResponse(
        expected_id, status, score,
        mse=float(mse) if mse is not None else None,
        message=obj.get("message"),
    )


def mse_to_psnr(mse: float) -> float:
    """PSNR in dB for [0, 1]-ranged images."""
    if mse <= 0:
        return float("inf")
    return 10.0 * math.log10(1.0 / mse)


def micro_diversity(c: Chromosome) -> float:
    return len(set(c.micro)) / c.n


def connection_sparsity(c: Chromosome) -> float:
    bits = c.macro.bits
    return 1.0 - sum(bits) / len(bits)


def surrogate_evaluate(c: Chromosome, aggregation: str = cost_model.CONCAT) -> ObjectiveVector:
    """Deterministic, seed-free stand-in score plus the exact cheap objectives.

    score = 30 - 40/log(1+params) - 2*(sparsity - 1/2)^2 + diversity:
    increasing in parameter count, rewarding mixed cells and an
    intermediate connection density.
    """
    report = cost_model.cost_report(c, aggregation=aggregation)
    sparsity = connection_sparsity(c)
    score = (
        SURROGATE_BASE
        - SURROGATE_PARAMS_WEIGHT / math.log1p(report.params)
        - SURROGATE_SPARSITY_WEIGHT * (sparsity - 0.5) ** 2
        + SURROGATE_DIVERSITY_WEIGHT * micro_diversity(c)
    )
    return ObjectiveVector(score=score, mult_adds=float(report.mult_adds),
                           params=float(report.params))


def objectives(c: Chromosome, score: float, h: int = 480, w: int = 480,
               aggregation: str = cost_model.CONCAT) -> ObjectiveVector:
    report = cost_model.cost_report(c, h=h, w=w, aggregation=aggregation)
    return ObjectiveVector(score=score, mult_adds=float(report.mult_adds),
                           params=float(report.params))


class _Worker:
    """One subprocess plus a reader thread feeding a line queue."""

    def __init__(self, command: list[str]):
        self.command = command
        self.proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
        )
        self.lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        try:
            for line in self.proc.stdout:
                self.lines.put(line)
        except ValueError:
            pass
        self.lines.put(None)  # EOF marker

    def request(self, line: str, timeout: float) -> str | None:
        """Sends one line, waits for one line; None means crash/EOF.

        Raises queue.Empty on timeout.
        """
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()
        return self.lines.get(timeout=timeout)

    def close(self):
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
            self.proc.terminate()
            self.proc.wait(timeout=5)
        except Exception:
            try:
                self.proc.kill()
            except Exception:
                pass


class WorkerPool:
    """Dispatches evaluation requests to W external worker processes.

    Each worker handles one request at a time.  A crashed worker's
    in-flight request is requeued once; a timed-out request is reported as
    an error and the worker replaced.
    """

    def __init__(self, command: str, workers: int = 1, timeout: float = 3600.0):
        if workers < 1:
            raise ValueError("need at least one worker")
        self.command = shlex.split(command)
        self.workers = workers
        self.timeout = timeout

    def evaluate(self, requests: list[EvaluationRequest]) -> list[EvaluationResponse]:
        tasks: queue.Queue = queue.Queue()
        for req in requests:
            tasks.put((req, 0))
        results: dict[str, EvaluationResponse] = {}
        lock = threading.Lock()

        def loop():
            worker: _Worker | None = None
            try:
                while True:
                    try:
                        req, attempt = tasks.get_nowait()
                    except queue.Empty:
                        return
                    if worker is None:
                        worker = _Worker(self.command)
                    try:
                        line = worker.request(req.to_json_line(), self.timeout)
                    except queue.Empty:
                        logger.warning("evaluation %s timed out after %.0fs", req.id, self.timeout)
                        with lock:
                            results[req.id] = EvaluationResponse(
                                req.id, "error", message="timeout")
                        worker.close()
                        worker = None
                        continue
                    except (BrokenPipeError, OSError):
                        line = None
                    if line is None:  # worker died
                        worker.close()
                        worker = None
                        if attempt == 0:
                            tasks.put((req, 1))
                        else:
                            with lock:
                                results[req.id] = EvaluationResponse(
                                    req.id, "error", message="worker crashed twice")
                        continue
                    with lock:
                        results[req.id] = parse_response_line(line.strip(), req.id)
            finally:
                if worker is not None:
                    worker.close()

        threads = [threading.Thread(target=loop) for _ in range(self.workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        return [
            results.get(req.id, EvaluationResponse(req.id, "error", message="no response"))
            for req in requests
        ]


def external_evaluate(requests: list[EvaluationRequest], pool: WorkerPool) -> list[EvaluationResponse]:
    return pool.evaluate(requests)


@dataclass
class EvalOutcome:
    objectives: ObjectiveVector
    ok: bool
    message: str | None = None


class ArchitectureEvaluator:
    """Memoizing facade over the surrogate or an external pool.

    Failed external evaluations map to worst-case objectives so the search
    can keep fixed generation sizes.
    """

    def __init__(self, mode: str = "surrogate", pool: WorkerPool | None = None,
                 train_config: TrainConfig | None = None, eval_h: int = 480,
                 eval_w: int = 480, aggregation: str = cost_model.CONCAT,
                 failure_score: float = 0.0):
        if mode not in ("surrogate", "external"):
            raise ValueError(f"unknown evaluator mode {mode!r}")
        if mode == "external" and pool is None:
            raise ValueError("external mode needs a WorkerPool")
        self.mode = mode
        self.pool = pool
        self.train_config = train_config or TrainConfig()
        self.eval_h = eval_h
        self.eval_w = eval_w
        self.aggregation = aggregation
        self.failure_score = failure_score
        self._memo: dict[str, EvalOutcome] = {}

    def _worst_case(self, c: Chromosome, message: str | None) -> EvalOutcome:
        report = cost_model.cost_report(c, h=self.eval_h, w=self.eval_w,
                                        aggregation=self.aggregation)
        vec = ObjectiveVector(score=self.failure_score,
                              mult_adds=float(report.mult_adds) * 1e3,
                              params=float(report.params) * 1e3)
        return EvalOutcome(objectives=vec, ok=False, message=message)

    def evaluate(self, chromosomes: list[Chromosome]) -> list[EvalOutcome]:
        keys = [encode(c) for c in chromosomes]
        pending: dict[str, Chromosome] = {}
        for key, c in zip(keys, chromosomes):
            if key not in self._memo and key not in pending:
                pending[key] = c
        if pending:
            if self.mode == "surrogate":
                for key, c in pending.items():
                    self._memo[key] = EvalOutcome(
                        objectives=surrogate_evaluate(c, aggregation=self.aggregation), ok=True)
            else:
                items = list(pending.items())
                requests = [
                    EvaluationRequest(id=uuid.uuid4().hex, chromosome=c,
                                      train_config=self.train_config,
                                      aggregation=self.aggregation)
                    for _, c in items
                ]
                responses = self.pool.evaluate(requests)
                for (key, c), resp in zip(items, responses):
                    if resp.ok:
                        self._memo[key] = EvalOutcome(
                            objectives=objectives(c, resp.score, h=self.eval_h, w=self.eval_w,
                                                  aggregation=self.aggregation),
                            ok=True)
                    else:
                        self._memo[key] = self._worst_case(c, resp.message)
        return [self._memo[key] for key in keys]
