"""Command-line entry points.

  search run   --config cfg.json [--resume ckpt] [--seed N]
               [--evaluator surrogate|external] [--worker-cmd CMD] [--workers W]
               [--generations G] [--checkpoint ckpt.json]
  search front --ckpt ckpt.json --out front.csv|front.json
  search cost  --model chromosome.txt [--height H --width W]
               [--aggregation concat|project_sum] [--graph-out graph.json]
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import cost_model, pipeline
from .genome import decode, encode


def _load_run_config(args) -> pipeline.RunConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = pipeline.RunConfig.from_json(json.load(fh))
    else:
        cfg = pipeline.RunConfig()
    updates = {}
    if args.seed is not None:
        updates["search"] = dataclasses.replace(cfg.search, rng_seed=args.seed)
    if args.generations is not None:
        updates["generations"] = args.generations
    if args.evaluator is not None:
        updates["evaluator_mode"] = args.evaluator
    if args.worker_cmd is not None:
        updates["worker_cmd"] = args.worker_cmd
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.checkpoint is not None:
        updates["checkpoint_path"] = args.checkpoint
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _cmd_run(args) -> int:
    cfg = _load_run_config(args)
    state = pipeline.run(cfg, resume=args.resume)
    front = pipeline.pareto_front(state.archive)
    print(f"finished generation {state.generation}: archive={len(state.archive)} "
          f"front={len(front.individuals)} feasible_only={front.feasible_only}")
    best = max(front.individuals, key=lambda ind: ind.objectives.score)
    print(f"best score {best.objectives.score:.4f} at "
          f"{best.objectives.mult_adds / 1e9:.2f}G mult-adds, "
          f"{best.objectives.params / 1e3:.1f}K params")
    if cfg.checkpoint_path:
        print(f"checkpoint written to {cfg.checkpoint_path}")
    return 0


def _cmd_front(args) -> int:
    state = pipeline.load_checkpoint(args.ckpt)
    if args.out.endswith(".json"):
        pipeline.export_front_json(state, args.out)
    elif args.out.endswith(".csv"):
        pipeline.export_front_csv(state, args.out)
    else:
        print("error: --out must end in .csv or .json", file=sys.stderr)
        return 2
    print(f"front exported to {args.out}")
    return 0


def _cmd_cost(args) -> int:
    with open(args.model, encoding="utf-8") as fh:
        chromosome = decode(fh.read())
    graph = cost_model.build_graph(chromosome, scale=2, aggregation=args.aggregation)
    params = cost_model.count_params(graph)
    mult_adds = cost_model.count_mult_adds(graph, args.height, args.width)
    print(encode(chromosome))
    print(f"params:    {params:,}")
    print(f"mult-adds: {mult_adds:,} at {args.height}x{args.width} ({args.aggregation})")
    if args.graph_out:
        with open(args.graph_out, "w", encoding="utf-8") as fh:
            json.dump(cost_model.graph_to_json(graph), fh, indent=2)
        print(f"graph exported to {args.graph_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="search",
                                     description="multi-objective architecture search")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a search")
    p_run.add_argument("--config", help="JSON run configuration")
    p_run.add_argument("--resume", help="checkpoint to resume from")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--evaluator", choices=["surrogate", "external"])
    p_run.add_argument("--worker-cmd", dest="worker_cmd")
    p_run.add_argument("--workers", type=int)
    p_run.add_argument("--generations", type=int)
    p_run.add_argument("--checkpoint", help="checkpoint output path")
    p_run.set_defaults(func=_cmd_run)

    p_front = sub.add_parser("front", help="export the Pareto front of a checkpoint")
    p_front.add_argument("--ckpt", required=True)
    p_front.add_argument("--out", required=True, help=".csv or .json output path")
    p_front.set_defaults(func=_cmd_front)

    p_cost = sub.add_parser("cost", help="price a chromosome file")
    p_cost.add_argument("--model", required=True, help="chromosome text file")
    p_cost.add_argument("--height", type=int, default=480)
    p_cost.add_argument("--width", type=int, default=480)
    p_cost.add_argument("--aggregation", choices=list(cost_model.AGGREGATIONS),
                        default=cost_model.CONCAT)
    p_cost.add_argument("--graph-out", dest="graph_out")
    p_cost.set_defaults(func=_cmd_cost)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
