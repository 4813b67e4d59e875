"""Command line interface.

Subcommands: gen, features, solve, verify, select, train, bench. Every
subcommand emits a single JSON object on stdout (bench also writes a CSV and
figures); failures print a JSON error object and exit non-zero. Outputs other
than wall times are deterministic for a fixed seed and group count.

Config precedence for solve/verify: explicit queue flags select the config
directly; otherwise --model/--auto ranks the candidate grid with a trained
selector; otherwise the rule-based decision list picks one. The resolved
config is echoed in the run header either way.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from typing import List, Optional, Tuple

from . import __version__
from .adaptive import (
    ConfigCandidate,
    SelectorModel,
    benchmark_graphs,
    enumerate_candidates,
    read_records_csv,
    select_config,
    select_rule_based,
    train_selector,
    write_records_csv,
)
from .core import INF, EngineError, L1_TYPES, L2_TYPES, MlmqConfig
from .engine import (
    EngineConfig,
    compare_distances,
    dijkstra_oracle,
    distances_blob,
    resolve_config,
    sssp_solve,
    unit_weight_view,
)
from .graph import (
    CsrGraph,
    extract_features,
    generate_graph,
    load_graph,
    save_graph,
)

ENV_NUM_GROUPS = "MLQ_NUM_GROUPS"
ENV_MODEL = "MLQ_MODEL"

_EXIT_OK = 0
_EXIT_MISMATCH = 1
_EXIT_ERROR = 2

_CONFIG_FLAGS = ("l1", "l2", "wb", "delta", "delta_nf", "filter_f",
                 "l1_capacity", "l0_capacity", "block_size", "block_num",
                 "bmax", "bnum", "node_batch", "pnum")

_MAX_INLINE_DEFAULT = 1_000_000


def _emit(obj: dict, out: Optional[str] = None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        brief = {k: obj[k] for k in ("subcommand", "graph") if k in obj}
        brief["out"] = out
        print(json.dumps(brief, indent=2))
    else:
        print(text)


def _fail(exc: BaseException) -> int:
    print(json.dumps({"error": {
        "type": type(exc).__name__,
        "message": str(exc),
    }}, indent=2))
    return _EXIT_ERROR


# ---------------------------------------------------------------------------
# Input handling
# ---------------------------------------------------------------------------


def parse_gen_spec(spec: str, seed: int = 0) -> Tuple[str, dict]:
    """Parse generator shorthand like path:1000, grid2d:30x40,1,100,
    uniform:1000,5000 or rmat:12,8."""
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    parts = [p.strip() for p in rest.split(",")] if rest else []
    try:
        if kind == "path":
            params = {"n": int(parts[0])}
            if len(parts) >= 3:
                params.update(wmin=int(parts[1]), wmax=int(parts[2]))
        elif kind == "grid2d":
            rows, _, cols = parts[0].partition("x")
            params = {"rows": int(rows), "cols": int(cols)}
            if len(parts) >= 3:
                params.update(wmin=int(parts[1]), wmax=int(parts[2]))
        elif kind == "uniform":
            params = {"n": int(parts[0]), "m": int(parts[1])}
            if len(parts) >= 4:
                params.update(wmin=int(parts[2]), wmax=int(parts[3]))
        elif kind == "rmat":
            params = {"scale": int(parts[0])}
            if len(parts) >= 2:
                params["edge_factor"] = int(parts[1])
            if len(parts) >= 4:
                params.update(wmin=int(parts[2]), wmax=int(parts[3]))
        else:
            raise ValueError(
                f"unknown generator {kind!r}; expected path, grid2d, uniform or rmat")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ValueError) and "unknown generator" in str(exc):
            raise
        raise ValueError(f"bad generator spec {spec!r}: {exc}") from exc
    return kind, params


def _add_input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="graph file (.gr DIMACS or .mtx Matrix Market)")
    p.add_argument("--format", choices=("dimacs", "mm"),
                   help="input format when the extension is ambiguous")
    p.add_argument("--gen", help="generator spec, e.g. path:1000 or grid2d:30x40,1,100")
    p.add_argument("--gen-seed", type=int, default=0,
                   help="seed for --gen (default 0)")
    p.add_argument("--weight-scale", type=int, default=1000,
                   help="scale factor for real-valued Matrix Market weights")


def _load_input(args) -> Tuple[CsrGraph, dict]:
    if bool(args.graph) == bool(args.gen):
        raise ValueError("exactly one of --graph or --gen is required")
    if args.graph:
        graph = load_graph(args.graph, fmt=args.format,
                           weight_scale=args.weight_scale)
        origin = {"file": args.graph}
    else:
        kind, params = parse_gen_spec(args.gen)
        graph = generate_graph(kind, seed=args.gen_seed, **params)
        origin = {"gen": args.gen, "gen_seed": args.gen_seed}
    origin["num_vertices"] = graph.num_vertices
    origin["num_edges"] = graph.num_edges
    return graph, origin


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------


def _add_config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("queue configuration (explicit flags win)")
    g.add_argument("--l1", choices=L1_TYPES, default=None)
    g.add_argument("--l2", choices=L2_TYPES, default=None)
    g.add_argument("--wb", type=int, default=None,
                   help="buffer flush period in writes; 0 disables")
    g.add_argument("--delta", type=int, default=None, help="bucket width")
    g.add_argument("--delta-nf", type=int, default=None, help="near/far band width")
    g.add_argument("--filter-f", type=int, default=None, help="filter admission bound")
    g.add_argument("--l1-capacity", type=int, default=None)
    g.add_argument("--l0-capacity", type=int, default=None)
    g.add_argument("--block-size", type=int, default=None)
    g.add_argument("--block-num", type=int, default=None)
    g.add_argument("--bmax", type=int, default=None, help="bucket ring length")
    g.add_argument("--bnum", type=int, default=None, help="bucket read window")
    g.add_argument("--node-batch", type=int, default=None)
    g.add_argument("--pnum", type=int, default=None, help="queue count for multi")
    s = p.add_argument_group("config selection")
    s.add_argument("--auto", action="store_true",
                   help=f"rank the default grid with a trained model "
                        f"(path from --model or ${ENV_MODEL})")
    s.add_argument("--model", default=None, help="selector model file")
    e = p.add_argument_group("engine")
    e.add_argument("--num-groups", type=int, default=None,
                   help=f"worker groups (default ${ENV_NUM_GROUPS} or 4)")
    e.add_argument("--lanes", type=int, default=None, help="lanes per group")
    e.add_argument("--th-v", type=int, default=None,
                   help="degree threshold for cooperative relaxation")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--no-dup-elim", action="store_true",
                   help="disable duplicate elimination on reads")
    e.add_argument("--watchdog", type=float, default=60.0,
                   help="abort the run after this many seconds")


def _default_num_groups(args) -> int:
    if args.num_groups is not None:
        return args.num_groups
    env = os.environ.get(ENV_NUM_GROUPS)
    if env:
        return int(env)
    return 4


def _explicit_config(args) -> Optional[MlmqConfig]:
    """Build a config from explicit flags, or None when none were given."""
    if all(getattr(args, f) is None for f in _CONFIG_FLAGS):
        return None
    cfg = MlmqConfig()
    if args.l1 is not None:
        cfg.l1_type = args.l1
    if args.l2 is not None:
        cfg.l2_type = args.l2
    if args.wb is not None:
        cfg.l1_params.wb = args.wb
    if args.delta is not None:
        cfg.l2_params.delta = args.delta
    if args.delta_nf is not None:
        cfg.l1_params.delta_nf = args.delta_nf
    if args.filter_f is not None:
        cfg.l1_params.filter_f = args.filter_f
    if args.l1_capacity is not None:
        cfg.l1_params.capacity = args.l1_capacity
    if args.l0_capacity is not None:
        cfg.l0_capacity = args.l0_capacity
    if args.block_size is not None:
        cfg.l2_params.block_size = args.block_size
    if args.block_num is not None:
        cfg.l2_params.block_num = args.block_num
    if args.bmax is not None:
        cfg.l2_params.bmax = args.bmax
    if args.bnum is not None:
        cfg.l2_params.bnum = args.bnum
    if args.node_batch is not None:
        cfg.l2_params.node_batch = args.node_batch
    if args.pnum is not None:
        cfg.l2_params.pnum = args.pnum
    return cfg


def _model_path(args) -> Optional[str]:
    if args.model:
        return args.model
    if args.auto:
        return os.environ.get(ENV_MODEL) or None
    return None


def _pick_config(args, graph: CsrGraph, features) -> Tuple[MlmqConfig, str]:
    """Apply the precedence: explicit flags, then model, then rule-based."""
    explicit = _explicit_config(args)
    if explicit is not None:
        return explicit, "explicit"
    num_groups = _default_num_groups(args)
    path = _model_path(args)
    if path:
        model = SelectorModel.load(path)
        ranked = select_config(features, enumerate_candidates(), model)
        return ranked[0][0].bind(features, num_groups=num_groups), "model"
    cand = select_rule_based(features)
    return cand.bind(features, num_groups=num_groups), "rule_based"


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        num_groups=_default_num_groups(args),
        lanes_per_group=args.lanes,
        th_v=args.th_v,
        duplicate_elimination=not args.no_dup_elim,
        seed=args.seed,
    )


def _header(args, origin: dict, source: int, cfg: MlmqConfig,
            eng: EngineConfig, config_source: str) -> dict:
    return {
        "version": __version__,
        "graph": origin,
        "source": source,
        "config_source": config_source,
        "config": cfg.to_json_dict(),
        "engine": asdict(eng),
    }


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_gen(args) -> int:
    kind, params = parse_gen_spec(args.spec)
    graph = generate_graph(kind, seed=args.gen_seed, **params)
    save_graph(graph, args.out, fmt=args.format)
    _emit({
        "subcommand": "gen",
        "spec": args.spec,
        "gen_seed": args.gen_seed,
        "path": args.out,
        "num_vertices": graph.num_vertices,
        "num_edges": graph.num_edges,
    })
    return _EXIT_OK


def _cmd_features(args) -> int:
    graph, origin = _load_input(args)
    feats = extract_features(graph)
    _emit({
        "subcommand": "features",
        "graph": origin,
        "features": feats.to_json_dict(),
    }, args.out)
    return _EXIT_OK


def _inline_distances(distances: List[int]) -> List[Optional[int]]:
    return [None if d == INF else d for d in distances]


def _cmd_solve(args) -> int:
    graph, origin = _load_input(args)
    feats = extract_features(graph)
    cfg, config_source = _pick_config(args, graph, feats)
    eng = _engine_config(args)
    result = sssp_solve(graph, args.source, cfg, eng, features=feats,
                        unit_weights=args.unit_weights,
                        watchdog_s=args.watchdog)
    out = _header(args, origin, args.source, result.config_used,
                  result.engine_used, config_source)
    out["subcommand"] = "solve"
    out["unit_weights"] = args.unit_weights
    out["metrics"] = result.metrics.to_json_dict()
    n = graph.num_vertices
    if n <= args.max_inline_distances:
        out["distances"] = _inline_distances(result.distances)
    else:
        base = os.path.splitext(args.out)[0] if args.out else f"solve.s{args.source}"
        side = base + ".distances.u64"
        with open(side, "wb") as fh:
            fh.write(distances_blob(result.distances))
        out["distances_file"] = side
        out["distances_format"] = "uint64 little-endian, all-ones is unreachable"
    _emit(out, args.out)
    return _EXIT_OK


def _cmd_verify(args) -> int:
    graph, origin = _load_input(args)
    feats = extract_features(graph)
    cfg, config_source = _pick_config(args, graph, feats)
    eng = _engine_config(args)
    result = sssp_solve(graph, args.source, cfg, eng, features=feats,
                        unit_weights=args.unit_weights,
                        watchdog_s=args.watchdog)
    oracle_graph = unit_weight_view(graph) if args.unit_weights else graph
    oracle = dijkstra_oracle(oracle_graph, args.source)
    mismatch = compare_distances(result.distances, oracle)
    out = _header(args, origin, args.source, result.config_used,
                  result.engine_used, config_source)
    out["subcommand"] = "verify"
    out["unit_weights"] = args.unit_weights
    out["metrics"] = result.metrics.to_json_dict()
    out["match"] = mismatch is None
    if mismatch is not None:
        vertex, got, want = mismatch
        out["mismatch"] = {"vertex": vertex, "engine": got, "oracle": want}
    _emit(out, args.out)
    return _EXIT_OK if mismatch is None else _EXIT_MISMATCH


def _cmd_select(args) -> int:
    graph, origin = _load_input(args)
    feats = extract_features(graph)
    path = _model_path(args)
    model = SelectorModel.load(path) if path else None
    candidates = enumerate_candidates()
    ranked = select_config(feats, candidates, model)
    num_groups = _default_num_groups(args)
    top = ranked[:args.top] if args.top else ranked
    out = {
        "subcommand": "select",
        "graph": origin,
        "features": feats.to_json_dict(),
        "selector": "model" if model is not None else "rule_based",
        "ranking": [
            {"rank": i + 1, "candidate": asdict(cand),
             "score": score, "label": cand.label()}
            for i, (cand, score) in enumerate(top)
        ],
        "bound_config": ranked[0][0].bind(feats, num_groups=num_groups).to_json_dict(),
    }
    if model is not None:
        out["model"] = {"path": path, "corpus_hash": model.corpus_hash,
                        "trees": len(model.trees)}
    _emit(out, args.out)
    return _EXIT_OK


def _cmd_train(args) -> int:
    records = read_records_csv(args.records)
    model = train_selector(records, seed=args.seed, n_trees=args.trees,
                           max_depth=args.depth, min_leaf=args.min_leaf)
    model.save(args.out)
    _emit({
        "subcommand": "train",
        "records": args.records,
        "rows": len(records),
        "graphs": len({r.graph_id for r in records}),
        "configs": len({tuple(r.encoding) for r in records}),
        "model": args.out,
        "trees": len(model.trees),
        "seed": args.seed,
        "corpus_hash": model.corpus_hash,
    })
    return _EXIT_OK


def _split_csv(text: Optional[str], conv=str) -> Optional[list]:
    if text is None:
        return None
    return [conv(part.strip()) for part in text.split(",") if part.strip()]


def _cmd_bench(args) -> int:
    graphs: List[Tuple[str, CsrGraph]] = []
    for path in args.graph or []:
        graphs.append((path, load_graph(path, fmt=args.format,
                                        weight_scale=args.weight_scale)))
    for spec in args.gen or []:
        kind, params = parse_gen_spec(spec)
        graphs.append((f"{spec}@{args.gen_seed}",
                       generate_graph(kind, seed=args.gen_seed, **params)))
    if not graphs:
        raise ValueError("bench needs at least one --graph or --gen")

    grid = {}
    l1s = _split_csv(args.grid_l1)
    l2s = _split_csv(args.grid_l2)
    deltas = _split_csv(args.delta_scales, float)
    wbs = _split_csv(args.wb_list, int)
    if l1s:
        grid["l1"] = l1s
    if l2s:
        grid["l2"] = l2s
    if deltas:
        grid["delta_scale"] = deltas
    if wbs:
        grid["wb"] = wbs
    candidates = enumerate_candidates(grid or None)
    if not candidates:
        raise ValueError("the candidate grid is empty")

    num_groups = args.num_groups if args.num_groups is not None else 1
    records = benchmark_graphs(graphs, candidates, source=args.source,
                               reps=args.reps, num_groups=num_groups,
                               watchdog_s=args.watchdog)
    write_records_csv(records, args.out)

    figures: List[str] = []
    if not args.no_figures:
        from .report import render_bench_figures
        figures = render_bench_figures(records, os.path.splitext(args.out)[0])

    best = {}
    for r in records:
        cur = best.get(r.graph_id)
        if cur is None or r.wall_time_us < cur["wall_time_us"]:
            best[r.graph_id] = {"label": r.label(),
                                "wall_time_us": r.wall_time_us}
    _emit({
        "subcommand": "bench",
        "records": args.out,
        "rows": len(records),
        "graphs": len(graphs),
        "candidates": len(candidates),
        "reps": args.reps,
        "source": args.source,
        "num_groups": num_groups,
        "figures": figures,
        "best_per_graph": best,
    })
    return _EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlq",
        description="Concurrent multi-level queue shortest-path engine.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen", help="generate a graph file")
    p.add_argument("spec", help="generator spec, e.g. uniform:1000,5000,1,100")
    p.add_argument("--gen-seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output path (.gr or .mtx)")
    p.add_argument("--format", choices=("dimacs", "mm"), default=None)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("features", help="print the eight selector features")
    _add_input_args(p)
    p.add_argument("--out", default=None, help="write the JSON here instead")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("solve", help="compute shortest-path distances")
    _add_input_args(p)
    _add_config_args(p)
    p.add_argument("--source", type=int, default=0)
    p.add_argument("--unit-weights", action="store_true",
                   help="treat every edge weight as 1 (breadth-first distances)")
    p.add_argument("--max-inline-distances", type=int,
                   default=_MAX_INLINE_DEFAULT,
                   help="write a binary sidecar above this vertex count")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("verify", help="solve and compare against exact Dijkstra")
    _add_input_args(p)
    _add_config_args(p)
    p.add_argument("--source", type=int, default=0)
    p.add_argument("--unit-weights", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("select", help="rank queue configs for an input")
    _add_input_args(p)
    p.add_argument("--model", default=None)
    p.add_argument("--auto", action="store_true",
                   help=f"load the model from ${ENV_MODEL}")
    p.add_argument("--num-groups", type=int, default=None)
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("train", help="fit the selector on benchmark records")
    p.add_argument("--records", required=True, help="CSV from mlq bench")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--trees", type=int, default=64)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--min-leaf", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("bench", help="time a config grid over a graph corpus")
    p.add_argument("--graph", action="append", help="graph file; repeatable")
    p.add_argument("--format", choices=("dimacs", "mm"), default=None)
    p.add_argument("--gen", action="append", help="generator spec; repeatable")
    p.add_argument("--gen-seed", type=int, default=0)
    p.add_argument("--weight-scale", type=int, default=1000)
    p.add_argument("--grid-l1", default=None, help="comma list of L1 types")
    p.add_argument("--grid-l2", default=None, help="comma list of L2 types")
    p.add_argument("--delta-scales", default=None,
                   help="comma list of bucket-width multipliers")
    p.add_argument("--wb-list", default=None, help="comma list of flush periods")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--source", type=int, default=0)
    p.add_argument("--num-groups", type=int, default=None,
                   help="worker groups while timing (default 1)")
    p.add_argument("--watchdog", type=float, default=60.0)
    p.add_argument("--no-figures", action="store_true",
                   help="skip the relative-performance plots")
    p.add_argument("--out", required=True, help="records CSV to write")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EngineError, ValueError, OSError) as exc:
        return _fail(exc)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
