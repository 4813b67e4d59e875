"""Concurrent shortest-path engine over the queue hierarchy.

num_groups worker threads pull element batches through their cascades and
relax outgoing edges against a shared compare-and-minimize distance table; a
manager thread watches the delayed-count termination counters and releases the
workers once reserve and done agree on three consecutive polls. Lanes inside a
group are simulated sequentially, so all intra-group state is single-owner.
"""

from __future__ import annotations

import dataclasses
import heapq
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .compose import MlmqHandle, mlmq_bootstrap
from .core import (
    INF,
    DistanceTable,
    EngineError,
    MlmqConfig,
    RunMetrics,
)
from .graph import CsrGraph, GraphFeatures, extract_features
from .l2 import AbortError, TerminationCounters, make_l2

_MANAGER_POLL_S = 1e-4
_MANAGER_CONFIRMS = 3
_WORKER_BACKOFF_S = 5e-5


@dataclass
class EngineConfig:
    """Engine-side knobs; None fields fall back to the queue config."""

    num_groups: Optional[int] = None
    lanes_per_group: Optional[int] = None
    th_v: Optional[int] = None
    duplicate_elimination: bool = True
    seed: int = 0


@dataclass
class SsspResult:
    distances: List[int]
    metrics: RunMetrics
    config_used: MlmqConfig
    engine_used: EngineConfig
    group_metrics: List[RunMetrics]


def resolve_config(config: MlmqConfig, engine: Optional[EngineConfig],
                   graph: Optional[CsrGraph] = None,
                   features: Optional[GraphFeatures] = None) -> Tuple[MlmqConfig, EngineConfig]:
    """Fill graph-dependent defaults and merge engine overrides.

    Returns fresh objects; the caller's configs are never mutated. Features
    are computed from the graph only if a defaulted parameter needs them.
    """
    cfg = dataclasses.replace(
        config,
        l1_params=dataclasses.replace(config.l1_params),
        l2_params=dataclasses.replace(config.l2_params),
    )
    eng = dataclasses.replace(engine) if engine is not None else EngineConfig()
    if eng.num_groups is not None:
        cfg.num_groups = eng.num_groups
    else:
        eng.num_groups = cfg.num_groups
    if eng.lanes_per_group is not None:
        cfg.lanes_per_group = eng.lanes_per_group
    else:
        eng.lanes_per_group = cfg.lanes_per_group
    if eng.th_v is not None:
        cfg.th_v = eng.th_v
    else:
        eng.th_v = cfg.th_v

    def avg_weight() -> int:
        nonlocal features
        if features is None:
            if graph is None:
                return 1
            features = extract_features(graph)
        return max(1, round(features.avg_weight))

    l2p = cfg.l2_params
    if cfg.l2_type == "bucket" and l2p.delta is None:
        l2p.delta = avg_weight()
    if l2p.pnum is None:
        l2p.pnum = max(1, cfg.num_groups // 4)
    l1p = cfg.l1_params
    if cfg.l1_type == "near_far" and l1p.delta_nf is None:
        l1p.delta_nf = l2p.delta if cfg.l2_type == "bucket" else avg_weight()
    if cfg.l1_type == "filter" and l1p.filter_f is None:
        l1p.filter_f = 4 * avg_weight()
    cfg.validate()
    return cfg, eng


class _Run:
    """State shared by the threads of one solve."""

    def __init__(self, graph: CsrGraph, source: int, cfg: MlmqConfig,
                 eng: EngineConfig, unit_weights: bool):
        self.graph = graph
        self.cfg = cfg
        self.eng = eng
        self.table = DistanceTable(graph.num_vertices, source)
        self.abort = threading.Event()
        self.counters = TerminationCounters(cfg.num_groups)
        self.l2 = make_l2(cfg, self.abort)
        self.handles = [MlmqHandle(g, cfg, self.l2, self.counters)
                        for g in range(cfg.num_groups)]
        self.flags = [True] * cfg.num_groups
        self.errors: List[BaseException] = []
        self._err_lock = threading.Lock()
        self._offs = graph.row_offsets
        self._cols = graph.col_indices
        self._wts = [1] * graph.num_edges if unit_weights else graph.weights

    def fail(self, exc: BaseException) -> None:
        with self._err_lock:
            self.errors.append(exc)
        self.abort.set()
        flags = self.flags
        for i in range(len(flags)):
            flags[i] = False

    def worker(self, gid: int) -> None:
        handle = self.handles[gid]
        flags = self.flags
        want = self.cfg.lanes_per_group
        read = handle.read
        try:
            while flags[gid]:
                batch = read(want)
                if batch:
                    self._relax_batch(handle, batch)
                else:
                    time.sleep(_WORKER_BACKOFF_S)
        except AbortError:
            pass
        except BaseException as exc:
            self.fail(exc)

    def manager(self) -> None:
        counters = self.counters
        confirms = 0
        try:
            while confirms < _MANAGER_CONFIRMS:
                if self.abort.is_set():
                    return
                if counters.is_empty():
                    confirms += 1
                else:
                    confirms = 0
                if confirms < _MANAGER_CONFIRMS:
                    time.sleep(_MANAGER_POLL_S)
            flags = self.flags
            for i in range(len(flags)):
                flags[i] = False
        except BaseException as exc:
            self.fail(exc)

    def _relax_batch(self, handle: MlmqHandle, batch) -> None:
        shard = handle.shard
        dist = self.table.values
        table = self.table
        offs = self._offs
        cols = self._cols
        wts = self._wts
        dup = self.eng.duplicate_elimination
        th_v = self.cfg.th_v
        lanes = self.cfg.lanes_per_group
        out = []
        out_append = out.append
        relaxed = 0
        updates = 0
        settled = 0
        small = []
        big = []
        for elem in batch:
            uid = elem[0]
            if dup and elem[1] > dist[uid]:
                continue  # stale duplicate: drop without touching edges
            settled += 1
            lo = offs[uid]
            hi = offs[uid + 1]
            if hi - lo > th_v:
                big.append((lo, hi, uid))
            else:
                small.append((lo, hi, uid))
        # Low-degree vertices are dealt round-robin to lanes; lanes run
        # sequentially, each relaxing its own vertices' edge lists.
        for lane in range(min(lanes, len(small))):
            for lo, hi, uid in small[lane::lanes]:
                du = dist[uid]
                relaxed += hi - lo
                for k in range(lo, hi):
                    v = cols[k]
                    nd = du + wts[k]
                    if nd < dist[v] and table.try_improve(v, nd):
                        updates += 1
                        out_append((v, nd))
        # High-degree vertices: the whole group walks one shared edge list.
        for lo, hi, uid in big:
            du = dist[uid]
            relaxed += hi - lo
            for k in range(lo, hi):
                v = cols[k]
                nd = du + wts[k]
                if nd < dist[v] and table.try_improve(v, nd):
                    updates += 1
                    out_append((v, nd))
        shard.relaxations += relaxed
        shard.distance_updates += updates
        shard.settled_reads += settled
        if out:
            write = handle.write
            for start in range(0, len(out), lanes):
                write(out[start:start + lanes])

    def audit(self) -> None:
        reserve, done = self.counters.snapshot()
        if reserve != done:
            raise EngineError(
                f"termination audit failed: reserve={reserve} done={done}")
        for handle in self.handles:
            if handle.local_size() != 0:
                raise EngineError(
                    f"termination audit failed: group {handle.group_id} holds "
                    f"{handle.local_size()} undelivered elements")
        if not self.l2.is_structurally_empty():
            raise EngineError("termination audit failed: global queue not empty")
        if self.l2.pending_tickets() != 0:
            raise EngineError("termination audit failed: unconsumed read tickets")


def sssp_solve(graph: CsrGraph, source: int, config: Optional[MlmqConfig] = None,
               engine: Optional[EngineConfig] = None, *,
               features: Optional[GraphFeatures] = None,
               unit_weights: bool = False,
               watchdog_s: float = 60.0) -> SsspResult:
    """Solve single-source shortest paths; exact distances, any schedule.

    Raises EngineError if the watchdog expires or the post-run audit finds a
    protocol violation, and propagates queue configuration failures.
    """
    cfg, eng = resolve_config(config or MlmqConfig(), engine, graph, features)
    t0 = time.perf_counter_ns()
    run = _Run(graph, source, cfg, eng, unit_weights)
    mlmq_bootstrap(run.handles[0], source)

    threads = [threading.Thread(target=run.worker, args=(g,), daemon=True)
               for g in range(cfg.num_groups)]
    mgr = threading.Thread(target=run.manager, daemon=True)
    for t in threads:
        t.start()
    mgr.start()

    deadline = time.monotonic() + watchdog_s if watchdog_s else None
    mgr.join(timeout=watchdog_s if watchdog_s else None)
    timed_out = mgr.is_alive()
    if timed_out:
        run.fail(EngineError(f"watchdog expired after {watchdog_s}s"))
        mgr.join()
    for t in threads:
        if deadline is not None:
            t.join(timeout=max(0.1, deadline - time.monotonic()) + 5.0)
            if t.is_alive():
                raise EngineError("worker failed to stop after abort")
        else:
            t.join()

    if run.errors:
        raise run.errors[0]
    run.audit()

    wall_us = (time.perf_counter_ns() - t0) // 1000
    metrics = RunMetrics()
    group_metrics = [h.shard for h in run.handles]
    for shard in group_metrics:
        metrics.merge(shard)
    metrics.wall_time_us = wall_us
    return SsspResult(
        distances=run.table.snapshot(),
        metrics=metrics,
        config_used=cfg,
        engine_used=eng,
        group_metrics=group_metrics,
    )


def bfs_solve(graph: CsrGraph, source: int, config: Optional[MlmqConfig] = None,
              engine: Optional[EngineConfig] = None, *,
              watchdog_s: float = 60.0) -> SsspResult:
    """Breadth-first distances: the same engine with every weight read as 1."""
    return sssp_solve(graph, source, config, engine, unit_weights=True,
                      watchdog_s=watchdog_s)


# ---------------------------------------------------------------------------
# Exact reference solvers
# ---------------------------------------------------------------------------


def dijkstra_oracle(graph: CsrGraph, source: int) -> List[int]:
    """Binary-heap Dijkstra with stale-entry skipping; exact integers."""
    n = graph.num_vertices
    if not (0 <= source < n):
        raise ValueError(f"source {source} out of range for {n} vertices")
    dist = [INF] * n
    dist[source] = 0
    offs = graph.row_offsets
    cols = graph.col_indices
    wts = graph.weights
    visited = [False] * n
    heap = [(0, source)]
    push = heapq.heappush
    pop = heapq.heappop
    while heap:
        d, u = pop(heap)
        if visited[u]:
            continue
        visited[u] = True
        for k in range(offs[u], offs[u + 1]):
            v = cols[k]
            nd = d + wts[k]
            if nd < dist[v]:
                dist[v] = nd
                push(heap, (nd, v))
    return dist


def bellman_ford_oracle(graph: CsrGraph, source: int) -> List[int]:
    """Queue-based label-correcting solver; an independent cross-check."""
    n = graph.num_vertices
    if not (0 <= source < n):
        raise ValueError(f"source {source} out of range for {n} vertices")
    dist = [INF] * n
    dist[source] = 0
    offs = graph.row_offsets
    cols = graph.col_indices
    wts = graph.weights
    in_queue = [False] * n
    queue = deque([source])
    in_queue[source] = True
    while queue:
        u = queue.popleft()
        in_queue[u] = False
        du = dist[u]
        for k in range(offs[u], offs[u + 1]):
            v = cols[k]
            nd = du + wts[k]
            if nd < dist[v]:
                dist[v] = nd
                if not in_queue[v]:
                    in_queue[v] = True
                    queue.append(v)
    return dist


def unit_weight_view(graph: CsrGraph) -> CsrGraph:
    """The same topology with every weight set to 1 (arrays shared)."""
    return CsrGraph(graph.num_vertices, graph.num_edges, graph.row_offsets,
                    graph.col_indices, [1] * graph.num_edges)


def compare_distances(a: List[int], b: List[int]) -> Optional[Tuple[int, int, int]]:
    """First (vertex, a_value, b_value) mismatch, or None when identical."""
    if len(a) != len(b):
        return (-1, len(a), len(b))
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return (i, x, y)
    return None


def distances_blob(distances: List[int]) -> bytes:
    """Little-endian uint64 packing; the byte-identity currency of tests."""
    return struct.pack(f"<{len(distances)}Q", *distances)
