"""Shared value types for the multi-level queue SSSP engine.

Queue elements are plain ``(vertex_id, dist)`` tuples so the hot paths stay
cheap; the richer records (configs, metrics) are dataclasses.
"""

from __future__ import annotations

import threading
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Optional, Tuple

# A queue element: (vertex id, tentative distance at enqueue time).
Element = Tuple[int, int]

# 64-bit unsigned distance domain; the all-ones value is reserved as +infinity.
INF = (1 << 64) - 1

L1_TYPES = ("vector", "near_far", "filter", "slf")
L2_TYPES = ("fifo", "bucket", "priority", "multi")

DEFAULT_LANES_PER_GROUP = 32
DEFAULT_L0_CAPACITY = 4
DEFAULT_L1_CAPACITY = 1024
DEFAULT_WB = 8
DEFAULT_TH_V = 16
DEFAULT_BLOCK_SIZE = 64
DEFAULT_BLOCK_NUM = 4096
DEFAULT_BMAX = 64
DEFAULT_BNUM = 1
DEFAULT_NODE_BATCH = 32


class ReadStatus(Enum):
    SUCCESS = "success"
    READ_EMPTY = "read_empty"


class WriteStatus(Enum):
    SUCCESS = "success"
    WRITE_BACK = "write_back"


class EngineError(Exception):
    """Base class for engine-specific failures."""


class GraphFormatError(EngineError):
    """Raised when a graph file cannot be parsed into a valid CSR graph."""


class NegativeWeightError(GraphFormatError):
    """Raised when an input edge carries a negative weight."""


class QueueOverflowError(EngineError):
    """Raised when a bounded global queue ring cannot accept more blocks."""


class InsufficientDataError(EngineError):
    """Raised when a selector training corpus is too small to fit."""


@dataclass
class L1Params:
    """Parameters consumed by the group-level queue variants.

    ``None`` fields are resolved against graph features before a run starts
    (see ``resolve_config``): delta_nf defaults to the bucket delta when the
    global queue is a bucket queue, otherwise the average edge weight, and
    filter_f defaults to four times the average edge weight.
    """

    capacity: int = DEFAULT_L1_CAPACITY
    wb: int = DEFAULT_WB  # flush period in write invocations; 0 disables flushing
    delta_nf: Optional[int] = None
    filter_f: Optional[int] = None


@dataclass
class L2Params:
    """Parameters consumed by the global queue variants."""

    block_size: int = DEFAULT_BLOCK_SIZE
    block_num: int = DEFAULT_BLOCK_NUM
    delta: Optional[int] = None  # bucket width; defaults to avg edge weight
    bmax: int = DEFAULT_BMAX
    bnum: int = DEFAULT_BNUM
    node_batch: int = DEFAULT_NODE_BATCH
    pnum: Optional[int] = None  # defaults to max(1, num_groups // 4)


@dataclass
class MlmqConfig:
    """Full description of one queue-hierarchy instantiation."""

    l1_type: str = "vector"
    l2_type: str = "fifo"
    l0_capacity: int = DEFAULT_L0_CAPACITY
    l1_params: L1Params = field(default_factory=L1Params)
    l2_params: L2Params = field(default_factory=L2Params)
    num_groups: int = 4
    lanes_per_group: int = DEFAULT_LANES_PER_GROUP
    th_v: int = DEFAULT_TH_V

    def validate(self) -> None:
        if self.l1_type not in L1_TYPES:
            raise ValueError(f"unknown l1_type {self.l1_type!r}; expected one of {L1_TYPES}")
        if self.l2_type not in L2_TYPES:
            raise ValueError(f"unknown l2_type {self.l2_type!r}; expected one of {L2_TYPES}")
        if self.l0_capacity < 1:
            raise ValueError("l0_capacity must be >= 1")
        if self.l1_params.capacity < 1:
            raise ValueError("l1 capacity must be >= 1")
        if self.l1_params.wb < 0:
            raise ValueError("wb must be >= 0 (0 disables periodic flushing)")
        if self.num_groups < 1:
            raise ValueError("num_groups must be >= 1")
        if self.lanes_per_group < 1:
            raise ValueError("lanes_per_group must be >= 1")
        if self.th_v < 0:
            raise ValueError("th_v must be >= 0")
        p = self.l2_params
        if p.block_size < 1 or p.block_num < 1:
            raise ValueError("block_size and block_num must be >= 1")
        if p.bmax < 1 or p.bnum < 1:
            raise ValueError("bmax and bnum must be >= 1")
        if p.bnum > p.bmax:
            raise ValueError("bnum must not exceed bmax")
        if p.node_batch < 1:
            raise ValueError("node_batch must be >= 1")
        if p.delta is not None and p.delta < 1:
            raise ValueError("bucket delta must be >= 1")
        if p.pnum is not None and p.pnum < 1:
            raise ValueError("pnum must be >= 1")

    def to_json_dict(self) -> dict:
        return asdict(self)


METRIC_FIELDS = (
    "relaxations",
    "distance_updates",
    "l0_enqueues",
    "l0_dequeues",
    "l1_enqueues",
    "l1_dequeues",
    "l2_enqueues",
    "l2_dequeues",
    "l2_atomic_ops",
    "flushes",
    "settled_reads",
)


@dataclass
class RunMetrics:
    """Additive work counters for one solver run.

    All fields except wall_time_us are exact counts and deterministic for a
    fixed seed when a single worker group runs; wall_time_us is measured.
    """

    relaxations: int = 0
    distance_updates: int = 0
    l0_enqueues: int = 0
    l0_dequeues: int = 0
    l1_enqueues: int = 0
    l1_dequeues: int = 0
    l2_enqueues: int = 0
    l2_dequeues: int = 0
    l2_atomic_ops: int = 0
    flushes: int = 0
    settled_reads: int = 0
    wall_time_us: int = 0

    def merge(self, other: "RunMetrics") -> None:
        for f in METRIC_FIELDS:
            setattr(self, f, getattr(self, f) + getattr(other, f))

    def to_json_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_STRIPES = 64
_STRIPE_MASK = _STRIPES - 1


class DistanceTable:
    """Tentative-distance array with an atomic compare-and-minimize update.

    Updates take a striped lock only after an optimistic check; entries are
    monotonically non-increasing, so a value that fails the unlocked check can
    never improve later.
    """

    def __init__(self, num_vertices: int, source: int):
        if not (0 <= source < num_vertices):
            raise ValueError(f"source {source} out of range for {num_vertices} vertices")
        self.values = [INF] * num_vertices
        self.values[source] = 0
        self._locks = [threading.Lock() for _ in range(_STRIPES)]

    def try_improve(self, vertex: int, dist: int) -> bool:
        values = self.values
        if dist >= values[vertex]:
            return False
        with self._locks[vertex & _STRIPE_MASK]:
            if dist < values[vertex]:
                values[vertex] = dist
                return True
        return False

    def snapshot(self) -> list:
        return list(self.values)
