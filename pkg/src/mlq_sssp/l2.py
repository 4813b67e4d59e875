"""Global queue variants shared by all worker groups, plus the termination
counters.

Shared state advances only through short critical sections: ticket counters
and the bucket floor sit behind small locks, slot publication relies on the
interpreter's atomic list stores. Read tickets are claimed only when a written
block exists, and a claimed ticket persists in group-local storage until its
block is consumed, so every ticket is consumed by exactly one group.
"""

from __future__ import annotations

import threading
import time
from operator import itemgetter
from typing import Dict, List, Optional, Tuple

from .core import Element, EngineError, QueueOverflowError, RunMetrics

_dist_of = itemgetter(1)

# Spin-wait tuning for a busy ring slot: yield early, sleep shortly after,
# give up (configuration error) after the timeout.
_SPIN_YIELD_EVERY = 64
_SPIN_SLEEP_EVERY = 1024
_SPIN_SLEEP_S = 0.00002


class AbortError(EngineError):
    """Raised inside queue waits when the engine is tearing a run down."""


class TerminationCounters:
    """Delayed-count bookkeeping for the termination protocol.

    global_reserve counts every element written to the global queue;
    per-group local_done accumulates elements read and is flushed into
    global_done only when the group's full read cascade comes up empty.
    Equality of the two globals therefore implies system-wide emptiness.
    """

    def __init__(self, num_groups: int):
        self._lock = threading.Lock()
        self.global_reserve = 0
        self.global_done = 0
        self.local_done = [0] * num_groups

    def add_reserve(self, n: int) -> None:
        with self._lock:
            self.global_reserve += n

    def note_read(self, group_id: int, n: int) -> None:
        # The slot is owned by the reading group; no lock needed.
        self.local_done[group_id] += n

    def confirm(self, group_id: int) -> int:
        n = self.local_done[group_id]
        if n:
            self.local_done[group_id] = 0
            with self._lock:
                self.global_done += n
        return n

    def is_empty(self) -> bool:
        with self._lock:
            return self.global_done == self.global_reserve

    def snapshot(self) -> Tuple[int, int]:
        with self._lock:
            return self.global_reserve, self.global_done


class L2BlockFifo:
    """Lock-free-style ticketed ring of element blocks.

    Writers claim one ticket per segment of up to block_size elements with a
    fetch-add, wait for their slot to be free, and publish the segment as one
    store. Readers claim a ticket only when an unclaimed written block exists;
    if the block is still in flight the ticket persists and the read reports
    empty until the block lands.
    """

    def __init__(self, block_size: int, block_num: int,
                 abort_event: Optional[threading.Event] = None,
                 spin_timeout_s: float = 15.0):
        self._bs = block_size
        self._bn = block_num
        self._slots: List[Optional[List[Element]]] = [None] * block_num
        self._ptr_lock = threading.Lock()
        self._write_ptr = 0
        self._read_ptr = 0
        self._pending: Dict[int, int] = {}  # group id -> claimed ticket
        self._abort = abort_event
        self._timeout = spin_timeout_s

    def write(self, batch: List[Element], group_id: int = 0,
              shard: Optional[RunMetrics] = None) -> None:
        n = len(batch)
        if n == 0:
            return
        bs = self._bs
        nseg = (n + bs - 1) // bs
        with self._ptr_lock:
            ticket = self._write_ptr
            self._write_ptr += nseg
        if shard is not None:
            shard.l2_atomic_ops += 1 + nseg
        slots = self._slots
        bn = self._bn
        for k in range(nseg):
            slot = (ticket + k) % bn
            if slots[slot] is not None:
                self._wait_free(slot)
            slots[slot] = batch[k * bs:(k + 1) * bs]

    def _wait_free(self, slot: int) -> None:
        slots = self._slots
        deadline = time.monotonic() + self._timeout
        spins = 0
        while slots[slot] is not None:
            spins += 1
            if spins % _SPIN_SLEEP_EVERY == 0:
                if self._abort is not None and self._abort.is_set():
                    raise AbortError("run aborted while waiting for a free ring slot")
                if time.monotonic() > deadline:
                    with self._ptr_lock:
                        wp, rp = self._write_ptr, self._read_ptr
                    raise QueueOverflowError(
                        f"ring slot {slot} stayed busy for {self._timeout}s "
                        f"(block_num={self._bn}, write_ptr={wp}, read_ptr={rp}); "
                        "block_num is likely too small for this workload"
                    )
                time.sleep(_SPIN_SLEEP_S)
            elif spins % _SPIN_YIELD_EVERY == 0:
                time.sleep(0)

    def _claim_and_fetch(self, group_id: int,
                         shard: Optional[RunMetrics] = None):
        """Returns ('ok', seg) | ('pending', None) | ('empty', None)."""
        ticket = self._pending.get(group_id)
        if ticket is None:
            with self._ptr_lock:
                if self._read_ptr < self._write_ptr:
                    ticket = self._read_ptr
                    self._read_ptr += 1
                    self._pending[group_id] = ticket
                else:
                    return "empty", None
            if shard is not None:
                shard.l2_atomic_ops += 1
        slot = ticket % self._bn
        seg = self._slots[slot]
        if seg is None:
            return "pending", None  # writer in flight; retry this ticket later
        self._slots[slot] = None
        del self._pending[group_id]
        if shard is not None:
            shard.l2_atomic_ops += 1
        return "ok", seg

    def try_read(self, group_id: int, want: int = 0,
                 shard: Optional[RunMetrics] = None) -> List[Element]:
        state, seg = self._claim_and_fetch(group_id, shard)
        if state == "ok":
            return seg
        return []

    def pending_tickets(self) -> int:
        return len(self._pending)

    def has_claims(self) -> bool:
        return bool(self._pending)

    def is_structurally_empty(self) -> bool:
        with self._ptr_lock:
            if self._read_ptr != self._write_ptr or self._pending:
                return False
        return all(s is None for s in self._slots)


class L2Bucket:
    """Priority buckets of width delta over a rising floor.

    Bucket i (1-based) relative to the current floor covers
    [base + delta*(i-1), base + delta*i); writes below the floor clamp into
    bucket 1 and writes beyond the window clamp into bucket bmax. Reads scan
    the first bnum buckets; when the head bucket is seen truly empty while
    elements remain, the floor advances by delta (one advance per
    observation). Elements pulled from a slot that now maps below their true
    bucket are silently re-binned instead of returned.
    """

    def __init__(self, delta: int, bmax: int, bnum: int, block_size: int,
                 block_num: int, abort_event: Optional[threading.Event] = None):
        self._delta = delta
        self._bmax = bmax
        self._bnum = bnum
        self._fifos = [L2BlockFifo(block_size, block_num, abort_event)
                       for _ in range(bmax)]
        self._lock = threading.Lock()
        self._epoch = 0  # base == epoch * delta
        self._resident = 0

    @property
    def base(self) -> int:
        with self._lock:
            return self._epoch * self._delta

    def _scatter(self, batch: List[Element], epoch: int, group_id: int,
                 shard: Optional[RunMetrics]) -> None:
        delta = self._delta
        bmax = self._bmax
        base = epoch * delta
        by_rel: Dict[int, List[Element]] = {}
        for elem in batch:
            d = elem[1]
            rel = (d - base) // delta if d >= base else 0
            if rel >= bmax:
                rel = bmax - 1
            by_rel.setdefault(rel, []).append(elem)
        for rel, seg in by_rel.items():
            self._fifos[(epoch + rel) % bmax].write(seg, group_id, shard)

    def write(self, batch: List[Element], group_id: int = 0,
              shard: Optional[RunMetrics] = None) -> None:
        if not batch:
            return
        with self._lock:
            epoch = self._epoch
            self._resident += len(batch)
        if shard is not None:
            shard.l2_atomic_ops += 1
        self._scatter(batch, epoch, group_id, shard)

    def try_read(self, group_id: int, want: int = 0,
                 shard: Optional[RunMetrics] = None) -> List[Element]:
        delta = self._delta
        bmax = self._bmax
        with self._lock:
            epoch0 = self._epoch
        delivered: List[Element] = []
        head_truly_empty = False
        for j in range(self._bnum):
            slot_index = (epoch0 + j) % bmax
            fifo = self._fifos[slot_index]
            while True:
                state, seg = fifo._claim_and_fetch(group_id, shard)
                if state == "pending":
                    # An in-flight write: the head is not empty, so neither a
                    # floor advance nor a descent past it is justified.
                    return []
                if state == "empty":
                    if fifo.has_claims():
                        # Another group holds an unconsumed block here; the
                        # bucket is not quiescently empty, so do not advance
                        # the floor past it or descend beyond it.
                        return []
                    if j == 0:
                        head_truly_empty = True
                    break
                with self._lock:
                    epoch_now = self._epoch
                base_now = epoch_now * delta
                rel_of_slot = (slot_index - epoch_now) % bmax
                keep: List[Element] = []
                rebin: List[Element] = []
                for elem in seg:
                    d = elem[1]
                    rel = (d - base_now) // delta if d >= base_now else 0
                    if rel > rel_of_slot:
                        rebin.append(elem)
                    else:
                        keep.append(elem)
                if rebin:
                    # Internal move: neither a queue-level read nor write.
                    self._scatter(rebin, epoch_now, group_id, shard)
                if keep:
                    delivered = keep
                    break
            if delivered:
                break
        if head_truly_empty:
            with self._lock:
                if self._epoch == epoch0 and self._resident > 0:
                    self._epoch = epoch0 + 1
                    if shard is not None:
                        shard.l2_atomic_ops += 1
        if delivered:
            with self._lock:
                self._resident -= len(delivered)
            return delivered
        return []

    def pending_tickets(self) -> int:
        return sum(f.pending_tickets() for f in self._fifos)

    def is_structurally_empty(self) -> bool:
        with self._lock:
            if self._resident != 0:
                return False
        return all(f.is_structurally_empty() for f in self._fifos)


class _HeapNode(list):
    """A sorted batch of elements; minimum at index 0."""


class L2PriorityQueue:
    """Complete binary tree of sorted element batches, min-heap on node minima.

    Batches are capped at node_batch elements; inserts append leaves and sift
    up by whole-node swaps, delete-min pops runs off the root while the root
    minimum stays at or below both child minima. One guard serializes tree
    operations; on a GIL interpreter finer per-node locking buys nothing.
    """

    def __init__(self, node_batch: int):
        self._node_batch = node_batch
        self._nodes: List[_HeapNode] = []
        self._mutex = threading.Lock()

    def write(self, batch: List[Element], group_id: int = 0,
              shard: Optional[RunMetrics] = None) -> None:
        if not batch:
            return
        nb = self._node_batch
        ordered = sorted(batch, key=_dist_of)
        if shard is not None:
            shard.l2_atomic_ops += 1
        with self._mutex:
            nodes = self._nodes
            for start in range(0, len(ordered), nb):
                nodes.append(_HeapNode(ordered[start:start + nb]))
                self._sift_up(len(nodes) - 1)

    def _sift_up(self, i: int) -> None:
        nodes = self._nodes
        while i > 0:
            parent = (i - 1) >> 1
            if nodes[i][0][1] < nodes[parent][0][1]:
                nodes[i], nodes[parent] = nodes[parent], nodes[i]
                i = parent
            else:
                return

    def _sift_down(self, i: int) -> None:
        nodes = self._nodes
        n = len(nodes)
        while True:
            child = 2 * i + 1
            if child >= n:
                return
            right = child + 1
            if right < n and nodes[right][0][1] < nodes[child][0][1]:
                child = right
            if nodes[child][0][1] < nodes[i][0][1]:
                nodes[i], nodes[child] = nodes[child], nodes[i]
                i = child
            else:
                return

    def try_read(self, group_id: int, want: int,
                 shard: Optional[RunMetrics] = None) -> List[Element]:
        out: List[Element] = []
        with self._mutex:
            nodes = self._nodes
            while nodes and len(out) < want:
                root = nodes[0]
                n = len(nodes)
                child_min = None
                if n > 1:
                    child_min = nodes[1][0][1]
                    if n > 2 and nodes[2][0][1] < child_min:
                        child_min = nodes[2][0][1]
                while root and len(out) < want and (
                        child_min is None or root[0][1] <= child_min):
                    out.append(root.pop(0))
                if not root:
                    last = nodes.pop()
                    if nodes:
                        nodes[0] = last
                        self._sift_down(0)
                elif child_min is not None and root[0][1] > child_min:
                    self._sift_down(0)
                else:
                    break
        if shard is not None and out:
            shard.l2_atomic_ops += 1
        return out

    def check_heap(self) -> None:
        """Assert the structural invariants; used by tests at quiescence."""
        with self._mutex:
            nodes = self._nodes
            for i, node in enumerate(nodes):
                assert node, "empty node stored in tree"
                assert len(node) <= self._node_batch, "node over batch cap"
                dists = [e[1] for e in node]
                assert dists == sorted(dists), "node not sorted"
                if i > 0:
                    parent = (i - 1) >> 1
                    assert nodes[parent][0][1] <= node[0][1], "heap violated"

    def element_count(self) -> int:
        with self._mutex:
            return sum(len(node) for node in self._nodes)

    def pending_tickets(self) -> int:
        return 0

    def is_structurally_empty(self) -> bool:
        with self._mutex:
            return not self._nodes


class L2MultiQueue:
    """pnum relaxed priority queues; each group reads its own queue and its
    write cursor cycles through all queues starting at the read queue."""

    def __init__(self, pnum: int, node_batch: int, num_groups: int):
        pnum = max(1, min(pnum, num_groups))  # a reader-less queue would strand work
        self._pnum = pnum
        self._queues = [L2PriorityQueue(node_batch) for _ in range(pnum)]
        self._cursor = [g % pnum for g in range(num_groups)]

    @property
    def pnum(self) -> int:
        return self._pnum

    def write(self, batch: List[Element], group_id: int = 0,
              shard: Optional[RunMetrics] = None) -> None:
        if not batch:
            return
        cur = self._cursor[group_id]
        self._queues[cur].write(batch, group_id, shard)
        self._cursor[group_id] = (cur + 1) % self._pnum
        if shard is not None:
            shard.l2_atomic_ops += 1

    def try_read(self, group_id: int, want: int,
                 shard: Optional[RunMetrics] = None) -> List[Element]:
        return self._queues[group_id % self._pnum].try_read(group_id, want, shard)

    def queue_sizes(self) -> List[int]:
        return [q.element_count() for q in self._queues]

    def pending_tickets(self) -> int:
        return 0

    def is_structurally_empty(self) -> bool:
        return all(q.is_structurally_empty() for q in self._queues)


def make_l2(cfg, abort_event: Optional[threading.Event] = None):
    """Instantiate the configured global queue. cfg must be resolved."""
    p = cfg.l2_params
    if cfg.l2_type == "fifo":
        return L2BlockFifo(p.block_size, p.block_num, abort_event)
    if cfg.l2_type == "bucket":
        return L2Bucket(p.delta, p.bmax, p.bnum, p.block_size, p.block_num,
                        abort_event)
    if cfg.l2_type == "priority":
        return L2PriorityQueue(p.node_batch)
    if cfg.l2_type == "multi":
        return L2MultiQueue(p.pnum, p.node_batch, cfg.num_groups)
    raise ValueError(f"unknown l2_type {cfg.l2_type!r}")
