"""Per-group cascade over the three queue levels.

Reads descend L0 -> L1 -> L2 and only on emptiness; a read is served entirely
from the first non-empty level. Writes fill L0 and push overflow down; the
global queue absorbs whatever the group levels hand back, bumping the
reservation counter so the termination protocol can account for every element.
"""

from __future__ import annotations

from typing import List

from .core import Element, EngineError, MlmqConfig, RunMetrics, WriteStatus
from .l1 import L0Vector, make_l1
from .l2 import TerminationCounters


class MlmqHandle:
    """One worker group's view of the queue hierarchy."""

    def __init__(self, group_id: int, cfg: MlmqConfig, l2, counters: TerminationCounters):
        self.group_id = group_id
        self.l0 = L0Vector(cfg.lanes_per_group, cfg.l0_capacity)
        p = cfg.l1_params
        self.l1 = make_l1(cfg.l1_type, p.capacity, p.wb, p.delta_nf, p.filter_f)
        self.l2 = l2
        self.counters = counters
        self.shard = RunMetrics()

    def read(self, want: int) -> List[Element]:
        """Serve up to want elements from the highest non-empty level.

        A global-queue block read may exceed want. An empty return means the
        whole cascade came up empty; the group's pending read confirmations
        are flushed to the global done counter at that point.
        """
        shard = self.shard
        out = self.l0.read(want)
        if out:
            shard.l0_dequeues += len(out)
            return out
        out = self.l1.read(want)
        if out:
            shard.l1_dequeues += len(out)
            return out
        out = self.l2.try_read(self.group_id, want, shard)
        if out:
            n = len(out)
            shard.l2_dequeues += n
            self.counters.note_read(self.group_id, n)
            return out
        if self.counters.confirm(self.group_id):
            shard.l2_atomic_ops += 1
        return out

    def write(self, batch: List[Element]) -> WriteStatus:
        """Buffer a batch; overflow cascades down. Never fails upward."""
        if not batch:
            return WriteStatus.SUCCESS
        shard = self.shard
        l0 = self.l0
        before = len(l0)
        _, spill, placed = l0.write(batch)
        shard.l0_enqueues += placed
        shard.l0_dequeues += before + placed - len(l0)
        if not spill:
            return WriteStatus.SUCCESS
        l1 = self.l1
        before = len(l1)
        _, back, admitted, flushed = l1.write(spill)
        shard.l1_enqueues += admitted
        shard.l1_dequeues += admitted + before - len(l1)
        if flushed:
            shard.flushes += 1
        if back:
            self.write_through(back)
        return WriteStatus.SUCCESS

    def write_through(self, batch: List[Element]) -> None:
        """Write directly to the global queue, reserving the elements."""
        n = len(batch)
        self.counters.add_reserve(n)
        shard = self.shard
        shard.l2_atomic_ops += 1
        self.l2.write(batch, self.group_id, shard)
        shard.l2_enqueues += n

    def local_size(self) -> int:
        return len(self.l0) + len(self.l1)


def mlmq_bootstrap(handle: MlmqHandle, source: int) -> None:
    """Write the source element straight through to the global queue.

    Must run before any worker starts; the reservation it makes is what keeps
    the manager from declaring termination before the first read.
    """
    reserve, done = handle.counters.snapshot()
    if reserve != 0 or done != 0:
        raise EngineError("bootstrap on an already-seeded queue hierarchy")
    handle.write_through([(source, 0)])
