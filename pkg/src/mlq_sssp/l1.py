"""Lane-level and group-level buffer queues.

Every structure here is owned by exactly one worker group, so no locking is
needed. Writes return ``(status, write_back, admitted)``: ``write_back`` is
whatever must be pushed down to the global queue, and ``admitted`` counts the
elements that actually entered this level's storage (pass-through rejects are
not admitted).
"""

from __future__ import annotations

from collections import deque
from typing import List, Optional, Tuple

from .core import INF, Element, ReadStatus, WriteStatus

WriteResult = Tuple[WriteStatus, List[Element], int, bool]
L0WriteResult = Tuple[WriteStatus, List[Element], int]


class L0Vector:
    """Per-lane FIFO registers; elements are scattered round-robin over lanes.

    A write that lands on a full lane triggers a full transfer: the entire L0
    content plus the unplaced remainder is emitted and the lanes are left
    empty.
    """

    def __init__(self, lanes: int, capacity: int):
        self._lanes = [deque() for _ in range(lanes)]
        self._capacity = capacity
        self._wcursor = 0
        self._rcursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def is_empty(self) -> bool:
        return self._size == 0

    def lane_sizes(self) -> List[int]:
        return [len(lane) for lane in self._lanes]

    def write(self, batch: List[Element]) -> L0WriteResult:
        lanes = self._lanes
        nlanes = len(lanes)
        cap = self._capacity
        cursor = self._wcursor
        placed = 0
        for idx, elem in enumerate(batch):
            lane = lanes[cursor]
            if len(lane) >= cap:
                # Full transfer: drain everything, then append the remainder.
                spill = self._drain_all()
                spill.extend(batch[idx:])
                self._wcursor = cursor
                return WriteStatus.WRITE_BACK, spill, placed
            lane.append(elem)
            placed += 1
            cursor = (cursor + 1) % nlanes
        self._wcursor = cursor
        self._size += placed
        return WriteStatus.SUCCESS, [], placed

    def read(self, want: int) -> List[Element]:
        """Pop up to ``want`` elements, one per non-empty lane per round."""
        if self._size == 0 or want <= 0:
            return []
        lanes = self._lanes
        nlanes = len(lanes)
        out: List[Element] = []
        cursor = self._rcursor
        scanned_empty = 0
        while len(out) < want and scanned_empty < nlanes:
            lane = lanes[cursor]
            if lane:
                out.append(lane.popleft())
                scanned_empty = 0
            else:
                scanned_empty += 1
            cursor = (cursor + 1) % nlanes
        self._rcursor = cursor
        self._size -= len(out)
        return out

    def _drain_all(self) -> List[Element]:
        out: List[Element] = []
        cursor = self._rcursor
        nlanes = len(self._lanes)
        for i in range(nlanes):
            lane = self._lanes[(cursor + i) % nlanes]
            while lane:
                out.append(lane.popleft())
        self._size = 0
        return out


class L1Vector:
    """Plain FIFO buffer that flushes its whole content to the global queue
    after every ``wb`` write invocations (wb == 0 disables the flush)."""

    def __init__(self, capacity: int, wb: int):
        self._buf = deque()
        self._capacity = capacity
        self._wb = wb
        self._write_count = 0

    def __len__(self) -> int:
        return len(self._buf)

    def is_empty(self) -> bool:
        return not self._buf

    def write(self, batch: List[Element]) -> WriteResult:
        buf = self._buf
        buf.extend(batch)
        admitted = len(batch)
        back: List[Element] = []
        while len(buf) > self._capacity:
            back.append(buf.popleft())
        flushed = False
        if self._wb > 0:
            self._write_count += 1
            if self._write_count >= self._wb:
                back.extend(buf)
                buf.clear()
                self._write_count = 0
                flushed = True
        status = WriteStatus.WRITE_BACK if back else WriteStatus.SUCCESS
        return status, back, admitted, flushed

    def read(self, want: int) -> List[Element]:
        buf = self._buf
        n = min(want, len(buf))
        return [buf.popleft() for _ in range(n)]


class L1NearFar:
    """Split buffer: elements below the rolling threshold are served first.

    When the near side runs dry on a read and the far side is non-empty, the
    threshold is rebased to min(far) + delta_nf and the far side is stably
    repartitioned.
    """

    def __init__(self, capacity: int, delta_nf: int):
        self._near = deque()
        self._far = deque()
        self._capacity = capacity
        self._delta = delta_nf
        self.nf_threshold = delta_nf

    def __len__(self) -> int:
        return len(self._near) + len(self._far)

    def is_empty(self) -> bool:
        return not self._near and not self._far

    def write(self, batch: List[Element]) -> WriteResult:
        near, far = self._near, self._far
        nf = self.nf_threshold
        for elem in batch:
            if elem[1] < nf:
                near.append(elem)
            else:
                far.append(elem)
        back: List[Element] = []
        overflow = len(near) + len(far) - self._capacity
        while overflow > 0 and far:
            back.append(far.popleft())
            overflow -= 1
        while overflow > 0 and near:
            back.append(near.popleft())
            overflow -= 1
        status = WriteStatus.WRITE_BACK if back else WriteStatus.SUCCESS
        return status, back, len(batch), False

    def read(self, want: int) -> List[Element]:
        near, far = self._near, self._far
        if not near and far:
            self.nf_threshold = min(e[1] for e in far) + self._delta
            nf = self.nf_threshold
            keep = deque()
            for elem in far:  # stable repartition
                (near if elem[1] < nf else keep).append(elem)
            self._far = keep
        n = min(want, len(near))
        return [near.popleft() for _ in range(n)]


class L1Filter:
    """Admission-filtered FIFO: only elements with dist <= F are buffered,
    everything else is written back to the global queue immediately.

    F starts at the configured bound and is rebased when the buffer runs dry:
    the smallest distance rejected since the last rebase, plus the configured
    bound, becomes the new F.
    """

    def __init__(self, capacity: int, filter_f: int):
        self._buf = deque()
        self._capacity = capacity
        self._f_step = filter_f
        self.filter_bound = filter_f
        self._reject_min: Optional[int] = None

    def __len__(self) -> int:
        return len(self._buf)

    def is_empty(self) -> bool:
        return not self._buf

    def write(self, batch: List[Element]) -> WriteResult:
        buf = self._buf
        bound = self.filter_bound
        back: List[Element] = []
        admitted = 0
        reject_min = self._reject_min
        for elem in batch:
            if elem[1] <= bound:
                buf.append(elem)
                admitted += 1
            else:
                back.append(elem)
                if reject_min is None or elem[1] < reject_min:
                    reject_min = elem[1]
        self._reject_min = reject_min
        while len(buf) > self._capacity:
            back.append(buf.popleft())
        status = WriteStatus.WRITE_BACK if back else WriteStatus.SUCCESS
        return status, back, admitted, False

    def read(self, want: int) -> List[Element]:
        buf = self._buf
        if not buf:
            if self._reject_min is not None:
                self.filter_bound = self._reject_min + self._f_step
                self._reject_min = None
            return []
        n = min(want, len(buf))
        return [buf.popleft() for _ in range(n)]


class L1Slf:
    """Double-ended buffer favoring short distances.

    Incoming elements shorter than the head element (as of the write's start)
    are pushed at the head, the rest at the tail; reads pop the head. Overflow
    pops from the tail into the write-back batch.
    """

    def __init__(self, capacity: int):
        self._buf = deque()
        self._capacity = capacity

    def __len__(self) -> int:
        return len(self._buf)

    def is_empty(self) -> bool:
        return not self._buf

    def write(self, batch: List[Element]) -> WriteResult:
        buf = self._buf
        head_dist = buf[0][1] if buf else INF
        for elem in batch:
            if elem[1] < head_dist:
                buf.appendleft(elem)
            else:
                buf.append(elem)
        back: List[Element] = []
        while len(buf) > self._capacity:
            back.append(buf.pop())
        status = WriteStatus.WRITE_BACK if back else WriteStatus.SUCCESS
        return status, back, len(batch), False

    def read(self, want: int) -> List[Element]:
        buf = self._buf
        n = min(want, len(buf))
        return [buf.popleft() for _ in range(n)]


def make_l1(l1_type: str, capacity: int, wb: int, delta_nf: int, filter_f: int):
    if l1_type == "vector":
        return L1Vector(capacity, wb)
    if l1_type == "near_far":
        return L1NearFar(capacity, delta_nf)
    if l1_type == "filter":
        return L1Filter(capacity, filter_f)
    if l1_type == "slf":
        return L1Slf(capacity)
    raise ValueError(f"unknown l1_type {l1_type!r}")
