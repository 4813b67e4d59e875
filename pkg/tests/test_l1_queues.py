import random

import pytest

from mlq_sssp.core import WriteStatus
from mlq_sssp.l1 import L0Vector, L1Filter, L1NearFar, L1Slf, L1Vector, make_l1


def e(*dists):
    """Elements with vertex ids equal to their position."""
    return [(i, d) for i, d in enumerate(dists)]


# ---------------------------------------------------------------------------
# L0
# ---------------------------------------------------------------------------


def test_l0_scatters_round_robin():
    q = L0Vector(lanes=2, capacity=4)
    status, back, placed = q.write(e(10, 20, 30))
    assert status is WriteStatus.SUCCESS
    assert back == [] and placed == 3
    assert q.lane_sizes() == [2, 1]


def test_l0_write_cursor_persists_across_writes():
    q = L0Vector(lanes=3, capacity=4)
    q.write(e(1, 2))          # lanes 0, 1
    q.write(e(3, 4))          # lanes 2, 0
    assert q.lane_sizes() == [2, 1, 1]


def test_l0_full_lane_triggers_full_transfer():
    q = L0Vector(lanes=2, capacity=1)
    q.write([(0, 1), (1, 2)])
    status, back, placed = q.write([(2, 3)])
    assert status is WriteStatus.WRITE_BACK
    assert placed == 0
    # entire content plus the unplaced remainder, lanes left empty
    assert back == [(0, 1), (1, 2), (2, 3)]
    assert q.is_empty()


def test_l0_partial_placement_before_transfer():
    q = L0Vector(lanes=2, capacity=1)
    status, back, placed = q.write([(0, 1), (1, 2), (2, 3)])
    assert status is WriteStatus.WRITE_BACK
    assert placed == 2  # first two landed before the cursor hit a full lane
    assert back == [(0, 1), (1, 2), (2, 3)]
    assert q.is_empty()


def test_l0_read_one_per_lane_round_robin():
    q = L0Vector(lanes=2, capacity=4)
    q.write([(0, 10), (1, 20), (2, 30), (3, 40)])  # lanes: [10,30], [20,40]
    assert q.read(3) == [(0, 10), (1, 20), (2, 30)]
    assert q.read(10) == [(3, 40)]
    assert q.read(1) == []


def test_l0_read_skips_empty_lanes():
    q = L0Vector(lanes=4, capacity=4)
    q.write([(0, 1)])  # lane 0 only
    q.write([(1, 2)])  # lane 1
    assert q.read(8) == [(0, 1), (1, 2)]


def test_l0_conserves_elements_randomized():
    rng = random.Random(5)
    q = L0Vector(lanes=3, capacity=2)
    written, removed = [], []
    for _ in range(200):
        if rng.random() < 0.6:
            batch = [(rng.randrange(100), rng.randrange(50)) for _ in range(rng.randrange(4))]
            written.extend(batch)
            _, back, _ = q.write(batch)
            removed.extend(back)
        else:
            removed.extend(q.read(rng.randrange(1, 4)))
    removed.extend(q.read(len(written)))
    assert sorted(written) == sorted(removed)


# ---------------------------------------------------------------------------
# L1 vector
# ---------------------------------------------------------------------------


def test_vector_flushes_whole_buffer_every_wb_writes():
    q = L1Vector(capacity=100, wb=2)
    status, back, admitted, flushed = q.write(e(1))
    assert (status, back, admitted, flushed) == (WriteStatus.SUCCESS, [], 1, False)
    status, back, admitted, flushed = q.write([(7, 2), (8, 3)])
    assert status is WriteStatus.WRITE_BACK
    assert back == [(0, 1), (7, 2), (8, 3)]  # the whole buffer, batch included
    assert flushed is True
    assert q.is_empty()
    # the counter restarts after a flush
    _, _, _, flushed = q.write(e(9))
    assert flushed is False


def test_vector_wb_zero_disables_flushing():
    q = L1Vector(capacity=10, wb=0)
    for i in range(9):
        status, back, _, flushed = q.write([(i, i)])
        assert status is WriteStatus.SUCCESS and not back and not flushed
    assert len(q) == 9


def test_vector_capacity_evicts_from_front_without_flush_flag():
    q = L1Vector(capacity=3, wb=0)
    q.write(e(1, 2, 3))
    status, back, admitted, flushed = q.write(e(4, 5))
    assert status is WriteStatus.WRITE_BACK
    assert back == [(0, 1), (1, 2)]
    assert admitted == 2
    assert flushed is False
    assert q.read(10) == [(2, 3), (0, 4), (1, 5)]


def test_vector_read_is_fifo_and_bounded():
    q = L1Vector(capacity=10, wb=0)
    q.write(e(5, 6, 7))
    assert q.read(2) == [(0, 5), (1, 6)]
    assert q.read(2) == [(2, 7)]
    assert q.read(2) == []


# ---------------------------------------------------------------------------
# L1 near/far
# ---------------------------------------------------------------------------


def test_near_far_partitions_on_threshold():
    q = L1NearFar(capacity=10, delta_nf=5)
    q.write([(0, 3), (1, 7)])
    assert q.read(2) == [(0, 3)]  # 7 sits in far until a rebase


def test_near_far_rebases_when_near_runs_dry():
    q = L1NearFar(capacity=10, delta_nf=5)
    q.write([(0, 7), (1, 12)])
    got = q.read(2)
    # rebase: threshold = min(far) + 5 = 12; 7 moves near, 12 stays far
    assert got == [(0, 7)]
    assert q.nf_threshold == 12
    assert len(q) == 1
    assert q.read(2) == [(1, 12)]  # second rebase to 17 frees it


def test_near_far_repartition_is_stable():
    q = L1NearFar(capacity=10, delta_nf=5)
    q.write([(0, 9), (1, 7), (2, 8)])
    assert q.read(3) == [(0, 9), (1, 7), (2, 8)]  # arrival order survives


def test_near_far_overflow_evicts_far_first():
    q = L1NearFar(capacity=3, delta_nf=10)
    q.write([(0, 1), (1, 20), (2, 21)])
    status, back, admitted, _ = q.write([(3, 2)])
    assert status is WriteStatus.WRITE_BACK
    assert back == [(1, 20)]
    assert admitted == 1
    # near exhausted only when far cannot cover the overflow
    status, back, _, _ = q.write([(4, 3), (5, 4), (6, 5)])
    assert back == [(2, 21), (0, 1), (3, 2)]


def test_near_far_empty_read_returns_nothing():
    q = L1NearFar(capacity=4, delta_nf=3)
    assert q.read(2) == []


# ---------------------------------------------------------------------------
# L1 filter
# ---------------------------------------------------------------------------


def test_filter_rejects_pass_through_immediately():
    q = L1Filter(capacity=10, filter_f=10)
    status, back, admitted, _ = q.write([(0, 5), (1, 15)])
    assert status is WriteStatus.WRITE_BACK
    assert back == [(1, 15)]
    assert admitted == 1
    assert q.read(2) == [(0, 5)]


def test_filter_admits_at_exact_bound():
    q = L1Filter(capacity=10, filter_f=10)
    _, back, admitted, _ = q.write([(0, 10)])
    assert back == [] and admitted == 1


def test_filter_rebases_on_empty_read_from_min_reject():
    q = L1Filter(capacity=10, filter_f=10)
    q.write([(0, 30), (1, 17), (2, 25)])  # all rejected
    assert q.filter_bound == 10
    assert q.read(1) == []
    assert q.filter_bound == 27  # min rejected 17 + configured 10
    _, back, admitted, _ = q.write([(3, 26)])
    assert back == [] and admitted == 1


def test_filter_rebase_resets_reject_tracking():
    q = L1Filter(capacity=10, filter_f=10)
    q.write([(0, 50)])
    q.read(1)  # bound -> 60
    assert q.read(1) == []  # no rejects since last rebase: bound unchanged
    assert q.filter_bound == 60


def test_filter_capacity_evicts_from_front():
    q = L1Filter(capacity=2, filter_f=100)
    q.write([(0, 1), (1, 2), (2, 3)])
    assert len(q) == 2
    assert q.read(5) == [(1, 2), (2, 3)]


# ---------------------------------------------------------------------------
# L1 shortest-label-first
# ---------------------------------------------------------------------------


def test_slf_compares_against_head_at_write_start():
    q = L1Slf(capacity=10)
    q.write([(0, 4)])
    q.write([(1, 5), (2, 1), (3, 2)])
    # 5 >= 4 goes tail; 1 and 2 both beat the write-start head 4
    assert q.read(4) == [(3, 2), (2, 1), (0, 4), (1, 5)]


def test_slf_empty_buffer_treats_head_as_infinite():
    q = L1Slf(capacity=10)
    q.write([(0, 3), (1, 9)])
    assert q.read(2) == [(1, 9), (0, 3)]


def test_slf_overflow_pops_tail():
    q = L1Slf(capacity=2)
    q.write([(0, 5)])
    status, back, admitted, _ = q.write([(1, 1), (2, 9)])
    assert status is WriteStatus.WRITE_BACK
    assert back == [(2, 9)]
    assert admitted == 2
    assert q.read(5) == [(1, 1), (0, 5)]


# ---------------------------------------------------------------------------
# Factory and conservation
# ---------------------------------------------------------------------------


def test_make_l1_dispatch():
    assert isinstance(make_l1("vector", 8, 4, 1, 1), L1Vector)
    assert isinstance(make_l1("near_far", 8, 4, 3, 1), L1NearFar)
    assert isinstance(make_l1("filter", 8, 4, 1, 9), L1Filter)
    assert isinstance(make_l1("slf", 8, 4, 1, 1), L1Slf)
    with pytest.raises(ValueError):
        make_l1("heap", 8, 4, 1, 1)


@pytest.mark.parametrize("l1_type", ["vector", "near_far", "filter", "slf"])
def test_l1_conserves_elements_randomized(l1_type):
    rng = random.Random(hash(l1_type) & 0xFFFF)
    q = make_l1(l1_type, capacity=8, wb=3, delta_nf=7, filter_f=12)
    written, removed = [], []
    for _ in range(300):
        if rng.random() < 0.55:
            batch = [(rng.randrange(1000), rng.randrange(40)) for _ in range(rng.randrange(5))]
            written.extend(batch)
            _, back, _, _ = q.write(batch)
            removed.extend(back)
        else:
            removed.extend(q.read(rng.randrange(1, 5)))
    while not q.is_empty():
        got = q.read(4)
        if not got:
            continue  # a rebase read can come back empty while elements remain
        removed.extend(got)
    assert sorted(written) == sorted(removed)
