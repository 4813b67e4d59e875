import os
import random

import pytest

from mlq_sssp.core import GraphFormatError, NegativeWeightError
from mlq_sssp.graph import (
    build_csr,
    extract_features,
    generate_graph,
    generate_grid2d,
    generate_path,
    generate_random_uniform,
    generate_rmat,
    load_dimacs,
    load_graph,
    load_matrix_market,
    save_dimacs,
    save_graph,
    save_matrix_market,
)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fx(name):
    return os.path.join(FIXTURES, name)


def test_build_csr_orders_by_source_and_keeps_file_order():
    g = build_csr(3, [(2, 0, 7), (0, 1, 3), (0, 2, 4), (2, 1, 1)])
    assert g.row_offsets == [0, 2, 2, 4]
    assert g.col_indices == [1, 2, 0, 1]
    assert g.weights == [3, 4, 7, 1]
    assert list(g.edges()) == [(0, 1, 3), (0, 2, 4), (2, 0, 7), (2, 1, 1)]


def test_build_csr_drops_zero_weight_self_loops_only():
    g = build_csr(2, [(0, 0, 0), (0, 0, 5), (0, 1, 0)])
    assert g.num_edges == 2
    assert (0, 0, 5) in list(g.edges())
    assert (0, 1, 0) in list(g.edges())


def test_build_csr_rejects_negative_weight():
    with pytest.raises(NegativeWeightError):
        build_csr(2, [(0, 1, -1)])


def test_build_csr_rejects_out_of_range_vertex():
    with pytest.raises(GraphFormatError):
        build_csr(2, [(0, 2, 1)])


def test_load_dimacs_tiny():
    g = load_dimacs(fx("tiny.gr"))
    assert g.num_vertices == 5
    assert g.num_edges == 7
    assert (0, 1, 2) in list(g.edges())
    assert (4, 0, 1) in list(g.edges())


def test_dimacs_round_trip(tmp_path):
    g = load_dimacs(fx("tiny.gr"))
    out = tmp_path / "copy.gr"
    save_dimacs(g, str(out))
    h = load_dimacs(str(out))
    assert h.row_offsets == g.row_offsets
    assert h.col_indices == g.col_indices
    assert h.weights == g.weights


def test_dimacs_rejects_negative_weight():
    with pytest.raises(NegativeWeightError):
        load_dimacs(fx("negative.gr"))


def test_dimacs_rejects_header_count_mismatch():
    with pytest.raises(GraphFormatError, match="declares 2 arcs"):
        load_dimacs(fx("badcount.gr"))


def test_dimacs_rejects_out_of_range_vertex():
    with pytest.raises(GraphFormatError, match="out of range"):
        load_dimacs(fx("badvertex.gr"))


def test_dimacs_rejects_garbage(tmp_path):
    p = tmp_path / "junk.gr"
    p.write_text("p sp 2 1\nz 1 2 3\n")
    with pytest.raises(GraphFormatError):
        load_dimacs(str(p))


def test_load_matrix_market_general_integer():
    g = load_matrix_market(fx("tiny.mtx"))
    assert g.num_vertices == 3
    assert list(g.edges()) == [(0, 1, 4), (1, 2, 1), (2, 0, 2)]


def test_load_matrix_market_symmetric_expands_off_diagonal():
    g = load_matrix_market(fx("symmetric.mtx"))
    edges = set(g.edges())
    # diagonal entry appears once, off-diagonal entries both ways
    assert g.num_edges == 9
    assert (0, 0, 3) in edges
    assert (1, 0, 4) in edges and (0, 1, 4) in edges
    assert (3, 1, 7) in edges and (1, 3, 7) in edges


def test_load_matrix_market_pattern_gets_unit_weights():
    g = load_matrix_market(fx("pattern.mtx"))
    assert sorted(g.edges()) == [(0, 1, 1), (1, 0, 1), (1, 2, 1), (2, 1, 1)]


def test_load_matrix_market_real_scales_weights():
    g = load_matrix_market(fx("real.mtx"), weight_scale=1000)
    assert list(g.edges()) == [(0, 1, 1500), (1, 2, 250), (2, 0, 2000)]
    g10 = load_matrix_market(fx("real.mtx"), weight_scale=10)
    assert list(g10.edges()) == [(0, 1, 15), (1, 2, 2), (2, 0, 20)]


def test_matrix_market_round_trip(tmp_path):
    g = load_matrix_market(fx("symmetric.mtx"))
    out = tmp_path / "copy.mtx"
    save_matrix_market(g, str(out))
    h = load_matrix_market(str(out))
    assert h.row_offsets == g.row_offsets
    assert h.col_indices == g.col_indices
    assert h.weights == g.weights


def test_matrix_market_rejects_non_square(tmp_path):
    p = tmp_path / "rect.mtx"
    p.write_text("%%MatrixMarket matrix coordinate integer general\n2 3 1\n1 2 1\n")
    with pytest.raises(GraphFormatError, match="square"):
        load_matrix_market(str(p))


def test_matrix_market_rejects_entry_count_mismatch(tmp_path):
    p = tmp_path / "short.mtx"
    p.write_text("%%MatrixMarket matrix coordinate integer general\n2 2 2\n1 2 1\n")
    with pytest.raises(GraphFormatError, match="declares 2 entries"):
        load_matrix_market(str(p))


def test_load_graph_infers_format_from_extension():
    assert load_graph(fx("tiny.gr")).num_vertices == 5
    assert load_graph(fx("tiny.mtx")).num_vertices == 3
    with pytest.raises(GraphFormatError, match="infer"):
        load_graph("graph.dat")


def test_save_graph_round_trip_both_formats(tmp_path):
    g = generate_random_uniform(40, 160, 1, 30, seed=9)
    for name in ("g.gr", "g.mtx"):
        path = tmp_path / name
        save_graph(g, str(path))
        h = load_graph(str(path))
        assert h.row_offsets == g.row_offsets
        assert h.col_indices == g.col_indices
        assert h.weights == g.weights


def test_generate_grid2d_shape():
    g = generate_grid2d(3, 4)
    assert g.num_vertices == 12
    # 2*(rows*(cols-1) + cols*(rows-1)) directed edges
    assert g.num_edges == 2 * (3 * 3 + 4 * 2)
    assert all(w == 1 for w in g.weights)
    corner = g.out_degree(0)
    assert corner == 2


def test_generate_path_shape():
    g = generate_path(6)
    assert g.num_vertices == 6
    assert g.num_edges == 10
    assert g.out_degree(0) == 1
    assert g.out_degree(3) == 2


def test_generate_uniform_counts_and_weight_range():
    g = generate_random_uniform(50, 300, 2, 9, seed=3)
    assert g.num_vertices == 50
    assert g.num_edges == 300
    assert all(2 <= w <= 9 for w in g.weights)


def test_generate_rmat_is_skewed():
    g = generate_rmat(8, edge_factor=8, seed=1)
    assert g.num_vertices == 256
    assert g.num_edges == 2048
    feats = extract_features(g)
    assert feats.dev_nnz > feats.avg_nnz  # power-law degree spread


def test_generate_rmat_rejects_bad_probabilities():
    with pytest.raises(ValueError, match="sum to 1"):
        generate_rmat(4, a=0.5, b=0.5, c=0.5, d=0.5)


def test_generators_are_seed_deterministic():
    for kind, params in [
        ("grid2d", dict(rows=5, cols=7, wmin=1, wmax=50)),
        ("path", dict(n=40, wmin=1, wmax=9)),
        ("uniform", dict(n=60, m=240)),
        ("rmat", dict(scale=6)),
    ]:
        a = generate_graph(kind, seed=11, **params)
        b = generate_graph(kind, seed=11, **params)
        c = generate_graph(kind, seed=12, **params)
        assert a.weights == b.weights and a.col_indices == b.col_indices
        if kind != "grid2d":  # topology is fixed for grids, weights are not
            assert (a.col_indices, a.weights) != (c.col_indices, c.weights)
        else:
            assert a.weights != c.weights


def test_generate_graph_rejects_unknown_kind():
    with pytest.raises(ValueError, match="unknown generator"):
        generate_graph("torus", n=4)


def test_extract_features_on_known_graph():
    # degrees: 2, 1, 0; weights: 3, 4, 7
    g = build_csr(3, [(0, 1, 3), (0, 2, 4), (1, 2, 7)])
    f = extract_features(g)
    assert f.m == 3
    assert f.nnz == 3
    assert f.avg_nnz == pytest.approx(1.0)
    assert f.max_nnz == 2
    assert f.dev_nnz == pytest.approx((2 / 3) ** 0.5)
    assert f.avg_weight == pytest.approx(14 / 3)
    assert f.max_weight == 7
    mean = 14 / 3
    var = ((3 - mean) ** 2 + (4 - mean) ** 2 + (7 - mean) ** 2) / 3
    assert f.dev_weight == pytest.approx(var ** 0.5)


def test_extract_features_empty_graph():
    g = build_csr(4, [])
    f = extract_features(g)
    assert f.nnz == 0
    assert f.avg_weight == 0.0
    assert f.max_weight == 0


def test_features_match_direct_computation_on_random_graphs():
    rng = random.Random(17)
    for _ in range(5):
        n = rng.randint(2, 40)
        m = rng.randint(0, 120)
        g = generate_random_uniform(n, m, 1, 100, seed=rng.randint(0, 999))
        f = extract_features(g)
        degrees = [g.out_degree(u) for u in range(n)]
        assert f.avg_nnz == pytest.approx(sum(degrees) / n)
        assert f.max_nnz == max(degrees)
        if m:
            assert f.avg_weight == pytest.approx(sum(g.weights) / m)
