import json
import struct
from pathlib import Path

import pytest

from mlq_sssp.cli import main, parse_gen_spec
from mlq_sssp.engine import dijkstra_oracle
from mlq_sssp.graph import build_csr, load_graph, save_graph

jsonschema = pytest.importorskip("jsonschema")
from referencing import Registry, Resource  # noqa: E402

SCHEMAS = Path(__file__).resolve().parent.parent / "docs" / "schemas"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def _registry():
    resources = []
    for p in SCHEMAS.glob("*.schema.json"):
        contents = json.loads(p.read_text())
        resources.append((contents["$id"], Resource.from_contents(contents)))
    return Registry().with_resources(resources)


_REGISTRY = _registry()


def check_schema(obj, name):
    schema = json.loads((SCHEMAS / name).read_text())
    jsonschema.validate(obj, schema, registry=_REGISTRY)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


# ---------------------------------------------------------------------------
# Generator specs
# ---------------------------------------------------------------------------


def test_parse_gen_spec_forms():
    assert parse_gen_spec("path:5") == ("path", {"n": 5})
    assert parse_gen_spec("path:5,1,9") == ("path", {"n": 5, "wmin": 1, "wmax": 9})
    assert parse_gen_spec("grid2d:3x4") == ("grid2d", {"rows": 3, "cols": 4})
    assert parse_gen_spec("grid2d:3x4,1,100") == (
        "grid2d", {"rows": 3, "cols": 4, "wmin": 1, "wmax": 100})
    assert parse_gen_spec("uniform:10,40") == ("uniform", {"n": 10, "m": 40})
    assert parse_gen_spec("rmat:5,4") == ("rmat", {"scale": 5, "edge_factor": 4})
    with pytest.raises(ValueError, match="unknown generator"):
        parse_gen_spec("torus:5")
    with pytest.raises(ValueError, match="bad generator spec"):
        parse_gen_spec("path:abc")
    with pytest.raises(ValueError, match="bad generator spec"):
        parse_gen_spec("uniform:5")


# ---------------------------------------------------------------------------
# gen / features
# ---------------------------------------------------------------------------


def test_gen_writes_loadable_graph(tmp_path, capsys):
    out = tmp_path / "g.gr"
    code, obj = run(capsys, "gen", "uniform:40,160,1,9", "--gen-seed", "3",
                    "--out", str(out))
    assert code == 0
    check_schema(obj, "gen.schema.json")
    assert obj["num_vertices"] == 40
    g = load_graph(str(out))
    assert g.num_vertices == 40 and g.num_edges == 160


def test_gen_seed_changes_output(tmp_path, capsys):
    a, b, c = (tmp_path / n for n in ("a.gr", "b.gr", "c.gr"))
    run(capsys, "gen", "uniform:30,90", "--gen-seed", "1", "--out", str(a))
    run(capsys, "gen", "uniform:30,90", "--gen-seed", "1", "--out", str(b))
    run(capsys, "gen", "uniform:30,90", "--gen-seed", "2", "--out", str(c))
    assert a.read_text() == b.read_text()
    assert a.read_text() != c.read_text()


def test_features_output(capsys):
    code, obj = run(capsys, "features", "--graph", str(FIXTURES / "tiny.gr"))
    assert code == 0
    check_schema(obj, "features.schema.json")
    assert obj["features"]["m"] == 5
    assert obj["features"]["nnz"] == 7


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def test_solve_known_distances(capsys):
    code, obj = run(capsys, "solve", "--graph", str(FIXTURES / "tiny.gr"),
                    "--source", "0", "--num-groups", "1")
    assert code == 0
    check_schema(obj, "solve.schema.json")
    assert obj["distances"] == [0, 2, 4, 5, 8]
    assert obj["config_source"] == "rule_based"
    assert obj["metrics"]["l2_enqueues"] == obj["metrics"]["l2_dequeues"]


def test_solve_reports_null_for_unreachable(tmp_path, capsys):
    g = build_csr(3, [(0, 1, 4)])
    path = tmp_path / "d.gr"
    save_graph(g, str(path))
    code, obj = run(capsys, "solve", "--graph", str(path), "--source", "0")
    assert code == 0
    assert obj["distances"] == [0, 4, None]


def test_solve_explicit_flags_win(capsys):
    code, obj = run(capsys, "solve", "--gen", "path:30", "--source", "0",
                    "--l1", "slf", "--l2", "bucket", "--delta", "3",
                    "--num-groups", "2")
    assert code == 0
    check_schema(obj, "solve.schema.json")
    assert obj["config_source"] == "explicit"
    assert obj["config"]["l1_type"] == "slf"
    assert obj["config"]["l2_type"] == "bucket"
    assert obj["config"]["l2_params"]["delta"] == 3
    assert obj["engine"]["num_groups"] == 2
    assert obj["distances"] == [0] + list(range(1, 30))


def test_solve_env_var_sets_group_count(capsys, monkeypatch):
    monkeypatch.setenv("MLQ_NUM_GROUPS", "3")
    code, obj = run(capsys, "solve", "--gen", "path:10", "--source", "0")
    assert code == 0
    assert obj["engine"]["num_groups"] == 3
    assert obj["config"]["num_groups"] == 3


def test_solve_unit_weights_counts_hops(capsys):
    code, obj = run(capsys, "solve", "--graph", str(FIXTURES / "tiny.gr"),
                    "--source", "0", "--unit-weights")
    assert code == 0
    assert obj["distances"] == [0, 1, 1, 2, 2]
    assert obj["unit_weights"] is True


def test_solve_sidecar_above_inline_cap(tmp_path, capsys):
    out = tmp_path / "big.json"
    code, _ = run(capsys, "solve", "--gen", "path:50", "--source", "0",
                  "--max-inline-distances", "10", "--out", str(out))
    assert code == 0
    obj = json.loads(out.read_text())
    check_schema(obj, "solve.schema.json")
    assert "distances" not in obj
    side = Path(obj["distances_file"])
    blob = side.read_bytes()
    assert len(blob) == 50 * 8
    assert struct.unpack("<50Q", blob) == tuple(range(50))


def test_solve_writes_out_file_and_brief_stdout(tmp_path, capsys):
    out = tmp_path / "s.json"
    code, brief = run(capsys, "solve", "--gen", "path:8", "--source", "0",
                      "--out", str(out))
    assert code == 0
    assert brief["out"] == str(out)
    full = json.loads(out.read_text())
    check_schema(full, "solve.schema.json")
    assert full["distances"][:3] == [0, 1, 2]


def test_solve_is_deterministic_apart_from_timing(capsys):
    argv = ("solve", "--gen", "uniform:60,240,1,30", "--source", "2",
            "--l1", "near_far", "--l2", "bucket", "--num-groups", "1")
    _, a = run(capsys, *argv)
    _, b = run(capsys, *argv)
    a["metrics"].pop("wall_time_us")
    b["metrics"].pop("wall_time_us")
    assert a == b


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def test_verify_confirms_exact_distances(capsys):
    code, obj = run(capsys, "verify", "--graph", str(FIXTURES / "tiny.gr"),
                    "--source", "0", "--l1", "filter", "--l2", "priority")
    assert code == 0
    check_schema(obj, "verify.schema.json")
    assert obj["match"] is True
    assert "mismatch" not in obj


def test_verify_unit_weights(capsys):
    code, obj = run(capsys, "verify", "--gen", "uniform:50,200,1,40",
                    "--source", "1", "--unit-weights")
    assert code == 0
    assert obj["match"] is True


# ---------------------------------------------------------------------------
# bench / train / select pipeline
# ---------------------------------------------------------------------------


def test_bench_train_select_pipeline(tmp_path, capsys):
    csv_path = tmp_path / "records.csv"
    code, bench = run(capsys, "bench",
                      "--gen", "path:60,1,9", "--gen", "uniform:50,200,1,9",
                      "--grid-l1", "vector,slf", "--grid-l2", "fifo,bucket",
                      "--delta-scales", "1", "--reps", "1",
                      "--out", str(csv_path))
    assert code == 0
    check_schema(bench, "bench.schema.json")
    assert bench["rows"] == 2 * 4
    assert csv_path.exists()
    for fig in bench["figures"]:
        p = Path(fig)
        assert p.exists() and p.stat().st_size > 1000
        assert p.suffix == ".png"

    model_path = tmp_path / "model.bin"
    code, train = run(capsys, "train", "--records", str(csv_path),
                      "--out", str(model_path), "--trees", "8", "--depth", "4")
    assert code == 0
    check_schema(train, "train.schema.json")
    assert train["rows"] == 8 and train["graphs"] == 2 and train["configs"] == 4
    assert model_path.exists()

    code, sel = run(capsys, "select", "--gen", "path:60,1,9",
                    "--model", str(model_path), "--top", "2")
    assert code == 0
    check_schema(sel, "select.schema.json")
    assert sel["selector"] == "model"
    assert len(sel["ranking"]) == 2
    assert sel["ranking"][0]["rank"] == 1
    assert sel["ranking"][0]["score"] is not None

    code, solved = run(capsys, "solve", "--gen", "path:60,1,9", "--source", "0",
                       "--model", str(model_path))
    assert code == 0
    assert solved["config_source"] == "model"
    assert solved["distances"] == dijkstra_oracle(
        load_graph_from_gen("path:60,1,9"), 0)


def load_graph_from_gen(spec):
    from mlq_sssp.cli import parse_gen_spec
    from mlq_sssp.graph import generate_graph
    kind, params = parse_gen_spec(spec)
    return generate_graph(kind, seed=0, **params)


def test_bench_no_figures_flag(tmp_path, capsys):
    csv_path = tmp_path / "r.csv"
    code, bench = run(capsys, "bench", "--gen", "path:30",
                      "--grid-l1", "vector", "--grid-l2", "fifo",
                      "--reps", "1", "--no-figures", "--out", str(csv_path))
    assert code == 0
    assert bench["figures"] == []
    assert not list(tmp_path.glob("*.png"))


def test_select_without_model_uses_rule_list(capsys):
    code, obj = run(capsys, "select", "--gen", "grid2d:8x8")
    assert code == 0
    check_schema(obj, "select.schema.json")
    assert obj["selector"] == "rule_based"
    assert obj["ranking"][0]["label"] == "vector+fifo"
    assert obj["ranking"][0]["score"] is None
    assert obj["bound_config"]["l1_type"] == "vector"


def test_train_rejects_thin_corpus(tmp_path, capsys):
    csv_path = tmp_path / "one.csv"
    code, _ = run(capsys, "bench", "--gen", "path:20", "--grid-l1", "vector",
                  "--grid-l2", "fifo", "--reps", "1", "--no-figures",
                  "--out", str(csv_path))
    assert code == 0
    code, err = run(capsys, "train", "--records", str(csv_path),
                    "--out", str(tmp_path / "m.bin"))
    assert code == 2
    check_schema(err, "error.schema.json")
    assert err["error"]["type"] == "InsufficientDataError"


# ---------------------------------------------------------------------------
# Failure modes
# ---------------------------------------------------------------------------


def test_error_objects_and_exit_codes(capsys):
    cases = [
        (("solve", "--gen", "path:5", "--source", "99"), "ValueError"),
        (("solve", "--gen", "ring:9"), "ValueError"),
        (("features", "--graph", "missing.gr"), "FileNotFoundError"),
        (("solve", "--graph", str(FIXTURES / "negative.gr")), "NegativeWeightError"),
        (("solve", "--graph", str(FIXTURES / "badcount.gr")), "GraphFormatError"),
        (("bench", "--reps", "1", "--out", "/tmp/x.csv"), "ValueError"),
    ]
    for argv, expected_type in cases:
        code, obj = run(capsys, *argv)
        assert code == 2, argv
        check_schema(obj, "error.schema.json")
        assert obj["error"]["type"] == expected_type


def test_invalid_config_flags_report_cleanly(capsys):
    code, obj = run(capsys, "solve", "--gen", "path:5", "--bnum", "9",
                    "--bmax", "4", "--l2", "bucket")
    assert code == 2
    assert "bnum" in obj["error"]["message"]
