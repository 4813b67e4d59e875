"""Input-adaptive configuration selection.

A candidate grid of queue configurations is benchmarked over a graph corpus;
each record's relative performance (best wall time on that graph divided by
the record's wall time) becomes the regression target for a small bagged
ensemble of variance-reduction trees, implemented here directly on numpy.
Selection ranks candidates by predicted relative performance; without a model
a rule-based decision list stands in.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import statistics
import struct
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    DEFAULT_BLOCK_NUM,
    DEFAULT_BLOCK_SIZE,
    DEFAULT_BMAX,
    DEFAULT_BNUM,
    DEFAULT_L0_CAPACITY,
    DEFAULT_L1_CAPACITY,
    DEFAULT_NODE_BATCH,
    DEFAULT_WB,
    InsufficientDataError,
    L1Params,
    L2Params,
    MlmqConfig,
)
from .graph import FEATURE_NAMES, CsrGraph, GraphFeatures, extract_features

ENCODING_FIELDS = (
    "l1_vector",
    "l1_near_far",
    "l1_filter",
    "l1_slf",
    "l2_fifo",
    "l2_bucket",
    "l2_priority",
    "l2_multi",
    "wb",
    "delta_scale",
    "nf_scale",
    "f_scale",
    "l1_capacity",
    "l0_capacity",
    "block_size",
    "bmax",
    "bnum",
    "node_batch",
)

_L1_ORDER = ("vector", "near_far", "filter", "slf")
_L2_ORDER = ("fifo", "bucket", "priority", "multi")


@dataclass(frozen=True)
class ConfigCandidate:
    """A queue configuration with graph-relative parameters.

    Bucket width, near/far delta, and the filter bound are expressed as
    multiples of the graph's average edge weight and materialize when the
    candidate is bound to concrete features.
    """

    l1_type: str
    l2_type: str
    wb: int = DEFAULT_WB
    delta_scale: float = 1.0
    nf_scale: float = 1.0
    f_scale: float = 4.0
    l1_capacity: int = DEFAULT_L1_CAPACITY
    l0_capacity: int = DEFAULT_L0_CAPACITY
    block_size: int = DEFAULT_BLOCK_SIZE
    bmax: int = DEFAULT_BMAX
    bnum: int = DEFAULT_BNUM
    node_batch: int = DEFAULT_NODE_BATCH

    def label(self) -> str:
        extra = ""
        if self.l2_type == "bucket":
            extra = f"(d{self.delta_scale:g})"
        if self.wb != DEFAULT_WB:
            extra += f"(wb{self.wb})"
        return f"{self.l1_type}+{self.l2_type}{extra}"

    def encode(self) -> List[float]:
        """Fixed-order numeric vector: one-hot types, then parameters scaled
        by their defaults; parameters foreign to the variant encode as 0."""
        vec = [1.0 if self.l1_type == t else 0.0 for t in _L1_ORDER]
        vec += [1.0 if self.l2_type == t else 0.0 for t in _L2_ORDER]
        is_bucket = self.l2_type == "bucket"
        is_block = self.l2_type in ("fifo", "bucket")
        is_tree = self.l2_type in ("priority", "multi")
        vec += [
            self.wb / DEFAULT_WB,
            self.delta_scale if is_bucket else 0.0,
            self.nf_scale if self.l1_type == "near_far" else 0.0,
            self.f_scale if self.l1_type == "filter" else 0.0,
            self.l1_capacity / DEFAULT_L1_CAPACITY,
            self.l0_capacity / DEFAULT_L0_CAPACITY,
            self.block_size / DEFAULT_BLOCK_SIZE if is_block else 0.0,
            self.bmax / DEFAULT_BMAX if is_bucket else 0.0,
            self.bnum / DEFAULT_BNUM if is_bucket else 0.0,
            self.node_batch / DEFAULT_NODE_BATCH if is_tree else 0.0,
        ]
        return vec

    def bind(self, features: Optional[GraphFeatures] = None, num_groups: int = 1,
             lanes_per_group: int = 32, th_v: int = 16) -> MlmqConfig:
        """Materialize an MlmqConfig against concrete graph features."""
        aw = 1
        if features is not None and features.avg_weight > 0:
            aw = max(1, round(features.avg_weight))

        def scaled(s: float) -> int:
            return max(1, round(s * aw))

        l2p = L2Params(
            block_size=self.block_size,
            block_num=DEFAULT_BLOCK_NUM,
            delta=scaled(self.delta_scale) if self.l2_type == "bucket" else None,
            bmax=self.bmax,
            bnum=self.bnum,
            node_batch=self.node_batch,
        )
        l1p = L1Params(
            capacity=self.l1_capacity,
            wb=self.wb,
            delta_nf=scaled(self.nf_scale) if self.l1_type == "near_far" else None,
            filter_f=scaled(self.f_scale) if self.l1_type == "filter" else None,
        )
        return MlmqConfig(
            l1_type=self.l1_type,
            l2_type=self.l2_type,
            l0_capacity=self.l0_capacity,
            l1_params=l1p,
            l2_params=l2p,
            num_groups=num_groups,
            lanes_per_group=lanes_per_group,
            th_v=th_v,
        )


DEFAULT_GRID = {
    "l1": list(_L1_ORDER),
    "l2": ["fifo", "bucket"],
    "delta_scale": [1.0, 4.0],
}


def enumerate_candidates(grid: Optional[dict] = None) -> List[ConfigCandidate]:
    """Cartesian product of a grid spec, with invalid combos filtered.

    Grid keys: l1, l2, wb, delta_scale, nf_scale, f_scale, l1_capacity,
    bnum, bmax, node_batch. delta_scale/bmax/bnum multiply only bucket
    configs and node_batch only tree-based configs, so the counts stay small.
    """
    spec = dict(DEFAULT_GRID if grid is None else grid)
    l1s = spec.get("l1", list(_L1_ORDER))
    l2s = spec.get("l2", ["fifo", "bucket"])
    wbs = spec.get("wb", [DEFAULT_WB])
    deltas = spec.get("delta_scale", [1.0])
    nfs = spec.get("nf_scale", [1.0])
    fs = spec.get("f_scale", [4.0])
    caps = spec.get("l1_capacity", [DEFAULT_L1_CAPACITY])
    bmaxes = spec.get("bmax", [DEFAULT_BMAX])
    bnums = spec.get("bnum", [DEFAULT_BNUM])
    batches = spec.get("node_batch", [DEFAULT_NODE_BATCH])

    out: List[ConfigCandidate] = []
    for l1 in l1s:
        for l2 in l2s:
            d_axis = deltas if l2 == "bucket" else [1.0]
            bm_axis = bmaxes if l2 == "bucket" else [DEFAULT_BMAX]
            bn_axis = bnums if l2 == "bucket" else [DEFAULT_BNUM]
            nb_axis = batches if l2 in ("priority", "multi") else [DEFAULT_NODE_BATCH]
            nf_axis = nfs if l1 == "near_far" else [1.0]
            f_axis = fs if l1 == "filter" else [4.0]
            for wb in wbs:
                for ds in d_axis:
                    for bm in bm_axis:
                        for bn in bn_axis:
                            if bn > bm:
                                continue  # unreadable window; drop the combo
                            for nb in nb_axis:
                                for nf in nf_axis:
                                    for f in f_axis:
                                        out.append(ConfigCandidate(
                                            l1_type=l1, l2_type=l2, wb=wb,
                                            delta_scale=ds, nf_scale=nf,
                                            f_scale=f, l1_capacity=caps[0],
                                            bmax=bm, bnum=bn, node_batch=nb))
    return out


SMALL_GRAPH_VERTICES = 1 << 14
MESH_MIN_DEG = 3.5
MESH_MAX_DEG = 9.0


def select_rule_based(features: GraphFeatures) -> ConfigCandidate:
    """Decision list mapping feature shapes to a sensible config.

    High degree variance marks power-law graphs, which want the short-first
    buffer over priority buckets; small or low-variance graphs run best on
    plain FIFOs; large mid-degree meshes like the admission filter; the rest
    (long-diameter, road-like inputs) get FIFO buffering over buckets.
    """
    if features.dev_nnz > features.avg_nnz:
        return ConfigCandidate("slf", "bucket", delta_scale=1.0)
    if features.m < SMALL_GRAPH_VERTICES:
        return ConfigCandidate("vector", "fifo")
    if MESH_MIN_DEG <= features.avg_nnz <= MESH_MAX_DEG:
        return ConfigCandidate("filter", "fifo")
    return ConfigCandidate("vector", "bucket", delta_scale=1.0)


# ---------------------------------------------------------------------------
# Benchmark records
# ---------------------------------------------------------------------------


@dataclass
class BenchmarkRecord:
    graph_id: str
    features: GraphFeatures
    candidate: Optional[ConfigCandidate]
    encoding: List[float]
    wall_time_us: int
    relative_performance: float = 0.0
    relaxations: int = 0
    distance_updates: int = 0
    settled_reads: int = 0

    def label(self) -> str:
        if self.candidate is not None:
            return self.candidate.label()
        enc = self.encoding
        l1 = next((t for i, t in enumerate(_L1_ORDER) if enc[i] > 0.5), "?")
        l2 = next((t for i, t in enumerate(_L2_ORDER) if enc[4 + i] > 0.5), "?")
        label = f"{l1}+{l2}"
        if l2 == "bucket":
            label += f"(d{enc[ENCODING_FIELDS.index('delta_scale')]:g})"
        return label


_WORK_COLUMNS = ("relaxations", "distance_updates", "settled_reads")
CSV_COLUMNS = (("graph_id",) + FEATURE_NAMES + ENCODING_FIELDS
               + ("wall_time_us", "relative_performance") + _WORK_COLUMNS)


def assign_relative_performance(records: List[BenchmarkRecord]) -> None:
    """Set rp = best wall time on the graph / record wall time, in (0, 1]."""
    best: Dict[str, int] = {}
    for r in records:
        cur = best.get(r.graph_id)
        if cur is None or r.wall_time_us < cur:
            best[r.graph_id] = r.wall_time_us
    for r in records:
        r.relative_performance = best[r.graph_id] / max(1, r.wall_time_us)


def write_records_csv(records: Iterable[BenchmarkRecord], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            row = [r.graph_id]
            row += [repr(x) for x in r.features.as_vector()]
            row += [repr(x) for x in r.encoding]
            row += [r.wall_time_us, repr(r.relative_performance)]
            row += [r.relaxations, r.distance_updates, r.settled_reads]
            writer.writerow(row)


def read_records_csv(path: str) -> List[BenchmarkRecord]:
    records: List[BenchmarkRecord] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise InsufficientDataError(f"{path}: unrecognized record header")
        nf = len(FEATURE_NAMES)
        ne = len(ENCODING_FIELDS)
        for row in reader:
            gid = row[0]
            fvec = [float(x) for x in row[1:1 + nf]]
            enc = [float(x) for x in row[1 + nf:1 + nf + ne]]
            wall = int(row[1 + nf + ne])
            rp = float(row[2 + nf + ne])
            work = [int(x) for x in row[3 + nf + ne:6 + nf + ne]]
            feats = GraphFeatures(int(fvec[0]), int(fvec[1]), fvec[2], int(fvec[3]),
                                  fvec[4], fvec[5], fvec[6], int(fvec[7]))
            records.append(BenchmarkRecord(gid, feats, None, enc, wall, rp,
                                           *work))
    return records


def benchmark_graphs(graphs: Sequence[Tuple[str, CsrGraph]],
                     candidates: Sequence[ConfigCandidate],
                     source: int = 0, reps: int = 3, num_groups: int = 1,
                     watchdog_s: float = 60.0) -> List[BenchmarkRecord]:
    """Time every candidate on every graph; wall time is the median of reps.

    Runs use one worker group by default so the work counters in the records
    are seed-deterministic even though the times are not.
    """
    from .engine import sssp_solve  # local import to avoid a cycle

    records: List[BenchmarkRecord] = []
    for graph_id, graph in graphs:
        feats = extract_features(graph)
        for cand in candidates:
            cfg = cand.bind(feats, num_groups=num_groups)
            walls = []
            result = None
            for _ in range(max(1, reps)):
                result = sssp_solve(graph, source, cfg, features=feats,
                                    watchdog_s=watchdog_s)
                walls.append(result.metrics.wall_time_us)
            records.append(BenchmarkRecord(
                graph_id=graph_id,
                features=feats,
                candidate=cand,
                encoding=cand.encode(),
                wall_time_us=int(statistics.median(walls)),
                relaxations=result.metrics.relaxations,
                distance_updates=result.metrics.distance_updates,
                settled_reads=result.metrics.settled_reads,
            ))
    assign_relative_performance(records)
    return records


# ---------------------------------------------------------------------------
# Bagged regression trees
# ---------------------------------------------------------------------------


@dataclass
class _Tree:
    feature: np.ndarray  # int32; -1 marks a leaf
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    value: np.ndarray  # float64

    def predict_one(self, x: np.ndarray) -> float:
        node = 0
        feature = self.feature
        while feature[node] >= 0:
            if x[feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return float(self.value[node])


def _grow_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator,
               max_depth: int, min_leaf: int, n_try: int) -> _Tree:
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def grow(idx: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        ys = y[idx]
        value.append(float(ys.mean()))
        if depth >= max_depth or idx.size < 2 * min_leaf or np.all(ys == ys[0]):
            return node
        total_ss = float(((ys - ys.mean()) ** 2).sum())
        best_gain = 0.0
        best = None
        for f in rng.choice(X.shape[1], size=n_try, replace=False):
            xs = X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs_s = xs[order]
            ys_s = ys[order]
            csum = np.cumsum(ys_s)
            csq = np.cumsum(ys_s * ys_s)
            n = idx.size
            counts = np.arange(1, n)
            # sum of squared deviations on each side of every split point
            left_ss = csq[:-1] - csum[:-1] ** 2 / counts
            right_n = n - counts
            right_sum = csum[-1] - csum[:-1]
            right_ss = (csq[-1] - csq[:-1]) - right_sum ** 2 / right_n
            gains = total_ss - left_ss - right_ss
            valid = (xs_s[1:] > xs_s[:-1]) & (counts >= min_leaf) & (right_n >= min_leaf)
            gains = np.where(valid, gains, -np.inf)
            k = int(np.argmax(gains))
            if gains[k] > best_gain:
                best_gain = float(gains[k])
                best = (int(f), (float(xs_s[k]) + float(xs_s[k + 1])) / 2.0)
        if best is None:
            return node
        f, thr = best
        mask = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return _Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )


_MODEL_MAGIC = b"MLQSEL01"


@dataclass
class SelectorModel:
    """Bagged regression trees mapping features + config encoding to rp."""

    seed: int
    n_trees: int
    max_depth: int
    min_leaf: int
    corpus_hash: str
    feature_names: Tuple[str, ...]
    trees: List[_Tree] = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise ValueError(
                f"model expects {len(self.feature_names)} inputs, got {X.shape[1]}")
        out = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            for i in range(X.shape[0]):
                out[i] += tree.predict_one(X[i])
        out /= max(1, len(self.trees))
        return np.clip(out, 0.0, 1.0)

    def save(self, path: str) -> None:
        header = json.dumps({
            "seed": self.seed,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "corpus_hash": self.corpus_hash,
            "feature_names": list(self.feature_names),
            "node_counts": [int(t.feature.size) for t in self.trees],
        }, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(_MODEL_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            for t in self.trees:
                fh.write(t.feature.astype("<i4").tobytes())
                fh.write(t.threshold.astype("<f8").tobytes())
                fh.write(t.left.astype("<i4").tobytes())
                fh.write(t.right.astype("<i4").tobytes())
                fh.write(t.value.astype("<f8").tobytes())

    @classmethod
    def load(cls, path: str) -> "SelectorModel":
        with open(path, "rb") as fh:
            magic = fh.read(len(_MODEL_MAGIC))
            if magic != _MODEL_MAGIC:
                raise ValueError(f"{path}: not a selector model file")
            (hlen,) = struct.unpack("<I", fh.read(4))
            meta = json.loads(fh.read(hlen).decode("utf-8"))
            trees = []
            for count in meta["node_counts"]:
                feature = np.frombuffer(fh.read(4 * count), dtype="<i4")
                thresh = np.frombuffer(fh.read(8 * count), dtype="<f8")
                lft = np.frombuffer(fh.read(4 * count), dtype="<i4")
                rgt = np.frombuffer(fh.read(4 * count), dtype="<i4")
                val = np.frombuffer(fh.read(8 * count), dtype="<f8")
                trees.append(_Tree(feature, thresh, lft, rgt, val))
        return cls(
            seed=meta["seed"],
            n_trees=meta["n_trees"],
            max_depth=meta["max_depth"],
            min_leaf=meta["min_leaf"],
            corpus_hash=meta["corpus_hash"],
            feature_names=tuple(meta["feature_names"]),
            trees=trees,
        )


MODEL_INPUT_NAMES = FEATURE_NAMES + ENCODING_FIELDS


def _records_matrix(records: Sequence[BenchmarkRecord]) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray([r.features.as_vector() + list(r.encoding) for r in records],
                   dtype=np.float64)
    y = np.asarray([r.relative_performance for r in records], dtype=np.float64)
    return X, y


def corpus_hash(records: Sequence[BenchmarkRecord]) -> str:
    buf = io.StringIO()
    for r in records:
        buf.write(r.graph_id)
        buf.write(",".join(repr(x) for x in r.features.as_vector()))
        buf.write(",".join(repr(x) for x in r.encoding))
        buf.write(repr(r.relative_performance))
    return hashlib.sha256(buf.getvalue().encode("utf-8")).hexdigest()


def train_selector(records: Sequence[BenchmarkRecord], seed: int = 0,
                   n_trees: int = 64, max_depth: int = 6,
                   min_leaf: int = 2) -> SelectorModel:
    """Fit the bagged ensemble; deterministic for a fixed seed and corpus."""
    graphs = {r.graph_id for r in records}
    encodings = {tuple(r.encoding) for r in records}
    if len(graphs) < 2 or len(encodings) < 2:
        raise InsufficientDataError(
            f"training needs at least 2 graphs and 2 configs, got "
            f"{len(graphs)} graph(s) and {len(encodings)} config(s)")
    X, y = _records_matrix(records)
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    n_try = max(1, int(round(X.shape[1] * 0.6)))
    model = SelectorModel(
        seed=seed,
        n_trees=n_trees,
        max_depth=max_depth,
        min_leaf=min_leaf,
        corpus_hash=corpus_hash(records),
        feature_names=MODEL_INPUT_NAMES,
    )
    for _ in range(n_trees):
        boot = rng.integers(0, n, size=n)
        model.trees.append(_grow_tree(X[boot], y[boot], rng, max_depth,
                                      min_leaf, n_try))
    return model


def select_config(features: GraphFeatures,
                  candidates: Sequence[ConfigCandidate],
                  model: Optional[SelectorModel] = None
                  ) -> List[Tuple[ConfigCandidate, Optional[float]]]:
    """Rank candidates best-first.

    With a model: by predicted relative performance, ties broken by grid
    order. Without: the rule-based choice first, the rest in grid order.
    """
    candidates = list(candidates)
    if model is None:
        head = select_rule_based(features)
        ranked: List[Tuple[ConfigCandidate, Optional[float]]] = [(head, None)]
        for cand in candidates:
            if cand != head:
                ranked.append((cand, None))
        return ranked
    fvec = features.as_vector()
    X = np.asarray([fvec + cand.encode() for cand in candidates], dtype=np.float64)
    scores = model.predict(X)
    order = np.argsort(-scores, kind="stable")
    return [(candidates[i], float(scores[i])) for i in order]
