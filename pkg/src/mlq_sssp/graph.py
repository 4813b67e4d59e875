"""CSR graph container, text-format loaders, generators, and features.

Graphs are directed with non-negative integer weights. DIMACS ``.gr`` and
Matrix Market ``.mtx`` files are supported; symmetric matrices are expanded to
both directions and real-valued weights are scaled to integers.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .core import GraphFormatError, NegativeWeightError


@dataclass
class CsrGraph:
    """Compressed sparse row adjacency with parallel weight array."""

    num_vertices: int
    num_edges: int
    row_offsets: List[int]  # len num_vertices + 1
    col_indices: List[int]  # len num_edges
    weights: List[int]  # len num_edges, all >= 0

    def out_degree(self, v: int) -> int:
        return self.row_offsets[v + 1] - self.row_offsets[v]

    def edges(self):
        """Yield (u, v, w) triples in CSR order."""
        offsets = self.row_offsets
        for u in range(self.num_vertices):
            for k in range(offsets[u], offsets[u + 1]):
                yield u, self.col_indices[k], self.weights[k]


@dataclass
class GraphFeatures:
    """Eight structural summary statistics used by the config selector."""

    m: int  # vertex count
    nnz: int  # directed edge count
    avg_nnz: float
    max_nnz: int
    dev_nnz: float  # population standard deviation of out-degrees
    avg_weight: float
    dev_weight: float
    max_weight: int

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "nnz": self.nnz,
            "avg_nnz": self.avg_nnz,
            "max_nnz": self.max_nnz,
            "dev_nnz": self.dev_nnz,
            "avg_weight": self.avg_weight,
            "dev_weight": self.dev_weight,
            "max_weight": self.max_weight,
        }

    def as_vector(self) -> List[float]:
        return [
            float(self.m),
            float(self.nnz),
            self.avg_nnz,
            float(self.max_nnz),
            self.dev_nnz,
            self.avg_weight,
            self.dev_weight,
            float(self.max_weight),
        ]


FEATURE_NAMES = (
    "m",
    "nnz",
    "avg_nnz",
    "max_nnz",
    "dev_nnz",
    "avg_weight",
    "dev_weight",
    "max_weight",
)


def build_csr(num_vertices: int, edges: List[Tuple[int, int, int]]) -> CsrGraph:
    """Assemble a CsrGraph from (u, v, w) triples.

    Triples are bucketed by source with file order preserved inside each
    source; duplicates are kept. Zero-weight self loops are dropped since they
    can never change a shortest distance.
    """
    kept = []
    for u, v, w in edges:
        if w < 0:
            raise NegativeWeightError(f"negative weight {w} on edge {u}->{v}")
        if not (0 <= u < num_vertices) or not (0 <= v < num_vertices):
            raise GraphFormatError(
                f"edge {u}->{v} references a vertex outside [0, {num_vertices})"
            )
        if u == v and w == 0:
            continue
        kept.append((u, v, w))

    counts = [0] * (num_vertices + 1)
    for u, _, _ in kept:
        counts[u + 1] += 1
    for i in range(num_vertices):
        counts[i + 1] += counts[i]
    row_offsets = list(counts)

    cursor = list(row_offsets[:num_vertices])
    col_indices = [0] * len(kept)
    weights = [0] * len(kept)
    for u, v, w in kept:
        k = cursor[u]
        col_indices[k] = v
        weights[k] = w
        cursor[u] = k + 1

    return CsrGraph(num_vertices, len(kept), row_offsets, col_indices, weights)


# ---------------------------------------------------------------------------
# DIMACS shortest-path format
# ---------------------------------------------------------------------------


def load_dimacs(path: str) -> CsrGraph:
    """Read a DIMACS ``.gr`` file (1-based ``a u v w`` arcs)."""
    num_vertices = None
    declared_edges = None
    edges: List[Tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("c"):
                continue
            parts = line.split()
            if parts[0] == "p":
                if len(parts) != 4 or parts[1] != "sp":
                    raise GraphFormatError(f"{path}:{lineno}: malformed problem line {line!r}")
                if num_vertices is not None:
                    raise GraphFormatError(f"{path}:{lineno}: duplicate problem line")
                num_vertices = int(parts[2])
                declared_edges = int(parts[3])
            elif parts[0] == "a":
                if num_vertices is None:
                    raise GraphFormatError(f"{path}:{lineno}: arc before problem line")
                if len(parts) != 4:
                    raise GraphFormatError(f"{path}:{lineno}: malformed arc line {line!r}")
                try:
                    u, v, w = int(parts[1]), int(parts[2]), int(parts[3])
                except ValueError as exc:
                    raise GraphFormatError(f"{path}:{lineno}: non-integer arc field") from exc
                if w < 0:
                    raise NegativeWeightError(f"{path}:{lineno}: negative weight {w}")
                if not (1 <= u <= num_vertices) or not (1 <= v <= num_vertices):
                    raise GraphFormatError(f"{path}:{lineno}: vertex id out of range")
                edges.append((u - 1, v - 1, w))
            else:
                raise GraphFormatError(f"{path}:{lineno}: unknown line type {parts[0]!r}")
    if num_vertices is None:
        raise GraphFormatError(f"{path}: missing problem line")
    if declared_edges is not None and declared_edges != len(edges):
        raise GraphFormatError(
            f"{path}: header declares {declared_edges} arcs but file has {len(edges)}"
        )
    return build_csr(num_vertices, edges)


def save_dimacs(graph: CsrGraph, path: str) -> None:
    """Write a CsrGraph as DIMACS ``.gr``; reloading yields an identical graph."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"p sp {graph.num_vertices} {graph.num_edges}\n")
        for u, v, w in graph.edges():
            fh.write(f"a {u + 1} {v + 1} {w}\n")


# ---------------------------------------------------------------------------
# Matrix Market coordinate format
# ---------------------------------------------------------------------------


def load_matrix_market(path: str, weight_scale: int = 1000) -> CsrGraph:
    """Read a Matrix Market coordinate file as a directed graph.

    Symmetric matrices contribute both edge directions (diagonal entries
    once); ``pattern`` entries get unit weights; ``real`` values are scaled by
    weight_scale and rounded to the nearest integer.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("%%MatrixMarket"):
            raise GraphFormatError(f"{path}: missing MatrixMarket header")
        tokens = header.strip().split()
        if len(tokens) < 5 or tokens[1] != "matrix" or tokens[2] != "coordinate":
            raise GraphFormatError(f"{path}: unsupported header {header.strip()!r}")
        value_type = tokens[3]
        symmetry = tokens[4]
        if value_type not in ("real", "integer", "pattern"):
            raise GraphFormatError(f"{path}: unsupported value type {value_type!r}")
        if symmetry not in ("general", "symmetric"):
            raise GraphFormatError(f"{path}: unsupported symmetry {symmetry!r}")

        size_line = None
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            size_line = line
            break
        if size_line is None:
            raise GraphFormatError(f"{path}: missing size line")
        parts = size_line.split()
        if len(parts) != 3:
            raise GraphFormatError(f"{path}: malformed size line {size_line!r}")
        rows, cols, nnz = (int(p) for p in parts)
        if rows != cols:
            raise GraphFormatError(f"{path}: matrix is {rows}x{cols}, expected square")

        edges: List[Tuple[int, int, int]] = []
        seen = 0
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            fields = line.split()
            try:
                i = int(fields[0])
                j = int(fields[1])
            except (ValueError, IndexError) as exc:
                raise GraphFormatError(f"{path}: malformed entry {line!r}") from exc
            if value_type == "pattern":
                if len(fields) != 2:
                    raise GraphFormatError(f"{path}: pattern entry with a value: {line!r}")
                w = 1
            else:
                if len(fields) != 3:
                    raise GraphFormatError(f"{path}: entry missing value: {line!r}")
                if value_type == "integer":
                    w = int(fields[2])
                else:
                    x = float(fields[2])
                    if x < 0:
                        raise NegativeWeightError(f"{path}: negative weight {x}")
                    w = int(round(x * weight_scale))
            if w < 0:
                raise NegativeWeightError(f"{path}: negative weight {w}")
            if not (1 <= i <= rows) or not (1 <= j <= cols):
                raise GraphFormatError(f"{path}: entry ({i},{j}) out of range")
            seen += 1
            edges.append((i - 1, j - 1, w))
            if symmetry == "symmetric" and i != j:
                edges.append((j - 1, i - 1, w))
        if seen != nnz:
            raise GraphFormatError(f"{path}: size line declares {nnz} entries, found {seen}")
    return build_csr(rows, edges)


def save_matrix_market(graph: CsrGraph, path: str) -> None:
    """Write a CsrGraph as a general integer Matrix Market coordinate file."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("%%MatrixMarket matrix coordinate integer general\n")
        fh.write(f"{graph.num_vertices} {graph.num_vertices} {graph.num_edges}\n")
        for u, v, w in graph.edges():
            fh.write(f"{u + 1} {v + 1} {w}\n")


def load_graph(path: str, fmt: Optional[str] = None, weight_scale: int = 1000) -> CsrGraph:
    """Load a graph, inferring the format from the extension unless given."""
    if fmt is None:
        lower = path.lower()
        if lower.endswith(".gr"):
            fmt = "dimacs"
        elif lower.endswith(".mtx"):
            fmt = "mm"
        else:
            raise GraphFormatError(f"cannot infer format of {path!r}; pass fmt explicitly")
    if fmt == "dimacs":
        return load_dimacs(path)
    if fmt == "mm":
        return load_matrix_market(path, weight_scale=weight_scale)
    raise GraphFormatError(f"unknown graph format {fmt!r}")


def save_graph(graph: CsrGraph, path: str, fmt: Optional[str] = None) -> None:
    if fmt is None:
        fmt = "dimacs" if not path.lower().endswith(".mtx") else "mm"
    if fmt == "dimacs":
        save_dimacs(graph, path)
    elif fmt == "mm":
        save_matrix_market(graph, path)
    else:
        raise GraphFormatError(f"unknown graph format {fmt!r}")


# ---------------------------------------------------------------------------
# Seeded generators
# ---------------------------------------------------------------------------


def _draw_weight(rng: random.Random, wmin: int, wmax: int) -> int:
    return wmin if wmin == wmax else rng.randint(wmin, wmax)


def generate_grid2d(rows: int, cols: int, wmin: int = 1, wmax: int = 1,
                    seed: int = 0) -> CsrGraph:
    """4-neighbor mesh; every adjacency contributes one directed edge each way."""
    if rows < 1 or cols < 1:
        raise ValueError("grid dimensions must be >= 1")
    rng = random.Random(seed)
    n = rows * cols
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                w = _draw_weight(rng, wmin, wmax)
                edges.append((u, u + 1, w))
                edges.append((u + 1, u, w))
            if r + 1 < rows:
                w = _draw_weight(rng, wmin, wmax)
                edges.append((u, u + cols, w))
                edges.append((u + cols, u, w))
    return build_csr(n, edges)


def generate_path(n: int, wmin: int = 1, wmax: int = 1, seed: int = 0) -> CsrGraph:
    """Bidirectional chain 0-1-...-(n-1); the long-diameter stress case."""
    if n < 1:
        raise ValueError("path length must be >= 1")
    rng = random.Random(seed)
    edges = []
    for u in range(n - 1):
        w = _draw_weight(rng, wmin, wmax)
        edges.append((u, u + 1, w))
        edges.append((u + 1, u, w))
    return build_csr(n, edges)


def generate_random_uniform(n: int, m: int, wmin: int = 1, wmax: int = 100,
                            seed: int = 0) -> CsrGraph:
    """m directed edges with endpoints drawn uniformly at random."""
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    rng = random.Random(seed)
    edges = []
    for _ in range(m):
        u = rng.randrange(n)
        v = rng.randrange(n)
        w = _draw_weight(rng, wmin, wmax)
        if u == v and w == 0:
            w = 1
        edges.append((u, v, w))
    return build_csr(n, edges)


def generate_rmat(scale: int, edge_factor: int = 8,
                  a: float = 0.57, b: float = 0.19, c: float = 0.19, d: float = 0.05,
                  wmin: int = 1, wmax: int = 100, seed: int = 0) -> CsrGraph:
    """Recursive-matrix generator with a power-law degree distribution.

    Produces 2**scale vertices and edge_factor * 2**scale directed edges;
    duplicates and self loops are kept.
    """
    if scale < 1:
        raise ValueError("scale must be >= 1")
    if edge_factor < 1:
        raise ValueError("edge_factor must be >= 1")
    if abs(a + b + c + d - 1.0) > 1e-9:
        raise ValueError("rmat probabilities must sum to 1")
    if min(a, b, c, d) < 0:
        raise ValueError("rmat probabilities must be non-negative")
    rng = random.Random(seed)
    n = 1 << scale
    m = edge_factor * n
    ab = a + b
    abc = a + b + c
    edges = []
    for _ in range(m):
        u = 0
        v = 0
        for _level in range(scale):
            r = rng.random()
            u <<= 1
            v <<= 1
            if r < a:
                pass
            elif r < ab:
                v |= 1
            elif r < abc:
                u |= 1
            else:
                u |= 1
                v |= 1
        w = _draw_weight(rng, wmin, wmax)
        if u == v and w == 0:
            w = 1
        edges.append((u, v, w))
    return build_csr(n, edges)


GENERATOR_KINDS = ("grid2d", "path", "rmat", "uniform")


def generate_graph(kind: str, seed: int = 0, **params) -> CsrGraph:
    """Dispatch to a named generator; every generator is seed-deterministic."""
    if kind == "grid2d":
        return generate_grid2d(seed=seed, **params)
    if kind == "path":
        return generate_path(seed=seed, **params)
    if kind == "rmat":
        return generate_rmat(seed=seed, **params)
    if kind == "uniform":
        return generate_random_uniform(seed=seed, **params)
    raise ValueError(f"unknown generator kind {kind!r}; expected one of {GENERATOR_KINDS}")


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------


def extract_features(graph: CsrGraph) -> GraphFeatures:
    """Compute the eight selector features in one pass over the CSR arrays."""
    n = graph.num_vertices
    nnz = graph.num_edges
    if n == 0:
        return GraphFeatures(0, 0, 0.0, 0, 0.0, 0.0, 0.0, 0)

    offsets = graph.row_offsets
    deg_sum = 0
    deg_sq = 0
    deg_max = 0
    for v in range(n):
        d = offsets[v + 1] - offsets[v]
        deg_sum += d
        deg_sq += d * d
        if d > deg_max:
            deg_max = d
    avg_nnz = deg_sum / n
    dev_nnz = math.sqrt(max(0.0, deg_sq / n - avg_nnz * avg_nnz))

    if nnz == 0:
        return GraphFeatures(n, 0, avg_nnz, deg_max, dev_nnz, 0.0, 0.0, 0)
    w_sum = 0
    w_sq = 0
    w_max = 0
    for w in graph.weights:
        w_sum += w
        w_sq += w * w
        if w > w_max:
            w_max = w
    avg_w = w_sum / nnz
    dev_w = math.sqrt(max(0.0, w_sq / nnz - avg_w * avg_w))
    return GraphFeatures(n, nnz, avg_nnz, deg_max, dev_nnz, avg_w, dev_w, w_max)
