"""Dataset ingestion, synthetic generators, and run-report serialization.

Citation-network files come as a tab-separated `.content` file (node id,
feature values, label) and a `.cites` file (pairs of node ids).  Reports are
single JSON documents with deterministic, full-precision serialization;
wall-clock timings go to a sidecar file so reports from identical runs are
byte-identical.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig, read_config  # noqa: F401  (re-exported surface)
from .errors import DataFormatError
from .graph import AttributedGraph, build_graph

log = logging.getLogger(__name__)

REPORT_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a over a byte string."""
    h = _FNV_OFFSET
    for b in memoryview(data):
        h = ((h ^ b) * _FNV_PRIME) & _U64
    return h


def dataset_fingerprint(graph: AttributedGraph) -> str:
    """FNV-1a over the canonicalized graph content, for provenance only."""
    if "fingerprint" not in graph._cache:
        h = _FNV_OFFSET
        for chunk in (
            f"n={graph.n};m={graph.m};r={graph.r}".encode(),
            np.ascontiguousarray(graph.edges).tobytes(),
            np.ascontiguousarray(graph.features).tobytes(),
            b"" if graph.labels is None
            else np.ascontiguousarray(graph.labels).tobytes(),
        ):
            for b in memoryview(chunk):
                h = ((h ^ b) * _FNV_PRIME) & _U64
        graph._cache["fingerprint"] = f"{h:016x}"
    return graph._cache["fingerprint"]


def dataset_summary(graph: AttributedGraph) -> dict:
    return {
        "n": graph.n,
        "edges": graph.n_edges,
        "m": graph.m,
        "r": graph.r,
        "fingerprint": dataset_fingerprint(graph),
    }


# ---------------------------------------------------------------------------
# Citation-network loader
# ---------------------------------------------------------------------------

def load_citation_dataset(content_path, cites_path,
                          row_normalize: bool = False) -> AttributedGraph:
    """Load `.content` / `.cites` files into an AttributedGraph.

    Node ids are mapped to dense indices in first-appearance order, citation
    direction is discarded, edges naming unknown ids are dropped (counted),
    and label strings are factorized to 0..r-1 in sorted order.
    """
    index: dict[str, int] = {}
    rows: list[np.ndarray] = []
    label_strings: list[str] = []
    arity = None
    with open(content_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise DataFormatError(
                    f"{content_path}:{lineno}: expected id, features and label, "
                    f"got {len(parts)} field(s)"
                )
            node_id, feats, label = parts[0], parts[1:-1], parts[-1]
            if node_id in index:
                raise DataFormatError(f"{content_path}:{lineno}: duplicate id {node_id!r}")
            if arity is None:
                arity = len(feats)
            elif len(feats) != arity:
                raise DataFormatError(
                    f"{content_path}:{lineno}: {len(feats)} features, expected {arity}"
                )
            try:
                values = np.array([float(v) for v in feats], dtype=np.float64)
            except ValueError as exc:
                raise DataFormatError(f"{content_path}:{lineno}: {exc}") from None
            index[node_id] = len(rows)
            rows.append(values)
            label_strings.append(label)
    if not rows:
        raise DataFormatError(f"{content_path}: no content lines")

    classes = sorted(set(label_strings))
    class_index = {c: k for k, c in enumerate(classes)}
    labels = np.array([class_index[s] for s in label_strings], dtype=np.int64)

    edges: list[tuple[int, int]] = []
    dropped_unknown = 0
    with open(cites_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 2:
                raise DataFormatError(
                    f"{cites_path}:{lineno}: expected two ids, got {len(parts)}"
                )
            a, b = parts
            if a not in index or b not in index:
                dropped_unknown += 1
                continue
            edges.append((index[a], index[b]))
    if dropped_unknown:
        log.warning("dropped %d citation(s) referencing unknown ids", dropped_unknown)

    features = np.vstack(rows)
    if row_normalize:
        sums = np.abs(features).sum(axis=1, keepdims=True)
        sums[sums == 0] = 1.0
        features = features / sums
    graph = build_graph(edges, features, labels=labels)
    graph._cache["dropped_unknown_citations"] = dropped_unknown
    return graph


def write_citation_dataset(graph: AttributedGraph, content_path, cites_path) -> None:
    """Write a graph back out in the `.content` / `.cites` format."""
    with open(content_path, "w", encoding="utf-8") as fh:
        for i in range(graph.n):
            feats = "\t".join(repr(float(v)) for v in graph.features[i])
            label = f"c{graph.labels[i]}" if graph.labels is not None else "c0"
            fh.write(f"v{i}\t{feats}\t{label}\n")
    with open(cites_path, "w", encoding="utf-8") as fh:
        for a, b in graph.edges:
            fh.write(f"v{a}\tv{b}\n")


# ---------------------------------------------------------------------------
# Synthetic graphs
# ---------------------------------------------------------------------------

def generate_sbm(block_sizes, p_in: float, p_out: float, feature_dim: int,
                 feature_signal: float, seed: int) -> AttributedGraph:
    """Stochastic block model with block-indicator features plus unit noise.

    Labels are the block ids; feature column (block mod feature_dim) carries
    the indicator scaled by feature_signal, so feature_signal = 0 yields pure
    noise.
    """
    if not 0.0 <= p_out <= p_in <= 1.0:
        raise ValueError(f"need 0 <= p_out <= p_in <= 1, got {p_out}, {p_in}")
    if feature_dim < 1:
        raise ValueError(f"feature_dim must be >= 1, got {feature_dim}")
    block_sizes = [int(s) for s in block_sizes]
    n = sum(block_sizes)
    blocks = np.repeat(np.arange(len(block_sizes)), block_sizes)
    rng = np.random.default_rng(seed)

    same = blocks[:, None] == blocks[None, :]
    prob = np.where(same, p_in, p_out)
    draw = rng.random((n, n))
    upper = np.triu(draw < prob, k=1)
    edges = np.argwhere(upper)

    features = rng.standard_normal((n, feature_dim))
    features[np.arange(n), blocks % feature_dim] += feature_signal
    return build_graph(edges, features, labels=blocks)


def two_clique_fixture(size: int = 10) -> AttributedGraph:
    """Two disjoint cliques with exactly orthogonal block-indicator features."""
    edges = []
    for base in (0, size):
        for i in range(size):
            for j in range(i + 1, size):
                edges.append((base + i, base + j))
    features = np.zeros((2 * size, 2))
    features[:size, 0] = 1.0
    features[size:, 1] = 1.0
    labels = np.array([0] * size + [1] * size)
    return build_graph(edges, features, labels=labels)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    """Self-contained record of one pipeline run.

    Rerunning from the echoed config reproduces the traces bit for bit at
    the recorded worker count; timings are serialized to a sidecar file so
    the report itself is byte-identical across identical runs.
    """

    mode: str
    config: dict
    dataset: dict
    seed: int
    workers: int
    epochs: list[dict]
    final: dict
    orders: list[int]
    stopped_early: bool
    n_epochs: int
    timings: dict = field(default_factory=dict)
    assignments: list[int] = field(default_factory=list)
    report_version: int = REPORT_VERSION

    def order_histogram(self) -> list[list[int]]:
        if not self.orders:
            return []
        vals, counts = np.unique(np.asarray(self.orders), return_counts=True)
        return [[int(v), int(c)] for v, c in zip(vals, counts)]

    def to_json_dict(self) -> dict:
        return {
            "report_version": self.report_version,
            "mode": self.mode,
            "config": self.config,
            "dataset": self.dataset,
            "seed": self.seed,
            "workers": self.workers,
            "epochs": self.epochs,
            "final": self.final,
            "orders": self.orders,
            "order_histogram": self.order_histogram(),
            "stopped_early": self.stopped_early,
            "n_epochs": self.n_epochs,
            "assignments": self.assignments,
        }


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_report(report: RunReport, path) -> None:
    """Serialize a report to canonical JSON plus a timing sidecar."""
    _atomic_write(path, json.dumps(report.to_json_dict(), sort_keys=True, indent=2))
    sidecar = f"{path}.timings.json"
    _atomic_write(sidecar, json.dumps(report.timings, sort_keys=True, indent=2))


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("report_version") != REPORT_VERSION:
        raise DataFormatError(
            f"{path}: not a report (missing report_version={REPORT_VERSION})"
        )
    return doc


# ---------------------------------------------------------------------------
# Delimited outputs
# ---------------------------------------------------------------------------

def write_matrix_csv(matrix: np.ndarray, path, prefix: str = "col") -> None:
    """Comma-separated matrix with a header row and full-precision decimals."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    header = ",".join(f"{prefix}{j}" for j in range(matrix.shape[1]))
    lines = [header]
    for row in matrix:
        lines.append(",".join(repr(float(v)) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_assignments_csv(assignments, path) -> None:
    lines = ["node,cluster"]
    for i, c in enumerate(assignments):
        lines.append(f"{i},{int(c)}")
    _atomic_write(path, "\n".join(lines) + "\n")


def read_assignments_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "node,cluster":
        raise DataFormatError(f"{path}: expected a 'node,cluster' header")
    pairs = []
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            node, clus = ln.split(",")
            pairs.append((int(node), int(clus)))
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: bad row {ln!r}") from None
    pairs.sort()
    return np.array([c for _, c in pairs], dtype=np.int64)


def write_histogram_csv(pairs: list, path) -> None:
    lines = ["order,count"]
    for order, count in pairs:
        lines.append(f"{int(order)},{int(count)}")
    _atomic_write(path, "\n".join(lines) + "\n")
