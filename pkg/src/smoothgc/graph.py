"""Attributed graphs, low-pass filtering, convolution stacks and smoothness.

The propagation operator is the low-pass filter with frequency response
1 - lambda/2 over the symmetric-normalized Laplacian.  Filtering defaults to
the self-loop-augmented adjacency (A + I) so that degree-zero nodes keep a
well-defined normalization; the smoothness quadratic form always uses the raw
adjacency, with isolated nodes contributing identity-diagonal terms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


@dataclass
class AttributedGraph:
    """Undirected graph with one feature row per node.

    edges holds each undirected pair exactly once as (i, j) with i < j.
    """

    n: int
    m: int
    edges: np.ndarray            # (E, 2) int64, i < j, unique
    features: np.ndarray         # (n, m) float64
    labels: np.ndarray | None = None
    r: int | None = None
    dropped_self_loops: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def degrees(self) -> np.ndarray:
        """Raw degrees (no self-loops), one count per undirected neighbor."""
        d = np.zeros(self.n, dtype=np.float64)
        if self.n_edges:
            np.add.at(d, self.edges[:, 0], 1.0)
            np.add.at(d, self.edges[:, 1], 1.0)
        return d

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency as CSR."""
        if "adj" not in self._cache:
            if self.n_edges:
                i = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
                j = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
                data = np.ones(i.shape[0], dtype=np.float64)
            else:
                i = j = np.zeros(0, dtype=np.int64)
                data = np.zeros(0, dtype=np.float64)
            self._cache["adj"] = sp.csr_matrix((data, (i, j)), shape=(self.n, self.n))
        return self._cache["adj"]

    def propagation_matrix(self, self_loops: bool = True) -> sp.csr_matrix:
        """CSR matrix of the filter (I + D^-1/2 A D^-1/2) / 2.

        With self_loops the adjacency is augmented by the identity before
        normalization.  Isolated nodes (possible only without augmentation)
        get normalization weight zero, i.e. their rows act as I/2.
        """
        key = ("prop", self_loops)
        if key not in self._cache:
            adj = self.adjacency()
            if self_loops:
                adj = adj + sp.identity(self.n, format="csr")
            deg = np.asarray(adj.sum(axis=1)).ravel()
            inv_sqrt = np.zeros_like(deg)
            nz = deg > 0
            inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
            d = sp.diags(inv_sqrt)
            half = sp.identity(self.n, format="csr") + d @ adj @ d
            self._cache[key] = (half * 0.5).tocsr()
        return self._cache[key]


def build_graph(
    edges: Sequence[tuple[int, int]] | np.ndarray,
    features: np.ndarray,
    labels: Sequence[int] | None = None,
    r: int | None = None,
) -> AttributedGraph:
    """Validate and assemble an AttributedGraph.

    Duplicate edges (in either direction) are stored once; self-loops in the
    input are dropped and counted.  Endpoints must lie in [0, n) where n is
    the number of feature rows, and every feature must be finite.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {features.shape}")
    n, m = features.shape
    bad = ~np.isfinite(features)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(f"non-finite feature at row {i}, column {j}")

    edge_arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                          dtype=np.int64).reshape(-1, 2)
    if edge_arr.size and (edge_arr.min() < 0 or edge_arr.max() >= n):
        k = np.argwhere((edge_arr < 0) | (edge_arr >= n))[0][0]
        raise ValueError(
            f"edge endpoint out of range [0, {n}): {tuple(edge_arr[k])}"
        )
    loops = edge_arr[:, 0] == edge_arr[:, 1]
    dropped = int(loops.sum())
    if dropped:
        log.warning("dropped %d self-loop(s) at ingestion", dropped)
        edge_arr = edge_arr[~loops]
    lo = np.minimum(edge_arr[:, 0], edge_arr[:, 1])
    hi = np.maximum(edge_arr[:, 0], edge_arr[:, 1])
    canon = np.unique(np.stack([lo, hi], axis=1), axis=0) if edge_arr.size \
        else np.zeros((0, 2), dtype=np.int64)

    lab = None
    if labels is not None:
        lab = np.asarray(labels, dtype=np.int64)
        if lab.shape != (n,):
            raise ValueError(f"labels must have length {n}, got {lab.shape}")
        if r is None:
            r = int(len(np.unique(lab)))
    return AttributedGraph(n=n, m=m, edges=canon, features=features,
                           labels=lab, r=r, dropped_self_loops=dropped)


def apply_filter(graph: AttributedGraph, signals: np.ndarray,
                 self_loops: bool = True) -> np.ndarray:
    """One application of the low-pass propagation operator to n-row signals."""
    signals = np.asarray(signals, dtype=np.float64)
    squeeze = signals.ndim == 1
    if squeeze:
        signals = signals[:, None]
    if signals.shape[0] != graph.n:
        raise ValueError(
            f"signals have {signals.shape[0]} rows, expected {graph.n}"
        )
    out = graph.propagation_matrix(self_loops) @ signals
    return out[:, 0] if squeeze else out


@dataclass
class FilteredSignalStack:
    """Successive filtered copies of the feature matrix, layer k = G^k X."""

    max_order: int
    layers: list[np.ndarray]

    def layer(self, k: int) -> np.ndarray:
        """Layer for order k (1-based)."""
        if not 1 <= k <= len(self.layers):
            raise ValueError(f"order {k} outside stack range 1..{len(self.layers)}")
        return self.layers[k - 1]


def filtered_stack(graph: AttributedGraph, max_order: int,
                   self_loops: bool = True) -> FilteredSignalStack:
    """Compute layers G X, G^2 X, ..., G^M X by repeated sparse products."""
    if max_order < 1:
        raise ValueError(f"max_order must be >= 1, got {max_order}")
    prop = graph.propagation_matrix(self_loops)
    layers = []
    current = graph.features
    for _ in range(max_order):
        current = prop @ current
        layers.append(current)
    return FilteredSignalStack(max_order=max_order, layers=layers)


def stream_layers(graph: AttributedGraph, max_order: int,
                  self_loops: bool = True) -> Iterator[np.ndarray]:
    """Yield G^k X for k = 1..M without retaining earlier layers."""
    prop = graph.propagation_matrix(self_loops)
    current = graph.features
    for _ in range(max_order):
        current = prop @ current
        yield current


class LayerSource:
    """Uniform access to convolution layers for the sensor and fusion.

    Backed either by an eager FilteredSignalStack or by on-the-fly
    recomputation when the full stack would exceed the memory budget.
    """

    def __init__(self, graph: AttributedGraph, max_order: int,
                 self_loops: bool = True, memory_budget_mb: float = 6144.0,
                 prebuilt: FilteredSignalStack | None = None):
        self.graph = graph
        self.max_order = max_order
        self.self_loops = self_loops
        if prebuilt is not None:
            if prebuilt.max_order < max_order:
                raise ValueError(
                    f"prebuilt stack has {prebuilt.max_order} layers, need {max_order}"
                )
            self.streaming = False
            self._stack = prebuilt
            return
        est_mb = max_order * graph.n * graph.m * 8 / 2**20
        self.streaming = est_mb > memory_budget_mb
        self._stack: FilteredSignalStack | None = None
        if not self.streaming:
            self._stack = filtered_stack(graph, max_order, self_loops)

    def iter_layers(self) -> Iterator[np.ndarray]:
        if self._stack is not None:
            yield from self._stack.layers
        else:
            yield from stream_layers(self.graph, self.max_order, self.self_loops)

    def layer(self, k: int) -> np.ndarray:
        if self._stack is not None:
            return self._stack.layer(k)
        if not 1 <= k <= self.max_order:
            raise ValueError(f"order {k} outside range 1..{self.max_order}")
        out = self.graph.features
        for lay in stream_layers(self.graph, k, self.self_loops):
            out = lay
        return out


def _analysis_scaled(graph: AttributedGraph, signal: np.ndarray) -> np.ndarray:
    """D^-1/2 f with the raw-adjacency degrees; zero weight on isolated nodes."""
    d = graph.degrees()
    scale = np.zeros_like(d)
    nz = d > 0
    scale[nz] = 1.0 / np.sqrt(d[nz])
    return scale * signal


def smoothness(graph: AttributedGraph, signal: np.ndarray) -> float:
    """Quadratic-form smoothness f' L_s f on the raw (non-augmented) graph.

    Equals half the degree-normalized squared disagreement summed over both
    directions of every edge; isolated nodes contribute f_i^2.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape != (graph.n,):
        raise ValueError(f"signal must have shape ({graph.n},), got {signal.shape}")
    if not np.all(np.isfinite(signal)):
        raise ValueError("signal contains non-finite values")
    t = _analysis_scaled(graph, signal)
    return float(signal @ signal - t @ (graph.adjacency() @ t))


def normalized_smoothness(graph: AttributedGraph, signal: np.ndarray) -> float:
    """Smoothness of the unit-normalized signal; scale invariant by construction."""
    signal = np.asarray(signal, dtype=np.float64)
    norm = np.linalg.norm(signal)
    if norm == 0.0:
        raise ValueError("zero signal: normalized smoothness is undefined")
    return smoothness(graph, signal / norm)
