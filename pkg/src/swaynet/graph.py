"""Directed weighted graphs with interned node ids and array adjacency.

Edges point from the retweeted user (creator) to the retweeter (consumer),
i.e. along the direction of information flow. Multiplicity is carried by
the integer edge weight; self-loops are allowed, multi-edges are not.
Graphs are immutable after construction, so every query is safe to share
across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .events import RetweetEvent

_BINARY_MAGIC = b"SWGB"
_BINARY_VERSION = 1


class WeightedDigraph:
    """Immutable directed weighted graph over interned string node ids."""

    __slots__ = (
        "labels",
        "_index",
        "edge_src",
        "edge_dst",
        "edge_weight",
        "_out_ptr",
        "_in_ptr",
        "_in_order",
        "_k_out",
        "_k_in",
        "_s_out",
        "_s_in",
    )

    def __init__(self, labels: Sequence[str], src: np.ndarray, dst: np.ndarray, weight: np.ndarray):
        # Canonical edge order: sorted by (src, dst). Inputs must be deduplicated.
        order = np.lexsort((dst, src))
        self.labels: tuple[str, ...] = tuple(labels)
        self._index = {label: i for i, label in enumerate(self.labels)}
        self.edge_src = np.ascontiguousarray(src[order], dtype=np.int64)
        self.edge_dst = np.ascontiguousarray(dst[order], dtype=np.int64)
        self.edge_weight = np.ascontiguousarray(weight[order], dtype=np.int64)
        if np.any(self.edge_weight <= 0):
            raise ValueError("edge weights must be positive")
        n = len(self.labels)
        self._out_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.edge_src, minlength=n), out=self._out_ptr[1:])
        self._in_order = np.lexsort((self.edge_src, self.edge_dst))
        self._in_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.edge_dst, minlength=n), out=self._in_ptr[1:])
        self._k_out = np.diff(self._out_ptr)
        self._k_in = np.diff(self._in_ptr)
        self._s_out = np.bincount(self.edge_src, weights=self.edge_weight, minlength=n).astype(np.int64)
        self._s_in = np.bincount(self.edge_dst, weights=self.edge_weight, minlength=n).astype(np.int64)

    @classmethod
    def from_weighted_edges(cls, items: Iterable[tuple[str, str, int]]) -> "WeightedDigraph":
        """Build from (src, dst, weight) triples; repeated pairs accumulate."""
        weights: dict[tuple[str, str], int] = {}
        labels: list[str] = []
        index: dict[str, int] = {}
        for src, dst, w in items:
            if w <= 0:
                raise ValueError(f"non-positive weight {w} on edge ({src!r}, {dst!r})")
            for u in (src, dst):
                if u not in index:
                    index[u] = len(labels)
                    labels.append(u)
            weights[(src, dst)] = weights.get((src, dst), 0) + int(w)
        src_idx = np.fromiter((index[s] for s, _ in weights), dtype=np.int64, count=len(weights))
        dst_idx = np.fromiter((index[d] for _, d in weights), dtype=np.int64, count=len(weights))
        w_arr = np.fromiter(weights.values(), dtype=np.int64, count=len(weights))
        return cls(labels, src_idx, dst_idx, w_arr)

    @classmethod
    def from_index_arrays(cls, labels: Sequence[str], src: np.ndarray, dst: np.ndarray, weight: np.ndarray) -> "WeightedDigraph":
        """Build from pre-interned index arrays (pairs must be unique)."""
        return cls(labels, np.asarray(src), np.asarray(dst), np.asarray(weight))

    # -- basic queries ------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def n_edges(self) -> int:
        return len(self.edge_weight)

    @property
    def total_weight(self) -> int:
        return int(self.edge_weight.sum())

    def index_of(self, label: str) -> int:
        return self._index[label]

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def edges(self) -> Iterator[tuple[str, str, int]]:
        for s, d, w in zip(self.edge_src, self.edge_dst, self.edge_weight):
            yield self.labels[s], self.labels[d], int(w)

    def edge_set(self) -> set[tuple[str, str]]:
        return {(self.labels[s], self.labels[d]) for s, d in zip(self.edge_src, self.edge_dst)}

    def weight_of(self, src: str, dst: str) -> int:
        s = self._index[src]
        lo, hi = self._out_ptr[s], self._out_ptr[s + 1]
        d = self._index[dst]
        pos = lo + np.searchsorted(self.edge_dst[lo:hi], d)
        if pos < hi and self.edge_dst[pos] == d:
            return int(self.edge_weight[pos])
        return 0

    def out_edge_range(self, node_idx: int) -> tuple[int, int]:
        return int(self._out_ptr[node_idx]), int(self._out_ptr[node_idx + 1])

    def in_edge_ids(self, node_idx: int) -> np.ndarray:
        lo, hi = self._in_ptr[node_idx], self._in_ptr[node_idx + 1]
        return self._in_order[lo:hi]

    @property
    def k_out(self) -> np.ndarray:
        return self._k_out

    @property
    def k_in(self) -> np.ndarray:
        return self._k_in

    @property
    def s_out(self) -> np.ndarray:
        return self._s_out

    @property
    def s_in(self) -> np.ndarray:
        return self._s_in

    # -- derived graphs -----------------------------------------------------

    def subgraph_from_edge_mask(self, mask: np.ndarray) -> "WeightedDigraph":
        """Keep the masked edges, then drop nodes left without any edge."""
        src = self.edge_src[mask]
        dst = self.edge_dst[mask]
        w = self.edge_weight[mask]
        keep = np.zeros(self.n_nodes, dtype=bool)
        keep[src] = True
        keep[dst] = True
        remap = np.cumsum(keep) - 1
        labels = [self.labels[i] for i in np.flatnonzero(keep)]
        return WeightedDigraph(labels, remap[src], remap[dst], w)


@dataclass(frozen=True)
class Degrees:
    """Per-node in/out degree (distinct neighbours) and strength (weight sums)."""

    labels: tuple[str, ...]
    k_in: np.ndarray
    k_out: np.ndarray
    s_in: np.ndarray
    s_out: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_idx", {label: i for i, label in enumerate(self.labels)})

    def of(self, label: str) -> tuple[int, int, int, int]:
        i = self._idx[label]
        return int(self.k_in[i]), int(self.k_out[i]), int(self.s_in[i]), int(self.s_out[i])


@dataclass(frozen=True)
class PartitionReport:
    """Creator/consumer split plus cross-component retweet weight fractions."""

    creators_only: frozenset[str]
    consumers_only: frozenset[str]
    both: frozenset[str]
    cross_weight_fractions: dict[tuple[str, str], float]

    def node_fractions(self) -> dict[str, float]:
        total = len(self.creators_only) + len(self.consumers_only) + len(self.both)
        if total == 0:
            return {"creators_only": 0.0, "consumers_only": 0.0, "both": 0.0}
        return {
            "creators_only": len(self.creators_only) / total,
            "consumers_only": len(self.consumers_only) / total,
            "both": len(self.both) / total,
        }


def build_network(
    events: Iterable[RetweetEvent],
    time_range: tuple[int, int] | None = None,
    class_filter: str | None = None,
) -> WeightedDigraph:
    """Aggregate events into a weighted digraph, one edge per (src, dst) pair.

    time_range is half-open [start, end); class_filter keeps only events of
    one content class. The sum of edge weights equals the number of
    retained events, and nodes are exactly the endpoints of those events.
    """
    weights: dict[tuple[str, str], int] = {}
    labels: list[str] = []
    index: dict[str, int] = {}
    for e in events:
        if time_range is not None and not (time_range[0] <= e.timestamp < time_range[1]):
            continue
        if class_filter is not None and e.content_class != class_filter:
            continue
        key = (e.retweetee, e.retweeter)
        if key in weights:
            weights[key] += 1
        else:
            weights[key] = 1
            for u in key:
                if u not in index:
                    index[u] = len(labels)
                    labels.append(u)
    n_e = len(weights)
    src = np.fromiter((index[s] for s, _ in weights), dtype=np.int64, count=n_e)
    dst = np.fromiter((index[d] for _, d in weights), dtype=np.int64, count=n_e)
    w = np.fromiter(weights.values(), dtype=np.int64, count=n_e)
    return WeightedDigraph(labels, src, dst, w)


def node_degrees(g: WeightedDigraph) -> Degrees:
    """Degrees count distinct neighbours; strengths sum incident weights.

    A self-loop contributes to both the in- and out-degree of its node.
    """
    return Degrees(g.labels, g.k_in.copy(), g.k_out.copy(), g.s_in.copy(), g.s_out.copy())


def creator_consumer_partition(g: WeightedDigraph) -> PartitionReport:
    """Split nodes by role and measure retweet flow between the components."""
    has_out = g.k_out > 0
    has_in = g.k_in > 0
    labels = np.asarray(g.labels, dtype=object)
    creators = frozenset(labels[has_out & ~has_in])
    consumers = frozenset(labels[~has_out & has_in])
    both = frozenset(labels[has_out & has_in])

    comp = np.where(has_out & has_in, 2, np.where(has_out, 0, 1)).astype(np.int8)
    names = ("creators_only", "consumers_only", "both")
    total = g.edge_weight.sum()
    fractions: dict[tuple[str, str], float] = {}
    if total > 0:
        pair_code = comp[g.edge_src] * 3 + comp[g.edge_dst]
        sums = np.bincount(pair_code, weights=g.edge_weight, minlength=9)
        for code, s in enumerate(sums):
            if s > 0:
                fractions[(names[code // 3], names[code % 3])] = float(s / total)
    return PartitionReport(creators, consumers, both, fractions)


def strongly_connected_components(g: WeightedDigraph) -> list[frozenset[str]]:
    """Tarjan's algorithm (iterative), components sorted by size descending.

    Linear in nodes + edges; ties in size break on the smallest member index
    so output order is deterministic.
    """
    n = g.n_nodes
    out_ptr = g._out_ptr
    edge_dst = g.edge_dst
    index = np.full(n, -1, dtype=np.int64)
    lowlink = np.zeros(n, dtype=np.int64)
    on_stack = np.zeros(n, dtype=bool)
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0

    for root in range(n):
        if index[root] != -1:
            continue
        # Explicit DFS frames: (node, next out-edge position).
        work: list[list[int]] = [[root, int(out_ptr[root])]]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < out_ptr[v + 1]:
                work[-1][1] += 1
                w = int(edge_dst[pos])
                if index[w] == -1:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append([w, int(out_ptr[w])])
                elif on_stack[w]:
                    if index[w] < lowlink[v]:
                        lowlink[v] = index[w]
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    if lowlink[v] < lowlink[parent]:
                        lowlink[parent] = lowlink[v]
                if lowlink[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    comps.append(comp)

    comps.sort(key=lambda c: (-len(c), min(c)))
    return [frozenset(g.labels[i] for i in comp) for comp in comps]


def reachable_set(g: WeightedDigraph, sources: Iterable[str]) -> set[str]:
    """All nodes with a directed path from some source (sources included)."""
    todo: list[int] = []
    seen = np.zeros(g.n_nodes, dtype=bool)
    for label in sources:
        if label not in g._index:
            raise KeyError(f"unknown source node: {label!r}")
        i = g._index[label]
        if not seen[i]:
            seen[i] = True
            todo.append(i)
    out_ptr = g._out_ptr
    edge_dst = g.edge_dst
    while todo:
        v = todo.pop()
        for pos in range(out_ptr[v], out_ptr[v + 1]):
            w = int(edge_dst[pos])
            if not seen[w]:
                seen[w] = True
                todo.append(w)
    return {g.labels[i] for i in np.flatnonzero(seen)}


def reverse_reachable_set(g: WeightedDigraph, targets: Iterable[str]) -> set[str]:
    """All nodes from which some target is reachable (targets included)."""
    todo: list[int] = []
    seen = np.zeros(g.n_nodes, dtype=bool)
    for label in targets:
        if label not in g._index:
            raise KeyError(f"unknown target node: {label!r}")
        i = g._index[label]
        if not seen[i]:
            seen[i] = True
            todo.append(i)
    edge_src = g.edge_src
    while todo:
        v = todo.pop()
        for eid in g.in_edge_ids(v):
            w = int(edge_src[eid])
            if not seen[w]:
                seen[w] = True
                todo.append(w)
    return {g.labels[i] for i in np.flatnonzero(seen)}


# -- serialization ----------------------------------------------------------


def save_binary(g: WeightedDigraph, path: str) -> None:
    """Binary edge list: header (counts, version), node table, edge triples."""
    if g.n_nodes >= 1 << 32:
        raise ValueError("binary format limited to < 2^32 nodes")
    with open(path, "wb") as fh:
        fh.write(_BINARY_MAGIC)
        fh.write(struct.pack("<HQQ", _BINARY_VERSION, g.n_nodes, g.n_edges))
        for label in g.labels:
            data = label.encode("utf-8")
            if len(data) >= 1 << 16:
                raise ValueError(f"node label too long: {label[:32]!r}...")
            fh.write(struct.pack("<H", len(data)))
            fh.write(data)
        fh.write(g.edge_src.astype("<u4").tobytes())
        fh.write(g.edge_dst.astype("<u4").tobytes())
        fh.write(g.edge_weight.astype("<u8").tobytes())


def load_binary(path: str) -> WeightedDigraph:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _BINARY_MAGIC:
            raise ValueError(f"not a graph file: bad magic {magic!r}")
        version, n_nodes, n_edges = struct.unpack("<HQQ", fh.read(18))
        if version != _BINARY_VERSION:
            raise ValueError(f"unsupported graph format version {version}")
        labels = []
        for _ in range(n_nodes):
            (ln,) = struct.unpack("<H", fh.read(2))
            labels.append(fh.read(ln).decode("utf-8"))
        src = np.frombuffer(fh.read(4 * n_edges), dtype="<u4").astype(np.int64)
        dst = np.frombuffer(fh.read(4 * n_edges), dtype="<u4").astype(np.int64)
        w = np.frombuffer(fh.read(8 * n_edges), dtype="<u8").astype(np.int64)
    return WeightedDigraph(labels, src, dst, w)


def write_edges_csv(g: WeightedDigraph, handle) -> None:
    handle.write("src,dst,weight\n")
    for s, d, w in g.edges():
        handle.write(f"{s},{d},{w}\n")
