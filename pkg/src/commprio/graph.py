"""Immutable undirected graph, edge-list ingestion, covers, and cut counts.

Node labels are arbitrary strings mapped to dense indices in first-appearance
order; all computation runs on the dense indices. Graphs are simple and
unweighted: self-loops and duplicate edges are dropped on ingestion, and an
optional weight column in edge lists is accepted but ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (
    EmptyInputError,
    InputMismatchError,
    InvalidPairError,
    ParseError,
)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph over dense node indices 0..n-1.

    Stored as CSR with per-node sorted neighbor lists. Instances are
    immutable after construction and safe for concurrent readers.
    """

    n: int
    m: int
    labels: tuple[str, ...]
    indptr: np.ndarray
    indices: np.ndarray
    degrees: np.ndarray
    label_index: dict = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges, labels=None) -> "Graph":
        """Build a graph from (u, v) index pairs.

        Self-loops and duplicates are dropped silently here; use
        load_edge_list when the drop counts matter.
        """
        cleaned, _, _ = _clean_edges(n, edges)
        return _build(n, cleaned, labels)

    def neighbors(self, u: int) -> np.ndarray:
        """Sorted neighbor indices of u (a view, do not mutate)."""
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = int(np.searchsorted(row, v))
        return i < row.size and int(row[i]) == v

    def edge_array(self) -> tuple[np.ndarray, np.ndarray]:
        """All edges once as (us, vs) with us < vs elementwise."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        keep = rows < self.indices
        return rows[keep], self.indices[keep]


@dataclass(frozen=True)
class LoadReport:
    """What load_edge_list dropped while cleaning."""

    lines: int
    self_loops_dropped: int
    duplicates_dropped: int


def _clean_edges(n: int, edges) -> tuple[np.ndarray, int, int]:
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        raise EmptyInputError("no edges")
    arr = arr.reshape(-1, 2)
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    proper = lo != hi
    n_self = int((~proper).sum())
    keys = lo[proper] * np.int64(n) + hi[proper]
    uniq = np.unique(keys)
    n_dup = int(keys.size - uniq.size)
    if uniq.size == 0:
        raise EmptyInputError("no edges left after dropping self-loops and duplicates")
    out = np.empty((uniq.size, 2), dtype=np.int64)
    out[:, 0] = uniq // n
    out[:, 1] = uniq % n
    return out, n_self, n_dup


def _build(n: int, edges: np.ndarray, labels=None) -> Graph:
    if labels is None:
        labels = tuple(str(i) for i in range(n))
    else:
        labels = tuple(labels)
        if len(labels) != n:
            raise InputMismatchError(f"{len(labels)} labels for {n} nodes")
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    degrees = np.bincount(src, minlength=n).astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    order = np.lexsort((dst, src))
    indices = dst[order]
    return Graph(
        n=n,
        m=int(edges.shape[0]),
        labels=labels,
        indptr=indptr,
        indices=indices,
        degrees=degrees,
        label_index={lab: i for i, lab in enumerate(labels)},
    )


def load_edge_list(lines: Iterable[str]) -> tuple[Graph, LoadReport]:
    """Parse an edge-list text into a Graph.

    Each non-comment line holds two whitespace-separated node labels; a
    third (weight) field is accepted and ignored. Lines starting with '#'
    are comments; blank lines are skipped. Labels get dense indices in
    first-appearance order.

    Returns the graph together with a LoadReport of dropped self-loops and
    deduplicated edges.

    Raises ParseError (with line number) on a line with fewer than two
    fields and EmptyInputError when no edges survive cleaning.
    """
    label_index: dict[str, int] = {}
    us: list[int] = []
    vs: list[int] = []
    n_lines = 0
    for ln, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        n_lines += 1
        parts = line.split()
        if len(parts) < 2:
            raise ParseError(f"line {ln}: expected two node labels, got {len(parts)}")
        pair = []
        for lab in parts[:2]:
            idx = label_index.get(lab)
            if idx is None:
                idx = len(label_index)
                label_index[lab] = idx
            pair.append(idx)
        us.append(pair[0])
        vs.append(pair[1])
    if not us:
        raise EmptyInputError("edge list contains no edges")
    n = len(label_index)
    edges, n_self, n_dup = _clean_edges(n, np.column_stack([us, vs]))
    graph = _build(n, edges, labels=tuple(label_index))
    return graph, LoadReport(lines=n_lines, self_loops_dropped=n_self, duplicates_dropped=n_dup)


def read_edge_list(path) -> tuple[Graph, LoadReport]:
    with open(path, "r", encoding="utf-8") as fh:
        return load_edge_list(fh)


def pair_background_rate(g: Graph, u: int, v: int) -> float:
    """Configuration-model edge propensity k_u * k_v / (2m) for u != v."""
    if u == v:
        raise InvalidPairError(f"pair rate undefined for u == v == {u}")
    return float(g.degrees[u]) * float(g.degrees[v]) / (2.0 * g.m)


def in_sorted(sorted_arr: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Boolean membership of values in a sorted unique array."""
    if sorted_arr.size == 0:
        return np.zeros(np.shape(values), dtype=bool)
    pos = np.minimum(np.searchsorted(sorted_arr, values), sorted_arr.size - 1)
    return sorted_arr[pos] == values


def cut_counts(g: Graph, members) -> tuple[int, int]:
    """Internal and boundary edge counts of a node set.

    Internal edges have both endpoints in the set, boundary edges exactly
    one. Runs in time proportional to the summed degrees of the members.
    """
    mem = np.asarray(members, dtype=np.int64)
    if mem.size == 0:
        return 0, 0
    nbrs = np.concatenate([g.neighbors(int(u)) for u in mem]) if mem.size else np.empty(0, np.int64)
    if nbrs.size == 0:
        return 0, 0
    inside = in_sorted(np.sort(mem), nbrs)
    internal_twice = int(inside.sum())
    return internal_twice // 2, int(nbrs.size - internal_twice)


@dataclass(eq=False)
class Cover:
    """A set of detected communities; membership may overlap.

    Each community is a sorted array of node indices. ``model_ids`` maps a
    community's dense position to the id its originating model uses (e.g.
    the affiliation column it was extracted from); None means identity.
    """

    communities: list[np.ndarray]
    model_ids: np.ndarray | None = None

    def __post_init__(self):
        norm = []
        for i, c in enumerate(self.communities):
            arr = np.unique(np.asarray(c, dtype=np.int64))
            if arr.size == 0:
                raise EmptyInputError(f"community {i} is empty")
            norm.append(arr)
        self.communities = norm

    def __len__(self) -> int:
        return len(self.communities)

    def sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.communities], dtype=np.int64)

    def model_id(self, i: int) -> int:
        return int(self.model_ids[i]) if self.model_ids is not None else i


def parse_cover(lines: Iterable[str], g: Graph) -> Cover:
    """Read `community_id<TAB>label1 label2 ...` lines against g's labels."""
    communities: list[np.ndarray] = []
    for ln, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        if "\t" not in line:
            raise ParseError(f"line {ln}: expected 'id<TAB>label ...'")
        _, _, rest = line.partition("\t")
        labels = rest.split()
        if not labels:
            raise ParseError(f"line {ln}: community has no members")
        idx = []
        for lab in labels:
            i = g.label_index.get(lab)
            if i is None:
                raise InputMismatchError(f"line {ln}: label {lab!r} not present in the edge list")
            idx.append(i)
        communities.append(np.array(idx, dtype=np.int64))
    if not communities:
        raise EmptyInputError("cover file contains no communities")
    return Cover(communities)


def format_cover(cover: Cover, labels) -> str:
    out = []
    for cid, members in enumerate(cover.communities):
        out.append(f"{cid}\t" + " ".join(labels[int(u)] for u in members))
    return "\n".join(out) + "\n"


def read_cover(path, g: Graph) -> Cover:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_cover(fh, g)
