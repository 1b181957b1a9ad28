import numpy as np
import pytest

from commprio import Graph


def random_graph(n, p, seed):
    """Erdos-Renyi helper used across test modules."""
    rng = np.random.default_rng(seed)
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    if not keep.any():
        keep[0] = True
    return Graph.from_edges(n, np.column_stack([iu[keep], iv[keep]]))


class TableModel:
    """Probability model backed by explicit lookup tables.

    Lets metric tests pin exact probabilities independent of any fitted
    model. Pair tables are keyed by (min(u,v), max(u,v)); membership tables
    by node. Missing entries fall back to the defaults.
    """

    def __init__(self, edge=None, memb=None, comm=None,
                 default_edge=0.0, default_memb=1.0, default_comm=0.0):
        self.edge = dict(edge or {})
        self.memb = dict(memb or {})
        self.comm = dict(comm or {})
        self.default_edge = default_edge
        self.default_memb = default_memb
        self.default_comm = default_comm

    def _pairwise(self, table, default, u, v):
        if np.ndim(u) or np.ndim(v):
            uu, vv = np.broadcast_arrays(np.asarray(u), np.asarray(v))
            flat = [
                table.get((min(int(a), int(b)), max(int(a), int(b))), default)
                for a, b in zip(uu.ravel(), vv.ravel())
            ]
            return np.array(flat, dtype=float).reshape(uu.shape)
        key = (min(int(u), int(v)), max(int(u), int(v)))
        return float(table.get(key, default))

    def edge_prob(self, u, v):
        return self._pairwise(self.edge, self.default_edge, u, v)

    def membership_prob(self, cid, u):
        if np.ndim(u):
            return np.array(
                [self.memb.get(int(a), self.default_memb) for a in np.asarray(u).ravel()],
                dtype=float,
            ).reshape(np.shape(u))
        return float(self.memb.get(int(u), self.default_memb))

    def community_edge_prob(self, cid, u, v):
        return self._pairwise(self.comm, self.default_comm, u, v)


@pytest.fixture
def two_cliques():
    """Two disjoint 15-cliques."""
    edges = []
    for base in (0, 15):
        for i in range(15):
            for j in range(i + 1, 15):
                edges.append((base + i, base + j))
    return Graph.from_edges(30, np.array(edges))
