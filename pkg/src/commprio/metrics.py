"""Per-community structural features and prioritization metrics.

Each feature is the geometric mean of its probability factors, evaluated at
alpha = 0 and at a small perturbation alpha0; the pair folds into a single
score f0 / (1 + |f0 - f_alpha|), which rewards features that are both large
and stable under rewiring. Baseline community scoring functions used for
comparison live here too.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCommunityError, InvalidParameterError
from .graph import Cover, Graph, cut_counts, in_sorted
from .models import (
    check_alpha,
    perturbed_community_edge_prob,
    perturbed_edge_prob,
)
from .rng import substream
from .util import fmt_float

PROB_FLOOR = 1e-300
CORE_METRICS = ("likelihood", "density", "boundary", "allegiance")
BASELINE_KINDS = (
    "conductance",
    "modularity",
    "cut-ratio",
    "tpr",
    "fomd",
    "flake-odf",
    "size",
    "random",
)


@dataclass(frozen=True, eq=False)
class CommunityRef:
    """A community under evaluation: dense cover id plus sorted members.

    model_id is the id the probability model knows this community by
    (differs from id for covers extracted from a fitted model).
    """

    id: int
    members: np.ndarray
    model_id: int = -1

    def resolved_model_id(self) -> int:
        return self.model_id if self.model_id >= 0 else self.id


def _pair_adjacency(g: Graph, members: np.ndarray) -> np.ndarray:
    s = members.size
    adj = np.zeros((s, s), dtype=bool)
    for i, u in enumerate(members):
        nb = g.neighbors(int(u))
        pos = np.searchsorted(members, nb)
        ok = (pos < s) & (members[np.minimum(pos, s - 1)] == nb)
        adj[i, pos[ok]] = True
    return adj


def _member_neighbors(g: Graph, members: np.ndarray):
    """(owner position, neighbor) arrays covering every incident edge end."""
    degs = g.degrees[members]
    owners = np.repeat(np.arange(members.size), degs)
    if members.size == 0 or int(degs.sum()) == 0:
        return owners[:0], np.empty(0, dtype=np.int64)
    nbrs = np.concatenate([g.neighbors(int(u)) for u in members])
    return owners, nbrs


def _geometric_mean(factors: np.ndarray) -> float:
    return float(np.exp(np.mean(np.log(np.maximum(factors, PROB_FLOOR)))))


def likelihood_feature(model, g: Graph, c: CommunityRef, alpha: float) -> float:
    """Geometric mean of membership factors and pairwise (non-)edge factors.

    Every member contributes p_C(u); every unordered member pair u < v
    contributes p_C(v) * p_C(u,v|alpha) on an edge and
    p_C(v) * (1 - p_C(u,v|alpha)) on a non-edge.
    """
    members = c.members
    s = members.size
    if s < 2:
        raise DegenerateCommunityError(f"community {c.id} has fewer than 2 members")
    mid = c.resolved_model_id()
    pm = np.asarray(model.membership_prob(mid, members), dtype=float)
    iu, iv = np.triu_indices(s, k=1)
    q = np.asarray(
        perturbed_community_edge_prob(model, g, mid, members[iu], members[iv], alpha),
        dtype=float,
    )
    edge = _pair_adjacency(g, members)[iu, iv]
    pair_factors = pm[iv] * np.where(edge, q, 1.0 - q)
    total = np.log(np.maximum(pm, PROB_FLOOR)).sum()
    total += np.log(np.maximum(pair_factors, PROB_FLOOR)).sum()
    n_terms = s + s * (s - 1) / 2.0
    return float(np.exp(total / n_terms))


def density_feature(model, g: Graph, c: CommunityRef, alpha: float) -> float:
    """Geometric mean of p(u,v|alpha) over internal edges; 0 when there are none."""
    owners, nbrs = _member_neighbors(g, c.members)
    if nbrs.size == 0:
        return 0.0
    us = c.members[owners]
    keep = in_sorted(c.members, nbrs) & (nbrs > us)
    if not keep.any():
        return 0.0
    p = perturbed_edge_prob(model, g, us[keep], nbrs[keep], alpha)
    return _geometric_mean(np.asarray(p, dtype=float))


def boundary_feature(
    model, g: Graph, c: CommunityRef, alpha: float, k: int = 10, seed: int = 0
) -> float:
    """Geometric mean of (1 - p) over boundary edges plus sampled non-edges.

    For each member, k exterior nodes with no edge into the community are
    drawn uniformly with replacement (skipped when no such node exists).
    Sampling is driven by a substream of (seed, community id), so repeated
    calls at different alpha reuse the same sample. Returns 1 when there
    are no factors at all.
    """
    members = c.members
    owners, nbrs = _member_neighbors(g, members)
    outside = ~in_sorted(members, nbrs) if nbrs.size else np.zeros(0, dtype=bool)
    us = [members[owners[outside]]]
    vs = [nbrs[outside]]
    if k > 0:
        candidates = np.ones(g.n, dtype=bool)
        candidates[members] = False
        if nbrs.size:
            candidates[nbrs] = False
        pool = np.flatnonzero(candidates)
        if pool.size:
            rng = substream(seed, "boundary", c.id)
            draw = pool[rng.integers(0, pool.size, size=(members.size, k))]
            us.append(np.repeat(members, k))
            vs.append(draw.ravel())
    us = np.concatenate(us)
    vs = np.concatenate(vs)
    if us.size == 0:
        return 1.0
    p = np.asarray(perturbed_edge_prob(model, g, us, vs, alpha), dtype=float)
    return _geometric_mean(1.0 - p)


def allegiance_feature(model, g: Graph, c: CommunityRef, alpha: float) -> float:
    """Fraction of members whose summed edge probability into the community
    is at least the summed probability out of it (ties count)."""
    members = c.members
    if members.size == 0:
        raise DegenerateCommunityError(f"community {c.id} is empty")
    owners, nbrs = _member_neighbors(g, members)
    if nbrs.size == 0:
        return 1.0
    p = np.asarray(perturbed_edge_prob(model, g, members[owners], nbrs, alpha), dtype=float)
    inside = in_sorted(members, nbrs)
    internal = np.bincount(owners, weights=np.where(inside, p, 0.0), minlength=members.size)
    external = np.bincount(owners, weights=np.where(inside, 0.0, p), minlength=members.size)
    return float(np.mean(internal >= external))


def adjust_metric(f0: float, f_alpha: float) -> float:
    """Fold the unperturbed and perturbed feature values into one score."""
    return f0 / (1.0 + abs(f0 - f_alpha))


# ---------------------------------------------------------------------------
# Baseline community scoring functions
# ---------------------------------------------------------------------------


def _tpr(g: Graph, members: np.ndarray) -> float:
    adj = _pair_adjacency(g, members).astype(np.int64)
    paths2 = adj @ adj
    in_triangle = ((adj * paths2).sum(axis=1) > 0)
    return float(in_triangle.mean())


def baseline_score(kind: str, g: Graph, members, *, rng=None) -> float:
    """One of the standard community quality scores, oriented higher-is-better.

    Conductance, cut ratio and Flake-ODF are reported reversed as (1 - x).
    `size` scores by negative member count; `random` draws from rng.
    """
    mem = np.asarray(members, dtype=np.int64)
    s = mem.size
    internal, boundary = cut_counts(g, mem)
    if kind == "conductance":
        denom = 2 * internal + boundary
        raw = boundary / denom if denom else 1.0
        return 1.0 - raw
    if kind == "modularity":
        degsum = float(g.degrees[mem].sum())
        return internal - degsum * degsum / (4.0 * g.m)
    if kind == "cut-ratio":
        denom = s * (g.n - s)
        raw = boundary / denom if denom else 0.0
        return 1.0 - raw
    if kind == "tpr":
        return _tpr(g, np.sort(mem))
    if kind == "fomd":
        median_deg = float(np.median(g.degrees))
        owners, nbrs = _member_neighbors(g, np.sort(mem))
        inside = in_sorted(np.sort(mem), nbrs)
        internal_deg = np.bincount(owners, weights=inside.astype(float), minlength=s)
        return float(np.mean(internal_deg > median_deg))
    if kind == "flake-odf":
        owners, nbrs = _member_neighbors(g, np.sort(mem))
        inside = in_sorted(np.sort(mem), nbrs)
        internal_deg = np.bincount(owners, weights=inside.astype(float), minlength=s)
        external_deg = np.bincount(owners, weights=(~inside).astype(float), minlength=s)
        return 1.0 - float(np.mean(external_deg > internal_deg))
    if kind == "size":
        return -float(s)
    if kind == "random":
        if rng is None:
            raise InvalidParameterError("random baseline needs an rng")
        return float(rng.uniform())
    raise InvalidParameterError(f"unknown baseline kind {kind!r}")


# ---------------------------------------------------------------------------
# Metric table
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class MetricTable:
    """Scores per community: the four core metrics plus optional extras.

    Rows cover only scorable communities; degenerate ones (size < 2) are
    listed in `skipped` with a reason and take no part in any ranking.
    """

    community_ids: np.ndarray
    sizes: np.ndarray
    scores: dict[str, np.ndarray]
    skipped: list[tuple[int, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.community_ids.size)

    def columns(self) -> list[str]:
        extras = [k for k in self.scores if k not in CORE_METRICS]
        return list(CORE_METRICS) + extras


def default_negative_samples(n: int) -> int:
    """Per-member sample count for the boundary feature."""
    return 10 if n < 100_000 else 3


def compute_metric_table(
    model,
    g: Graph,
    cover: Cover,
    alpha0: float = 0.15,
    k: int | None = None,
    seed: int = 0,
    *,
    baselines=(),
    workers: int = 1,
) -> MetricTable:
    """Evaluate all four metrics (and requested baselines) per community.

    Each community is scored independently: features at alpha = 0 and at
    alpha0 fold through adjust_metric. Evaluations may run on several
    threads; per-community substreams keep the result identical for any
    worker count.
    """
    check_alpha(alpha0)
    if len(cover) == 0:
        raise InvalidParameterError("cover has no communities")
    for kind in baselines:
        if kind not in BASELINE_KINDS:
            raise InvalidParameterError(f"unknown baseline kind {kind!r}")
    if k is None:
        k = default_negative_samples(g.n)
    if k < 0:
        raise InvalidParameterError("negative-sample count must be >= 0")

    def eval_one(i: int):
        members = cover.communities[i]
        if members.size < 2:
            return ("skip", i, "community size < 2")
        c = CommunityRef(id=i, members=members, model_id=cover.model_id(i))
        row = {}
        for name, feat, kwargs in (
            ("likelihood", likelihood_feature, {}),
            ("density", density_feature, {}),
            ("boundary", boundary_feature, {"k": k, "seed": seed}),
            ("allegiance", allegiance_feature, {}),
        ):
            f0 = feat(model, g, c, 0.0, **kwargs)
            fa = feat(model, g, c, alpha0, **kwargs)
            row[name] = adjust_metric(f0, fa)
        for kind in baselines:
            rng = substream(seed, "baseline-random", i) if kind == "random" else None
            row[kind] = baseline_score(kind, g, members, rng=rng)
        return ("ok", i, row)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(eval_one, range(len(cover))))
    else:
        results = [eval_one(i) for i in range(len(cover))]

    ids, sizes, rows, skipped = [], [], [], []
    for status, i, payload in results:
        if status == "skip":
            skipped.append((i, payload))
        else:
            ids.append(i)
            sizes.append(cover.communities[i].size)
            rows.append(payload)
    columns = list(CORE_METRICS) + list(baselines)
    scores = {
        name: np.array([r[name] for r in rows], dtype=float) for name in columns
    }
    return MetricTable(
        community_ids=np.array(ids, dtype=np.int64),
        sizes=np.array(sizes, dtype=np.int64),
        scores=scores,
        skipped=skipped,
    )


def format_metric_table(table: MetricTable) -> str:
    cols = table.columns()
    header = ["community_id", "size"] + [
        f"r_{c}" if c in CORE_METRICS else c for c in cols
    ]
    lines = ["\t".join(header)]
    for i in range(len(table)):
        row = [str(int(table.community_ids[i])), str(int(table.sizes[i]))]
        row += [fmt_float(table.scores[c][i]) for c in cols]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
