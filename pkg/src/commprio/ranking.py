"""Rank aggregation: ranked lists, bags, Bayes-factor weights, iteration.

Metric scores become tie-averaged ranked lists (rank 1 is best). Each list
is split into contiguous rank bags; a bag's importance weight is the
posterior-to-prior odds that it matches a gold standard, smoothed along the
list by a running median. Without supervision the gold standard is
bootstrapped from the current aggregate's own top fraction and the whole
procedure iterates to a fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    InputMismatchError,
    InvalidParameterError,
    SizeLimitError,
    TooFewCommunitiesError,
)
from .metrics import CORE_METRICS, MetricTable
from .rng import substream
from .util import fmt_float

BASELINE_AGGREGATORS = ("quadratic-mean", "borda", "footrule", "pick-a-perm")
FOOTRULE_DEFAULT_LIMIT = 2000


@dataclass(frozen=True)
class AggregationParams:
    """Knobs of the iterative aggregation."""

    bag_size: int = 50
    pi: float = 0.05
    max_iters: int = 20

    def __post_init__(self):
        if self.bag_size < 1:
            raise InvalidParameterError("bag_size must be >= 1")
        if not 0.0 < self.pi < 1.0:
            raise InvalidParameterError("pi must be strictly between 0 and 1")
        if self.max_iters < 1:
            raise InvalidParameterError("max_iters must be >= 1")


def to_ranked_list(scores, higher_is_better: bool = True) -> np.ndarray:
    """Tie-averaged ranks, 1 = best. Rank sums always equal n(n+1)/2."""
    v = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidParameterError("scores must be finite to rank")
    key = -v if higher_is_better else v
    order = np.argsort(key, kind="stable")
    ranks = np.empty(v.size, dtype=float)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and key[order[j + 1]] == key[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def bag_count(n_communities: int, bag_size: int) -> int:
    return max(3, n_communities // bag_size)


def partition_bags(ranks: np.ndarray, params: AggregationParams) -> np.ndarray:
    """Assign each community to a contiguous rank bag (0-based index).

    With B bags over n communities, the community at sorted position p
    (ties broken by ascending id) lands in bag ceil(p*B/n); rounding spills
    into the last bag.
    """
    n = ranks.size
    if n < 3:
        raise TooFewCommunitiesError(f"need at least 3 communities, got {n}")
    b = bag_count(n, params.bag_size)
    order = np.lexsort((np.arange(n), ranks))
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(1, n + 1)
    return (pos * b + n - 1) // n - 1


def bayes_weight(overlap: int, bag_size: int, pi: float) -> float:
    """Posterior-to-prior odds that a bag matches the gold standard.

    Add-one smoothing keeps the ratio finite for empty and full overlaps.
    """
    if not 0 <= overlap <= bag_size:
        raise InvalidParameterError("overlap must lie in [0, bag_size]")
    if not 0.0 < pi < 1.0:
        raise InvalidParameterError("pi must be strictly between 0 and 1")
    return (overlap + 1.0) / (bag_size - overlap + 1.0) * (1.0 - pi) / pi


def tukey_smooth(weights) -> np.ndarray:
    """Window-3 running median smoothing, iterated to a fixed point.

    Each pass first updates interior points from the previous values, then
    re-evaluates both endpoints against the smoothed interior using the
    median(K1, K2, 3*K2 - 2*K3) end rule (mirrored on the right).
    """
    x = np.asarray(weights, dtype=float).copy()
    if x.size < 3:
        raise InvalidParameterError("smoothing needs a sequence of length >= 3")
    for _ in range(16 + 4 * x.size):
        y = x.copy()
        stacked = np.stack([x[:-2], x[1:-1], x[2:]])
        y[1:-1] = np.median(stacked, axis=0)
        left = np.median([x[0], y[1], 3.0 * y[1] - 2.0 * y[2]])
        right = np.median([x[-1], y[-2], 3.0 * y[-2] - 2.0 * y[-3]])
        y[0] = left
        y[-1] = right
        if np.array_equal(y, x):
            break
        x = y
    return x


def weighted_aggregate(
    rank_lists: Mapping[str, np.ndarray],
    bags: Mapping[str, np.ndarray],
    weights: Mapping[str, np.ndarray],
) -> np.ndarray:
    """Per-community weighted average of ranks across the lists.

    S(C) = sum_r K_r[bag_r(C)] * R_r(C) / sum_r K_r[bag_r(C)], so a list
    speaks with the importance weight of the bag the community sits in and
    smaller aggregates indicate better communities. Equal weights reduce to
    the plain mean of ranks.
    """
    names = list(rank_lists)
    if not names:
        raise InvalidParameterError("no ranked lists to aggregate")
    n = rank_lists[names[0]].size
    total = np.zeros(n)
    norm = np.zeros(n)
    for r in names:
        if rank_lists[r].size != n or bags[r].size != n:
            raise InputMismatchError("ranked lists cover different community sets")
        if np.any(weights[r] <= 0.0):
            raise InvalidParameterError("importance weights must be positive")
        w = weights[r][bags[r]]
        total += w * rank_lists[r]
        norm += w
    return total / norm


@dataclass(eq=False)
class Prioritization:
    """Final aggregated ranking plus convergence diagnostics."""

    community_ids: np.ndarray
    ranks: np.ndarray
    scores: np.ndarray
    iterations: int
    converged: bool
    method: str
    weights: dict[str, np.ndarray] | None = None
    weight_trace: list[dict[str, list[float]]] = field(default_factory=list)
    rank_change_trace: list[int] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def diagnostics(self) -> dict:
        return {
            "method": self.method,
            "parameters": self.params,
            "iterations": self.iterations,
            "converged": self.converged,
            "rank_changes_per_iteration": self.rank_change_trace,
            "weights_per_iteration": self.weight_trace,
        }


def _top_set_mask(ranks: np.ndarray, size: int) -> np.ndarray:
    order = np.lexsort((np.arange(ranks.size), ranks))
    mask = np.zeros(ranks.size, dtype=bool)
    mask[order[:size]] = True
    return mask


def _bag_weights(bags, bag_sizes, t_mask, pi, clamp):
    overlap = np.bincount(bags[t_mask], minlength=bag_sizes.size)
    w = (overlap + 1.0) / (bag_sizes - overlap + 1.0) * (1.0 - pi) / pi
    w = tukey_smooth(w)
    if clamp:
        w = np.maximum(w, 1.0)
    return w


def bayes_aggregate(
    table: MetricTable,
    params: AggregationParams | None = None,
    supervision=None,
    *,
    extras=(),
    clamp_weights: bool = False,
) -> Prioritization:
    """Aggregate the metric columns of a table into one prioritization.

    Unsupervised mode starts from the plain average of the ranked lists and
    alternates between (a) taking the current top ceil(pi*n) communities as
    a temporary gold standard, (b) recomputing smoothed bag weights against
    it, and (c) re-aggregating, until the rank vector repeats or max_iters
    is hit. With `supervision` (a set of community ids) the weights are
    computed once against that set and a single aggregation pass runs.

    Extra pre-computed score columns named in `extras` join the four core
    metrics as additional ranked lists with identical treatment.
    """
    if params is None:
        params = AggregationParams()
    names = list(CORE_METRICS) + [c for c in extras if c not in CORE_METRICS]
    for name in names:
        if name not in table.scores:
            raise InputMismatchError(f"table has no column {name!r}")
    ids = table.community_ids
    n = ids.size
    if n < 3:
        raise TooFewCommunitiesError(f"need at least 3 communities, got {n}")

    ranks = {r: to_ranked_list(table.scores[r]) for r in names}
    bags = {r: partition_bags(ranks[r], params) for r in names}
    bag_sizes = {r: np.bincount(bags[r], minlength=bag_count(n, params.bag_size)) for r in names}
    param_dump = {
        "bag_size": params.bag_size,
        "pi": params.pi,
        "max_iters": params.max_iters,
        "lists": names,
        "clamp_weights": clamp_weights,
        "supervised": supervision is not None,
    }

    if supervision is not None:
        sup = set(int(c) for c in supervision)
        if not sup:
            raise InvalidParameterError("supervision set is empty")
        known = set(int(c) for c in ids)
        unknown = sorted(sup - known)
        if unknown:
            raise InputMismatchError(f"supervision references unknown community id {unknown[0]}")
        t_mask = np.isin(ids, sorted(sup))
        weights = {r: _bag_weights(bags[r], bag_sizes[r], t_mask, params.pi, clamp_weights) for r in names}
        scores = weighted_aggregate(ranks, bags, weights)
        final = to_ranked_list(scores, higher_is_better=False)
        return Prioritization(
            community_ids=ids,
            ranks=final,
            scores=scores,
            iterations=1,
            converged=True,
            method="bayes",
            weights=weights,
            weight_trace=[{r: list(weights[r]) for r in names}],
            rank_change_trace=[],
            params=param_dump,
        )

    t_size = max(1, math.ceil(params.pi * n))
    current = to_ranked_list(np.mean([ranks[r] for r in names], axis=0), higher_is_better=False)
    scores = -current  # placeholder until the first weighted pass
    weights = None
    weight_trace: list[dict[str, list[float]]] = []
    change_trace: list[int] = []
    iterations = 0
    converged = False
    for _ in range(params.max_iters):
        t_mask = _top_set_mask(current, t_size)
        weights = {r: _bag_weights(bags[r], bag_sizes[r], t_mask, params.pi, clamp_weights) for r in names}
        weight_trace.append({r: list(weights[r]) for r in names})
        scores = weighted_aggregate(ranks, bags, weights)
        nxt = to_ranked_list(scores, higher_is_better=False)
        changed = int(np.sum(nxt != current))
        change_trace.append(changed)
        iterations += 1
        current = nxt
        if changed == 0:
            converged = True
            break
    return Prioritization(
        community_ids=ids,
        ranks=current,
        scores=scores,
        iterations=iterations,
        converged=converged,
        method="bayes",
        weights=weights,
        weight_trace=weight_trace,
        rank_change_trace=change_trace,
        params=param_dump,
    )


def baseline_aggregate(
    kind: str,
    table: MetricTable,
    *,
    extras=(),
    seed: int = 0,
    footrule_limit: int = FOOTRULE_DEFAULT_LIMIT,
) -> Prioritization:
    """Reference aggregators: quadratic-mean, Borda, Footrule, Pick-a-Perm."""
    names = list(CORE_METRICS) + [c for c in extras if c not in CORE_METRICS]
    for name in names:
        if name not in table.scores:
            raise InputMismatchError(f"table has no column {name!r}")
    ids = table.community_ids
    n = ids.size
    ranks = {r: to_ranked_list(table.scores[r]) for r in names}

    if kind == "quadratic-mean":
        scores = np.sqrt(np.mean([table.scores[r] ** 2 for r in names], axis=0))
        final = to_ranked_list(scores)
    elif kind == "borda":
        scores = np.mean([ranks[r] for r in names], axis=0)
        final = to_ranked_list(scores, higher_is_better=False)
    elif kind == "footrule":
        if n > footrule_limit:
            raise SizeLimitError(
                f"footrule assignment solver is limited to {footrule_limit} communities, got {n}"
            )
        positions = np.arange(1, n + 1, dtype=float)
        cost = np.zeros((n, n))
        for r in names:
            cost += np.abs(ranks[r][:, None] - positions[None, :])
        row, col = linear_sum_assignment(cost)
        scores = np.empty(n)
        scores[row] = positions[col]
        final = to_ranked_list(scores, higher_is_better=False)
    elif kind == "pick-a-perm":
        rng = substream(seed, "pick-a-perm")
        pick = names[int(rng.integers(0, len(names)))]
        scores = ranks[pick].copy()
        final = to_ranked_list(scores, higher_is_better=False)
    else:
        raise InvalidParameterError(f"unknown aggregator kind {kind!r}")

    return Prioritization(
        community_ids=ids,
        ranks=final,
        scores=scores,
        iterations=1,
        converged=True,
        method=kind,
        params={"lists": names, "seed": seed},
    )


def footrule_cost(rank_lists: Mapping[str, np.ndarray], assigned_positions: np.ndarray) -> float:
    """Total displacement cost of an assignment; shared with tests/oracles."""
    total = 0.0
    for r in rank_lists:
        total += float(np.abs(rank_lists[r] - assigned_positions).sum())
    return total


def format_prioritization(prio: Prioritization, table: MetricTable) -> str:
    """Ranking TSV, best community first."""
    cols = table.columns()
    header = ["community_id", "rank", "aggregated_score"]
    header += [f"r_{c}" if c in CORE_METRICS else c for c in cols]
    header.append("size")
    lines = ["\t".join(header)]
    order = np.lexsort((prio.community_ids, prio.ranks))
    for i in order:
        row = [
            str(int(prio.community_ids[i])),
            fmt_float(prio.ranks[i]),
            fmt_float(prio.scores[i]),
        ]
        row += [fmt_float(table.scores[c][i]) for c in cols]
        row.append(str(int(table.sizes[i])))
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
