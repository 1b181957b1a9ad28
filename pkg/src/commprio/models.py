"""Edge-probability models and closed-form perturbed edge probabilities.

A model must expose three quantities for a pair of nodes and a community:
the plain edge probability p(u,v), the membership probability p_C(u), and
the community-conditional edge probability p_C(u,v). Two concrete models
are provided: a fitted nonnegative affiliation model (a bundled detector)
and an empirical model built from any externally detected cover.

Perturbation is never materialized: the probability that a pair is linked
after rewiring an expected alpha*m edges degree-preservingly is evaluated
in closed form from the unperturbed probability and the configuration-model
rate of the pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol

import numpy as np
from scipy import sparse

from .errors import (
    EmptyCoverError,
    InputMismatchError,
    InvalidPairError,
    InvalidParameterError,
    ParseError,
)
from .graph import Cover, Graph, cut_counts, in_sorted
from .rng import substream

_DOT_FLOOR = 1e-12


class EdgeProbabilityModel(Protocol):
    """What a statistical community detector must expose.

    All methods accept scalars or equal-length index arrays and broadcast;
    outputs lie in [0, 1] and the pair quantities are symmetric in (u, v).
    """

    def edge_prob(self, u, v): ...

    def membership_prob(self, cid: int, u): ...

    def community_edge_prob(self, cid: int, u, v): ...


# ---------------------------------------------------------------------------
# Affiliation model (bundled detector)
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class AffiliationModel:
    """Nonnegative node-community affiliation weights F (n x K).

    edge_prob(u, v) = 1 - (1 - eps) * exp(-F_u . F_v), so the background
    floor eps is the probability for totally unaffiliated pairs.
    Membership uses 1 - exp(-F_uk); the per-community edge contribution is
    1 - exp(-F_uk * F_vk).
    """

    F: np.ndarray
    eps: float
    loglik_trace: list[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def k(self) -> int:
        return self.F.shape[1]

    def edge_prob(self, u, v):
        dots = np.sum(self.F[u] * self.F[v], axis=-1)
        return 1.0 - (1.0 - self.eps) * np.exp(-dots)

    def membership_prob(self, cid: int, u):
        return -np.expm1(-self.F[u, cid])

    def community_edge_prob(self, cid: int, u, v):
        return -np.expm1(-(self.F[u, cid] * self.F[v, cid]))


def _overlap_row(g: Graph, mark: np.ndarray) -> np.ndarray:
    # |closed-nb(u) & marked| for every u, via cumulative sums over CSR rows.
    hits = mark[g.indices].astype(np.int64)
    cs = np.concatenate([[0], np.cumsum(hits)])
    per_node = cs[g.indptr[1:]] - cs[g.indptr[:-1]]
    return per_node + mark.astype(np.int64)


def _init_affiliations(g: Graph, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seed each row from Jaccard overlap with K random anchor neighborhoods."""
    anchors = rng.choice(g.n, size=k, replace=False)
    F = np.empty((g.n, k))
    closed_deg = g.degrees + 1
    for j, a in enumerate(anchors):
        mark = np.zeros(g.n, dtype=bool)
        mark[g.neighbors(int(a))] = True
        mark[int(a)] = True
        inter = _overlap_row(g, mark)
        union = closed_deg + (g.degrees[int(a)] + 1) - inter
        F[:, j] = inter / union
    F += rng.uniform(0.0, 0.1, size=F.shape)
    return F


def _full_loglik(g: Graph, F: np.ndarray, edges=None) -> float:
    """Affiliation log-likelihood via the cached-sum identity, O(mK + nK)."""
    if edges is None:
        edges = g.edge_array()
    eu, ev = edges
    dots = np.maximum(np.einsum("ij,ij->i", F[eu], F[ev]), _DOT_FLOOR)
    edge_term = float(np.log(-np.expm1(-dots)).sum())
    colsum = F.sum(axis=0)
    all_pair_dot = (float(colsum @ colsum) - float((F * F).sum())) / 2.0
    nonedge_dot = all_pair_dot - float(dots.sum())
    return edge_term - nonedge_dot


def _node_objective(Fn: np.ndarray, rest: np.ndarray, x: np.ndarray) -> float:
    dots = np.maximum(Fn @ x, _DOT_FLOOR)
    return float(np.log(-np.expm1(-dots)).sum() - x @ rest)


def _fit_once(g: Graph, k: int, max_iters: int, tol: float, rng: np.random.Generator):
    F = _init_affiliations(g, k, rng)
    edges = g.edge_array()
    colsum = F.sum(axis=0)
    trace = [_full_loglik(g, F, edges)]
    for _ in range(max_iters):
        for u in range(g.n):
            nbrs = g.neighbors(u)
            Fn = F[nbrs]
            fu = F[u]
            rest = colsum - fu - Fn.sum(axis=0)
            dots = np.maximum(Fn @ fu, _DOT_FLOOR)
            w = np.exp(-dots)
            grad = Fn.T @ (w / (1.0 - w)) - rest
            base = _node_objective(Fn, rest, fu)
            step = 1.0
            for _trial in range(32):
                x = np.maximum(fu + step * grad, 0.0)
                if _node_objective(Fn, rest, x) > base:
                    colsum += x - fu
                    F[u] = x
                    break
                step *= 0.5
        trace.append(_full_loglik(g, F, edges))
        if trace[-1] - trace[-2] <= tol * max(1.0, abs(trace[-2])):
            break
    return F, trace


def fit_affiliation(
    g: Graph,
    k: int,
    max_iters: int = 100,
    seed: int = 0,
    *,
    tol: float = 1e-7,
    restarts: int = 1,
) -> AffiliationModel:
    """Fit the affiliation model by coordinate projected-gradient ascent.

    Each node row is updated with a backtracking line search on its local
    objective (degree-proportional via the cached column sums), so the full
    log-likelihood is non-decreasing across iterations. With restarts > 1
    the best final likelihood wins; every restart draws its own anchors
    from a named substream of `seed`.
    """
    if k < 1:
        raise InvalidParameterError(f"need at least one community, got k={k}")
    if k > g.n:
        raise InvalidParameterError(f"k={k} exceeds node count n={g.n}")
    if max_iters < 1:
        raise InvalidParameterError("max_iters must be >= 1")
    if restarts < 1:
        raise InvalidParameterError("restarts must be >= 1")
    best = None
    for r in range(restarts):
        F, trace = _fit_once(g, k, max_iters, tol, substream(seed, "affiliation", r))
        if best is None or trace[-1] > best[1][-1]:
            best = (F, trace)
    F, trace = best
    eps = min(max(2.0 * g.m / (g.n * (g.n - 1)), 1e-8), 0.5)
    return AffiliationModel(F=F, eps=eps, loglik_trace=trace)


def extract_cover(model: AffiliationModel) -> Cover:
    """Threshold affiliations into a cover.

    A node joins community k when F_uk >= sqrt(-log(1 - eps)), the weight
    at which the pairwise contribution of a shared community reaches the
    background rate. Empty communities are discarded and ids re-densified;
    the returned cover records the original column of each community.
    """
    delta = math.sqrt(-math.log1p(-model.eps))
    communities = []
    cols = []
    for col in range(model.k):
        members = np.flatnonzero(model.F[:, col] >= delta)
        if members.size:
            communities.append(members.astype(np.int64))
            cols.append(col)
    if not communities:
        raise EmptyCoverError("no community has any member above the affiliation threshold")
    return Cover(communities, model_ids=np.array(cols, dtype=np.int64))


def format_affiliation(model: AffiliationModel, labels) -> str:
    """One line per node: `label<TAB>col:weight ...` for nonzero affiliations."""
    out = [f"# affiliation k={model.k} eps={float(model.eps)!r}"]
    for u in range(model.n):
        row = model.F[u]
        nz = np.flatnonzero(row)
        fields = " ".join(f"{int(c)}:{float(row[c])!r}" for c in nz)
        out.append(f"{labels[u]}\t{fields}" if nz.size else f"{labels[u]}\t")
    return "\n".join(out) + "\n"


def parse_affiliation(lines: Iterable[str], g: Graph) -> AffiliationModel:
    k = None
    eps = None
    rows: dict[int, list[tuple[int, float]]] = {}
    for ln, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("k="):
                    k = int(tok[2:])
                elif tok.startswith("eps="):
                    eps = float(tok[4:])
            continue
        label, _, rest = line.partition("\t")
        u = g.label_index.get(label)
        if u is None:
            raise InputMismatchError(f"line {ln}: label {label!r} not present in the edge list")
        entries = []
        for tok in rest.split():
            col_s, _, w_s = tok.partition(":")
            try:
                entries.append((int(col_s), float(w_s)))
            except ValueError as exc:
                raise ParseError(f"line {ln}: bad affiliation entry {tok!r}") from exc
        rows[u] = entries
    if k is None:
        k = 1 + max((c for entries in rows.values() for c, _ in entries), default=-1)
    if k < 1:
        raise ParseError("model file defines no communities")
    if eps is None:
        eps = min(max(2.0 * g.m / (g.n * (g.n - 1)), 1e-8), 0.5)
    F = np.zeros((g.n, k))
    for u, entries in rows.items():
        for c, w in entries:
            if not 0 <= c < k:
                raise ParseError(f"affiliation column {c} out of range for k={k}")
            F[u, c] = w
    return AffiliationModel(F=F, eps=eps)


def read_affiliation(path, g: Graph) -> AffiliationModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_affiliation(fh, g)


# ---------------------------------------------------------------------------
# Empirical model over an externally detected cover
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class EmpiricalCoverModel:
    """Probability surface for a cover with no fitted detector behind it.

    Internal density per community is Laplace smoothed,
    d_C = (|E_C| + 1) / (pairs_C + 2), membership is the 0/1 indicator, and
    the plain edge probability is a noisy-or of the densities of the
    communities shared by the pair on top of a background rate.
    """

    cover: Cover
    density: np.ndarray
    eps_bg: float
    _members: list[np.ndarray] = field(repr=False, default_factory=list)
    _memb: sparse.csr_matrix = field(repr=False, default=None)
    _memb_log: sparse.csr_matrix = field(repr=False, default=None)

    def edge_prob(self, u, v):
        us = np.atleast_1d(np.asarray(u, dtype=np.int64))
        vs = np.atleast_1d(np.asarray(v, dtype=np.int64))
        shared_log = np.asarray(self._memb[us].multiply(self._memb_log[vs]).sum(axis=1)).ravel()
        p = 1.0 - (1.0 - self.eps_bg) * np.exp(shared_log)
        return p if np.ndim(u) or np.ndim(v) else float(p[0])

    def membership_prob(self, cid: int, u):
        mem = self._members[cid]
        out = in_sorted(mem, np.asarray(u, dtype=np.int64)).astype(float)
        return out if np.ndim(u) else float(out)

    def community_edge_prob(self, cid: int, u, v):
        mem = self._members[cid]
        both = in_sorted(mem, np.asarray(u, dtype=np.int64)) & in_sorted(
            mem, np.asarray(v, dtype=np.int64)
        )
        out = self.density[cid] * both.astype(float)
        return out if np.ndim(u) or np.ndim(v) else float(out)


def empirical_model(g: Graph, cover: Cover) -> EmpiricalCoverModel:
    """Build the empirical probability model for a cover on graph g."""
    k = len(cover)
    density = np.empty(k)
    for i, members in enumerate(cover.communities):
        if members[-1] >= g.n or members[0] < 0:
            raise InputMismatchError(f"community {i} references a node outside the graph")
        internal, _ = cut_counts(g, members)
        pairs = members.size * (members.size - 1) // 2
        density[i] = (internal + 1.0) / (pairs + 2.0)
    eps_bg = min(max(g.m / (g.n * (g.n - 1) / 2.0), 1e-8), 0.5)
    col = np.concatenate([np.full(c.size, i, dtype=np.int64) for i, c in enumerate(cover.communities)])
    row = np.concatenate(cover.communities)
    memb = sparse.csr_matrix(
        (np.ones(row.size), (row, col)), shape=(g.n, k)
    )
    memb_log = memb.copy()
    memb_log.data = np.log1p(-density)[memb_log.indices]
    return EmpiricalCoverModel(
        cover=cover,
        density=density,
        eps_bg=eps_bg,
        _members=list(cover.communities),
        _memb=memb,
        _memb_log=memb_log,
    )


# ---------------------------------------------------------------------------
# Closed-form perturbed probabilities
# ---------------------------------------------------------------------------


def check_alpha(alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError(f"perturbation intensity must be in [0, 1], got {alpha}")
    return float(alpha)


def _check_pairs(u, v):
    if np.any(np.asarray(u) == np.asarray(v)):
        raise InvalidPairError("perturbed probabilities are undefined for u == v")


def rewire_prob(g: Graph, u, v, alpha: float):
    """Probability that rewiring alpha*m edges creates the pair (u, v).

    Equals 1 - (1 - e_uv/m)^(alpha*m) with e_uv = k_u k_v / (2m); the power
    is evaluated as exp(alpha*m*log1p(-e_uv/m)) and e_uv/m is clamped below
    one so the base never hits zero on degenerate skewed graphs.
    """
    e_frac = g.degrees[u] * g.degrees[v] / (2.0 * g.m * g.m)
    e_frac = np.minimum(e_frac, 1.0 - 1e-12)
    return -np.expm1(alpha * g.m * np.log1p(-e_frac))


def perturbed_edge_prob(model, g: Graph, u, v, alpha: float):
    """p(u,v | alpha): survives rewiring, or re-emerges from it."""
    alpha = check_alpha(alpha)
    _check_pairs(u, v)
    p = np.asarray(model.edge_prob(u, v), dtype=float)
    out = p * (1.0 - alpha) + (1.0 - p) * rewire_prob(g, u, v, alpha)
    out = np.clip(out, 0.0, 1.0)
    return out if np.ndim(u) or np.ndim(v) else float(out)


def perturbed_community_edge_prob(model, g: Graph, cid: int, u, v, alpha: float):
    """p_C(u,v | alpha): community-conditional analogue of perturbed_edge_prob."""
    alpha = check_alpha(alpha)
    _check_pairs(u, v)
    p = np.asarray(model.community_edge_prob(cid, u, v), dtype=float)
    out = p * (1.0 - alpha) + (1.0 - p) * rewire_prob(g, u, v, alpha)
    out = np.clip(out, 0.0, 1.0)
    return out if np.ndim(u) or np.ndim(v) else float(out)


def joint_pair_terms(model, g: Graph, cid: int, u, v, alpha: float):
    """Joint probabilities that both endpoints belong to C and the edge
    does (s1) or does not (s2) appear under alpha-perturbation."""
    pu = np.asarray(model.membership_prob(cid, u), dtype=float)
    pv = np.asarray(model.membership_prob(cid, v), dtype=float)
    q = np.asarray(perturbed_community_edge_prob(model, g, cid, u, v, alpha), dtype=float)
    s1 = pu * pv * q
    s2 = pu * pv * (1.0 - q)
    if np.ndim(u) or np.ndim(v):
        return s1, s2
    return float(s1), float(s2)
