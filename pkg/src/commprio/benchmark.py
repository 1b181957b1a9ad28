"""Planted-community benchmarks: SBM generation, gold standards, Spearman.

A trial generates a stochastic block model network, obtains a cover (either
by fitting the bundled affiliation detector or by flipping memberships of
the planted cover), scores and aggregates it with each configured method,
and reports Spearman correlation against the gold-standard ranking of the
detected communities by best-Jaccard accuracy.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BenchmarkError,
    CommprioError,
    InvalidParameterError,
    UndefinedCorrelationError,
)
from .graph import Cover, Graph
from .metrics import BASELINE_KINDS, compute_metric_table
from .models import empirical_model, extract_cover, fit_affiliation
from .ranking import (
    AggregationParams,
    BASELINE_AGGREGATORS,
    baseline_aggregate,
    bayes_aggregate,
    to_ranked_list,
)
from .rng import derive_seed, substream
from .util import fmt_float


@dataclass(frozen=True)
class SbmSpec:
    """Planted-partition stochastic block model.

    One within-community edge probability per block, one shared
    between-community probability.
    """

    sizes: tuple[int, ...]
    p_in: tuple[float, ...]
    p_out: float

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        p_in = self.p_in
        if np.ndim(p_in) == 0:
            p_in = (float(p_in),) * len(sizes)
        object.__setattr__(self, "p_in", tuple(float(p) for p in p_in))
        if not sizes or any(s < 1 for s in sizes):
            raise InvalidParameterError("all community sizes must be >= 1")
        if sum(sizes) < 2:
            raise InvalidParameterError("spec must place at least 2 nodes")
        if len(self.p_in) != len(sizes):
            raise InvalidParameterError("need one p_in per community")
        for p in (*self.p_in, self.p_out):
            if not 0.0 <= p <= 1.0:
                raise InvalidParameterError(f"edge probability {p} outside [0, 1]")

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def expected_edges(self) -> float:
        within = sum(s * (s - 1) / 2.0 * p for s, p in zip(self.sizes, self.p_in))
        cross_pairs = (self.n**2 - sum(s**2 for s in self.sizes)) / 2.0
        return within + cross_pairs * self.p_out

    def edge_count_std(self) -> float:
        var = sum(s * (s - 1) / 2.0 * p * (1.0 - p) for s, p in zip(self.sizes, self.p_in))
        cross_pairs = (self.n**2 - sum(s**2 for s in self.sizes)) / 2.0
        var += cross_pairs * self.p_out * (1.0 - self.p_out)
        return float(np.sqrt(var))


def _sample_pair_indices(rng: np.random.Generator, n_pairs: int, p: float) -> np.ndarray:
    """Uniform subset of pair slots, equivalent to per-pair Bernoulli(p)."""
    if p <= 0.0 or n_pairs == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n_pairs, dtype=np.int64)
    k = int(rng.binomial(n_pairs, p))
    if k == 0:
        return np.empty(0, dtype=np.int64)
    if n_pairs <= max(4 * k, 1 << 20):
        return np.sort(rng.permutation(n_pairs)[:k].astype(np.int64))
    chosen: set[int] = set()
    while len(chosen) < k:
        batch = rng.integers(0, n_pairs, size=2 * (k - len(chosen)) + 16)
        for t in batch:
            if len(chosen) >= k:
                break
            chosen.add(int(t))
    return np.sort(np.fromiter(chosen, dtype=np.int64, count=k))


def _triu_pairs(idx: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    # Decode flat upper-triangle slot t -> (i, j), i < j, for a block of `size`.
    i = (
        size
        - 2
        - np.floor(np.sqrt(-8.0 * idx + 4.0 * size * (size - 1) - 7.0) / 2.0 - 0.5)
    ).astype(np.int64)
    j = idx + i + 1 - (size * (size - 1)) // 2 + ((size - i) * (size - i - 1)) // 2
    return i, j.astype(np.int64)


def generate_sbm(spec: SbmSpec, seed: int = 0) -> tuple[Graph, Cover]:
    """Sample a graph from the block model; ground truth is the partition.

    Each within-block pair is an edge independently with that block's p_in,
    each cross-block pair with p_out. Node labels are the stringified
    indices; blocks occupy contiguous index ranges.
    """
    rng = substream(seed, "sbm")
    n = spec.n
    offsets = np.concatenate([[0], np.cumsum(spec.sizes)])
    us, vs = [], []
    for c, (size, p) in enumerate(zip(spec.sizes, spec.p_in)):
        idx = _sample_pair_indices(rng, size * (size - 1) // 2, p)
        if idx.size:
            i, j = _triu_pairs(idx, size)
            us.append(i + offsets[c])
            vs.append(j + offsets[c])
    cross_pairs = (n * n - sum(s * s for s in spec.sizes)) // 2
    k_cross = int(rng.binomial(cross_pairs, spec.p_out)) if 0.0 < spec.p_out < 1.0 else (
        cross_pairs if spec.p_out >= 1.0 else 0
    )
    if k_cross:
        block_of = np.repeat(np.arange(len(spec.sizes)), spec.sizes)
        chosen: set[int] = set()
        while len(chosen) < k_cross:
            need = k_cross - len(chosen)
            a = rng.integers(0, n, size=2 * need + 32)
            b = rng.integers(0, n, size=2 * need + 32)
            lo = np.minimum(a, b)
            hi = np.maximum(a, b)
            ok = block_of[lo] != block_of[hi]
            for key in (lo[ok] * n + hi[ok]):
                if len(chosen) >= k_cross:
                    break
                chosen.add(int(key))
        keys = np.fromiter(chosen, dtype=np.int64, count=k_cross)
        us.append(keys // n)
        vs.append(keys % n)
    edges = (
        np.column_stack([np.concatenate(us), np.concatenate(vs)])
        if us
        else np.empty((0, 2), dtype=np.int64)
    )
    g = Graph.from_edges(n, edges)
    truth = Cover([np.arange(offsets[c], offsets[c + 1], dtype=np.int64) for c in range(len(spec.sizes))])
    return g, truth


def flip_cover(truth: Cover, flip: float, n: int, seed: int = 0) -> Cover:
    """Noisy copy of a cover: per community, drop and add ~flip fraction."""
    if not 0.0 <= flip < 1.0:
        raise InvalidParameterError("flip fraction must be in [0, 1)")
    rng = substream(seed, "flip")
    noisy = []
    for members in truth.communities:
        keep = members[rng.random(members.size) >= flip]
        if keep.size == 0:
            keep = members[[int(rng.integers(0, members.size))]]
        n_add = int(rng.binomial(members.size, flip))
        if n_add:
            pool = np.setdiff1d(np.arange(n, dtype=np.int64), members, assume_unique=True)
            add = rng.choice(pool, size=min(n_add, pool.size), replace=False)
            keep = np.union1d(keep, add)
        noisy.append(keep)
    return Cover(noisy)


def jaccard(a, b) -> float:
    """|a & b| / |a | b| for two node-id collections."""
    aa = np.unique(np.asarray(list(a) if isinstance(a, (set, frozenset)) else a))
    bb = np.unique(np.asarray(list(b) if isinstance(b, (set, frozenset)) else b))
    if aa.size == 0:
        raise InvalidParameterError("first set must be non-empty")
    inter = np.intersect1d(aa, bb, assume_unique=True).size
    return inter / float(aa.size + bb.size - inter)


@dataclass(eq=False)
class GoldStandardRanking:
    """Detected communities scored by best Jaccard against ground truth."""

    accuracies: np.ndarray
    ranks: np.ndarray


def gold_standard_ranking(detected: Cover, truth: Cover) -> GoldStandardRanking:
    """Match every detected community to its most similar planted one and
    rank by descending accuracy with average ties."""
    acc = np.array(
        [
            max(jaccard(c, t) for t in truth.communities)
            for c in detected.communities
        ]
    )
    return GoldStandardRanking(accuracies=acc, ranks=to_ranked_list(acc))


def spearman(r1, r2) -> float:
    """Pearson correlation of two tie-averaged rank vectors."""
    x = np.asarray(r1, dtype=float)
    y = np.asarray(r2, dtype=float)
    if x.size != y.size:
        raise InvalidParameterError("rank vectors must cover the same communities")
    if x.size < 2:
        raise InvalidParameterError("correlation needs at least 2 communities")
    xc = x - x.mean()
    yc = y - y.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    if vx == 0.0 or vy == 0.0:
        raise UndefinedCorrelationError("rank vector is constant; correlation undefined")
    return float((xc @ yc) / np.sqrt(vx * vy))


# ---------------------------------------------------------------------------
# Benchmark runner
# ---------------------------------------------------------------------------

DEFAULT_METHODS = ("bayes", "conductance", "modularity", "random")


@dataclass
class BenchmarkConfig:
    spec: SbmSpec
    trials: int = 50
    seed: int = 1
    methods: tuple[str, ...] = DEFAULT_METHODS
    detection: str = "fit"  # "fit" or "planted-noisy"
    detect_k: int | None = None
    fit_iters: int = 60
    fit_restarts: int = 2
    flip_fraction: float = 0.2
    alpha: float = 0.15
    bag_size: int = 50
    pi: float = 0.05
    max_iters: int = 20
    neg_samples: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        if self.detection not in ("fit", "planted-noisy"):
            raise InvalidParameterError(f"unknown detection mode {self.detection!r}")
        for m in self.methods:
            if m not in ("bayes", *BASELINE_AGGREGATORS, *BASELINE_KINDS):
                raise InvalidParameterError(f"unknown method {m!r}")
        if self.workers < 1:
            raise InvalidParameterError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.spec.sizes),
            "p_in": list(self.spec.p_in),
            "p_out": self.spec.p_out,
            "trials": self.trials,
            "seed": self.seed,
            "methods": list(self.methods),
            "detection": self.detection,
            "detect_k": self.detect_k,
            "fit_iters": self.fit_iters,
            "fit_restarts": self.fit_restarts,
            "flip_fraction": self.flip_fraction,
            "alpha": self.alpha,
            "bag_size": self.bag_size,
            "pi": self.pi,
            "max_iters": self.max_iters,
            "neg_samples": self.neg_samples,
        }


def figure2_config(trials: int = 50, seed: int = 1, workers: int = 1) -> BenchmarkConfig:
    """Ten planted communities of 30 nodes, half strong and half weak.

    The detector is provisioned at K=9, one below the planted count: the
    benchmark should exercise prioritization of imperfect covers, and a
    detector that knows the true community count resolves this
    configuration nearly perfectly, leaving nothing to rank.
    """
    spec = SbmSpec(sizes=(30,) * 10, p_in=(0.6,) * 5 + (0.2,) * 5, p_out=0.02)
    return BenchmarkConfig(spec=spec, trials=trials, seed=seed, workers=workers, detect_k=9)


@dataclass(eq=False)
class BenchmarkReport:
    config: dict
    trial_rows: list[dict]
    failures: list[dict]
    summary: dict
    runtime_seconds: float

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "trials": self.trial_rows,
            "failures": self.failures,
            "summary": self.summary,
            "runtime_seconds": self.runtime_seconds,
        }


def _run_trial(config: BenchmarkConfig, index: int) -> dict:
    tseed = derive_seed(config.seed, "trial", index)
    g, truth = generate_sbm(config.spec, seed=derive_seed(tseed, "sbm"))
    if config.detection == "fit":
        k = config.detect_k or len(config.spec.sizes)
        model = fit_affiliation(
            g,
            k,
            max_iters=config.fit_iters,
            seed=derive_seed(tseed, "detect"),
            restarts=config.fit_restarts,
        )
        cover = extract_cover(model)
    else:
        cover = flip_cover(truth, config.flip_fraction, g.n, seed=derive_seed(tseed, "flip"))
        model = empirical_model(g, cover)
    if len(cover) < 3:
        raise BenchmarkError(f"detection produced only {len(cover)} communities")

    baseline_kinds = tuple(m for m in config.methods if m in BASELINE_KINDS)
    table = compute_metric_table(
        model,
        g,
        cover,
        alpha0=config.alpha,
        k=config.neg_samples,
        seed=derive_seed(tseed, "metrics"),
        baselines=baseline_kinds,
    )
    if len(table) < 3:
        raise BenchmarkError(f"only {len(table)} communities were scorable")

    gold = gold_standard_ranking(cover, truth)
    gold_ranks = to_ranked_list(gold.accuracies[table.community_ids])
    params = AggregationParams(
        bag_size=config.bag_size, pi=config.pi, max_iters=config.max_iters
    )
    row: dict = {
        "trial": index,
        "n_detected": len(cover),
        "n_scored": len(table),
        "rho": {},
        "notes": {},
    }
    for method in config.methods:
        try:
            if method == "bayes":
                prio = bayes_aggregate(table, params)
                row["bayes_iterations"] = prio.iterations
                row["bayes_converged"] = prio.converged
                ranks = prio.ranks
            elif method in BASELINE_AGGREGATORS:
                ranks = baseline_aggregate(
                    method, table, seed=derive_seed(tseed, "aggregate", method)
                ).ranks
            else:
                ranks = to_ranked_list(table.scores[method])
            row["rho"][method] = spearman(ranks, gold_ranks)
        except UndefinedCorrelationError as exc:
            row["rho"][method] = None
            row["notes"][method] = str(exc)
    return row


def run_benchmark(config: BenchmarkConfig) -> BenchmarkReport:
    """Run independent seeded trials and summarize per-method correlations.

    Trials that fail (empty or too-small detected cover) are recorded and
    excluded; more than 20% failures aborts with a benchmark error. The
    report is identical for any worker count.
    """
    start = time.perf_counter()

    def attempt(i: int):
        try:
            return _run_trial(config, i)
        except CommprioError as exc:
            return {"trial": i, "error": f"{type(exc).__name__}: {exc}"}

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(attempt, range(config.trials)))
    else:
        outcomes = [attempt(i) for i in range(config.trials)]

    rows = [o for o in outcomes if "error" not in o]
    failures = [o for o in outcomes if "error" in o]
    if len(failures) > 0.2 * config.trials:
        raise BenchmarkError(
            f"{len(failures)} of {config.trials} trials failed: "
            + "; ".join(f["error"] for f in failures[:3])
        )
    summary: dict = {}
    for method in config.methods:
        vals = np.array([r["rho"][method] for r in rows if r["rho"].get(method) is not None])
        entry: dict = {"n": int(vals.size)}
        if vals.size:
            entry["mean"] = float(vals.mean())
            entry["ci95"] = (
                float(1.96 * vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
            )
        summary[method] = entry
    if any("bayes_iterations" in r for r in rows):
        iters = np.array([r["bayes_iterations"] for r in rows if "bayes_iterations" in r])
        conv = np.array([r["bayes_converged"] for r in rows if "bayes_converged" in r])
        summary["bayes_convergence"] = {
            "max_iterations": int(iters.max()),
            "mean_iterations": float(iters.mean()),
            "converged_fraction": float(conv.mean()),
        }
    return BenchmarkReport(
        config=config.to_dict(),
        trial_rows=rows,
        failures=failures,
        summary=summary,
        runtime_seconds=time.perf_counter() - start,
    )


def format_trial_tsv(report: BenchmarkReport, methods) -> str:
    header = ["trial", "n_detected", "n_scored"] + list(methods)
    header += ["bayes_iterations", "bayes_converged"]
    lines = ["\t".join(header)]
    for row in report.trial_rows:
        cells = [str(row["trial"]), str(row["n_detected"]), str(row["n_scored"])]
        for m in methods:
            rho = row["rho"].get(m)
            cells.append("NA" if rho is None else fmt_float(rho))
        cells.append(str(row.get("bayes_iterations", "NA")))
        cells.append(str(row.get("bayes_converged", "NA")))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
