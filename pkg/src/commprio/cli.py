"""Command-line surface: generate, detect, prioritize, evaluate, benchmark.

Every subcommand is deterministic given its flags and --seed, independent of
--workers. Exit codes: 0 success (including capped-but-flagged iteration),
1 usage/validation, 2 I/O, 3 computation. All outputs are written via
temp-then-rename, so a failed run leaves no partial files.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .benchmark import (
    BenchmarkConfig,
    SbmSpec,
    figure2_config,
    format_trial_tsv,
    generate_sbm,
    gold_standard_ranking,
    run_benchmark,
    spearman,
)
from .errors import (
    CommprioError,
    InputMismatchError,
    InvalidParameterError,
    ParseError,
    ValidationError,
)
from .graph import Cover, format_cover, parse_cover, read_cover, read_edge_list
from .metrics import BASELINE_KINDS, compute_metric_table, format_metric_table
from .models import (
    empirical_model,
    extract_cover,
    fit_affiliation,
    format_affiliation,
    read_affiliation,
)
from .ranking import (
    AggregationParams,
    baseline_aggregate,
    bayes_aggregate,
    format_prioritization,
    to_ranked_list,
)
from .util import atomic_write_text, fmt_float


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 instead of argparse's 2
        raise ValidationError(message)


def _parse_counted(text: str, value_type, flag: str):
    """Parse '30x10' / '0.6x5,0.2x5' style repeated-value lists."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "x" in part:
            val_s, _, rep_s = part.partition("x")
            try:
                val = value_type(val_s)
                rep = int(rep_s)
            except ValueError as exc:
                raise ValidationError(f"{flag}: cannot parse segment {part!r}") from exc
            out.extend([val] * rep)
        else:
            try:
                out.append(value_type(part))
            except ValueError as exc:
                raise ValidationError(f"{flag}: cannot parse segment {part!r}") from exc
    if not out:
        raise ValidationError(f"{flag}: no values given")
    return out


def _check_prob(value: float, flag: str) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{flag} must be in [0, 1], got {value}")
    return value


def _log(msg: str):
    print(msg)


def cmd_generate(args) -> int:
    if args.sizes is None:
        raise ValidationError("--sizes is required")
    sizes = _parse_counted(args.sizes, int, "--sizes")
    p_in = _parse_counted(args.p_in, float, "--p-in") if args.p_in else [0.5]
    if len(p_in) == 1:
        p_in = p_in * len(sizes)
    for p in p_in:
        _check_prob(p, "--p-in")
    _check_prob(args.p_out, "--p-out")
    if len(p_in) != len(sizes):
        raise ValidationError(f"--p-in gives {len(p_in)} values for {len(sizes)} communities")
    spec = SbmSpec(sizes=tuple(sizes), p_in=tuple(p_in), p_out=args.p_out)
    g, truth = generate_sbm(spec, seed=args.seed)
    edge_lines = ["# generated stochastic block model edge list"]
    eu, ev = g.edge_array()
    edge_lines += [f"{g.labels[int(u)]}\t{g.labels[int(v)]}" for u, v in zip(eu, ev)]
    atomic_write_text(args.edges_out, "\n".join(edge_lines) + "\n")
    atomic_write_text(args.truth_out, format_cover(truth, g.labels))
    _log(f"generated n={g.n} m={g.m} communities={len(truth)}")
    _log(f"wrote {args.edges_out} and {args.truth_out}")
    return 0


def cmd_detect(args) -> int:
    if args.communities < 1:
        raise ValidationError("-K/--communities must be >= 1")
    g, report = read_edge_list(args.edges)
    _log(
        f"loaded n={g.n} m={g.m} "
        f"(dropped {report.self_loops_dropped} self-loops, {report.duplicates_dropped} duplicates)"
    )
    model = fit_affiliation(
        g, args.communities, max_iters=args.max_iters, seed=args.seed, restarts=args.restarts
    )
    cover = extract_cover(model)
    sizes = cover.sizes()
    atomic_write_text(args.cover_out, format_cover(cover, g.labels))
    atomic_write_text(args.model_out, format_affiliation(model, g.labels))
    _log(
        f"detected {len(cover)} communities "
        f"(size min={sizes.min()} median={float(np.median(sizes)):g} max={sizes.max()})"
    )
    _log(f"wrote {args.cover_out} and {args.model_out}")
    return 0


def _load_supervision(path) -> set[int]:
    with open(path, "r", encoding="utf-8") as fh:
        ids = set()
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                ids.add(int(line.split()[0]))
            except ValueError as exc:
                raise ParseError(f"{path}:{ln}: expected a community id") from exc
    return ids


def cmd_prioritize(args) -> int:
    if (args.model is None) == (args.cover is None):
        raise ValidationError("exactly one of --model or --cover is required")
    _check_prob(args.alpha, "--alpha")
    g, report = read_edge_list(args.edges)
    _log(
        f"loaded n={g.n} m={g.m} "
        f"(dropped {report.self_loops_dropped} self-loops, {report.duplicates_dropped} duplicates)"
    )
    if args.model is not None:
        model = read_affiliation(args.model, g)
        cover = extract_cover(model)
        _log(f"extracted {len(cover)} communities from the affiliation model")
    else:
        cover = read_cover(args.cover, g)
        model = empirical_model(g, cover)
        _log(f"loaded cover with {len(cover)} communities")

    k = None if args.neg_samples == "auto" else int(args.neg_samples)
    baselines = tuple(s for s in args.baselines.split(",") if s) if args.baselines else ()
    table = compute_metric_table(
        model,
        g,
        cover,
        alpha0=args.alpha,
        k=k,
        seed=args.seed,
        baselines=baselines,
        workers=args.workers,
    )
    for cid, reason in table.skipped:
        _log(f"skipped community {cid}: {reason}")
    _log(f"scored {len(table)} communities")

    params = AggregationParams(bag_size=args.bag_size, pi=args.pi, max_iters=args.max_iters)
    extras = tuple(s for s in args.extras.split(",") if s) if args.extras else ()
    if args.aggregator == "bayes":
        supervision = _load_supervision(args.supervise) if args.supervise else None
        prio = bayes_aggregate(
            table, params, supervision, extras=extras, clamp_weights=args.clamp_weights
        )
    else:
        if args.supervise:
            raise ValidationError("--supervise only applies to the bayes aggregator")
        prio = baseline_aggregate(
            args.aggregator,
            table,
            extras=extras,
            seed=args.seed,
            footrule_limit=args.footrule_limit,
        )
    atomic_write_text(args.ranking_out, format_prioritization(prio, table))
    diagnostics = prio.diagnostics()
    diagnostics["skipped_communities"] = [
        {"community_id": cid, "reason": reason} for cid, reason in table.skipped
    ]
    diagnostics["seed"] = args.seed
    atomic_write_text(args.diagnostics_out, json.dumps(diagnostics, indent=2, sort_keys=True) + "\n")
    if args.table_out:
        atomic_write_text(args.table_out, format_metric_table(table))
    _log(
        f"aggregated with {prio.method}: iterations={prio.iterations} converged={prio.converged}"
    )
    _log(f"wrote {args.ranking_out} and {args.diagnostics_out}")
    return 0


def _read_label_cover(path) -> list[np.ndarray]:
    """Cover file as label sets, independent of any graph."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "\t" not in line:
                raise ParseError(f"{path}:{ln}: expected 'id<TAB>label ...'")
            _, _, rest = line.partition("\t")
            labels = rest.split()
            if not labels:
                raise ParseError(f"{path}:{ln}: community has no members")
            out.append(np.unique(np.array(labels)))
    if not out:
        raise ParseError(f"{path}: no communities")
    return out


def _read_ranking(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        try:
            id_col = header.index("community_id")
            rank_col = header.index("rank")
        except ValueError as exc:
            raise ParseError(f"{path}: missing community_id/rank columns") from exc
        ids, ranks = [], []
        for raw in fh:
            if not raw.strip():
                continue
            cells = raw.rstrip("\n").split("\t")
            ids.append(int(cells[id_col]))
            ranks.append(float(cells[rank_col]))
    if not ids:
        raise ParseError(f"{path}: no ranking rows")
    return np.array(ids), np.array(ranks)


def cmd_evaluate(args) -> int:
    from .benchmark import jaccard  # label-space Jaccard works on string arrays

    detected = _read_label_cover(args.cover)
    truth = _read_label_cover(args.truth)
    ids, ranks = _read_ranking(args.ranking)
    if np.any(ids < 0) or np.any(ids >= len(detected)):
        raise InputMismatchError("ranking references community ids outside the cover")
    accuracies = np.array(
        [max(jaccard(detected[int(i)], t) for t in truth) for i in ids]
    )
    gold_ranks = to_ranked_list(accuracies)
    rho = spearman(ranks, gold_ranks)
    result = {
        "spearman": rho,
        "n_communities": int(ids.size),
        "accuracies": {str(int(i)): float(a) for i, a in zip(ids, accuracies)},
    }
    atomic_write_text(args.out, json.dumps(result, indent=2, sort_keys=True) + "\n")
    _log(f"spearman={fmt_float(rho)} over {ids.size} communities")
    _log(f"wrote {args.out}")
    return 0


def _config_from_json(path) -> BenchmarkConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        spec = SbmSpec(
            sizes=tuple(raw["sizes"]),
            p_in=tuple(raw["p_in"]) if isinstance(raw["p_in"], (list, tuple)) else raw["p_in"],
            p_out=raw["p_out"],
        )
    except KeyError as exc:
        raise ValidationError(f"benchmark config missing field {exc}") from exc
    kwargs = {
        key: raw[key]
        for key in (
            "trials",
            "seed",
            "detection",
            "detect_k",
            "fit_iters",
            "fit_restarts",
            "flip_fraction",
            "alpha",
            "bag_size",
            "pi",
            "max_iters",
            "neg_samples",
        )
        if key in raw
    }
    if "methods" in raw:
        kwargs["methods"] = tuple(raw["methods"])
    return BenchmarkConfig(spec=spec, **kwargs)


def cmd_benchmark(args) -> int:
    if args.figure2:
        config = figure2_config(trials=args.trials, seed=args.seed, workers=args.workers)
    elif args.config:
        config = _config_from_json(args.config)
        config.trials = args.trials if getattr(args, "trials_set", False) else config.trials
        config.seed = args.seed if getattr(args, "seed_set", False) else config.seed
        config.workers = args.workers
        config.__post_init__()
    else:
        raise ValidationError("either --figure2 or --config is required")
    if config.trials < 1:
        raise ValidationError("--trials must be >= 1")
    _log(
        f"benchmark: {config.trials} trials, n={config.spec.n}, "
        f"methods={','.join(config.methods)}, detection={config.detection}"
    )
    report = run_benchmark(config)
    atomic_write_text(args.report_out, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    atomic_write_text(args.trials_out, format_trial_tsv(report, config.methods))
    for method in config.methods:
        entry = report.summary[method]
        if "mean" in entry:
            _log(f"  {method}: mean rho={entry['mean']:.4f} ci95={entry['ci95']:.4f} n={entry['n']}")
        else:
            _log(f"  {method}: no defined correlations")
    _log(f"wrote {args.report_out} and {args.trials_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="commprio", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a planted-community benchmark network")
    p.add_argument("--sizes", help="community sizes, e.g. 30x10 or 40,30,30")
    p.add_argument("--p-in", dest="p_in",
                   help="within-community edge probabilities, e.g. 0.6x5,0.2x5 (default 0.5)")
    p.add_argument("--p-out", dest="p_out", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--edges-out", default="edges.tsv")
    p.add_argument("--truth-out", default="ground_truth.tsv")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", help="fit the affiliation detector and extract a cover")
    p.add_argument("--edges", required=True)
    p.add_argument("-K", "--communities", type=int, required=True)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cover-out", default="cover.tsv")
    p.add_argument("--model-out", default="model.tsv")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("prioritize", help="rank a cover's communities")
    p.add_argument("--edges", required=True)
    p.add_argument("--model", help="affiliation model file (from detect)")
    p.add_argument("--cover", help="community file (any detector)")
    p.add_argument("--alpha", type=float, default=0.15)
    p.add_argument("--bag-size", type=int, default=50)
    p.add_argument("--pi", type=float, default=0.05)
    p.add_argument("--max-iters", type=int, default=20)
    p.add_argument("--neg-samples", default="auto", help="boundary samples per member, or 'auto'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument(
        "--aggregator",
        default="bayes",
        choices=("bayes", "quadratic-mean", "borda", "footrule", "pick-a-perm"),
    )
    p.add_argument("--baselines", help=f"extra score columns: {','.join(BASELINE_KINDS)}")
    p.add_argument("--extras", help="computed columns to aggregate alongside the core metrics")
    p.add_argument("--supervise", help="file of known high-quality community ids")
    p.add_argument("--clamp-weights", action="store_true")
    p.add_argument("--footrule-limit", type=int, default=2000)
    p.add_argument("--ranking-out", default="ranking.tsv")
    p.add_argument("--diagnostics-out", default="diagnostics.json")
    p.add_argument("--table-out")
    p.set_defaults(func=cmd_prioritize)

    p = sub.add_parser("evaluate", help="score a ranking against ground truth")
    p.add_argument("--ranking", required=True)
    p.add_argument("--cover", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", default="evaluation.json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="run seeded planted-community trials")
    p.add_argument("--config", help="benchmark config JSON")
    p.add_argument("--figure2", action="store_true", help="preset: 10 planted communities of 30")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report-out", default="benchmark_report.json")
    p.add_argument("--trials-out", default="benchmark_trials.tsv")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        raw = list(sys.argv[1:] if argv is None else argv)
        args = parser.parse_args(raw)
        if getattr(args, "command", None) == "benchmark":
            args.trials_set = "--trials" in raw
            args.seed_set = "--seed" in raw
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except CommprioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
