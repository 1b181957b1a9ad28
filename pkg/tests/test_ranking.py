import itertools
import math

import numpy as np
import pytest

from commprio import (
    AggregationParams,
    InputMismatchError,
    InvalidParameterError,
    MetricTable,
    SizeLimitError,
    TooFewCommunitiesError,
    baseline_aggregate,
    bayes_aggregate,
    bayes_weight,
    partition_bags,
    to_ranked_list,
    tukey_smooth,
    weighted_aggregate,
)
from commprio.metrics import CORE_METRICS
from commprio.ranking import bag_count, footrule_cost


def make_table(columns):
    n = len(next(iter(columns.values())))
    return MetricTable(
        community_ids=np.arange(n, dtype=np.int64),
        sizes=np.full(n, 5, dtype=np.int64),
        scores={k: np.asarray(v, dtype=float) for k, v in columns.items()},
    )


def table_from_ranks(rank_vectors):
    """Build a table whose metric ranked lists equal the given rank vectors."""
    cols = {}
    for name, ranks in zip(CORE_METRICS, rank_vectors):
        r = np.asarray(ranks, dtype=float)
        cols[name] = (r.size + 1.0 - r) / r.size  # scores in (0, 1], best rank first
    return make_table(cols)


class TestToRankedList:
    def test_simple(self):
        assert list(to_ranked_list([0.9, 0.5, 0.7])) == [1, 3, 2]

    def test_tie_averaging(self):
        assert list(to_ranked_list([0.5, 0.5, 0.1])) == [1.5, 1.5, 3]

    def test_full_tie(self):
        assert list(to_ranked_list([0.2] * 5)) == [3.0] * 5

    @pytest.mark.parametrize("seed", range(6))
    def test_rank_sum_invariant(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 40))
        scores = rng.choice([0.1, 0.25, 0.6, 0.9], size=n)
        ranks = to_ranked_list(scores)
        assert ranks.sum() == pytest.approx(n * (n + 1) / 2)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidParameterError):
            to_ranked_list([0.1, float("nan"), 0.3])


class TestPartitionBags:
    def test_minimum_three_bags(self):
        ranks = to_ranked_list(np.arange(100, dtype=float))
        bags = partition_bags(ranks, AggregationParams(bag_size=50))
        assert bags.max() + 1 == 3  # max(3, 100 // 50) = 3

    def test_even_split(self):
        ranks = to_ranked_list(np.arange(150, dtype=float))
        bags = partition_bags(ranks, AggregationParams(bag_size=50))
        assert list(np.bincount(bags)) == [50, 50, 50]

    def test_overflow_lands_in_last_bag(self):
        ranks = to_ranked_list(np.arange(10, dtype=float))
        bags = partition_bags(ranks, AggregationParams(bag_size=3))
        assert list(np.bincount(bags)) == [3, 3, 4]

    def test_matches_ceiling_formula(self):
        n, b = 10, 3
        ranks = to_ranked_list(np.arange(n, dtype=float)[::-1].copy())
        bags = partition_bags(ranks, AggregationParams(bag_size=3))
        for pos in range(1, n + 1):
            community = int(np.flatnonzero(ranks == pos)[0])
            assert bags[community] == math.ceil(pos * b / n) - 1

    def test_too_few_communities(self):
        with pytest.raises(TooFewCommunitiesError):
            partition_bags(np.array([1.0, 2.0]), AggregationParams())

    def test_ties_placed_by_id_order(self):
        # B = max(3, 4 // 1) = 4 bags; the tied pair splits by ascending id
        ranks = np.array([1.5, 1.5, 3.0, 4.0])
        bags = partition_bags(ranks, AggregationParams(bag_size=1))
        assert list(bags) == [0, 1, 2, 3]


class TestBayesWeight:
    def test_spot_values(self):
        assert bayes_weight(0, 50, 0.05) == pytest.approx(19 / 51, rel=1e-12)
        assert bayes_weight(50, 50, 0.05) == pytest.approx(969.0, rel=1e-12)
        assert bayes_weight(4, 50, 0.05) == pytest.approx(95 / 47, rel=1e-12)

    def test_strictly_increasing_in_overlap(self):
        vals = [bayes_weight(o, 50, 0.05) for o in range(51)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_rejects_bad_inputs(self):
        with pytest.raises(InvalidParameterError):
            bayes_weight(5, 4, 0.05)
        with pytest.raises(InvalidParameterError):
            bayes_weight(1, 4, 0.0)


class TestTukeySmooth:
    def test_constant_unchanged(self):
        assert list(tukey_smooth([2.0, 2.0, 2.0, 2.0])) == [2.0] * 4

    def test_spike_flattened(self):
        assert list(tukey_smooth([1.0, 9.0, 1.0])) == [1.0, 1.0, 1.0]

    def test_monotone_interior_unchanged(self):
        seq = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        out = tukey_smooth(seq)
        assert np.array_equal(out[1:-1], seq[1:-1])

    @pytest.mark.parametrize("seed", range(8))
    def test_idempotent_at_fixed_point(self, seed):
        rng = np.random.default_rng(seed)
        seq = rng.uniform(0.1, 5.0, size=int(rng.integers(3, 20)))
        once = tukey_smooth(seq)
        assert np.array_equal(tukey_smooth(once), once)

    def test_length_preserved(self):
        assert tukey_smooth(np.arange(7, dtype=float)).size == 7

    def test_too_short(self):
        with pytest.raises(InvalidParameterError):
            tukey_smooth([1.0, 2.0])


class TestWeightedAggregate:
    def test_equal_weights_preserve_common_ranking(self):
        ranks = np.array([3.0, 1.0, 2.0])
        lists = {"a": ranks, "b": ranks}
        bags = {"a": np.array([1, 0, 0]), "b": np.array([1, 0, 0])}
        weights = {"a": np.array([2.0, 2.0]), "b": np.array([2.0, 2.0])}
        s = weighted_aggregate(lists, bags, weights)
        assert list(to_ranked_list(s, higher_is_better=False)) == [3, 1, 2]

    def test_equal_weights_reduce_to_mean_rank(self):
        la = np.array([1.0, 2.0, 3.0, 4.0])
        lb = np.array([2.0, 1.0, 4.0, 3.0])
        bags = {"a": np.array([0, 0, 1, 1]), "b": np.array([0, 1, 0, 1])}
        w = {"a": np.array([5.0, 5.0]), "b": np.array([5.0, 5.0])}
        s = weighted_aggregate({"a": la, "b": lb}, bags, w)
        assert np.allclose(s, (la + lb) / 2.0)

    def test_vanishing_weight_list_contributes_nothing(self):
        la = np.array([1.0, 2.0, 3.0])
        lb = np.array([3.0, 2.0, 1.0])
        bags = {"a": np.array([0, 0, 1]), "b": np.array([0, 0, 1])}
        s = weighted_aggregate(
            {"a": la, "b": lb},
            bags,
            {"a": np.array([10.0, 10.0]), "b": np.array([1e-12, 1e-12])},
        )
        assert np.allclose(s, la, atol=1e-9)

    def test_reversed_lists_fully_tie(self):
        la = np.array([1.0, 2.0, 3.0])
        lb = np.array([3.0, 2.0, 1.0])
        bags = {"a": np.zeros(3, dtype=int), "b": np.zeros(3, dtype=int)}
        w = {"a": np.array([math.e]), "b": np.array([math.e])}
        s = weighted_aggregate({"a": la, "b": lb}, bags, w)
        assert np.allclose(s, 2.0)
        assert list(to_ranked_list(s, higher_is_better=False)) == [2.0, 2.0, 2.0]

    def test_mismatched_sets_rejected(self):
        with pytest.raises(InputMismatchError):
            weighted_aggregate(
                {"a": np.array([1.0, 2.0]), "b": np.array([1.0, 2.0, 3.0])},
                {"a": np.zeros(2, dtype=int), "b": np.zeros(3, dtype=int)},
                {"a": np.array([2.0]), "b": np.array([2.0])},
            )


class TestBayesAggregate:
    @pytest.mark.parametrize("n", [9, 10, 23])
    def test_agreeing_lists_converge_immediately(self, n):
        common = to_ranked_list(np.arange(n, dtype=float)[::-1].copy())
        table = table_from_ranks([common] * 4)
        prio = bayes_aggregate(table, AggregationParams(bag_size=3))
        assert prio.converged and prio.iterations == 1
        assert np.array_equal(prio.ranks, common)

    def test_minimum_size_runs(self):
        table = make_table({m: np.array([0.9, 0.5, 0.1]) for m in CORE_METRICS})
        prio = bayes_aggregate(table, AggregationParams(bag_size=1, max_iters=20))
        assert prio.iterations <= 20
        assert sorted(prio.ranks.tolist()) == [1.0, 2.0, 3.0]

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 5])
    def test_supervised_replays_final_update(self, seed):
        # on converged runs, supervising with the final top set replays the
        # last unsupervised weight update exactly
        rng = np.random.default_rng(seed)
        table = make_table({m: rng.random(12) for m in CORE_METRICS})
        params = AggregationParams(bag_size=4, pi=0.25)
        prio = bayes_aggregate(table, params)
        assert prio.converged and prio.iterations > 1
        t = max(1, math.ceil(params.pi * 12))
        order = np.lexsort((table.community_ids, prio.ranks))
        top = set(table.community_ids[order[:t]].tolist())
        sup = bayes_aggregate(table, params, supervision=top)
        assert np.array_equal(sup.ranks, prio.ranks)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(3)
        cols = {m: rng.random(15) for m in CORE_METRICS}
        table = make_table(cols)
        warped = dict(cols)
        warped["density"] = np.exp(4.0 * cols["density"]) - 0.5
        prio_a = bayes_aggregate(table, AggregationParams(bag_size=5))
        prio_b = bayes_aggregate(make_table(warped), AggregationParams(bag_size=5))
        assert np.array_equal(prio_a.ranks, prio_b.ranks)
        assert prio_a.iterations == prio_b.iterations

    def test_terminates_within_cap(self):
        rng = np.random.default_rng(11)
        for seed in range(10):
            table = make_table({m: np.random.default_rng(seed + 60).random(10) for m in CORE_METRICS})
            prio = bayes_aggregate(table, AggregationParams(max_iters=20))
            assert prio.iterations <= 20

    def test_supervision_unknown_id_rejected(self):
        table = make_table({m: np.array([0.5, 0.2, 0.9, 0.4]) for m in CORE_METRICS})
        with pytest.raises(InputMismatchError):
            bayes_aggregate(table, supervision={99})

    def test_supervision_empty_rejected(self):
        table = make_table({m: np.array([0.5, 0.2, 0.9, 0.4]) for m in CORE_METRICS})
        with pytest.raises(InvalidParameterError):
            bayes_aggregate(table, supervision=set())

    def test_extra_columns_participate(self):
        rng = np.random.default_rng(5)
        cols = {m: rng.random(9) for m in CORE_METRICS}
        cols["oracle"] = np.arange(9, dtype=float)
        table = make_table(cols)
        with_extra = bayes_aggregate(table, AggregationParams(bag_size=3), extras=("oracle",))
        assert "oracle" in with_extra.params["lists"]

    def test_rank_sum_invariant(self):
        rng = np.random.default_rng(9)
        table = make_table({m: rng.random(23) for m in CORE_METRICS})
        prio = bayes_aggregate(table)
        assert prio.ranks.sum() == pytest.approx(23 * 24 / 2)


class TestBaselineAggregate:
    def test_unanimity(self):
        common = to_ranked_list(np.arange(6, dtype=float)[::-1].copy())
        table = table_from_ranks([common] * 4)
        for kind in ("quadratic-mean", "borda", "footrule", "pick-a-perm"):
            prio = baseline_aggregate(kind, table, seed=3)
            assert np.array_equal(prio.ranks, common), kind

    def test_borda_positions(self):
        # lists [A,B,C] and [B,A,C] -> mean positions 1.5, 1.5, 3
        ra = np.array([1.0, 2.0, 3.0])
        rb = np.array([2.0, 1.0, 3.0])
        table = table_from_ranks([ra, rb, ra, rb])
        prio = baseline_aggregate("borda", table)
        assert list(prio.ranks) == [1.5, 1.5, 3.0]

    def test_footrule_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for n in (3, 5, 7):
            rank_lists = {
                m: to_ranked_list(rng.random(n)) for m in CORE_METRICS
            }
            table = table_from_ranks([rank_lists[m] for m in CORE_METRICS])
            prio = baseline_aggregate("footrule", table)
            got_cost = footrule_cost(rank_lists, prio.scores)
            best = min(
                footrule_cost(rank_lists, np.array(perm, dtype=float))
                for perm in itertools.permutations(range(1, n + 1))
            )
            assert got_cost == pytest.approx(best)

    def test_footrule_reversed_pair_cost(self):
        ra = np.array([1.0, 2.0, 3.0])
        rb = np.array([3.0, 2.0, 1.0])
        table = table_from_ranks([ra, rb, ra, rb])
        prio = baseline_aggregate("footrule", table)
        lists = {m: r for m, r in zip(CORE_METRICS, [ra, rb, ra, rb])}
        # per reversed pair of lists the best achievable displacement is 4
        assert footrule_cost(lists, prio.scores) == pytest.approx(8.0)

    def test_footrule_size_limit(self):
        rng = np.random.default_rng(0)
        table = make_table({m: rng.random(12) for m in CORE_METRICS})
        with pytest.raises(SizeLimitError, match="10"):
            baseline_aggregate("footrule", table, footrule_limit=10)

    def test_pick_a_perm_returns_an_input(self):
        rng = np.random.default_rng(8)
        table = make_table({m: rng.random(11) for m in CORE_METRICS})
        prio = baseline_aggregate("pick-a-perm", table, seed=5)
        inputs = [to_ranked_list(table.scores[m]).tolist() for m in CORE_METRICS]
        assert prio.ranks.tolist() in inputs

    def test_unknown_kind(self):
        table = make_table({m: np.array([0.1, 0.2, 0.3]) for m in CORE_METRICS})
        with pytest.raises(InvalidParameterError):
            baseline_aggregate("median", table)


class TestBagCount:
    def test_examples(self):
        assert bag_count(100, 50) == 3
        assert bag_count(150, 50) == 3
        assert bag_count(10, 3) == 3
        assert bag_count(500, 50) == 10
