import math

import numpy as np
import pytest

from userside.datasets import (
    GroupRule,
    apply_group_rule,
    ingest_adult,
    ingest_movielens,
    kcore,
    make_split,
)
from userside.errors import IngestError
from userside.evaluation import (
    BenchmarkDataset,
    derive_seed,
    label_accuracy,
    ndcg_at_k,
    recall_at_k,
    run_benchmark,
)
from userside.core import catalog_from_groups
from userside.providers import InteractionLog, KnnProvider, train_bpr, BprConfig
from userside.synth import synthesize_adult, synthesize_movielens


@pytest.fixture(scope="module")
def mini_movielens(tmp_path_factory):
    directory = tmp_path_factory.mktemp("ml")
    synthesize_movielens(directory, n_users=40, n_items=60, n_ratings=1200, seed=1)
    return directory


class TestIngestMovielens:
    def test_catalog_size_matches_item_file(self, mini_movielens):
        log, catalog = ingest_movielens(mini_movielens)
        assert catalog.n == 60
        assert len(log) > 0
        assert catalog.meta_of(1)["title"].startswith("Movie")

    def test_oldness_rule_protects_pre_threshold(self, mini_movielens):
        log, catalog = ingest_movielens(mini_movielens)
        cat = apply_group_rule(catalog, GroupRule("year-threshold", 1990))
        for item in cat.items:
            year = cat.meta_of(item)["year"]
            assert (cat.group_of(item) == 1) == (year < 1990)
        assert cat.group_names == ("other", "protected")

    def test_popularity_rule_protects_rare_items(self, mini_movielens):
        log, catalog = ingest_movielens(mini_movielens)
        cat = apply_group_rule(catalog, GroupRule("interaction-count-threshold", 12),
                               log=log)
        counts = log.item_counts(cat.n)
        for item in cat.items:
            assert (cat.group_of(item) == 1) == (counts[item - 1] < 12)

    def test_year_distance_rule_needs_source(self, mini_movielens):
        log, catalog = ingest_movielens(mini_movielens)
        with pytest.raises(ValueError):
            apply_group_rule(catalog, GroupRule("year-distance", 10))
        cat = apply_group_rule(catalog, GroupRule("year-distance", 10), source=1)
        y1 = cat.meta_of(1)["year"]
        for item in cat.items:
            far = abs(cat.meta_of(item)["year"] - y1) > 10
            assert (cat.group_of(item) == 1) == far

    def test_malformed_row_carries_line_number(self, tmp_path):
        (tmp_path / "u.item").write_text("1|Movie (1990)|01-Jan-1990||u|0\n")
        (tmp_path / "u.data").write_text("1\t1\t5\t100\nbroken row\n")
        with pytest.raises(IngestError, match="line 2"):
            ingest_movielens(tmp_path)


class TestIngestAdult:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "adult.data"
        synthesize_adult(path, n_rows=50, seed=0)
        records = ingest_adult(path)
        assert len(records) == 50
        assert set(records[0]) >= {"age", "education_num", "capital_gain", "sex",
                                   "income"}

    def test_bad_field_count(self, tmp_path):
        path = tmp_path / "bad.data"
        path.write_text("1,2,3\n")
        with pytest.raises(IngestError, match="line 1"):
            ingest_adult(path)


def reference_kcore(log, k):
    """Single-removal peeling: provably order-independent fixed point."""
    rows = list(zip(log.users.tolist(), log.items.tolist()))
    keep = set(range(len(rows)))
    changed = True
    while changed:
        changed = False
        from collections import Counter

        u_deg = Counter(rows[r][0] for r in keep)
        i_deg = Counter(rows[r][1] for r in keep)
        for r in sorted(keep):
            if u_deg[rows[r][0]] < k or i_deg[rows[r][1]] < k:
                keep.remove(r)
                changed = True
                break
    return sorted(keep)


class TestKcore:
    def test_everything_above_k_unchanged(self):
        users = np.repeat(np.arange(1, 4), 3)
        items = np.tile(np.arange(1, 4), 3)
        log = InteractionLog(users, items)
        out = kcore(log, 3)
        assert len(out) == 9

    def test_star_collapses_to_empty(self):
        log = InteractionLog(np.ones(20, dtype=int), np.arange(1, 21))
        with pytest.warns(UserWarning, match="empty"):
            out = kcore(log, 10)
        assert len(out) == 0

    def test_complete_bipartite_12x12_survives(self):
        users = np.repeat(np.arange(1, 13), 12)
        items = np.tile(np.arange(1, 13), 12)
        out = kcore(InteractionLog(users, items), 10)
        assert len(out) == 144

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_reference_peeling(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(10, 60))
        log = InteractionLog(rng.integers(1, 9, size=m), rng.integers(1, 9, size=m))
        mine = kcore(log, 3)
        ref_rows = reference_kcore(log, 3)
        ref = {(int(log.users[r]), int(log.items[r])) for r in ref_rows}
        got = set(zip(mine.users.tolist(), mine.items.tolist()))
        assert got == ref


class TestMakeSplit:
    def test_protocol_example(self):
        log = InteractionLog(np.array([7, 7, 7]), np.array([1, 2, 3]),
                             np.array([1, 2, 3]))
        split = make_split(log)
        assert split.test[7] == frozenset({3})
        assert split.source_item[7] == 2
        assert set(split.train.items.tolist()) == {1, 2}

    def test_single_interaction_users_dropped(self):
        log = InteractionLog(np.array([1, 2, 2]), np.array([5, 6, 7]),
                             np.array([1, 1, 2]))
        with pytest.warns(UserWarning, match="dropped 1 users"):
            split = make_split(log)
        assert 1 not in split.test
        assert split.source_item[2] == 6

    def test_deterministic_without_timestamps(self):
        log = InteractionLog(np.array([1, 1, 1, 2, 2]),
                             np.array([3, 4, 5, 1, 2]))
        a = make_split(log, seed=5)
        b = make_split(log, seed=5)
        assert a.test == b.test and a.source_item == b.source_item

    def test_source_stays_in_train(self):
        log = InteractionLog(np.array([1, 1, 1]), np.array([4, 2, 9]),
                             np.array([5, 9, 30]))
        split = make_split(log)
        assert split.source_item[1] in split.train.items.tolist()


def brute_ndcg(rec, relevant, K):
    """Definition-level oracle: explicit DCG / IDCG terms."""
    rec = list(rec)[:K]
    gains = [1.0 if item in relevant else 0.0 for item in rec]
    dcg = sum(g / math.log2(i + 2) for i, g in enumerate(gains))
    ideal = sorted([1.0] * min(len(relevant), K) + [0.0] * K, reverse=True)[:K]
    idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal))
    return dcg / idcg


def brute_recall(rec, relevant, K):
    hit = sum(1 for item in set(list(rec)[:K]) if item in relevant)
    return hit / min(len(relevant), K)


class TestMetrics:
    def test_single_relevant_at_rank_one(self):
        assert ndcg_at_k([5, 2, 3], {5}, K=3) == 1.0

    def test_single_relevant_at_rank_two(self):
        got = ndcg_at_k([2, 5, 3], {5}, K=3)
        assert abs(got - 1 / math.log2(3)) < 1e-12
        assert abs(got - 0.6309) < 1e-4

    def test_no_relevant_in_list(self):
        assert ndcg_at_k([1, 2, 3], {9}, K=3) == 0.0

    def test_empty_relevant_rejected(self):
        with pytest.raises(ValueError):
            ndcg_at_k([1], set(), K=1)
        with pytest.raises(ValueError):
            recall_at_k([1], set(), K=1)

    def test_recall_values(self):
        assert recall_at_k([1, 2], {1, 2}, K=2) == 1.0
        assert recall_at_k([1, 3], {1, 2}, K=2) == 0.5
        assert recall_at_k([3, 4], {1, 2}, K=2) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_metrics_match_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(200):
            K = int(rng.integers(1, 12))
            rec = rng.choice(50, size=rng.integers(1, 15), replace=False) + 1
            relevant = set((rng.choice(50, size=rng.integers(1, 10),
                                       replace=False) + 1).tolist())
            assert abs(ndcg_at_k(rec, relevant, K)
                       - brute_ndcg(rec, relevant, K)) < 1e-12
            assert abs(recall_at_k(rec, relevant, K)
                       - brute_recall(rec, relevant, K)) < 1e-12

    def test_label_accuracy(self):
        catalog = catalog_from_groups([0] * 10,
                                      labels=tuple("aaaaabbbbb"))
        assert label_accuracy([1, 2, 3], 4, catalog) == 1.0
        assert label_accuracy([6, 7, 8], 4, catalog) == 0.0
        assert label_accuracy([1, 2, 6, 7], 3, catalog) == 0.5


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    directory = tmp_path_factory.mktemp("tiny")
    synthesize_movielens(directory, n_users=25, n_items=90, n_ratings=700,
                         seed=3)
    log, catalog = ingest_movielens(directory)
    catalog = apply_group_rule(catalog, GroupRule("year-threshold", 1990))
    split = make_split(log, seed=0)
    factors = train_bpr(split.train, BprConfig(factors=8, epochs=15, seed=0),
                        n_items=catalog.n)
    provider = KnnProvider(factors, 6, metric="inner-product")
    return BenchmarkDataset(name="tiny", kind="ranking", catalog=catalog,
                            provider=provider, split=split)


class TestRunBenchmark:
    def test_deterministic_given_seed(self, tiny_dataset):
        a = run_benchmark(tiny_dataset, ("consul", "privatewalk"), K=6, tau=2,
                          seed=4, max_sources=10)
        b = run_benchmark(tiny_dataset, ("consul", "privatewalk"), K=6, tau=2,
                          seed=4, max_sources=10)
        assert a.to_payload() == b.to_payload()
        assert a.to_tsv() == b.to_tsv()

    def test_fairness_audit_counts_no_violations_for_sound_methods(self, tiny_dataset):
        report = run_benchmark(tiny_dataset,
                               ("consul", "privatewalk", "privaterank", "oracle"),
                               K=6, tau=3, seed=0, max_sources=8)
        for row in report.rows:
            assert row.fairness_violations == 0

    def test_privaterank_access_equals_catalog_size(self, tiny_dataset):
        report = run_benchmark(tiny_dataset, ("privaterank",), K=6, tau=0,
                               seed=0, max_sources=5)
        assert report.row("privaterank").mean(
            report.row("privaterank").access_sum) == tiny_dataset.catalog.n

    def test_oracle_access_is_infinite(self, tiny_dataset):
        report = run_benchmark(tiny_dataset, ("oracle",), K=6, tau=0, seed=0,
                               max_sources=5)
        assert report.to_payload()["methods"][0]["accesses"] == "inf"

    def test_infeasible_tau_fails_before_running(self, tiny_dataset):
        from userside.errors import InfeasibleTauError

        with pytest.raises(InfeasibleTauError):
            run_benchmark(tiny_dataset, ("consul",), K=6, tau=5, seed=0)


def test_derive_seed_is_stable():
    assert derive_seed(1, "consul", 42) == derive_seed(1, "consul", 42)
    assert derive_seed(1, "consul", 42) != derive_seed(2, "consul", 42)
