import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from userside.core import (
    GroupCounter,
    TableOracle,
    catalog_from_groups,
    check_feasibility,
    counter_add,
    fair_insert_check,
    oracle_query,
)
from userside.errors import InfeasibleTauError, UnknownGroupError, UnknownItemError


class TestFairInsertCheck:
    def test_fresh_counter_allows_first_item(self):
        c = GroupCounter(2, tau=5)
        assert fair_insert_check(c, tau=5, K=10, list_len=0, group=0) is True

    def test_saturated_group_blocks_when_other_group_starves(self):
        c = GroupCounter(2, tau=5)
        for _ in range(5):
            c.add(0)
        # 5 slots left, all owed to group 1: another group-0 item is unsafe
        assert fair_insert_check(c, tau=5, K=10, list_len=5, group=0) is False

    def test_boundary_slot_for_owed_group_passes(self):
        c = GroupCounter(2, tau=5)
        for _ in range(5):
            c.add(0)
        for _ in range(4):
            c.add(1)
        assert fair_insert_check(c, tau=5, K=10, list_len=9, group=1) is True

    def test_unknown_group_rejected(self):
        c = GroupCounter(2, tau=1)
        with pytest.raises(UnknownGroupError):
            fair_insert_check(c, tau=1, K=5, list_len=0, group=7)

    def test_full_list_rejected(self):
        c = GroupCounter(2, tau=0)
        with pytest.raises(ValueError):
            fair_insert_check(c, tau=0, K=3, list_len=3, group=0)


class TestCounterAdd:
    def test_add_below_tau_reduces_deficit(self):
        c = GroupCounter(1, tau=2)
        assert c.deficit_total == 2
        counter_add(c, 0)
        assert c.counts == [1]
        assert c.deficit_total == 1

    def test_add_at_tau_keeps_deficit(self):
        c = GroupCounter(1, tau=2)
        c.add(0).add(0)
        assert c.deficit_total == 0
        counter_add(c, 0)
        assert c.counts == [3]
        assert c.deficit_total == 0

    def test_add_drains_last_unit(self):
        c = GroupCounter(2, tau=1)
        c.add(0)
        assert c.deficit_total == 1
        c.add(1)
        assert c.deficit_total == 0


@given(
    n_groups=st.integers(1, 6),
    tau=st.integers(0, 8),
    K=st.integers(1, 30),
    adds=st.lists(st.integers(0, 5), max_size=60),
    group=st.integers(0, 5),
)
@settings(max_examples=300, deadline=None)
def test_cached_deficit_matches_scratch_recomputation(n_groups, tau, K, adds, group):
    c = GroupCounter(n_groups, tau)
    for g in adds:
        c.add(g % n_groups)
    assert c.deficit_total == c.recomputed_deficit()
    group %= n_groups
    list_len = min(sum(1 for _ in adds), K - 1)
    expected = sum(
        max(0, tau - c.counts[a]) for a in range(n_groups) if a != group
    ) <= K - list_len - 1
    assert fair_insert_check(c, tau, K, list_len, group) is expected


class TestOracleAccessCounting:
    def test_repeat_query_in_one_call_costs_one_access(self, pentagon_oracle):
        session = pentagon_oracle.session()
        before = pentagon_oracle.access_count
        assert oracle_query(session, 3) == (2, 4)
        assert oracle_query(session, 3) == (2, 4)
        assert pentagon_oracle.access_count - before == 1
        assert session.accesses == 1

    def test_distinct_pages_cost_one_each(self, pentagon_oracle):
        session = pentagon_oracle.session()
        oracle_query(session, 3)
        oracle_query(session, 1)
        assert session.accesses == 2
        assert session.pages == [3, 1]

    def test_fresh_call_pays_again(self, pentagon_oracle):
        before = pentagon_oracle.access_count
        pentagon_oracle.session().query(3)
        pentagon_oracle.session().query(3)
        assert pentagon_oracle.access_count - before == 2

    def test_out_of_range_item(self, pentagon_oracle):
        with pytest.raises(UnknownItemError):
            pentagon_oracle.session().query(6)

    def test_determinism_over_repeated_queries(self, pentagon_oracle):
        for item in range(1, 6):
            assert pentagon_oracle.session().query(item) == pentagon_oracle.session().query(item)


class TestTableOracle:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            TableOracle({1: (1, 2)})

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            TableOracle({1: (2, 2)})

    def test_rejects_history_overlap(self):
        with pytest.raises(ValueError):
            TableOracle({1: (2, 3)}, history=frozenset({3}))


class TestCatalog:
    def test_group_ids_must_be_dense(self):
        with pytest.raises(UnknownGroupError):
            catalog_from_groups([0, 3], n_groups=2)

    def test_group_lookup_and_sizes(self):
        cat = catalog_from_groups([0, 1, 1, 0, 1])
        assert cat.group_of(2) == 1
        assert cat.group_sizes().tolist() == [2, 3]
        with pytest.raises(UnknownItemError):
            cat.group_of(6)

    def test_feasibility_counts_exclusions(self):
        cat = catalog_from_groups([0, 0, 0, 1, 1, 1])
        check_feasibility(cat, frozenset(), source=1, K=4, tau=2)
        with pytest.raises(InfeasibleTauError) as err:
            check_feasibility(cat, frozenset({4}), source=5, K=4, tau=2)
        assert err.value.group == 1

    def test_feasibility_rejects_large_tau(self):
        cat = catalog_from_groups([0, 1])
        with pytest.raises(InfeasibleTauError):
            check_feasibility(cat, frozenset(), source=1, K=3, tau=2)
