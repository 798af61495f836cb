import numpy as np
import pytest

from userside.core import walk_counterexample_oracle
from userside.errors import CrawlError
from userside.network import (
    RecommendationNetwork,
    crawl_network,
    default_rank_decay,
    mutual_view,
    personalized_pagerank,
    read_network_tsv,
    transition_matrix,
    undirected_view,
    write_network_tsv,
)


def pentagon_edges():
    """Fixture ground truth recomputed from the closed form, not the oracle."""
    return {i: (((i + 3) % 5) + 1, (i % 5) + 1) for i in range(1, 6)}


class TestCrawl:
    def test_pentagon_crawl_matches_closed_form(self, pentagon_oracle):
        G = crawl_network(pentagon_oracle, range(1, 6))
        assert G.out_edges == pentagon_edges()

    def test_full_crawl_costs_n_accesses(self, pentagon_oracle):
        before = pentagon_oracle.access_count
        crawl_network(pentagon_oracle, range(1, 6))
        assert pentagon_oracle.access_count - before == 5

    def test_empty_crawl(self, pentagon_oracle):
        before = pentagon_oracle.access_count
        G = crawl_network(pentagon_oracle, [])
        assert G.n == 0
        assert pentagon_oracle.access_count == before

    def test_crawl_determinism(self, pentagon_oracle):
        a = crawl_network(pentagon_oracle, range(1, 6))
        b = crawl_network(pentagon_oracle, range(1, 6))
        assert a.out_edges == b.out_edges

    def test_oracle_failure_carries_item(self, pentagon_oracle):
        with pytest.raises(CrawlError) as err:
            crawl_network(pentagon_oracle, [4, 9])
        assert err.value.item == 9


def two_cycle():
    return RecommendationNetwork({1: (2,), 2: (1,)}, K=1)


class TestPersonalizedPagerank:
    def test_two_cycle_matches_closed_form(self):
        # stationary equations: s1 = a + (1-a) s2, s2 = (1-a) s1
        a = 0.15
        s1 = a / (1.0 - (1.0 - a) ** 2)
        s2 = 1.0 - s1
        result = personalized_pagerank(two_cycle(), source=1, restart=a, iters=500)
        assert result.converged
        np.testing.assert_allclose(result.as_dict()[1], s1, atol=1e-9)
        np.testing.assert_allclose(result.as_dict()[2], s2, atol=1e-9)
        assert result.as_dict()[1] > result.as_dict()[2] > 0

    def test_degenerate_restart_rejected(self):
        with pytest.raises(ValueError):
            personalized_pagerank(two_cycle(), source=1, restart=1.0)
        with pytest.raises(ValueError):
            personalized_pagerank(two_cycle(), source=1, restart=0.0)

    def test_pentagon_matches_dense_linear_solve(self, pentagon_oracle):
        G = crawl_network(pentagon_oracle, range(1, 6))
        restart = 0.15
        res = personalized_pagerank(G, source=3, restart=restart, iters=2000,
                                    tol=1e-14)
        # independent oracle: solve (I - (1-a) P) s = a e directly
        P = transition_matrix(G).toarray()
        e = np.zeros(5)
        e[G.index()[3]] = 1.0
        s = np.linalg.solve(np.eye(5) - (1 - restart) * P, restart * e)
        s /= s.sum()
        np.testing.assert_allclose(res.scores, s, atol=1e-10)
        assert abs(res.scores.sum() - 1.0) < 1e-9
        assert (res.scores > 0).all()

    def test_init_invariance(self, pentagon_oracle):
        G = crawl_network(pentagon_oracle, range(1, 6))
        rng = np.random.default_rng(0)
        a = personalized_pagerank(G, 2, iters=3000, tol=1e-14,
                                  init=rng.random(5))
        b = personalized_pagerank(G, 2, iters=3000, tol=1e-14,
                                  init=rng.random(5))
        assert np.abs(a.scores - b.scores).max() < 1e-8

    def test_rank_decay_shapes_one_hop_mass(self):
        G = RecommendationNetwork({1: (2, 3), 2: (3, 1), 3: (1, 2)}, K=2)
        res = personalized_pagerank(G, source=1, iters=500)
        scores = res.as_dict()
        assert scores[2] > scores[3]  # rank-1 successor outweighs rank-2

    def test_default_decay_is_log_discounted(self):
        decay = default_rank_decay(3)
        np.testing.assert_allclose(decay, [1 / np.log2(3), 1 / np.log2(4),
                                           1 / np.log2(5)])

    def test_nonconvergence_flagged(self):
        G = RecommendationNetwork({1: (2,), 2: (1,)}, K=1)
        res = personalized_pagerank(G, source=1, iters=2, tol=1e-16)
        assert not res.converged
        assert abs(res.scores.sum() - 1.0) < 1e-12


class TestUndirectedView:
    def test_pentagon_degrees_match_enumeration(self, pentagon_oracle):
        G = crawl_network(pentagon_oracle, range(1, 6))
        A = undirected_view(G)
        # independent enumeration of the fixture's undirected edge set
        edges = set()
        for i, succ in pentagon_edges().items():
            for j in succ:
                edges.add(frozenset((i, j)))
        degrees = {i: sum(1 for e in edges if i in e) for i in range(1, 6)}
        idx = G.index()
        for i in range(1, 6):
            assert A[idx[i]].getnnz() == degrees[i]
            assert degrees[i] <= 4

    def test_reciprocal_pair_collapses_to_one_edge(self):
        G = RecommendationNetwork({1: (2,), 2: (1,)}, K=1)
        A = undirected_view(G)
        assert A.getnnz() == 2  # one undirected edge, stored symmetrically
        assert (A != A.T).nnz == 0

    def test_idempotent_and_symmetric(self, pentagon_oracle):
        G = crawl_network(pentagon_oracle, range(1, 6))
        A = undirected_view(G)
        assert (A != A.T).nnz == 0
        B = undirected_view(G)
        assert (A != B).nnz == 0

    def test_empty(self):
        G = RecommendationNetwork({}, K=3)
        assert undirected_view(G).getnnz() == 0


class TestMutualView:
    def test_keeps_only_reciprocated_edges(self):
        G = RecommendationNetwork({1: (2, 3), 2: (1, 3), 3: (1, 2)}, K=2)
        A = mutual_view(G)
        assert A.getnnz() == 6  # all three pairs reciprocate

    def test_one_way_edge_dropped(self):
        G = RecommendationNetwork({1: (2, 3), 2: (3, 4), 3: (2, 4), 4: (3, 2)},
                                  K=2)
        A = mutual_view(G)
        idx = G.index()
        assert not A[idx[1], idx[2]]  # 1->2 never reciprocated
        assert A[idx[2], idx[3]]


class TestNetworkTsv:
    def test_round_trip_bit_exact(self, tmp_path, pentagon_oracle):
        G = crawl_network(pentagon_oracle, range(1, 6))
        path = tmp_path / "net.tsv"
        write_network_tsv(G, path)
        H = read_network_tsv(path)
        assert H.out_edges == G.out_edges and H.K == G.K
        write_network_tsv(H, tmp_path / "net2.tsv")
        assert (tmp_path / "net.tsv").read_bytes() == (tmp_path / "net2.tsv").read_bytes()
