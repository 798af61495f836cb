"""Recommendation networks: crawling, personalized PageRank, symmetrization.

The network is the K-out directed graph observable by an end user: node i
points to the K items on item i's page, in rank order. Edges are unweighted;
rank information survives in the successor order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import ProviderOracle
from .errors import CrawlError, UsersideError


@dataclass(frozen=True)
class RecommendationNetwork:
    """Directed K-out graph; ``out_edges[i]`` is item i's page in rank order."""

    out_edges: dict[int, tuple[int, ...]]
    K: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for node, succ in self.out_edges.items():
            if len(succ) != self.K:
                raise ValueError(f"node {node} has out-degree {len(succ)}, expected {self.K}")
            if node in succ:
                raise ValueError(f"node {node} has a self-loop")
            if len(set(succ)) != len(succ):
                raise ValueError(f"node {node} has duplicate successors")

    @property
    def nodes(self) -> tuple[int, ...]:
        if "nodes" not in self._cache:
            self._cache["nodes"] = tuple(sorted(self.out_edges))
        return self._cache["nodes"]

    @property
    def n(self) -> int:
        return len(self.out_edges)

    def index(self) -> dict[int, int]:
        if "index" not in self._cache:
            self._cache["index"] = {v: i for i, v in enumerate(self.nodes)}
        return self._cache["index"]

    def successors(self, node: int) -> tuple[int, ...]:
        return self.out_edges[node]


def crawl_network(oracle: ProviderOracle, items) -> RecommendationNetwork:
    """Fetch every requested page once, in ascending id order.

    Costs exactly ``len(items)`` oracle accesses; the result is immutable.
    """
    out_edges: dict[int, tuple[int, ...]] = {}
    for item in sorted(set(int(i) for i in items)):
        try:
            out_edges[item] = oracle.query(item)
        except Exception as exc:  # noqa: BLE001 - repackaged with the item id
            raise CrawlError(item, exc) from exc
    return RecommendationNetwork(out_edges, K=oracle.K)


def default_rank_decay(K: int) -> np.ndarray:
    """Rank-k edge weight 1/log2(k+2): one-hop mass preserves page order."""
    return 1.0 / np.log2(np.arange(1, K + 1) + 2.0)


def transition_matrix(G: RecommendationNetwork,
                      rank_decay: np.ndarray | None = None) -> sp.csr_matrix:
    """Column-stochastic walk matrix; entry (j, i) is P(i -> j).

    Successors outside the crawled node set contribute no edge; their weight
    is renormalized over the known successors.
    """
    decay = default_rank_decay(G.K) if rank_decay is None else np.asarray(rank_decay, float)
    if decay.shape != (G.K,) or np.any(decay <= 0):
        raise ValueError(f"rank_decay needs {G.K} positive entries")
    key = ("transition", tuple(np.round(decay, 15)))
    if key in G._cache:
        return G._cache[key]
    index = G.index()
    rows, cols, vals = [], [], []
    for node in G.nodes:
        i = index[node]
        succ = [(index[s], decay[k]) for k, s in enumerate(G.successors(node))
                if s in index]
        total = sum(w for _, w in succ)
        for j, w in succ:
            rows.append(j)
            cols.append(i)
            vals.append(w / total if total > 0 else 0.0)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(G.n, G.n))
    G._cache[key] = P
    return P


@dataclass(frozen=True)
class PageRankResult:
    scores: np.ndarray
    nodes: tuple[int, ...]
    converged: bool
    iterations: int

    def as_dict(self) -> dict[int, float]:
        return {node: float(s) for node, s in zip(self.nodes, self.scores)}


def personalized_pagerank(G: RecommendationNetwork, source: int,
                          restart: float = 0.15,
                          rank_decay: np.ndarray | None = None,
                          iters: int = 100, tol: float = 1e-10,
                          init: np.ndarray | None = None) -> PageRankResult:
    """Restart-walk fixed point where out-mass follows the rank decay.

    Power iteration; dangling mass (successors all uncrawled) teleports back
    to the source. Returns the last iterate with ``converged=False`` when the
    L1 tolerance is not reached within ``iters``.
    """
    if not 0.0 < restart < 1.0:
        raise ValueError(f"restart must lie strictly inside (0, 1), got {restart}")
    index = G.index()
    if source not in index:
        raise UsersideError(f"source {source} is not a crawled node")
    P = transition_matrix(G, rank_decay)
    n = G.n
    e = np.zeros(n)
    e[index[source]] = 1.0
    if init is None:
        s = np.full(n, 1.0 / n)
    else:
        s = np.asarray(init, dtype=np.float64)
        if s.shape != (n,) or np.any(s < 0) or s.sum() == 0:
            raise ValueError("init must be a non-negative vector over the nodes")
        s = s / s.sum()
    converged = False
    it = 0
    for it in range(1, iters + 1):
        spread = P @ s
        lost = 1.0 - spread.sum()  # dangling mass
        nxt = (1.0 - restart) * (spread + lost * e) + restart * e
        delta = float(np.abs(nxt - s).sum())
        s = nxt
        if delta < tol:
            converged = True
            break
    s = s / s.sum()
    return PageRankResult(s, G.nodes, converged, it)


def undirected_view(G: RecommendationNetwork) -> sp.csr_matrix:
    """Symmetric boolean adjacency over ``G.nodes``: {i,j} iff i->j or j->i.

    Edges pointing outside the crawled node set are dropped.
    """
    key = "undirected"
    if key in G._cache:
        return G._cache[key]
    index = G.index()
    rows, cols = [], []
    for node in G.nodes:
        i = index[node]
        for s in G.successors(node):
            j = index.get(s)
            if j is None:
                continue
            rows.extend((i, j))
            cols.extend((j, i))
    n = G.n
    A = sp.csr_matrix((np.ones(len(rows), dtype=bool), (rows, cols)), shape=(n, n))
    A.data[:] = True
    A.setdiag(False)
    A.eliminate_zeros()
    G._cache[key] = A
    return A


def mutual_view(G: RecommendationNetwork) -> sp.csr_matrix:
    """Symmetric adjacency keeping only reciprocated edges: {i,j} iff i->j and j->i.

    Stricter than :func:`undirected_view`; drops the one-way long-range edges
    that distort metric recovery.
    """
    key = "mutual"
    if key in G._cache:
        return G._cache[key]
    index = G.index()
    directed = {(index[a], index[b]) for a in G.nodes
                for b in G.successors(a) if b in index}
    rows, cols = [], []
    for i, j in directed:
        if i < j and (j, i) in directed:
            rows.extend((i, j))
            cols.extend((j, i))
    n = G.n
    A = sp.csr_matrix((np.ones(len(rows), dtype=bool), (rows, cols)), shape=(n, n))
    G._cache[key] = A
    return A


def write_network_tsv(G: RecommendationNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("src\trank\tdst\n")
        for node in G.nodes:
            for rank, dst in enumerate(G.successors(node), start=1):
                fh.write(f"{node}\t{rank}\t{dst}\n")


def read_network_tsv(path) -> RecommendationNetwork:
    pages: dict[int, dict[int, int]] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "src\trank\tdst":
            raise UsersideError(f"unexpected network header {header!r}")
        for line in fh:
            if not line.strip():
                continue
            src, rank, dst = line.rstrip("\n").split("\t")
            pages.setdefault(int(src), {})[int(rank)] = int(dst)
    out_edges = {}
    K = None
    for node, ranked in pages.items():
        K = len(ranked) if K is None else K
        if sorted(ranked) != list(range(1, K + 1)):
            raise UsersideError(f"node {node} has gaps in its rank column")
        out_edges[node] = tuple(ranked[r] for r in range(1, K + 1))
    if not out_edges:
        raise UsersideError("network file has no edges")
    return RecommendationNetwork(out_edges, K=K)
