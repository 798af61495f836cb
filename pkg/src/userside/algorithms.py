"""User-side recommenders behind one interface returning :class:`RecResult`.

All methods only see the provider through the access-counted oracle (or the
crawled network); the exception is :func:`oracle_method`, the upper-bound
harness that reads the hidden embedding directly.

Every method excludes the source item and the user's history from its output.
The shared safe-insertion rule keeps a running deficit bound
sum_a max(0, tau - c[a]) <= K - |R| that is asserted after every insertion:
a violation raises :class:`StepInvariantError` instead of returning an unfair
list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import (
    EMPTY_HISTORY,
    AccessStats,
    GroupCounter,
    History,
    ItemCatalog,
    ProviderOracle,
    check_feasibility,
    fair_insert_check,
)
from .errors import InfeasibleTauError, StepInvariantError, UsersideError
from .network import RecommendationNetwork, personalized_pagerank
from .recovery import RecoveryConfig, recover_embedding

METHODS = ("provider", "consul", "privatewalk", "privaterank", "pp", "oracle", "etp")

INFINITE_ACCESS = math.inf


@dataclass(frozen=True)
class ConsulParams:
    K: int
    tau: int
    L_max: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.K < 1 or self.L_max < 1:
            raise ValueError("K and L_max must be positive")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")


@dataclass(frozen=True)
class RecResult:
    """One recommendation call: the list plus its cost and provenance."""

    items: tuple[int, ...]
    stats: AccessStats
    group_counts: dict[int, int]
    trace: tuple[int, ...]
    fallback_used: bool

    def to_payload(self, catalog: ItemCatalog | None = None) -> dict:
        counts: dict[str, int] = {}
        for group, cnt in sorted(self.group_counts.items()):
            name = catalog.group_name(group) if catalog is not None else str(group)
            counts[name] = cnt
        accesses = self.stats.accesses
        return {
            "list": list(self.items),
            "accesses": "inf" if math.isinf(accesses) else int(accesses),
            "group_counts": counts,
            "trace": list(self.trace),
            "fallback_used": self.fallback_used,
        }


def _group_counts(items, catalog: ItemCatalog) -> dict[int, int]:
    counts = dict.fromkeys(range(catalog.n_groups), 0)
    for item in items:
        counts[catalog.group_of(item)] += 1
    return counts


class _ListBuilder:
    """Fair list under construction; owns the counter and the step invariant."""

    def __init__(self, catalog: ItemCatalog, K: int, tau: int, history: History,
                 source: int | None, instrument: bool = True):
        self.catalog = catalog
        self.K = K
        self.tau = tau
        self.history = history
        self.source = source
        self.instrument = instrument
        self.counter = GroupCounter(catalog.n_groups, tau)
        self.items: list[int] = []
        self._seen: set[int] = set()

    @property
    def full(self) -> bool:
        return len(self.items) >= self.K

    def try_insert(self, item: int) -> bool:
        if item in self._seen or item in self.history or item == self.source:
            return False
        group = self.catalog.group_of(item)
        if not fair_insert_check(self.counter, self.tau, self.K, len(self.items), group):
            return False
        self.items.append(item)
        self._seen.add(item)
        self.counter.add(group)
        if self.instrument:
            self._assert_invariant(item)
        return True

    def _assert_invariant(self, item: int) -> None:
        if self.counter.deficit_total > self.K - len(self.items):
            raise StepInvariantError(
                f"deficit {self.counter.deficit_total} exceeds remaining "
                f"slots {self.K - len(self.items)} after inserting {item}"
            )

    def uniform_fill(self, n: int, rng) -> None:
        """Fallback: draw catalog items uniformly until the list is full."""
        budget = 100 * self.K * max(self.catalog.n_groups, 1)
        for _ in range(budget):
            if self.full:
                return
            self.try_insert(int(rng.integers(1, n + 1)))
        if not self.full:
            raise InfeasibleTauError(
                f"fallback sampling budget ({budget} draws) exhausted with "
                f"{len(self.items)}/{self.K} items"
            )


def _check_oracle_catalog(oracle: ProviderOracle, catalog: ItemCatalog) -> None:
    if oracle.n != catalog.n:
        raise UsersideError(
            f"oracle covers {oracle.n} items but catalog has {catalog.n}"
        )


def consul(oracle: ProviderOracle, catalog: ItemCatalog, source: int,
           history: History = EMPTY_HISTORY, *,
           params: ConsulParams) -> RecResult:
    """Depth-first fair search over the provider's pages.

    Scans at most ``L_max`` distinct pages; on each page, inserts every item
    that is new and safely insertable, then pushes the page's items so that
    rank 1 is explored first. With ``tau = 0`` the first page fills the list,
    so the output equals the provider's. A uniform random fallback fills any
    remaining slots when the search is exhausted or capped.
    """
    K, tau = params.K, params.tau
    catalog.check_item(source)
    _check_oracle_catalog(oracle, catalog)
    check_feasibility(catalog, history, source, K, tau)

    session = oracle.session()
    builder = _ListBuilder(catalog, K, tau, history, source)
    visited: set[int] = set()
    stack: list[int] = []
    p = source
    exhausted = False
    for _ in range(params.L_max):
        while p in visited:
            if not stack:
                exhausted = True
                break
            p = stack.pop()
        if exhausted:
            break
        visited.add(p)
        page = session.query(p)
        for j in page:
            builder.try_insert(j)
            if builder.full:
                return _finish(builder, session, fallback_used=False)
        for j in reversed(page):
            stack.append(j)

    rng = np.random.default_rng(params.seed)
    builder.uniform_fill(catalog.n, rng)
    return _finish(builder, session, fallback_used=True)


def _finish(builder: _ListBuilder, session, fallback_used: bool,
            walk_length: int | None = None) -> RecResult:
    trace = tuple(session.pages)
    stats = AccessStats(
        accesses=session.accesses,
        walk_length=len(trace) if walk_length is None else walk_length,
    )
    return RecResult(tuple(builder.items), stats,
                     _group_counts(builder.items, builder.catalog),
                     trace, fallback_used)


def private_walk(oracle: ProviderOracle, catalog: ItemCatalog, source: int,
                 history: History = EMPTY_HISTORY, *, params: ConsulParams,
                 patience: int = 100, rng=None) -> RecResult:
    """Random-walk baseline: pick one of the K items on the current page.

    An insertable pick is appended and the walk restarts at the source;
    otherwise the walk moves to the picked item. A slot whose walk exceeds
    ``patience`` steps is filled by uniform random sampling instead.
    """
    K, tau = params.K, params.tau
    catalog.check_item(source)
    _check_oracle_catalog(oracle, catalog)
    check_feasibility(catalog, history, source, K, tau)
    if patience < 1:
        raise ValueError("patience must be positive")
    if rng is None:
        rng = np.random.default_rng(params.seed)

    session = oracle.session()
    builder = _ListBuilder(catalog, K, tau, history, source)
    fallback_used = False
    walk_length = 0
    p = source
    steps = 0
    while not builder.full:
        if steps >= patience:
            before = len(builder.items)
            fallback_used = True
            while len(builder.items) == before:  # fill exactly one slot
                if builder.try_insert(int(rng.integers(1, catalog.n + 1))):
                    break
                steps += 1
                if steps >= patience + 100 * catalog.n_groups * K:
                    raise InfeasibleTauError(
                        "random fill could not find a safely insertable item"
                    )
            p = source
            steps = 0
            continue
        page = session.query(p)
        pick = page[int(rng.integers(len(page)))]
        walk_length += 1
        if builder.try_insert(pick):
            p = source
            steps = 0
        else:
            p = pick
            steps += 1
    return _finish(builder, session, fallback_used, walk_length=walk_length)


def fair_greedy_rerank(scores: Mapping[int, float], catalog: ItemCatalog,
                       history: History = EMPTY_HISTORY, *, K: int,
                       tau: int) -> tuple[int, ...]:
    """Greedy scan by descending score (ties by ascending id) with the safe
    insertion rule. With ``tau = 0`` this is exactly the top-K by score."""
    if tau * catalog.n_groups > K:
        raise InfeasibleTauError(
            f"tau={tau} with {catalog.n_groups} groups exceeds K={K}"
        )
    builder = _ListBuilder(catalog, K, tau, history, source=None)
    for item, _ in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0])):
        builder.try_insert(item)
        if builder.full:
            return tuple(builder.items)
    for group, count in builder.counter.as_dict().items():
        if count < tau:
            name = catalog.group_name(group)
            raise InfeasibleTauError(
                f"group {name!r} reached only {count} of tau={tau} items",
                group=group, group_name=name,
            )
    return tuple(builder.items)


def similarity_scores(X: np.ndarray, source: int, metric: str) -> np.ndarray:
    """Provider-side similarity of every item to ``source`` (higher = closer).

    Matches the scoring the k-NN providers rank by, so greedy reranking over
    these scores reproduces provider lists exactly, ties included.
    """
    if metric == "euclidean":
        diff = X - X[source - 1]
        return -np.einsum("ij,ij->i", diff, diff)
    if metric == "inner-product":
        return X @ X[source - 1]
    raise ValueError(f"unknown metric {metric!r}")


def _rerank_result(order_scores: Mapping[int, float], catalog, source, history,
                   K, tau, accesses) -> RecResult:
    items = fair_greedy_rerank(order_scores, catalog, history, K=K, tau=tau)
    stats = AccessStats(accesses=accesses,
                        walk_length=0 if math.isinf(accesses) else int(accesses))
    return RecResult(items, stats, _group_counts(items, catalog),
                     trace=(source,), fallback_used=False)


def _candidate_scores(raw: Mapping[int, float], source: int) -> dict[int, float]:
    return {item: s for item, s in raw.items() if item != source}


def private_rank(G: RecommendationNetwork, catalog: ItemCatalog, source: int,
                 history: History = EMPTY_HISTORY, *, K: int, tau: int,
                 restart: float = 0.15, iters: int = 100) -> RecResult:
    """Fair rerank of personalized-PageRank scores over the crawled network.

    The source's direct successors get a dominant rank-ordered bonus so the
    ``tau = 0`` output is the provider's page verbatim. The whole-network
    crawl is attributed to the call: ``accesses = n``.
    """
    if G.n != catalog.n:
        raise UsersideError(
            f"private_rank needs the full crawled network: {G.n} nodes "
            f"vs {catalog.n} items"
        )
    catalog.check_item(source)
    check_feasibility(catalog, history, source, K, tau)
    ppr = personalized_pagerank(G, source, restart=restart, iters=iters)
    scores = _candidate_scores(ppr.as_dict(), source)
    bonus = 2.0  # any value above the total PPR mass of 1 dominates
    for rank, succ in enumerate(G.successors(source), start=1):
        if succ in scores:
            scores[succ] = bonus + (G.K - rank)
    return _rerank_result(scores, catalog, source, history, K, tau, accesses=G.n)


def pp_baseline(oracle: ProviderOracle, catalog: ItemCatalog, source: int,
                history: History = EMPTY_HISTORY, *, K: int, tau: int) -> RecResult:
    """Post-processing of the official page only: greedy fair scan over the K
    official items, then pad with the skipped officials in rank order.

    Deliberately best-effort: when the page lacks a group entirely the quota
    is simply missed (unsound by design).
    """
    catalog.check_item(source)
    _check_oracle_catalog(oracle, catalog)
    session = oracle.session()
    page = session.query(source)
    builder = _ListBuilder(catalog, min(K, len(page)), tau, history, source,
                           instrument=False)
    for j in page:
        if builder.full:
            break
        builder.try_insert(j)
    items = list(builder.items)
    for j in page:  # pad to K with the best-ranked remaining officials
        if len(items) >= K:
            break
        if j not in items and j not in history and j != source:
            items.append(j)
    stats = AccessStats(accesses=session.accesses, walk_length=len(session.pages))
    return RecResult(tuple(items), stats, _group_counts(items, catalog),
                     trace=tuple(session.pages), fallback_used=False)


def oracle_method(X: np.ndarray, metric: str, catalog: ItemCatalog, source: int,
                  history: History = EMPTY_HISTORY, *, K: int, tau: int) -> RecResult:
    """Upper bound: fair rerank of the provider's exact similarity scores.

    Reads hidden information, so the access cost is reported as infinite.
    """
    catalog.check_item(source)
    check_feasibility(catalog, history, source, K, tau)
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != catalog.n:
        raise UsersideError(f"embedding has {X.shape[0]} rows for {catalog.n} items")
    sims = similarity_scores(X, source, metric)
    scores = {item: float(sims[item - 1]) for item in catalog.items if item != source}
    return _rerank_result(scores, catalog, source, history, K, tau,
                          accesses=INFINITE_ACCESS)


def etp(G: RecommendationNetwork, catalog: ItemCatalog, source: int,
        history: History = EMPTY_HISTORY, *, K: int, tau: int, d: int,
        config: RecoveryConfig | None = None,
        recovered: np.ndarray | None = None) -> RecResult:
    """Estimate-then-postprocess: recover embeddings from the full network,
    then fair-rerank by euclidean distance in the recovered space.

    ``recovered`` short-circuits the (expensive) recovery so batch evaluation
    can reuse one estimate across calls; rows follow ``G.nodes`` order.
    """
    if G.n != catalog.n:
        raise UsersideError(
            f"etp needs the full crawled network: {G.n} nodes vs {catalog.n} items"
        )
    catalog.check_item(source)
    check_feasibility(catalog, history, source, K, tau)
    if recovered is None:
        cfg = config if config is not None else RecoveryConfig(d=d)
        recovered = recover_embedding(G, cfg).embedding
    recovered = np.asarray(recovered, dtype=np.float64)
    if recovered.shape[0] != G.n:
        raise ValueError("recovered embedding must have one row per node")
    index = G.index()
    diff = recovered - recovered[index[source]]
    sims = -np.einsum("ij,ij->i", diff, diff)
    scores = {node: float(sims[index[node]]) for node in G.nodes if node != source}
    return _rerank_result(scores, catalog, source, history, K, tau, accesses=G.n)


def provider_method(oracle: ProviderOracle, catalog: ItemCatalog,
                    source: int) -> RecResult:
    """The provider's own page, wrapped as a RecResult for side-by-side use."""
    catalog.check_item(source)
    _check_oracle_catalog(oracle, catalog)
    session = oracle.session()
    items = session.query(source)
    stats = AccessStats(accesses=session.accesses, walk_length=1)
    return RecResult(items, stats, _group_counts(items, catalog),
                     trace=tuple(session.pages), fallback_used=False)
