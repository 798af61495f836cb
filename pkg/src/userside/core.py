"""Shared data model: catalogs, group counters, and the access-counted oracle.

Items are dense integer ids 1..n; groups are dense integer ids 0..n_groups-1.
Every recommendation algorithm talks to a provider through an
:class:`OracleSession`, which memoizes page fetches so that one visited page
costs exactly one access no matter how often it is re-read within the call.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleTauError, UnknownGroupError, UnknownItemError

# A user's interaction history: just a set of item ids.
History = frozenset[int]

EMPTY_HISTORY: History = frozenset()


@dataclass(frozen=True)
class ItemCatalog:
    """Items with their sensitive group, optional labels and display metadata.

    ``attr[i - 1]`` is the group id of item ``i``. ``labels`` (same indexing)
    are free-form class labels used by label-accuracy evaluation. ``meta``
    holds display fields such as title and year.
    """

    attr: np.ndarray
    n_groups: int
    labels: tuple | None = None
    meta: tuple[dict, ...] | None = None
    group_names: tuple[str, ...] | None = None

    def __post_init__(self):
        attr = np.asarray(self.attr, dtype=np.int64)
        object.__setattr__(self, "attr", attr)
        if self.n_groups < 1:
            raise ValueError("catalog needs at least one group")
        if attr.ndim != 1 or attr.size == 0:
            raise ValueError("attr must be a non-empty 1-d array")
        if attr.min() < 0 or attr.max() >= self.n_groups:
            raise UnknownGroupError(int(attr.max()), self.n_groups)
        if self.labels is not None and len(self.labels) != attr.size:
            raise ValueError("labels length must match item count")
        if self.meta is not None and len(self.meta) != attr.size:
            raise ValueError("meta length must match item count")
        if self.group_names is not None and len(self.group_names) != self.n_groups:
            raise ValueError("group_names length must match n_groups")

    @property
    def n(self) -> int:
        return int(self.attr.size)

    @property
    def items(self) -> range:
        return range(1, self.n + 1)

    def check_item(self, item: int) -> int:
        if not 1 <= item <= self.n:
            raise UnknownItemError(item, self.n)
        return int(item)

    def group_of(self, item: int) -> int:
        return int(self.attr[self.check_item(item) - 1])

    def group_sizes(self) -> np.ndarray:
        # cached: feasibility checks must not rescan the catalog per call
        sizes = getattr(self, "_group_sizes", None)
        if sizes is None:
            sizes = np.bincount(self.attr, minlength=self.n_groups)
            object.__setattr__(self, "_group_sizes", sizes)
        return sizes

    def group_name(self, group: int) -> str:
        if not 0 <= group < self.n_groups:
            raise UnknownGroupError(group, self.n_groups)
        if self.group_names is not None:
            return self.group_names[group]
        return f"group{group}"

    def label_of(self, item: int):
        if self.labels is None:
            raise ValueError("catalog has no labels")
        return self.labels[self.check_item(item) - 1]

    def meta_of(self, item: int) -> dict:
        if self.meta is None:
            return {}
        return self.meta[self.check_item(item) - 1]


def catalog_from_groups(attr, n_groups: int | None = None, **kwargs) -> ItemCatalog:
    """Build a catalog from a plain group sequence (1-indexed items)."""
    attr = np.asarray(list(attr), dtype=np.int64)
    if n_groups is None:
        n_groups = int(attr.max()) + 1 if attr.size else 1
    return ItemCatalog(attr=attr, n_groups=n_groups, **kwargs)


class GroupCounter:
    """Per-group counts of selected items with the cached total deficit.

    ``deficit_total`` maintains sum_a max(0, tau - c[a]) incrementally so the
    safe-insertion condition is an O(1) check instead of an O(|A|) scan.
    """

    __slots__ = ("tau", "counts", "deficit_total")

    def __init__(self, n_groups: int, tau: int):
        if n_groups < 1:
            raise ValueError("need at least one group")
        if tau < 0:
            raise ValueError("tau must be non-negative")
        self.tau = int(tau)
        self.counts = [0] * n_groups
        self.deficit_total = self.tau * n_groups

    @property
    def n_groups(self) -> int:
        return len(self.counts)

    def check_group(self, group: int) -> int:
        if not isinstance(group, (int, np.integer)) or not 0 <= group < len(self.counts):
            raise UnknownGroupError(group, len(self.counts))
        return int(group)

    def add(self, group: int) -> "GroupCounter":
        group = self.check_group(group)
        if self.counts[group] < self.tau:
            self.deficit_total -= 1
        self.counts[group] += 1
        return self

    def deficit_excluding(self, group: int) -> int:
        group = self.check_group(group)
        return self.deficit_total - max(0, self.tau - self.counts[group])

    def recomputed_deficit(self) -> int:
        return sum(max(0, self.tau - c) for c in self.counts)

    def as_dict(self) -> dict[int, int]:
        return {g: c for g, c in enumerate(self.counts)}


def fair_insert_check(counter: GroupCounter, tau: int, K: int,
                      list_len: int, group: int) -> bool:
    """True iff an item of ``group`` can be added while the per-group minimum
    stays reachable: sum_{a != group} max(0, tau - c[a]) <= K - list_len - 1.
    """
    if tau != counter.tau:
        raise ValueError(f"counter was built for tau={counter.tau}, got {tau}")
    if list_len >= K:
        raise ValueError("list is already full")
    return counter.deficit_excluding(group) <= K - list_len - 1


def counter_add(counter: GroupCounter, group: int) -> GroupCounter:
    """Record one selected item of ``group``; keeps the cached deficit exact."""
    return counter.add(group)


def check_feasibility(catalog: ItemCatalog, history: History, source: int,
                      K: int, tau: int) -> None:
    """Raise :class:`InfeasibleTauError` unless every group can reach tau.

    Requires ``tau * n_groups <= K`` and at least tau items per group outside
    ``history`` and the source item.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if K < 1:
        raise ValueError("K must be positive")
    if tau * catalog.n_groups > K:
        raise InfeasibleTauError(
            f"tau={tau} with {catalog.n_groups} groups exceeds K={K}: "
            f"need tau * n_groups <= K"
        )
    if tau == 0:
        return
    available = catalog.group_sizes().copy()
    excluded = set(history)
    excluded.add(source)
    for item in excluded:
        if 1 <= item <= catalog.n:
            available[catalog.attr[item - 1]] -= 1
    for group, avail in enumerate(available):
        if avail < tau:
            name = catalog.group_name(group)
            raise InfeasibleTauError(
                f"group {name!r} has only {int(avail)} available items, "
                f"needs at least tau={tau}",
                group=group,
                group_name=name,
            )


@dataclass(frozen=True)
class AccessStats:
    """Communication cost of one recommendation call.

    ``accesses`` counts distinct item pages fetched (math.inf for methods that
    use hidden provider internals); ``walk_length`` counts nodes visited,
    including repeats.
    """

    accesses: int | float
    walk_length: int = 0


class ProviderOracle(ABC):
    """Black-box top-K recommender queried one item page at a time.

    ``query(i)`` returns exactly K items, never containing ``i`` itself, the
    bound history, or duplicates, and is deterministic. The global
    ``access_count`` counts every page fetch that was not served from a
    per-call memo cache (see :class:`OracleSession`).
    """

    def __init__(self, n: int, K: int, history: History = EMPTY_HISTORY):
        if K < 1:
            raise ValueError("K must be positive")
        self.n = int(n)
        self.K = int(K)
        self.history = frozenset(history)
        self._access_lock = threading.Lock()
        self._access_count = 0

    @property
    def access_count(self) -> int:
        return self._access_count

    def _record_access(self) -> None:
        with self._access_lock:
            self._access_count += 1

    def check_item(self, item: int) -> int:
        if not 1 <= item <= self.n:
            raise UnknownItemError(item, self.n)
        return int(item)

    @abstractmethod
    def _fetch(self, item: int) -> tuple[int, ...]:
        """Produce the K-item page for ``item`` (already validated)."""

    def query(self, item: int) -> tuple[int, ...]:
        """One uncached page fetch; counts one access."""
        page = self._fetch(self.check_item(item))
        self._record_access()
        return page

    def session(self) -> "OracleSession":
        return OracleSession(self)


@dataclass
class OracleSession:
    """Per-recommendation-call view of an oracle with a page memo cache.

    Re-reading a page already fetched in this session is free; distinct pages
    each cost one access. ``pages`` preserves first-visit order.
    """

    oracle: ProviderOracle
    cache: dict[int, tuple[int, ...]] = field(default_factory=dict)
    pages: list[int] = field(default_factory=list)

    @property
    def accesses(self) -> int:
        return len(self.pages)

    def query(self, item: int) -> tuple[int, ...]:
        item = self.oracle.check_item(item)
        hit = self.cache.get(item)
        if hit is not None:
            return hit
        page = self.oracle._fetch(item)
        self.oracle._record_access()
        self.cache[item] = page
        self.pages.append(item)
        return page


def oracle_query(session: OracleSession, item: int) -> tuple[int, ...]:
    """Fetch item's page through the session cache (one access per distinct page)."""
    return session.query(item)


class TableOracle(ProviderOracle):
    """Provider backed by an explicit id -> page table (fixtures, stored crawls)."""

    def __init__(self, table: dict[int, tuple[int, ...]],
                 K: int | None = None, n: int | None = None,
                 history: History = EMPTY_HISTORY):
        if not table:
            raise ValueError("table oracle needs at least one page")
        lengths = {len(page) for page in table.values()}
        if len(lengths) != 1:
            raise ValueError("all pages must have the same length")
        k = lengths.pop()
        if K is not None and K != k:
            raise ValueError(f"table pages have length {k}, expected K={K}")
        if n is None:
            n = max(max(table), max(max(page) for page in table.values()))
        super().__init__(n=n, K=k, history=history)
        self.table = {int(i): tuple(int(j) for j in page) for i, page in table.items()}
        for i, page in self.table.items():
            if i in page:
                raise ValueError(f"page {i} recommends itself")
            if len(set(page)) != len(page):
                raise ValueError(f"page {i} has duplicate items")
            if self.history & set(page):
                raise ValueError(f"page {i} recommends items from the history")

    def _fetch(self, item: int) -> tuple[int, ...]:
        try:
            return self.table[item]
        except KeyError:
            raise UnknownItemError(item, self.n) from None


def walk_counterexample_oracle() -> TableOracle:
    """The 5-item, K=2 counterexample provider: P(i) = (((i+3) mod 5) + 1, (i mod 5) + 1)."""
    table = {i: (((i + 3) % 5) + 1, (i % 5) + 1) for i in range(1, 6)}
    return TableOracle(table, K=2, n=5)
