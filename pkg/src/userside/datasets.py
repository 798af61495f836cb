"""Dataset ingestion, protected-group rules, k-core extraction, splits."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import ItemCatalog
from .errors import IngestError
from .providers import InteractionLog, dedupe_log

GROUP_RULE_KINDS = (
    "year-threshold",
    "interaction-count-threshold",
    "attribute-column",
    "year-distance",
)


@dataclass(frozen=True)
class GroupRule:
    """Assigns every item a group id.

    * ``year-threshold``: protected iff release year < threshold.
    * ``interaction-count-threshold``: protected iff the item has fewer than
      ``threshold`` interactions in the log.
    * ``attribute-column``: one group per distinct value of ``column`` in the
      item metadata (sorted values -> dense ids).
    * ``year-distance``: protected iff the release year differs from the
      source item's year by more than ``threshold`` (needs a source).
    """

    kind: str
    threshold: float | None = None
    column: str | None = None

    def __post_init__(self):
        if self.kind not in GROUP_RULE_KINDS:
            raise ValueError(f"kind must be one of {GROUP_RULE_KINDS}")
        if self.kind == "attribute-column":
            if not self.column:
                raise ValueError("attribute-column rule needs a column name")
        elif self.threshold is None:
            raise ValueError(f"{self.kind} rule needs a threshold")

    def describe(self) -> dict:
        return {"kind": self.kind, "threshold": self.threshold, "column": self.column}


def _years(catalog: ItemCatalog) -> np.ndarray:
    if catalog.meta is None:
        raise IngestError("catalog has no metadata; year rules need a 'year' field")
    years = np.empty(catalog.n)
    for item in catalog.items:
        meta = catalog.meta_of(item)
        if "year" not in meta:
            raise IngestError(f"item {item} has no 'year' metadata")
        years[item - 1] = float(meta["year"])
    return years


def apply_group_rule(catalog: ItemCatalog, rule: GroupRule,
                     log: InteractionLog | None = None,
                     source: int | None = None) -> ItemCatalog:
    """New catalog with groups derived from ``rule`` (metadata unchanged)."""
    if rule.kind == "year-threshold":
        protected = _years(catalog) < rule.threshold
        attr = protected.astype(np.int64)
        names = ("other", "protected")
    elif rule.kind == "interaction-count-threshold":
        if log is None:
            raise ValueError("interaction-count rule needs the interaction log")
        counts = log.item_counts(catalog.n)
        attr = (counts < rule.threshold).astype(np.int64)
        names = ("other", "protected")
    elif rule.kind == "year-distance":
        if source is None:
            raise ValueError("year-distance rule needs a source item")
        years = _years(catalog)
        attr = (np.abs(years - years[source - 1]) > rule.threshold).astype(np.int64)
        names = ("other", "protected")
    else:  # attribute-column
        values = []
        for item in catalog.items:
            meta = catalog.meta_of(item)
            if rule.column not in meta:
                raise IngestError(f"item {item} has no {rule.column!r} metadata")
            values.append(str(meta[rule.column]))
        uniq = sorted(set(values))
        of = {v: g for g, v in enumerate(uniq)}
        attr = np.asarray([of[v] for v in values], dtype=np.int64)
        names = tuple(uniq)
    return replace(catalog, attr=attr, n_groups=len(names), group_names=names)


def _parse_year(title: str, release: str) -> int | None:
    release = release.strip()
    if release:
        tail = release.split("-")[-1]
        if tail.isdigit():
            return int(tail)
    title = title.strip()
    if title.endswith(")") and "(" in title:
        inside = title[title.rfind("(") + 1:-1]
        if inside[:4].isdigit():
            return int(inside[:4])
    return None


def ingest_movielens(directory) -> tuple[InteractionLog, ItemCatalog]:
    """MovieLens-100k layout: ``u.data`` ratings and ``u.item`` metadata.

    The returned catalog has a single placeholder group; apply a
    :class:`GroupRule` to define the protected split.
    """
    directory = str(directory)
    meta: list[dict] = []
    with open(f"{directory}/u.item", encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("|")
            if len(parts) < 2:
                raise IngestError("u.item row needs at least id|title", line=lineno)
            try:
                item_id = int(parts[0])
            except ValueError:
                raise IngestError(f"bad item id {parts[0]!r}", line=lineno) from None
            if item_id != len(meta) + 1:
                raise IngestError(
                    f"item ids must be dense; expected {len(meta) + 1}, got {item_id}",
                    line=lineno,
                )
            title = parts[1]
            year = _parse_year(title, parts[2] if len(parts) > 2 else "")
            entry = {"title": title}
            if year is not None:
                entry["year"] = year
            meta.append(entry)
    if not meta:
        raise IngestError("u.item has no rows")

    users: list[int] = []
    items: list[int] = []
    stamps: list[int] = []
    with open(f"{directory}/u.data", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) < 4:
                raise IngestError("u.data row needs user item rating timestamp",
                                  line=lineno)
            try:
                users.append(int(parts[0]))
                items.append(int(parts[1]))
                stamps.append(int(parts[3]))
            except ValueError:
                raise IngestError("malformed u.data row", line=lineno) from None
            if items[-1] > len(meta) or items[-1] < 1:
                raise IngestError(f"item {items[-1]} missing from u.item", line=lineno)
    log = dedupe_log(users, items, stamps)
    catalog = ItemCatalog(attr=np.zeros(len(meta), dtype=np.int64), n_groups=1,
                          meta=tuple(meta))
    return log, catalog


ADULT_COLUMNS = (
    "age", "workclass", "fnlwgt", "education", "education_num",
    "marital_status", "occupation", "relationship", "race", "sex",
    "capital_gain", "capital_loss", "hours_per_week", "native_country",
    "income",
)


def ingest_adult(path, limit: int | None = None) -> list[dict]:
    """Census-format CSV (no header, 15 comma-separated fields per row)."""
    records: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if len(row) != len(ADULT_COLUMNS):
                raise IngestError(
                    f"expected {len(ADULT_COLUMNS)} fields, got {len(row)}",
                    line=lineno,
                )
            records.append({k: v.strip() for k, v in zip(ADULT_COLUMNS, row)})
            if limit is not None and len(records) >= limit:
                break
    if not records:
        raise IngestError("census file has no rows")
    return records


def kcore(log: InteractionLog, k: int) -> InteractionLog:
    """Iteratively peel users and items with fewer than ``k`` interactions."""
    if k < 1:
        raise ValueError("k must be positive")
    if len(log) == 0:
        return log
    n_u = int(log.users.max()) + 1
    n_i = int(log.items.max()) + 1
    keep = np.ones(len(log), dtype=bool)
    while keep.any():
        u_counts = np.bincount(log.users[keep], minlength=n_u)
        i_counts = np.bincount(log.items[keep], minlength=n_i)
        bad = keep & ((u_counts[log.users] < k) | (i_counts[log.items] < k))
        if not bad.any():
            break
        keep &= ~bad
    if not keep.any():
        warnings.warn(f"{k}-core is empty", stacklevel=2)
        return InteractionLog(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
    ts = None if log.timestamps is None else log.timestamps[keep]
    return InteractionLog(log.users[keep], log.items[keep], ts)


@dataclass(frozen=True)
class Split:
    """Leave-latest-out evaluation protocol.

    Per user, the interaction with the latest timestamp is held out as the
    test item and the second latest acts as the query source; everything but
    the test item is training data.
    """

    train: InteractionLog
    test: dict[int, frozenset[int]]
    source_item: dict[int, int]

    @property
    def users(self) -> tuple[int, ...]:
        return tuple(sorted(self.test))


def make_split(log: InteractionLog, seed: int = 0) -> Split:
    """Deterministic leave-latest-out split; ties (and missing timestamps)
    are ordered by a seeded shuffle, then item id."""
    if log.timestamps is not None:
        ts = np.asarray(log.timestamps, dtype=np.int64)
    else:
        ts = np.random.default_rng(seed).permutation(len(log)).astype(np.int64)

    keep_train = np.ones(len(log), dtype=bool)
    test: dict[int, frozenset[int]] = {}
    source_item: dict[int, int] = {}
    dropped = 0
    for user, positions in log.by_user().items():
        order = sorted(positions, key=lambda p: (ts[p], log.items[p]))
        # latest occurrence per distinct item, newest first
        latest: dict[int, int] = {}
        for p in order:
            latest[int(log.items[p])] = p
        distinct = sorted(latest, key=lambda it: (ts[latest[it]], it), reverse=True)
        if len(distinct) < 2:
            keep_train[positions] = False
            dropped += 1
            continue
        test_item, source = distinct[0], distinct[1]
        test[user] = frozenset({test_item})
        source_item[user] = source
        for p in positions:
            if int(log.items[p]) == test_item:
                keep_train[p] = False
    if dropped:
        warnings.warn(f"dropped {dropped} users with fewer than 2 distinct items",
                      stacklevel=2)
    train_ts = None if log.timestamps is None else log.timestamps[keep_train]
    train = InteractionLog(log.users[keep_train], log.items[keep_train], train_ts)
    return Split(train, test, source_item)
