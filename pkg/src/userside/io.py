"""Flat-file formats: catalog, history, embeddings, interactions.

All files are UTF-8 TSV with a one-line header (history files are a bare id
per line). These formats round-trip exactly and are the only persistence the
toolkit uses.
"""

from __future__ import annotations

import json

import numpy as np

from .core import History, ItemCatalog
from .errors import IngestError
from .providers import InteractionLog, dedupe_log

CATALOG_HEADER = "item_id\tgroup\tlabel\tmeta_json"


def write_catalog_tsv(catalog: ItemCatalog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CATALOG_HEADER + "\n")
        for item in catalog.items:
            label = "" if catalog.labels is None else str(catalog.labels[item - 1])
            meta = dict(catalog.meta_of(item))
            if catalog.group_names is not None:
                meta.setdefault("group_name", catalog.group_name(catalog.group_of(item)))
            meta_json = json.dumps(meta, ensure_ascii=False, sort_keys=True) if meta else ""
            fh.write(f"{item}\t{catalog.group_of(item)}\t{label}\t{meta_json}\n")


def read_catalog_tsv(path) -> ItemCatalog:
    attr: list[int] = []
    labels: list[str] = []
    meta: list[dict] = []
    any_label = False
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split("\t")[:2] != ["item_id", "group"]:
            raise IngestError(f"unexpected catalog header {header!r}", line=1)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2:
                raise IngestError("need at least item_id and group", line=lineno)
            parts += [""] * (4 - len(parts))
            item_id, group, label, meta_json = parts[:4]
            try:
                item_id = int(item_id)
                group = int(group)
            except ValueError:
                raise IngestError("item_id and group must be integers", line=lineno) from None
            if item_id != len(attr) + 1:
                raise IngestError(
                    f"item ids must be dense 1..n; expected {len(attr) + 1}, got {item_id}",
                    line=lineno,
                )
            attr.append(group)
            labels.append(label)
            any_label = any_label or bool(label)
            try:
                meta.append(json.loads(meta_json) if meta_json else {})
            except json.JSONDecodeError:
                raise IngestError("meta_json is not valid JSON", line=lineno) from None
    if not attr:
        raise IngestError("catalog file has no items")
    n_groups = max(attr) + 1
    names = None
    by_group: dict[int, str] = {}
    for g, m in zip(attr, meta):
        if "group_name" in m:
            by_group.setdefault(g, str(m["group_name"]))
    if len(by_group) == n_groups:
        names = tuple(by_group[g] for g in range(n_groups))
    return ItemCatalog(
        attr=np.asarray(attr, dtype=np.int64),
        n_groups=n_groups,
        labels=tuple(labels) if any_label else None,
        meta=tuple(meta),
        group_names=names,
    )


def write_history(history: History, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in sorted(history):
            fh.write(f"{item}\n")


def read_history(path) -> History:
    items = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                items.add(int(line))
            except ValueError:
                raise IngestError(f"bad item id {line!r}", line=lineno) from None
    return frozenset(items)


def write_embedding_tsv(X: np.ndarray, path) -> None:
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("item_id\t" + "\t".join(f"v{j + 1}" for j in range(d)) + "\n")
        for row in range(X.shape[0]):
            coords = "\t".join(repr(float(v)) for v in X[row])
            fh.write(f"{row + 1}\t{coords}\n")


def read_embedding_tsv(path) -> np.ndarray:
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header[0] != "item_id":
            raise IngestError(f"unexpected embedding header {header!r}", line=1)
        d = len(header) - 1
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != d + 1:
                raise IngestError(f"expected {d + 1} columns", line=lineno)
            try:
                item_id = int(parts[0])
                coords = [float(v) for v in parts[1:]]
            except ValueError:
                raise IngestError("malformed embedding row", line=lineno) from None
            if item_id != len(rows) + 1:
                raise IngestError("embedding rows must be dense 1..n", line=lineno)
            rows.append(coords)
    if not rows:
        raise IngestError("embedding file has no rows")
    return np.asarray(rows, dtype=np.float64)


def write_interactions_tsv(log: InteractionLog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user\titem\trating\ttimestamp\n")
        ts = log.timestamps
        for row in range(len(log)):
            stamp = "" if ts is None else str(int(ts[row]))
            fh.write(f"{log.users[row]}\t{log.items[row]}\t\t{stamp}\n")


def read_interactions_tsv(path) -> InteractionLog:
    users: list[int] = []
    items: list[int] = []
    stamps: list[int] = []
    any_ts = False
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header[:2] != ["user", "item"]:
            raise IngestError(f"unexpected interactions header {header!r}", line=1)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            parts += [""] * (4 - len(parts))
            try:
                users.append(int(parts[0]))
                items.append(int(parts[1]))
            except ValueError:
                raise IngestError("user and item must be integers", line=lineno) from None
            if parts[3]:
                any_ts = True
                stamps.append(int(parts[3]))
            else:
                stamps.append(0)
    if not users:
        raise IngestError("interaction file has no rows")
    return dedupe_log(users, items, stamps if any_ts else None)
