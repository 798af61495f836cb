"""Simulated black-box providers: exact k-NN over embeddings and BPR factors.

A provider is item-to-item: ``query(i)`` returns the K items most similar to
item ``i``, excluding ``i`` itself and the bound history, ties broken by
ascending item id. Euclidean providers use a KD-tree above a size threshold;
inner-product providers below ``PRECOMPUTE_LIMIT`` precompute the full ranking
table once so oracles cloned per history share it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import EMPTY_HISTORY, History, ItemCatalog, ProviderOracle, catalog_from_groups
from .errors import IngestError

PRECOMPUTE_LIMIT = 4096

METRICS = ("euclidean", "inner-product")


def validate_embedding(X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("embedding must be an (n, d) matrix with n >= 2")
    if not np.all(np.isfinite(X)):
        raise ValueError("embedding has non-finite entries")
    return X


class _KnnIndex:
    """Shared nearest-neighbour index; oracles with different histories reuse it.

    Small instances precompute the full ranking table once; larger euclidean
    instances use a KD-tree; everything else scans per query. ``precompute``
    overrides the size heuristic.
    """

    def __init__(self, X: np.ndarray, metric: str, precompute: bool | None = None):
        if metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
        self.X = validate_embedding(X)
        self.metric = metric
        self.n = self.X.shape[0]
        self._tree: cKDTree | None = None
        self._ranked: np.ndarray | None = None
        if precompute is None:
            precompute = self.n <= PRECOMPUTE_LIMIT
        if precompute:
            self._ranked = self._rank_all()
        elif metric == "euclidean":
            self._tree = cKDTree(self.X)

    def _keys(self, scores_or_d2: np.ndarray) -> np.ndarray:
        ids = np.arange(self.n)
        if self.metric == "euclidean":
            return np.lexsort((ids, scores_or_d2))
        return np.lexsort((ids, -scores_or_d2))

    def _rank_all(self) -> np.ndarray:
        # Row-by-row scoring (not a gram-matrix shortcut) so rankings agree
        # bitwise with per-query scoring used elsewhere, ties included.
        ids = np.arange(self.n)
        order = np.empty((self.n, self.n), dtype=np.int32)
        for row in range(self.n):
            scores = self._scores_for(row)
            key = scores if self.metric == "euclidean" else -scores
            order[row] = np.lexsort((ids, key))
        return order

    def _scores_for(self, row: int) -> np.ndarray:
        if self.metric == "euclidean":
            diff = self.X - self.X[row]
            return np.einsum("ij,ij->i", diff, diff)
        return self.X @ self.X[row]

    def top(self, row: int, k: int, excluded_rows: frozenset[int]) -> list[int]:
        """Rows of the k nearest points to ``row``, skipping excluded rows."""
        if self._ranked is not None:
            out = []
            for cand in self._ranked[row]:
                if cand == row or cand in excluded_rows:
                    continue
                out.append(int(cand))
                if len(out) == k:
                    return out
            return out
        if self._tree is not None:
            return self._top_tree(row, k, excluded_rows)
        order = self._keys(self._scores_for(row))
        out = []
        for cand in order:
            if cand == row or cand in excluded_rows:
                continue
            out.append(int(cand))
            if len(out) == k:
                break
        return out

    def _top_tree(self, row: int, k: int, excluded_rows: frozenset[int]) -> list[int]:
        # Candidate superset from the tree, then canonical (distance, id) sort;
        # a ball query widens the set when ties straddle the cutoff.
        need = k + len(excluded_rows) + 2
        k0 = min(self.n, need)
        dists, idx = self._tree.query(self.X[row], k=k0)
        idx = np.atleast_1d(idx)
        candidates = self._sorted_candidates(row, idx, excluded_rows)
        if len(candidates) >= k:
            dk = candidates[k - 1][0]
            boundary = float(np.atleast_1d(dists)[-1]) ** 2
            if k0 == self.n or dk < boundary * (1.0 - 1e-12):
                return [c for _, c in candidates[:k]]
        radius = np.sqrt(candidates[min(k, len(candidates)) - 1][0]) if candidates else 0.0
        ball = self._tree.query_ball_point(self.X[row], r=radius * (1 + 1e-9) + 1e-12)
        candidates = self._sorted_candidates(row, np.asarray(ball, dtype=np.int64),
                                             excluded_rows)
        return [c for _, c in candidates[:k]]

    def _sorted_candidates(self, row, idx, excluded_rows):
        diff = self.X[idx] - self.X[row]
        d2 = np.einsum("ij,ij->i", diff, diff)
        order = np.lexsort((idx, d2))
        return [(float(d2[o]), int(idx[o])) for o in order
                if idx[o] != row and idx[o] not in excluded_rows]


class KnnProvider(ProviderOracle):
    """Exact top-K nearest-neighbour provider over an item embedding.

    Item ``i`` corresponds to row ``i - 1``. ``with_history`` produces a cheap
    sibling oracle sharing the index, used to evaluate one user at a time.
    """

    def __init__(self, X, K: int, metric: str = "euclidean",
                 history: History = EMPTY_HISTORY, precompute: bool | None = None,
                 _index: _KnnIndex | None = None):
        index = _index if _index is not None else _KnnIndex(X, metric, precompute)
        history = frozenset(int(h) for h in history)
        in_range = {h for h in history if 1 <= h <= index.n}
        if index.n - 1 - len(in_range) < K:
            raise ValueError(
                f"need more than K + |history| = {K + len(in_range)} items, have {index.n}"
            )
        super().__init__(n=index.n, K=K, history=history)
        self.index = index
        self._excluded_rows = frozenset(h - 1 for h in in_range)

    @property
    def metric(self) -> str:
        return self.index.metric

    @property
    def X(self) -> np.ndarray:
        return self.index.X

    def with_history(self, history: History) -> "KnnProvider":
        return KnnProvider(None, self.K, history=history, _index=self.index)

    def _fetch(self, item: int) -> tuple[int, ...]:
        rows = self.index.top(item - 1, self.K, self._excluded_rows)
        return tuple(r + 1 for r in rows)


def knn_provider(X, K: int, metric: str = "euclidean",
                 history: History = EMPTY_HISTORY) -> KnnProvider:
    """Provider returning the K nearest items under ``metric``, ties by id."""
    return KnnProvider(X, K, metric=metric, history=history)


@dataclass(frozen=True)
class InteractionLog:
    """Implicit-feedback triples. Exact duplicates are dropped at ingestion."""

    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        users = np.asarray(self.users, dtype=np.int64)
        items = np.asarray(self.items, dtype=np.int64)
        if users.shape != items.shape or users.ndim != 1:
            raise ValueError("users and items must be matching 1-d arrays")
        ts = self.timestamps
        if ts is not None:
            ts = np.asarray(ts)
            if ts.shape != users.shape:
                raise ValueError("timestamps must match users/items")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return int(self.users.size)

    @property
    def n_items(self) -> int:
        return int(self.items.max()) if len(self) else 0

    def item_counts(self, n_items: int | None = None) -> np.ndarray:
        n = n_items if n_items is not None else self.n_items
        return np.bincount(self.items, minlength=n + 1)[1:]

    def by_user(self) -> dict[int, np.ndarray]:
        order = np.argsort(self.users, kind="stable")
        out: dict[int, np.ndarray] = {}
        for pos, user in zip(order, self.users[order]):
            out.setdefault(int(user), []).append(int(pos))
        return {u: np.asarray(ix) for u, ix in out.items()}


def dedupe_log(users, items, timestamps=None) -> InteractionLog:
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    if timestamps is None:
        keys = np.stack([users, items])
    else:
        keys = np.stack([users, items, np.asarray(timestamps, dtype=np.int64)])
    _, keep = np.unique(keys, axis=1, return_index=True)
    keep.sort()
    ts = None if timestamps is None else np.asarray(timestamps)[keep]
    return InteractionLog(users[keep], items[keep], ts)


@dataclass(frozen=True)
class BprConfig:
    factors: int = 64
    learning_rate: float = 0.01
    regularization: float = 0.01
    epochs: int = 100
    seed: int = 0
    batch_size: int = 8192

    def __post_init__(self):
        if self.factors < 1 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("factors/batch_size must be positive, epochs non-negative")
        if self.learning_rate <= 0 or self.regularization < 0:
            raise ValueError("learning_rate must be positive, regularization non-negative")


@dataclass
class BprModel:
    user_factors: np.ndarray
    item_factors: np.ndarray
    user_ids: np.ndarray
    loss_history: list[float] = field(default_factory=list)

    def user_row(self, user: int) -> int:
        pos = int(np.searchsorted(self.user_ids, user))
        if pos >= self.user_ids.size or self.user_ids[pos] != user:
            raise KeyError(f"user {user} not in training log")
        return pos


def _pairwise_loss(W, Hf, u, i, j):
    x = np.einsum("ij,ij->i", W[u], Hf[i] - Hf[j])
    # -log sigmoid(x), numerically stable
    return float(np.mean(np.logaddexp(0.0, -x)))


def fit_bpr(log: InteractionLog, cfg: BprConfig,
            n_items: int | None = None) -> BprModel:
    """Matrix factorization trained on ranking triples (u, i, j).

    Deterministic for a fixed seed: all randomness flows from one generator in
    a fixed order, and scatter-adds keep the iteration order stable.
    """
    if len(log) == 0:
        raise ValueError("cannot train on an empty interaction log")
    n_items = int(n_items if n_items is not None else log.n_items)
    missing = int(np.sum(log.item_counts(n_items) == 0))
    if missing:
        raise ValueError(
            f"{missing} of {n_items} items have no interactions; "
            "extract a k-core or pass a tighter n_items"
        )
    user_ids, u_dense = np.unique(log.users, return_inverse=True)
    i_dense = log.items - 1
    m = len(log)

    rng = np.random.default_rng(cfg.seed)
    W = 0.01 * rng.standard_normal((user_ids.size, cfg.factors))
    Hf = 0.01 * rng.standard_normal((n_items, cfg.factors))
    # fixed evaluation sample so per-epoch losses are comparable
    eval_pick = rng.integers(0, m, size=min(20_000, 4 * m))
    eval_neg = rng.integers(0, n_items, size=eval_pick.size)
    eu, ei, ej = u_dense[eval_pick], i_dense[eval_pick], eval_neg

    lr, reg = cfg.learning_rate, cfg.regularization
    losses = [_pairwise_loss(W, Hf, eu, ei, ej)]
    for _ in range(cfg.epochs):
        order = rng.permutation(m)
        negatives = rng.integers(0, n_items, size=m)
        for start in range(0, m, cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            u, i, j = u_dense[sel], i_dense[sel], negatives[sel]
            wu, hi, hj = W[u], Hf[i], Hf[j]
            x = np.einsum("ij,ij->i", wu, hi - hj)
            g = 1.0 / (1.0 + np.exp(x))
            gcol = g[:, None]
            np.add.at(W, u, lr * (gcol * (hi - hj) - reg * wu))
            np.add.at(Hf, i, lr * (gcol * wu - reg * hi))
            np.add.at(Hf, j, lr * (-gcol * wu - reg * hj))
        losses.append(_pairwise_loss(W, Hf, eu, ei, ej))
    return BprModel(W, Hf, user_ids, losses)


def train_bpr(log: InteractionLog, cfg: BprConfig,
              n_items: int | None = None) -> np.ndarray:
    """Item factors of a trained model; similarity is their inner product."""
    return fit_bpr(log, cfg, n_items=n_items).item_factors


ADULT_FEATURES = ("age", "education_num", "capital_gain")
ADULT_RECOVERY_FEATURES = ("age", "capital_gain")


def log_transform_column(values: np.ndarray) -> np.ndarray:
    """Natural log for heavy-tailed columns; requires positive entries."""
    values = np.asarray(values, dtype=np.float64)
    if np.any(values <= 0):
        raise ValueError("log transform needs positive values; drop extremes first")
    return np.log(values)


def drop_extreme_rows(values: np.ndarray) -> np.ndarray:
    """Mask keeping rows that hold neither the column maximum nor minimum.

    Census-style extracts clip extreme values, so rows sitting exactly at the
    clip boundaries carry no usable geometry.
    """
    values = np.asarray(values, dtype=np.float64)
    return (values != values.max()) & (values != values.min())


def znormalize(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    return (X - X.mean(axis=0)) / std


def _coerce_feature(records, name: str) -> np.ndarray:
    out = np.empty(len(records), dtype=np.float64)
    for row, rec in enumerate(records):
        try:
            out[row] = float(rec[name])
        except (KeyError, TypeError, ValueError):
            raise IngestError(
                f"non-numeric value {rec.get(name)!r} in column {name!r}", line=row + 1
            ) from None
    return out


@dataclass(frozen=True)
class AdultArtifacts:
    oracle: KnnProvider
    catalog: ItemCatalog
    embedding: np.ndarray
    kept_rows: np.ndarray


def build_adult_provider(records, K: int,
                         features=ADULT_FEATURES,
                         log_columns=("capital_gain",),
                         clip_columns=("capital_gain",),
                         attribute_column: str = "sex",
                         label_column: str | None = "income") -> AdultArtifacts:
    """Census-style provider: drop clip-boundary rows, log the heavy-tailed
    column, z-normalize, recommend nearest people by euclidean distance."""
    columns = {name: _coerce_feature(records, name) for name in features}
    keep = np.ones(len(records), dtype=bool)
    for name in clip_columns:
        if name in columns:
            keep &= drop_extreme_rows(columns[name])
    kept_rows = np.flatnonzero(keep)
    feats = []
    for name in features:
        col = columns[name][kept_rows]
        if name in log_columns:
            col = log_transform_column(col)
        feats.append(col)
    X = znormalize(np.stack(feats, axis=1))

    kept_records = [records[r] for r in kept_rows]
    values = sorted({str(rec.get(attribute_column, "")) for rec in kept_records})
    group_of = {v: g for g, v in enumerate(values)}
    attr = [group_of[str(rec.get(attribute_column, ""))] for rec in kept_records]
    labels = None
    if label_column is not None and all(label_column in rec for rec in kept_records):
        labels = tuple(str(rec[label_column]).strip() for rec in kept_records)
    catalog = catalog_from_groups(attr, n_groups=len(values), labels=labels,
                                  group_names=tuple(values),
                                  meta=tuple(dict(rec) for rec in kept_records))
    return AdultArtifacts(knn_provider(X, K), catalog, X, kept_rows)


def adult_provider(records, K: int, features=ADULT_FEATURES) -> KnnProvider:
    """Provider half of :func:`build_adult_provider`."""
    return build_adult_provider(records, K, features=features).oracle
