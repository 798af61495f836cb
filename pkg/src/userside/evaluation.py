"""Ranking metrics and the benchmark runner."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algorithms import (
    ConsulParams,
    consul,
    etp,
    oracle_method,
    pp_baseline,
    private_rank,
    private_walk,
    provider_method,
)
from .core import ItemCatalog, check_feasibility
from .datasets import Split
from .errors import InfeasibleTauError, UsersideError
from .network import crawl_network
from .providers import KnnProvider
from .recovery import RecoveryConfig


def ndcg_at_k(rec, relevant, K: int) -> float:
    """Binary-relevance nDCG: DCG over the first K positions divided by the
    ideal DCG of min(|relevant|, K) hits at the top."""
    relevant = set(relevant)
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    dcg = 0.0
    for pos, item in enumerate(list(rec)[:K], start=1):
        if item in relevant:
            dcg += 1.0 / math.log2(pos + 1)
    ideal_hits = min(len(relevant), K)
    idcg = sum(1.0 / math.log2(pos + 1) for pos in range(1, ideal_hits + 1))
    return dcg / idcg


def recall_at_k(rec, relevant, K: int) -> float:
    relevant = set(relevant)
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    hits = len(set(list(rec)[:K]) & relevant)
    return hits / min(len(relevant), K)


def label_accuracy(rec, source: int, catalog: ItemCatalog) -> float:
    """Fraction of recommended items sharing the source item's label."""
    rec = list(rec)
    if not rec:
        raise ValueError("empty recommendation list")
    want = catalog.label_of(source)
    return sum(1 for item in rec if catalog.label_of(item) == want) / len(rec)


def derive_seed(*parts) -> int:
    """Stable small seed from heterogeneous parts (no Python hash)."""
    acc = 2166136261
    for part in parts:
        for byte in repr(part).encode():
            acc = ((acc ^ byte) * 16777619) & 0xFFFFFFFF
    return acc


@dataclass
class MethodRow:
    method: str
    calls: int = 0
    ndcg_sum: float = 0.0
    recall_sum: float = 0.0
    accuracy_sum: float = 0.0
    access_sum: float = 0.0
    infinite_access: bool = False
    fairness_violations: int = 0
    short_lists: int = 0

    def mean(self, total: float) -> float:
        return total / self.calls if self.calls else 0.0


@dataclass
class BenchmarkReport:
    dataset: str
    kind: str
    K: int
    tau: int
    seed: int
    rows: list[MethodRow] = field(default_factory=list)

    def row(self, method: str) -> MethodRow:
        for row in self.rows:
            if row.method == method:
                return row
        raise KeyError(method)

    def to_payload(self) -> dict:
        out = {"dataset": self.dataset, "kind": self.kind, "K": self.K,
               "tau": self.tau, "seed": self.seed, "methods": []}
        for row in self.rows:
            entry = {
                "method": row.method,
                "calls": row.calls,
                "accesses": "inf" if row.infinite_access else row.mean(row.access_sum),
                "fairness_violations": row.fairness_violations,
            }
            if self.kind == "label":
                entry["accuracy"] = row.mean(row.accuracy_sum)
            else:
                entry["ndcg"] = row.mean(row.ndcg_sum)
                entry["recall"] = row.mean(row.recall_sum)
            out["methods"].append(entry)
        return out

    def to_tsv(self) -> str:
        if self.kind == "label":
            header = "method\taccuracy\taccess\tviolations"
        else:
            header = "method\tndcg\trecall\taccess\tviolations"
        lines = [header]
        for row in self.rows:
            access = "inf" if row.infinite_access else f"{row.mean(row.access_sum):.4f}"
            if self.kind == "label":
                lines.append(f"{row.method}\t{row.mean(row.accuracy_sum):.6f}"
                             f"\t{access}\t{row.fairness_violations}")
            else:
                lines.append(f"{row.method}\t{row.mean(row.ndcg_sum):.6f}"
                             f"\t{row.mean(row.recall_sum):.6f}"
                             f"\t{access}\t{row.fairness_violations}")
        return "\n".join(lines) + "\n"


@dataclass
class BenchmarkDataset:
    """Everything one benchmark run needs, already ingested and trained."""

    name: str
    kind: str  # "ranking" (split-based) or "label" (all items are sources)
    catalog: ItemCatalog
    provider: KnnProvider
    split: Split | None = None
    recovery: RecoveryConfig | None = None

    def __post_init__(self):
        if self.kind not in ("ranking", "label"):
            raise ValueError("kind must be 'ranking' or 'label'")
        if self.kind == "ranking" and self.split is None:
            raise ValueError("ranking benchmarks need a split")


DEFAULT_METHODS = ("oracle", "privaterank", "privatewalk", "consul")


def _episodes(dataset: BenchmarkDataset, max_sources: int | None):
    if dataset.kind == "ranking":
        users = dataset.split.users[:max_sources]
        for user in users:
            train = dataset.split.train
            mask = train.users == user
            history = frozenset(int(i) for i in train.items[mask])
            yield user, dataset.split.source_item[user], history, dataset.split.test[user]
    else:
        items = list(dataset.catalog.items)[:max_sources]
        for item in items:
            yield item, item, frozenset(), None


def run_benchmark(dataset: BenchmarkDataset, methods=DEFAULT_METHODS, *,
                  K: int, tau: int, seed: int = 0, L_max: int = 100,
                  max_sources: int | None = None) -> BenchmarkReport:
    """Evaluate each method on every episode; means plus fairness audit.

    Deterministic for a fixed seed: per-episode randomness is derived from
    (seed, method, source).
    """
    unknown = set(methods) - {"provider", "consul", "privatewalk", "privaterank",
                              "pp", "oracle", "etp"}
    if unknown:
        raise UsersideError(f"unknown methods: {sorted(unknown)}")
    episodes = list(_episodes(dataset, max_sources))
    if not episodes:
        raise UsersideError("no evaluation episodes")
    # fail before any run if some episode cannot satisfy tau
    for _, source, history, _ in episodes:
        check_feasibility(dataset.catalog, history, source, K, tau)

    report = BenchmarkReport(dataset.name, dataset.kind, K, tau, seed,
                             rows=[MethodRow(m) for m in methods])
    recovered_cache: dict[frozenset, np.ndarray] = {}
    for user, source, history, relevant in episodes:
        oracle = dataset.provider.with_history(history) if history \
            else dataset.provider
        network = None
        for method in methods:
            params = ConsulParams(K=K, tau=tau, L_max=L_max,
                                  seed=derive_seed(seed, method, user))
            if method == "provider":
                result = provider_method(oracle, dataset.catalog, source)
            elif method == "consul":
                result = consul(oracle, dataset.catalog, source, history,
                                params=params)
            elif method == "privatewalk":
                result = private_walk(oracle, dataset.catalog, source, history,
                                      params=params)
            elif method == "pp":
                result = pp_baseline(oracle, dataset.catalog, source, history,
                                     K=K, tau=tau)
            elif method == "oracle":
                result = oracle_method(dataset.provider.X, dataset.provider.metric,
                                       dataset.catalog, source, history,
                                       K=K, tau=tau)
            else:  # privaterank / etp share the per-episode crawl
                if network is None:
                    network = crawl_network(oracle, dataset.catalog.items)
                if method == "privaterank":
                    result = private_rank(network, dataset.catalog, source,
                                          history, K=K, tau=tau)
                else:
                    cfg = dataset.recovery or RecoveryConfig(d=2, method="density-mds")
                    key = history
                    if key not in recovered_cache:
                        from .recovery import recover_embedding

                        recovered_cache[key] = recover_embedding(network, cfg).embedding
                    result = etp(network, dataset.catalog, source, history,
                                 K=K, tau=tau, d=cfg.d,
                                 recovered=recovered_cache[key])
            row = report.row(method)
            row.calls += 1
            if math.isinf(result.stats.accesses):
                row.infinite_access = True
            else:
                row.access_sum += result.stats.accesses
            if any(cnt < tau for cnt in result.group_counts.values()):
                row.fairness_violations += 1
            if len(result.items) != K:
                row.short_lists += 1
            if dataset.kind == "label":
                row.accuracy_sum += label_accuracy(result.items, source,
                                                   dataset.catalog)
            else:
                row.ndcg_sum += ndcg_at_k(result.items, relevant, K)
                row.recall_sum += recall_at_k(result.items, relevant, K)
    return report
