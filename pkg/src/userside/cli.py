"""Command line front end; a thin layer over the library.

Exit codes: 0 success, 2 configuration/usage error, 3 infeasible fairness
requirement.
"""

from __future__ import annotations

import argparse
import json
import sys

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
from .core import TableOracle
from .datasets import GroupRule, apply_group_rule, ingest_adult, ingest_movielens, kcore, make_split
from .errors import ConfigError, InfeasibleTauError, UsersideError
from .evaluation import BenchmarkDataset, run_benchmark
from .io import (
    read_catalog_tsv,
    read_embedding_tsv,
    read_history,
    read_interactions_tsv,
    write_catalog_tsv,
    write_embedding_tsv,
    write_interactions_tsv,
)
from .network import crawl_network, read_network_tsv, write_network_tsv
from .providers import BprConfig, KnnProvider, build_adult_provider, train_bpr
from .recovery import RecoveryConfig, procrustes_align, recover_embedding

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _rule_from_args(args) -> GroupRule | None:
    if not args.rule:
        return None
    kind = {"oldness": "year-threshold", "popularity": "interaction-count-threshold",
            "column": "attribute-column", "year-distance": "year-distance"}[args.rule]
    threshold = args.rule_threshold
    if threshold is None:
        threshold = {"year-threshold": 1990, "interaction-count-threshold": 50,
                     "year-distance": 10}.get(kind)
    return GroupRule(kind=kind, threshold=threshold, column=args.rule_column)


def cmd_ingest(args) -> int:
    if args.format == "movielens":
        log, catalog = ingest_movielens(args.dataset)
        rule = _rule_from_args(args)
        if rule is not None:
            catalog = apply_group_rule(catalog, rule, log=log)
        if args.kcore:
            log = kcore(log, args.kcore)
        write_catalog_tsv(catalog, f"{args.out}/catalog.tsv")
        write_interactions_tsv(log, f"{args.out}/interactions.tsv")
        print(f"wrote {catalog.n} items, {len(log)} interactions to {args.out}")
    else:  # adult
        records = ingest_adult(args.dataset, limit=args.limit)
        artifacts = build_adult_provider(records, K=args.k)
        write_catalog_tsv(artifacts.catalog, f"{args.out}/catalog.tsv")
        write_embedding_tsv(artifacts.embedding, f"{args.out}/embedding.tsv")
        print(f"wrote {artifacts.catalog.n} rows (of {len(records)}) to {args.out}")
    return EXIT_OK


def cmd_train_provider(args) -> int:
    log = read_interactions_tsv(args.interactions)
    cfg = BprConfig(factors=args.factors, epochs=args.epochs, seed=args.seed)
    factors = train_bpr(log, cfg, n_items=args.n_items)
    write_embedding_tsv(factors, args.out)
    print(f"wrote {factors.shape[0]}x{factors.shape[1]} item factors to {args.out}")
    return EXIT_OK


def _load_oracle(args, catalog):
    if args.provider == "network":
        if not args.network:
            raise ConfigError("--provider network needs --network FILE")
        net = read_network_tsv(args.network)
        return TableOracle(net.out_edges, n=catalog.n if catalog else None)
    if not args.embeddings:
        raise ConfigError(f"--provider {args.provider} needs --embeddings FILE")
    X = read_embedding_tsv(args.embeddings)
    metric = "inner-product" if args.provider == "bpr" else args.metric
    return KnnProvider(X, args.k, metric=metric)


def cmd_crawl(args) -> int:
    catalog = read_catalog_tsv(args.catalog) if args.catalog else None
    oracle = _load_oracle(args, catalog)
    items = range(1, oracle.n + 1)
    net = crawl_network(oracle, items)
    write_network_tsv(net, args.out)
    print(f"crawled {net.n} pages (K={net.K}) into {args.out}")
    return EXIT_OK


def cmd_recommend(args) -> int:
    catalog = read_catalog_tsv(args.catalog)
    history = read_history(args.history) if args.history else frozenset()
    params = ConsulParams(K=args.k, tau=args.tau, L_max=args.l_max, seed=args.seed)
    method = args.method
    if method in ("provider", "consul", "privatewalk", "pp"):
        oracle = _load_oracle(args, catalog)
        if method == "provider":
            result = provider_method(oracle, catalog, args.source)
        elif method == "consul":
            result = consul(oracle, catalog, args.source, history, params=params)
        elif method == "privatewalk":
            result = private_walk(oracle, catalog, args.source, history,
                                  params=params)
        else:
            result = pp_baseline(oracle, catalog, args.source, history,
                                 K=args.k, tau=args.tau)
    elif method == "privaterank":
        net = read_network_tsv(args.network) if args.network else crawl_network(
            _load_oracle(args, catalog), catalog.items)
        result = private_rank(net, catalog, args.source, history,
                              K=args.k, tau=args.tau)
    elif method == "oracle":
        X = read_embedding_tsv(args.embeddings)
        result = oracle_method(X, args.metric, catalog, args.source, history,
                               K=args.k, tau=args.tau)
    elif method == "etp":
        net = read_network_tsv(args.network) if args.network else crawl_network(
            _load_oracle(args, catalog), catalog.items)
        result = etp(net, catalog, args.source, history, K=args.k, tau=args.tau,
                     d=args.d, config=RecoveryConfig(d=args.d, method=args.recovery,
                                                     seed=args.seed))
    else:
        raise ConfigError(f"unknown method {method!r}")
    payload = result.to_payload(catalog)
    payload["source"] = args.source
    payload["method"] = method
    print(json.dumps(payload, ensure_ascii=False))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.format == "movielens":
        log, catalog = ingest_movielens(args.dataset)
        rule = _rule_from_args(args) or GroupRule("year-threshold", 1990)
        catalog = apply_group_rule(catalog, rule, log=log)
        split = make_split(log, seed=args.seed)
        factors = train_bpr(split.train, BprConfig(seed=args.seed,
                                                   epochs=args.epochs,
                                                   factors=args.factors),
                            n_items=catalog.n)
        provider = KnnProvider(factors, args.k, metric="inner-product")
        dataset = BenchmarkDataset(name=args.dataset, kind="ranking",
                                   catalog=catalog, provider=provider, split=split)
    else:  # adult
        records = ingest_adult(args.dataset, limit=args.limit)
        artifacts = build_adult_provider(records, K=args.k)
        dataset = BenchmarkDataset(name=args.dataset, kind="label",
                                   catalog=artifacts.catalog,
                                   provider=artifacts.oracle)
    methods = tuple(args.methods.split(","))
    report = run_benchmark(dataset, methods, K=args.k, tau=args.tau,
                           seed=args.seed, L_max=args.l_max,
                           max_sources=args.max_sources)
    tsv = report.to_tsv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(tsv)
    print(tsv, end="")
    return EXIT_OK


def cmd_recover(args) -> int:
    net = read_network_tsv(args.network)
    cfg = RecoveryConfig(d=args.d, method=args.recovery, seed=args.seed)
    result = recover_embedding(net, cfg)
    write_embedding_tsv(result.embedding, args.out)
    status = "converged" if result.converged else "NOT converged"
    print(f"recovered {result.embedding.shape[0]} points in d={args.d} "
          f"({status}) -> {args.out}")
    return EXIT_OK


def cmd_align(args) -> int:
    Xhat = read_embedding_tsv(args.recovered)
    Xref = read_embedding_tsv(args.reference)
    result = procrustes_align(Xhat, Xref)
    payload = {
        "error": result.error,
        "scale": result.scale,
        "rotation": np.asarray(result.rotation).tolist(),
        "translation": np.asarray(result.translation).tolist(),
    }
    text = json.dumps(payload)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import ServiceConfig, run_service

    if args.config:
        config = ServiceConfig.from_file(args.config)
    else:
        if args.network:
            provider = {"kind": "table", "network": args.network}
        elif args.interactions:
            provider = {"kind": "bpr", "interactions": args.interactions}
        elif args.embeddings:
            # stored factors served as a nearest-neighbour oracle; factor
            # models rank by inner product
            metric = "inner-product" if args.provider == "bpr" else "euclidean"
            provider = {"kind": "knn", "embeddings": args.embeddings,
                        "metric": metric}
        else:
            raise ConfigError(
                "serve needs --network, --interactions, or --embeddings"
            )
        config = ServiceConfig(catalog=args.catalog, provider=provider,
                               k=args.k, l_max=args.l_max,
                               static_dir=args.static_dir,
                               host=args.host, port=args.port)
    run_service(config)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="userside",
                                     description="User-side recommender toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, k=True, tau=False, seed=True):
        if k:
            p.add_argument("--k", type=int, default=10)
        if tau:
            p.add_argument("--tau", type=int, default=0)
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ingest", help="dataset -> catalog/interactions files")
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", choices=("movielens", "adult"), default="movielens")
    p.add_argument("--rule", choices=("oldness", "popularity", "column",
                                      "year-distance"))
    p.add_argument("--rule-threshold", type=float)
    p.add_argument("--rule-column")
    p.add_argument("--kcore", type=int)
    p.add_argument("--limit", type=int)
    p.add_argument("--out", required=True)
    common(p, tau=False, seed=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-provider", help="fit BPR factors from interactions")
    p.add_argument("--interactions", required=True)
    p.add_argument("--factors", type=int, default=64)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--n-items", type=int)
    p.add_argument("--out", required=True)
    common(p, k=False)
    p.set_defaults(func=cmd_train_provider)

    p = sub.add_parser("crawl", help="crawl a provider into a network TSV")
    p.add_argument("--provider", choices=("knn", "bpr", "network"), default="knn")
    p.add_argument("--embeddings")
    p.add_argument("--network")
    p.add_argument("--metric", choices=("euclidean", "inner-product"),
                   default="euclidean")
    p.add_argument("--catalog")
    p.add_argument("--out", required=True)
    common(p, seed=False)
    p.set_defaults(func=cmd_crawl)

    p = sub.add_parser("recommend", help="one recommendation call to stdout")
    p.add_argument("--catalog", required=True)
    p.add_argument("--provider", choices=("knn", "bpr", "network"), default="knn")
    p.add_argument("--embeddings")
    p.add_argument("--network")
    p.add_argument("--metric", choices=("euclidean", "inner-product"),
                   default="euclidean")
    p.add_argument("--method", default="consul",
                   choices=("provider", "consul", "privatewalk", "privaterank",
                            "pp", "oracle", "etp"))
    p.add_argument("--source", type=int, required=True)
    p.add_argument("--history")
    p.add_argument("--l-max", type=int, default=100)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--recovery", choices=("ordinal", "density-mds"),
                   default="density-mds")
    common(p, tau=True)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("evaluate", help="benchmark methods on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", choices=("movielens", "adult"), default="movielens")
    p.add_argument("--rule", choices=("oldness", "popularity", "column",
                                      "year-distance"))
    p.add_argument("--rule-threshold", type=float)
    p.add_argument("--rule-column")
    p.add_argument("--methods", default="oracle,privaterank,privatewalk,consul")
    p.add_argument("--factors", type=int, default=64)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--l-max", type=int, default=100)
    p.add_argument("--limit", type=int)
    p.add_argument("--max-sources", type=int)
    p.add_argument("--out")
    common(p, tau=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("recover", help="embeddings from a crawled network TSV")
    p.add_argument("--network", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--recovery", choices=("ordinal", "density-mds"),
                   default="ordinal")
    p.add_argument("--out", required=True)
    common(p, k=False)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("align", help="similarity-align recovered vs reference")
    p.add_argument("--recovered", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config")
    p.add_argument("--catalog")
    p.add_argument("--provider", choices=("knn", "bpr", "table"))
    p.add_argument("--embeddings")
    p.add_argument("--interactions")
    p.add_argument("--network")
    p.add_argument("--static-dir", help="directory with the built explorer UI")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--l-max", type=int, default=100)
    common(p, seed=False)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleTauError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, UsersideError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
