"""User-side fair recommendation toolkit.

Build a fair recommender on top of a black-box item-to-item provider you can
only query one page at a time: graph-local fair search, re-ranking baselines,
embedding recovery from the observable recommendation network, and an
evaluation harness, all exposed through a JSON API and a CLI.
"""

from .algorithms import (
    ConsulParams,
    RecResult,
    consul,
    etp,
    fair_greedy_rerank,
    oracle_method,
    pp_baseline,
    private_rank,
    private_walk,
    provider_method,
)
from .core import (
    AccessStats,
    GroupCounter,
    History,
    ItemCatalog,
    OracleSession,
    ProviderOracle,
    TableOracle,
    catalog_from_groups,
    check_feasibility,
    counter_add,
    fair_insert_check,
    oracle_query,
    walk_counterexample_oracle,
)
from .datasets import GroupRule, Split, apply_group_rule, ingest_adult, ingest_movielens, kcore, make_split
from .errors import (
    ConfigError,
    CrawlError,
    DisconnectedGraphError,
    InfeasibleTauError,
    IngestError,
    StepInvariantError,
    UnknownGroupError,
    UnknownItemError,
    UsersideError,
)
from .evaluation import BenchmarkDataset, label_accuracy, ndcg_at_k, recall_at_k, run_benchmark
from .network import (
    RecommendationNetwork,
    crawl_network,
    mutual_view,
    personalized_pagerank,
    read_network_tsv,
    undirected_view,
    write_network_tsv,
)
from .providers import (
    BprConfig,
    InteractionLog,
    KnnProvider,
    adult_provider,
    build_adult_provider,
    fit_bpr,
    knn_provider,
    train_bpr,
)
from .recovery import (
    RecoveryConfig,
    classical_mds,
    density_shortest_path_distances,
    estimate_density,
    ordinal_embed,
    procrustes_align,
    recover_embedding,
)

__version__ = "0.1.0"
