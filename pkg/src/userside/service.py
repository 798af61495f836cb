"""HTTP service: the core package behind a small JSON API.

Serves item browsing, per-item recommendations from every user-side method,
group information, in-memory sessions, and cumulative access statistics.
Responses are pure functions of (dataset, provider, session state, query
params); per-request randomness is derived from those inputs.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, Field

from .algorithms import (
    ConsulParams,
    RecResult,
    consul,
    pp_baseline,
    private_rank,
    private_walk,
    provider_method,
)
from .core import History, ItemCatalog, ProviderOracle
from .datasets import GroupRule, apply_group_rule, ingest_movielens, make_split
from .errors import ConfigError, InfeasibleTauError, UnknownItemError, UsersideError
from .evaluation import derive_seed
from .io import read_catalog_tsv, read_embedding_tsv, read_interactions_tsv
from .network import (
    RecommendationNetwork,
    crawl_network,
    read_network_tsv,
    write_network_tsv,
)
from .providers import BprConfig, KnnProvider, train_bpr

SERVICE_METHODS = ("provider", "consul", "privatewalk", "privaterank", "pp")

SESSION_IDLE_SECONDS = 3600


class ProviderSpec(BaseModel):
    kind: str = Field(description="knn | bpr | table")
    embeddings: str | None = None
    interactions: str | None = None
    network: str | None = None
    metric: str = "euclidean"
    factors: int = 64
    epochs: int = 100
    seed: int = 0


class ServiceConfig(BaseModel):
    catalog: str | None = None
    movielens_dir: str | None = None
    group_rule: dict | None = None
    provider: ProviderSpec
    k: int = 10
    l_max: int = 100
    crawl_cache: str | None = None
    static_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.model_validate(json.load(fh))
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            raise ConfigError(f"cannot load service config {path}: {exc}") from exc


@dataclass
class SessionState:
    session_id: str
    history: History = frozenset()
    tau: int | None = None
    k: int | None = None
    group_rule: dict | None = None
    touched: float = field(default_factory=time.monotonic)


class SessionUpdate(BaseModel):
    session_id: str | None = None
    history: list[int] | None = None
    tau: int | None = Field(default=None, ge=0)
    k: int | None = Field(default=None, ge=1)
    group_rule: dict | None = None


def load_provider_state(config: ServiceConfig):
    """Resolve the configured dataset and provider into runtime objects."""
    rule = None
    if config.group_rule:
        rule = GroupRule(**config.group_rule)
    log = None
    if config.movielens_dir:
        log, catalog = ingest_movielens(config.movielens_dir)
    elif config.catalog:
        catalog = read_catalog_tsv(config.catalog)
    else:
        raise ConfigError("config needs either 'catalog' or 'movielens_dir'")
    if rule is not None:
        catalog = apply_group_rule(catalog, rule, log=log)

    spec = config.provider
    if spec.kind == "knn":
        if not spec.embeddings:
            raise ConfigError("knn provider needs 'embeddings'")
        X = read_embedding_tsv(spec.embeddings)
        oracle: ProviderOracle = KnnProvider(X, config.k, metric=spec.metric)
    elif spec.kind == "bpr":
        interactions = spec.interactions
        if interactions:
            log = read_interactions_tsv(interactions)
        if log is None:
            raise ConfigError("bpr provider needs 'interactions' or a movielens dir")
        train = make_split(log).train
        factors = train_bpr(train, BprConfig(factors=spec.factors, epochs=spec.epochs,
                                             seed=spec.seed), n_items=catalog.n)
        oracle = KnnProvider(factors, config.k, metric="inner-product")
    elif spec.kind == "table":
        if not spec.network:
            raise ConfigError("table provider needs 'network'")
        net = read_network_tsv(spec.network)
        from .core import TableOracle

        oracle = TableOracle(net.out_edges, n=catalog.n)
    else:
        raise ConfigError(f"unknown provider kind {spec.kind!r}")
    if oracle.n != catalog.n:
        raise ConfigError(
            f"provider covers {oracle.n} items, catalog has {catalog.n}"
        )
    return catalog, oracle, rule, log


class AppState:
    def __init__(self, config: ServiceConfig, catalog: ItemCatalog,
                 oracle: ProviderOracle, rule: GroupRule | None, log=None):
        self.config = config
        self.catalog = catalog
        self.oracle = oracle
        self.rule = rule
        self.log = log
        self.lock = threading.Lock()
        self.sessions: dict[str, SessionState] = {}
        self.stats: dict[str, dict] = {
            m: {"calls": 0, "accesses": 0} for m in SERVICE_METHODS
        }
        self._network: RecommendationNetwork | None = None

    def network(self) -> RecommendationNetwork:
        with self.lock:
            if self._network is not None:
                return self._network
        cache = self.config.crawl_cache
        net = None
        if cache:
            try:
                net = read_network_tsv(cache)
            except (OSError, UsersideError):
                net = None
        if net is None or net.n != self.catalog.n:
            net = crawl_network(self.oracle, self.catalog.items)
            if cache:
                write_network_tsv(net, cache)
        with self.lock:
            self._network = net
        return net

    def session_for(self, session_id: str | None) -> SessionState | None:
        if not session_id:
            return None
        now = time.monotonic()
        with self.lock:
            state = self.sessions.get(session_id)
            if state is None:
                return None
            if now - state.touched > SESSION_IDLE_SECONDS:
                del self.sessions[session_id]
                return None
            state.touched = now
            return state

    def record(self, method: str, result: RecResult) -> None:
        with self.lock:
            self.stats[method]["calls"] += 1
            self.stats[method]["accesses"] += int(result.stats.accesses)


def _bad_request(detail: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": detail})


def create_app(config: ServiceConfig) -> FastAPI:
    catalog, oracle, rule, log = load_provider_state(config)
    state = AppState(config, catalog, oracle, rule, log)
    app = FastAPI(title="userside recommender")
    app.state.userside = state

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        # malformed query/body parameters are the client's problem: 400
        return _bad_request(str(exc.errors()))

    @app.exception_handler(InfeasibleTauError)
    async def on_infeasible(request: Request, exc: InfeasibleTauError):
        return JSONResponse(
            status_code=422,
            content={"detail": str(exc), "group": exc.group_name},
        )

    @app.exception_handler(UnknownItemError)
    async def on_unknown_item(request: Request, exc: UnknownItemError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    def item_payload(item: int) -> dict:
        meta = catalog.meta_of(item)
        group = catalog.group_of(item)
        payload = {
            "id": item,
            "title": str(meta.get("title", f"item {item}")),
            "group": group,
            "group_name": catalog.group_name(group),
        }
        if "year" in meta:
            payload["year"] = meta["year"]
        if catalog.labels is not None:
            payload["label"] = catalog.labels[item - 1]
        return payload

    @app.get("/api/items")
    def list_items(query: str = "", page: int = 1, page_size: int = 20):
        if page < 1 or not 1 <= page_size <= 200:
            return _bad_request("page must be >= 1 and page_size in 1..200")
        needle = query.strip().lower()
        matches = []
        for item in catalog.items:
            if needle:
                title = str(catalog.meta_of(item).get("title", "")).lower()
                if needle != str(item) and needle not in title:
                    continue
            matches.append(item)
        start = (page - 1) * page_size
        return {
            "total": len(matches),
            "page": page,
            "items": [item_payload(i) for i in matches[start:start + page_size]],
        }

    @app.get("/api/items/{item_id}")
    def get_item(item_id: int):
        catalog.check_item(item_id)
        return item_payload(item_id)

    @app.get("/api/items/{item_id}/recommend")
    def recommend(item_id: int, method: str = "consul",
                  tau: int | None = None, k: int | None = None,
                  session: str | None = None):
        catalog.check_item(item_id)
        if method not in SERVICE_METHODS:
            return _bad_request(
                f"unknown method {method!r}; expected one of {SERVICE_METHODS}"
            )
        sess = state.session_for(session)
        history: History = sess.history if sess else frozenset()
        k_eff = k if k is not None else (sess.k if sess and sess.k else config.k)
        tau_eff = tau if tau is not None else (sess.tau if sess and sess.tau else 0)
        if k_eff < 1 or tau_eff < 0:
            return _bad_request("k must be >= 1 and tau >= 0")
        work_catalog = catalog
        if sess and sess.group_rule:
            work_catalog = apply_group_rule(catalog, GroupRule(**sess.group_rule),
                                            log=state.log, source=item_id)
        params = ConsulParams(K=k_eff, tau=tau_eff, L_max=config.l_max,
                              seed=derive_seed(method, item_id, tau_eff, k_eff))
        if method == "provider":
            result = provider_method(oracle, work_catalog, item_id)
        elif method == "consul":
            result = consul(oracle, work_catalog, item_id, history, params=params)
        elif method == "privatewalk":
            result = private_walk(oracle, work_catalog, item_id, history,
                                  params=params)
        elif method == "pp":
            result = pp_baseline(oracle, work_catalog, item_id, history,
                                 K=k_eff, tau=tau_eff)
        else:
            result = private_rank(state.network(), work_catalog, item_id, history,
                                  K=k_eff, tau=tau_eff)
        state.record(method, result)
        payload = result.to_payload(work_catalog)
        payload.update({"source": item_id, "method": method,
                        "k": k_eff, "tau": tau_eff})
        return payload

    @app.get("/api/groups")
    def groups():
        sizes = catalog.group_sizes()
        return {
            "rule": rule.describe() if rule else None,
            "n_groups": catalog.n_groups,
            "counts": {catalog.group_name(g): int(sizes[g])
                       for g in range(catalog.n_groups)},
        }

    @app.put("/api/session")
    def put_session(update: SessionUpdate):
        sid = update.session_id or uuid.uuid4().hex
        with state.lock:
            sess = state.sessions.get(sid) or SessionState(session_id=sid)
        # validate the whole update before mutating anything
        new_history = sess.history
        if update.history is not None:
            for item in update.history:
                catalog.check_item(item)
            new_history = frozenset(update.history)
        new_k = update.k if update.k is not None else sess.k
        new_tau = update.tau if update.tau is not None else sess.tau
        if new_tau is not None and new_tau * catalog.n_groups > (new_k or config.k):
            raise InfeasibleTauError(
                f"tau={new_tau} with {catalog.n_groups} groups exceeds "
                f"K={new_k or config.k}"
            )
        new_rule = sess.group_rule
        if update.group_rule is not None:
            try:
                GroupRule(**update.group_rule)
            except (TypeError, ValueError) as exc:
                return _bad_request(f"bad group rule: {exc}")
            new_rule = update.group_rule
        with state.lock:
            sess.history, sess.k, sess.tau = new_history, new_k, new_tau
            sess.group_rule = new_rule
            sess.touched = time.monotonic()
            state.sessions[sid] = sess
        return {
            "session_id": sid,
            "history": sorted(sess.history),
            "tau": sess.tau,
            "k": sess.k,
            "group_rule": sess.group_rule,
        }

    @app.get("/api/stats")
    def stats():
        with state.lock:
            per_method = {m: dict(v) for m, v in state.stats.items()}
        return {
            "total_accesses": sum(v["accesses"] for v in per_method.values()),
            "total_calls": sum(v["calls"] for v in per_method.values()),
            "per_method": per_method,
            "oracle_access_count": oracle.access_count,
        }

    @app.get("/")
    def index():
        if config.static_dir:
            return FileResponse(f"{config.static_dir}/index.html")
        return {"service": "userside recommender", "api": "/api/items"}

    if config.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/static", StaticFiles(directory=config.static_dir), name="static")

    return app


def run_service(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
