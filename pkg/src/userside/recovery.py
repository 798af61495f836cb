"""Embedding recovery from unweighted k-NN graphs.

Two routes, both exact only up to a similarity transformation (rotation,
reflection, scale, translation):

* ordinal: hinge loss over "neighbours are closer than non-neighbours"
  constraints, minimized by gradient descent with step halving from a
  classical-scaling warm start;
* density-mds: degree-based density estimate -> density-weighted shortest
  paths -> classical scaling of the distance matrix.

:func:`procrustes_align` finds the optimal similarity transform onto a
reference cloud, used to score recoveries against ground truth.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import DegenerateReferenceError, DisconnectedGraphError

RECOVERY_METHODS = ("ordinal", "density-mds")


@dataclass(frozen=True)
class RecoveryConfig:
    d: int
    method: str = "ordinal"
    max_iters: int = 1500
    tolerance: float = 1e-9
    seed: int = 0
    margin: float = 0.03
    non_edge_ratio: int = 15
    symmetrize: str = "mutual"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be at least 1")
        if self.method not in RECOVERY_METHODS:
            raise ValueError(f"method must be one of {RECOVERY_METHODS}")
        if self.tolerance <= 0 or self.margin <= 0:
            raise ValueError("tolerance and margin must be positive")
        if self.symmetrize not in ("mutual", "union"):
            raise ValueError("symmetrize must be 'mutual' or 'union'")


@dataclass
class RecoveryResult:
    embedding: np.ndarray
    converged: bool = True
    objective_history: list[float] = field(default_factory=list)


def _as_symmetric(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A, dtype=bool)
    A = (A + A.T).astype(bool)
    A = sp.csr_matrix(A)
    A.setdiag(False)
    A.eliminate_zeros()
    return A


def _require_connected(A: sp.csr_matrix) -> None:
    n_comp, labels = connected_components(A, directed=False)
    if n_comp != 1:
        raise DisconnectedGraphError(n_comp, labels)


def estimate_density(A) -> np.ndarray:
    """Stationary distribution of the simple random walk: degree / total degree."""
    A = _as_symmetric(A)
    _require_connected(A)
    deg = np.asarray(A.sum(axis=1)).ravel().astype(np.float64)
    return deg / deg.sum()


def density_shortest_path_distances(A, pi: np.ndarray, d: int) -> np.ndarray:
    """All-pairs shortest paths with edge weight ((pi_i + pi_j) / 2)^(-1/d).

    Denser regions get shorter edges, so path length tracks the embedding
    distance up to a global scale.
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    A = _as_symmetric(A)
    _require_connected(A)
    pi = np.asarray(pi, dtype=np.float64)
    coo = sp.triu(A, k=1).tocoo()
    w = ((pi[coo.row] + pi[coo.col]) / 2.0) ** (-1.0 / d)
    W = sp.csr_matrix((w, (coo.row, coo.col)), shape=A.shape)
    D = shortest_path(W, directed=False)
    return np.asarray(D)


def classical_mds(D: np.ndarray, d: int) -> np.ndarray:
    """Classical scaling: double-center -D^2/2, keep the top d eigenpairs.

    Negative eigenvalues are clamped to zero; if fewer than d positive
    eigenvalues exist the missing columns are zero and a warning is issued.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if D.shape != (n, n):
        raise ValueError("distance matrix must be square")
    D2 = D**2
    B = D2 - D2.mean(axis=0) - D2.mean(axis=1)[:, None] + D2.mean()
    B *= -0.5
    B = (B + B.T) / 2.0
    vals, vecs = np.linalg.eigh(B)
    order = np.argsort(vals)[::-1][:d]
    vals = vals[order]
    vecs = vecs[:, order]
    floor = max(float(np.abs(vals).max()), 1.0) * 1e-12
    vals = np.where(vals > floor, vals, 0.0)
    n_positive = int(np.sum(vals > 0))
    if n_positive < d:
        warnings.warn(
            f"only {n_positive} positive eigenvalues for {d} requested dimensions; "
            "padding with zero columns",
            stacklevel=2,
        )
    vals = np.clip(vals, 0.0, None)
    X = vecs * np.sqrt(vals)
    # pin each column's largest-magnitude entry positive for reproducibility
    for col in range(X.shape[1]):
        pivot = np.argmax(np.abs(X[:, col]))
        if X[pivot, col] < 0:
            X[:, col] = -X[:, col]
    return X


def _mean_pairwise_distance(X: np.ndarray) -> float:
    n = X.shape[0]
    sq = np.sum(X**2, axis=1)
    d2 = sq[:, None] - 2.0 * (X @ X.T) + sq[None, :]
    np.clip(d2, 0.0, None, out=d2)
    total = np.sqrt(d2, out=d2).sum()
    return float(total / (n * (n - 1)))


def _unit_scale(X: np.ndarray) -> np.ndarray:
    mean = _mean_pairwise_distance(X)
    if mean == 0:
        return X
    return X / mean


def _ordinal_constraints(A: sp.csr_matrix, ratio: int, rng) -> tuple[np.ndarray, ...]:
    """Triples (i, j, k): j a neighbour of i, k a sampled non-neighbour.

    Nodes adjacent to everything contribute no triples (their ordering is
    vacuous), so complete graphs yield an empty constraint set.
    """
    n = A.shape[0]
    indptr, indices = A.indptr, A.indices
    all_nodes = np.arange(n, dtype=np.int64)
    anchors, pos, neg = [], [], []
    for i in range(n):
        nbrs = indices[indptr[i]:indptr[i + 1]]
        if nbrs.size == 0 or nbrs.size >= n - 1:
            continue
        mask = np.ones(n, dtype=bool)
        mask[nbrs] = False
        mask[i] = False
        candidates = all_nodes[mask]
        m = nbrs.size * ratio
        anchors.append(np.full(m, i, dtype=np.int64))
        pos.append(np.repeat(nbrs.astype(np.int64), ratio))
        neg.append(candidates[rng.integers(0, candidates.size, size=m)])
    if not anchors:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty
    return np.concatenate(anchors), np.concatenate(pos), np.concatenate(neg)


def _hinge_objective_grad(X, anchors, pos, neg, margin):
    if anchors.size == 0:
        return 0.0, np.zeros_like(X)
    dij = X[anchors] - X[pos]
    dik = X[anchors] - X[neg]
    sij = np.einsum("ij,ij->i", dij, dij)
    sik = np.einsum("ij,ij->i", dik, dik)
    viol = margin + sij - sik
    active = viol > 0
    obj = float(np.sum(viol[active] ** 2)) / anchors.size
    grad = np.zeros_like(X)
    if np.any(active):
        coef = (4.0 * viol[active] / anchors.size)[:, None]
        a, p, q = anchors[active], pos[active], neg[active]
        np.add.at(grad, a, coef * (dij[active] - dik[active]))
        np.add.at(grad, p, -coef * dij[active])
        np.add.at(grad, q, coef * dik[active])
    return obj, grad


def ordinal_embed(A, cfg: RecoveryConfig) -> RecoveryResult:
    """Hinge-loss ordinal embedding of a symmetric k-NN graph.

    Warm-started from classical scaling of hop distances. The non-edge sample
    is drawn once (seeded), so descent with step halving gives a monotone
    objective and a deterministic result.
    """
    A = _as_symmetric(A)
    _require_connected(A)
    rng = np.random.default_rng(cfg.seed)
    hops = shortest_path(A.astype(np.float64), directed=False, unweighted=True)
    X = _unit_scale(classical_mds(hops, cfg.d))
    anchors, pos, neg = _ordinal_constraints(A, cfg.non_edge_ratio, rng)

    obj, grad = _hinge_objective_grad(X, anchors, pos, neg, cfg.margin)
    history = [obj]
    step = 1.0
    converged = False
    for _ in range(cfg.max_iters):
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            converged = True
            break
        while step > 1e-14:
            cand = X - step * grad
            cand_obj, cand_grad = _hinge_objective_grad(cand, anchors, pos, neg,
                                                        cfg.margin)
            if cand_obj <= obj:
                break
            step *= 0.5
        else:
            break
        improvement = obj - cand_obj
        X, obj, grad = cand, cand_obj, cand_grad
        history.append(obj)
        step *= 1.5
        if improvement < cfg.tolerance * max(obj, 1.0):
            converged = True
            break
    return RecoveryResult(_unit_scale(X), converged, history)


def density_mds_embed(A, cfg: RecoveryConfig) -> RecoveryResult:
    pi = estimate_density(A)
    D = density_shortest_path_distances(A, pi, cfg.d)
    X = _unit_scale(classical_mds(D, cfg.d))
    return RecoveryResult(X, converged=True, objective_history=[])


def recover_embedding(G_or_adjacency, cfg: RecoveryConfig) -> RecoveryResult:
    """Dispatch on ``cfg.method``; accepts a network object or an adjacency.

    Networks are symmetrized per ``cfg.symmetrize``; reciprocated-only edges
    (mutual) recover noticeably better than the union.
    """
    A = G_or_adjacency
    if hasattr(A, "out_edges"):  # RecommendationNetwork
        from .network import mutual_view, undirected_view

        if cfg.symmetrize == "mutual":
            A = mutual_view(G_or_adjacency)
            if connected_components(_as_symmetric(A), directed=False)[0] != 1:
                # reciprocated edges alone fragment sparse graphs; union is
                # always at least as connected
                A = undirected_view(G_or_adjacency)
        else:
            A = undirected_view(G_or_adjacency)
    if cfg.method == "ordinal":
        return ordinal_embed(A, cfg)
    return density_mds_embed(A, cfg)


@dataclass(frozen=True)
class AlignmentResult:
    aligned: np.ndarray
    error: float
    scale: float
    rotation: np.ndarray
    translation: np.ndarray


def procrustes_align(Xhat: np.ndarray, Xref: np.ndarray) -> AlignmentResult:
    """Optimal similarity transform of ``Xhat`` onto ``Xref``.

    Returns the transformed points and the residual normalized by the
    centered reference norm, so 0 means a perfect match and values around 1
    mean no better than collapsing to the mean.
    """
    Xhat = np.asarray(Xhat, dtype=np.float64)
    Xref = np.asarray(Xref, dtype=np.float64)
    if Xhat.shape != Xref.shape:
        raise ValueError(f"shape mismatch: {Xhat.shape} vs {Xref.shape}")
    mu_hat = Xhat.mean(axis=0)
    mu_ref = Xref.mean(axis=0)
    A = Xhat - mu_hat
    B = Xref - mu_ref
    norm_B = float(np.linalg.norm(B))
    if norm_B == 0:
        raise DegenerateReferenceError("reference cloud has zero variance")
    norm_A2 = float(np.sum(A**2))
    if norm_A2 == 0:
        return AlignmentResult(np.tile(mu_ref, (Xref.shape[0], 1)), 1.0, 0.0,
                               np.eye(Xref.shape[1]), mu_ref.copy())
    U, S, Vt = np.linalg.svd(A.T @ B)
    R = U @ Vt  # reflections allowed: any orthogonal map is a similarity
    scale = float(S.sum() / norm_A2)
    aligned_centered = scale * (A @ R)
    error = float(np.linalg.norm(aligned_centered - B) / norm_B)
    translation = mu_ref - scale * (mu_hat @ R)
    return AlignmentResult(aligned_centered + mu_ref, error, scale, R, translation)
