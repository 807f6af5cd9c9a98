"""Correlation-structure graph and its normalized Laplacian.

Raw-column EMI values become edges between encoded dimensions: a threshold
or per-node top-k policy selects raw-column pairs, every encoded dimension
inherits its source column's edges, and one-hot siblings of the same
discrete column are fully connected with weight 1. The normalized Laplacian
L = I - D^(-1/2) A D^(-1/2) is what the spectral graph filter consumes; its
eigenvalues lie in [0, 2] and are never materialized by the pipeline
(polynomial filtering avoids the eigendecomposition).
"""

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .emi import EVAL_CAP, FIT_CAP, build_emi_matrix
from .exceptions import AsymmetricInput, ConfigError, EmptyGraphWarning
from .validation import check_is_fitted, check_symmetric

THRESHOLD = "threshold"
TOPK = "topk"


@dataclass(frozen=True)
class AdjacencyPolicy:
    """Resolved adjacency construction parameters."""

    mode: str
    tau: float = None
    k: int = None
    weighted: bool = True

    def __post_init__(self):
        if self.mode not in (THRESHOLD, TOPK):
            raise ConfigError(f"unknown adjacency mode {self.mode!r}")
        if self.mode == THRESHOLD and self.tau is not None and self.tau < 0:
            raise ConfigError(f"threshold tau {self.tau} must be >= 0")
        if self.mode == TOPK and (self.k is None or self.k < 1):
            raise ConfigError(f"top-k needs k >= 1, got {self.k}")


@dataclass
class CorrelationGraph:
    adjacency: np.ndarray
    laplacian: np.ndarray
    node_names: tuple
    policy: AdjacencyPolicy

    @property
    def degrees(self):
        return self.adjacency.sum(axis=1)


def normalized_emi(emi_values):
    """Min-max normalize the off-diagonal EMI entries to [0, 1].

    Returns a matrix with the diagonal zeroed; if every off-diagonal entry
    is equal there is nothing to rank, so all pairs get weight 1.
    """
    v = np.asarray(emi_values, dtype=np.float64)
    m = v.shape[0]
    off = ~np.eye(m, dtype=bool)
    lo, hi = v[off].min(), v[off].max()
    out = np.zeros_like(v)
    if hi > lo:
        out[off] = (v[off] - lo) / (hi - lo)
    else:
        out[off] = 1.0
    return out


def default_threshold(emi_values):
    """Median of the off-diagonal normalized EMI entries."""
    norm = normalized_emi(emi_values)
    m = norm.shape[0]
    return float(np.median(norm[~np.eye(m, dtype=bool)]))


def _select_raw_edges(norm, policy):
    m = norm.shape[0]
    keep = np.zeros((m, m), dtype=bool)
    if policy.mode == THRESHOLD:
        keep = norm >= policy.tau
        np.fill_diagonal(keep, False)
    else:
        for i in range(m):
            others = [j for j in range(m) if j != i]
            # highest normalized EMI first, ties broken by lower index
            others.sort(key=lambda j: (-norm[i, j], j))
            for j in others[: policy.k]:
                keep[i, j] = True
                keep[j, i] = True
    return keep


def build_adjacency(emi, feature_map, policy=None):
    """Lift raw-column EMI to an adjacency over encoded dimensions.

    Edge weights are the min-max-normalized EMI when the policy is weighted,
    else 1. Sibling one-hot dimensions of a discrete column always connect
    with weight 1. Warns when no cross-column edge survives the policy.
    """
    if policy is None:
        policy = AdjacencyPolicy(THRESHOLD, tau=default_threshold(emi.values))
    elif policy.mode == THRESHOLD and policy.tau is None:
        policy = AdjacencyPolicy(
            THRESHOLD, tau=default_threshold(emi.values), weighted=policy.weighted
        )
    check_symmetric(emi.values, tol=1e-9, name="EMI matrix")
    norm = normalized_emi(emi.values)
    keep = _select_raw_edges(norm, policy)
    if not keep.any():
        warnings.warn(
            "no cross-column edge survives the adjacency policy",
            EmptyGraphWarning,
            stacklevel=2,
        )
    col_index = {name: i for i, name in enumerate(emi.column_names)}
    sources = [col_index[col] for col, _ in feature_map]
    n = len(feature_map)
    a = np.zeros((n, n))
    for u in range(n):
        cu = sources[u]
        for v in range(u + 1, n):
            cv = sources[v]
            if cu == cv:
                a[u, v] = a[v, u] = 1.0
            elif keep[cu, cv]:
                w = norm[cu, cv] if policy.weighted else 1.0
                a[u, v] = a[v, u] = w
    return a, policy


def normalized_laplacian(a):
    """L = I - D^(-1/2) A D^(-1/2); isolated nodes get L_ii = 1."""
    a = check_symmetric(a, tol=1e-12, name="adjacency")
    if a.min() < 0:
        raise AsymmetricInput("adjacency must be nonnegative")
    d = a.sum(axis=1)
    inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    lap = np.eye(a.shape[0]) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    return 0.5 * (lap + lap.T)


def encoded_names(feature_map):
    """Human-readable node name per encoded dimension."""
    return tuple(
        col if cat is None else f"{col}={cat}" for col, cat in feature_map
    )


def build_graph(emi, feature_map, policy=None):
    a, resolved = build_adjacency(emi, feature_map, policy)
    return CorrelationGraph(
        adjacency=a,
        laplacian=normalized_laplacian(a),
        node_names=encoded_names(feature_map),
        policy=resolved,
    )


def save_adjacency_csv(graph, path):
    lines = ["," + ",".join(graph.node_names)]
    for name, row in zip(graph.node_names, graph.adjacency):
        lines.append(name + "," + ",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_adjacency_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    names = tuple(lines[0].split(",")[1:])
    values = np.array(
        [[float(v) for v in ln.split(",")[1:]] for ln in lines[1:]], dtype=np.float64
    )
    return names, values


def save_graph_edge_list(graph, path):
    lines = []
    for i, a in enumerate(graph.node_names):
        for j in range(i + 1, len(graph.node_names)):
            if graph.adjacency[i, j] != 0.0:
                lines.append(f"{a},{graph.node_names[j]},{float(graph.adjacency[i, j])!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


class CorrelationGraphMiner(BaseEstimator):
    """Mine the EMI matrix of an encoded dataset and build its correlation
    graph. Fitted attributes: emi_matrix_, adjacency_, laplacian_, graph_."""

    def __init__(
        self,
        schema,
        mode=THRESHOLD,
        tau=None,
        k=None,
        weighted=True,
        window=5,
        is_timeseries=False,
        seed=0,
        fit_cap=FIT_CAP,
        eval_cap=EVAL_CAP,
    ):
        self.schema = schema
        self.mode = mode
        self.tau = tau
        self.k = k
        self.weighted = weighted
        self.window = window
        self.is_timeseries = is_timeseries
        self.seed = seed
        self.fit_cap = fit_cap
        self.eval_cap = eval_cap

    def fit(self, X, y=None):
        emi = build_emi_matrix(
            X,
            self.schema,
            w=self.window,
            is_timeseries=self.is_timeseries,
            seed=self.seed,
            fit_cap=self.fit_cap,
            eval_cap=self.eval_cap,
        )
        policy = AdjacencyPolicy(self.mode, tau=self.tau, k=self.k, weighted=self.weighted)
        graph = build_graph(emi, X.feature_map, policy)
        self.emi_matrix_ = emi
        self.graph_ = graph
        self.adjacency_ = graph.adjacency
        self.laplacian_ = graph.laplacian
        return self

    def transform(self, X=None):
        check_is_fitted(self, "graph_")
        return self.graph_
