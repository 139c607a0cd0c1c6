"""Master side of the distributed sampler.

The master never sees raw rows. It folds worker summaries one at a time
into a global row partition, assigning each local cluster as a whole, and
then resamples the column partition from the aggregated
per-(global cluster, column) statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .centralized import gibbs_pass
from .niw import PriorCache, StatsArray, log_marginal_batch, pool_groups
from .partition import InferenceConfig, Membership, categorical_from_uniform
from .worker import WorkerSummary


def _pool_pair(a: StatsArray, b: StatsArray) -> StatsArray:
    stacked = StatsArray(
        np.stack([a.count, b.count]), np.stack([a.mean, b.mean]), np.stack([a.scatter, b.scatter])
    )
    out = pool_groups(stacked, np.zeros(2, dtype=np.int64), 1)
    return out[0]


def _append(a: StatsArray, b: StatsArray) -> StatsArray:
    return StatsArray(
        np.concatenate([a.count, b.count[None]]),
        np.concatenate([a.mean, b.mean[None]]),
        np.concatenate([a.scatter, b.scatter[None]]),
    )


def row_cluster_stats(column_stats: StatsArray, mode: str = "average") -> StatsArray:
    """Collapse a (K, p) per-column table to one entry per row cluster.

    ``mode="average"`` keeps each cluster's row count and averages the
    column means and column scatters, which is what the master scores
    local clusters with. ``mode="pooled"`` instead pools all K x p cells
    exactly (count n_k p, including the between-column dispersion); it
    exists for comparison in tests.
    """
    if mode == "average":
        return StatsArray(
            column_stats.count[:, 0].copy(),
            column_stats.mean.mean(axis=1),
            column_stats.scatter.mean(axis=1),
        )
    if mode == "pooled":
        K, p = column_stats.shape
        flat = StatsArray(
            column_stats.count.reshape(-1),
            column_stats.mean.reshape(K * p, -1),
            column_stats.scatter.reshape(K * p, column_stats.dim, column_stats.dim),
        )
        return pool_groups(flat, np.repeat(np.arange(K), p), K)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class GlobalRowState:
    """Global row clusters built so far in one outer iteration.

    ``column_stats`` is the (K, p) aggregated table, ``cluster_stats`` the
    per-cluster column-averaged statistics pooled over member local
    clusters, and ``assignment_map`` maps (worker_id, local cluster) to a
    global cluster.
    """

    n_total: int
    p: int
    d: int
    sizes: np.ndarray = None
    column_stats: StatsArray = None
    cluster_stats: StatsArray = None
    assignment_map: dict = field(default_factory=dict)
    rows_accounted: int = 0
    joined: list = field(default_factory=list)

    def __post_init__(self):
        if self.sizes is None:
            self.sizes = np.zeros(0, dtype=np.int64)
            self.column_stats = StatsArray(
                np.zeros((0, self.p), dtype=np.int64), np.zeros((0, self.p, self.d)),
                np.zeros((0, self.p, self.d, self.d)),
            )
            self.cluster_stats = StatsArray(
                np.zeros(0, dtype=np.int64), np.zeros((0, self.d)), np.zeros((0, self.d, self.d))
            )

    @property
    def num_clusters(self) -> int:
        return self.sizes.shape[0]

    @property
    def complete(self) -> bool:
        return self.rows_accounted == self.n_total

    def validate(self):
        assert self.sizes.sum() == self.rows_accounted <= self.n_total
        assert np.all(self.sizes > 0)
        assert np.all(self.column_stats.count == self.sizes[:, None])
        assert np.array_equal(self.cluster_stats.count, self.sizes)
        assert set(self.assignment_map.values()) == set(range(self.num_clusters))


def join(state: GlobalRowState, summary: WorkerSummary, config: InferenceConfig, prior, rng) -> GlobalRowState:
    """Fold one worker summary into the global row partition (updates ``state``).

    The first summary seeds the global clusters verbatim. For later ones,
    each local cluster in turn is scored against every current global
    cluster (log size + log predictive of its column-averaged statistics)
    and against a new cluster (log alpha + log marginal), sampled, and its
    per-column statistics pooled into the chosen cluster.
    """
    if summary.worker_id in state.joined:
        raise ValueError(f"worker {summary.worker_id} has already been joined")
    if summary.p != state.p or summary.d != state.d:
        raise ValueError("summary dimensions do not match the global state")
    if state.rows_accounted + summary.n_rows > state.n_total:
        raise ValueError("summary would account for more rows than the dataset holds")
    cache = prior if isinstance(prior, PriorCache) else PriorCache(prior)
    local = row_cluster_stats(summary.column_stats)
    Kh = summary.num_clusters

    if not state.joined:
        state.sizes = summary.cluster_sizes.copy()
        state.column_stats = summary.column_stats.copy()
        state.cluster_stats = local.copy()
        for h in range(Kh):
            state.assignment_map[(summary.worker_id, h)] = h
    else:
        uniforms = rng.random(Kh)
        lm_local = log_marginal_batch(cache, local)
        log_alpha = np.log(config.alpha)
        for h in range(Kh):
            cand = local[h]
            K = state.num_clusters
            lm_global = log_marginal_batch(cache, state.cluster_stats)
            merged = pool_groups(
                StatsArray(
                    np.stack([state.cluster_stats.count, np.broadcast_to(cand.count, (K,))]),
                    np.stack([state.cluster_stats.mean, np.broadcast_to(cand.mean, (K, state.d))]),
                    np.stack([state.cluster_stats.scatter,
                              np.broadcast_to(cand.scatter, (K, state.d, state.d))]),
                ),
                np.zeros(2, dtype=np.int64), 1,
            )[0]
            logw = np.empty(K + 1)
            logw[:K] = np.log(state.sizes) + log_marginal_batch(cache, merged) - lm_global
            logw[K] = log_alpha + lm_local[h]
            k = categorical_from_uniform(logw, uniforms[h])
            cols = summary.column_stats[h]
            if k == K:
                state.sizes = np.append(state.sizes, summary.cluster_sizes[h])
                state.column_stats = _append(state.column_stats, cols)
                state.cluster_stats = _append(state.cluster_stats, cand)
            else:
                state.sizes[k] += summary.cluster_sizes[h]
                pooled = _pool_pair(state.column_stats[k], cols)
                state.column_stats.count[k] = pooled.count
                state.column_stats.mean[k] = pooled.mean
                state.column_stats.scatter[k] = pooled.scatter
                state.cluster_stats.count[k] = merged.count[k]
                state.cluster_stats.mean[k] = merged.mean[k]
                state.cluster_stats.scatter[k] = merged.scatter[k]
            state.assignment_map[(summary.worker_id, h)] = k
    state.rows_accounted += summary.n_rows
    state.joined.append(summary.worker_id)
    return state


def block_table(state: GlobalRowState, w) -> StatsArray:
    """(K, L) statistics of every block: column statistics pooled by column cluster."""
    w = np.asarray(w)
    return pool_groups(state.column_stats.T, w, int(w.max()) + 1).T


def column_sweep_master(state: GlobalRowState, w, config: InferenceConfig, prior, rng,
                        engine: str = "compiled") -> np.ndarray:
    """One Gibbs pass over the columns using only aggregated statistics."""
    if not state.complete:
        raise ValueError(
            f"join incomplete: {state.rows_accounted} of {state.n_total} rows accounted for"
        )
    w = Membership(w)
    if len(w) != state.p:
        raise ValueError("column membership length does not match p")
    items = state.column_stats.T
    items = StatsArray(np.ascontiguousarray(items.count), np.ascontiguousarray(items.mean),
                       np.ascontiguousarray(items.scatter))
    return gibbs_pass(items, w, config.beta, prior, rng, engine=engine).labels


def global_labels(state: GlobalRowState, local_labels) -> np.ndarray:
    """Global row labels, shards concatenated in worker-id order.

    ``local_labels`` maps worker id to that worker's local label vector (a
    sequence is read as worker ids 0, 1, ...).
    """
    if not state.complete:
        raise ValueError("join incomplete")
    if not isinstance(local_labels, dict):
        local_labels = dict(enumerate(local_labels))
    out = []
    for e in sorted(local_labels):
        labels = np.asarray(local_labels[e])
        mapping = {}
        for h in np.unique(labels):
            key = (e, int(h))
            if key not in state.assignment_map:
                raise KeyError(f"no global assignment for local cluster {h} of worker {e}")
            mapping[int(h)] = state.assignment_map[key]
        lut = np.array([mapping.get(h, -1) for h in range(int(labels.max()) + 1)], dtype=np.int64)
        out.append(lut[labels])
    z = np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
    if z.shape[0] != state.n_total:
        raise ValueError("local label vectors do not cover every row")
    return z
