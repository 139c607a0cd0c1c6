"""Worker side of the distributed sampler.

A worker owns a contiguous block of rows. Each outer iteration it resamples
its local row partition given the broadcast column partition, then reports
per-(local cluster, column) sufficient statistics; raw rows never leave it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .centralized import gibbs_pass
from .niw import NiwParams, StatsArray, group_stats
from .partition import InferenceConfig, Membership


@dataclass
class WorkerShard:
    worker_id: int
    X: np.ndarray
    z: Membership

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 2:
            self.X = self.X[..., None]
        if self.X.shape[0] < 1:
            raise ValueError(f"worker {self.worker_id} holds no rows")
        if not isinstance(self.z, Membership):
            self.z = Membership(self.z)
        if len(self.z) != self.X.shape[0]:
            raise ValueError("local membership length does not match the shard")

    @classmethod
    def initial(cls, worker_id: int, X) -> "WorkerShard":
        return cls(worker_id, X, Membership.single(np.asarray(X).shape[0]))


@dataclass(frozen=True, eq=False)
class WorkerSummary:
    """What a worker sends to the master: local cluster sizes, the
    (K_e, p) table of per-(cluster, column) statistics and its local labels."""

    worker_id: int
    cluster_sizes: np.ndarray
    column_stats: StatsArray
    local_labels: np.ndarray

    def __post_init__(self):
        sizes = np.asarray(self.cluster_sizes, dtype=np.int64)
        labels = np.asarray(self.local_labels, dtype=np.int64)
        object.__setattr__(self, "cluster_sizes", sizes)
        object.__setattr__(self, "local_labels", labels)
        K = sizes.shape[0]
        if np.any(sizes <= 0):
            raise ValueError("summary contains an empty cluster")
        if self.column_stats.shape[0] != K:
            raise ValueError("statistics table and cluster sizes disagree on K")
        if not np.all(self.column_stats.count == sizes[:, None]):
            raise ValueError("per-column counts must equal the cluster sizes")
        if labels.size != sizes.sum() or (labels.size and (labels.min() < 0 or labels.max() >= K)):
            raise ValueError("local labels are inconsistent with the cluster sizes")
        if not np.array_equal(np.bincount(labels, minlength=K), sizes):
            raise ValueError("local labels are inconsistent with the cluster sizes")

    @property
    def num_clusters(self) -> int:
        return self.cluster_sizes.shape[0]

    @property
    def p(self) -> int:
        return self.column_stats.shape[1]

    @property
    def d(self) -> int:
        return self.column_stats.dim

    @property
    def n_rows(self) -> int:
        return int(self.cluster_sizes.sum())


def local_row_sweep(shard: WorkerShard, w, config: InferenceConfig, prior: NiwParams, rng,
                    engine: str = "compiled") -> WorkerShard:
    """One Gibbs pass over the shard's rows given column labels ``w``."""
    w = w if isinstance(w, Membership) else Membership(w)
    if len(w) != shard.X.shape[1]:
        raise ValueError("column membership does not cover every column")
    items = group_stats(shard.X, w.labels, w.num_clusters)
    z = gibbs_pass(items, shard.z.copy(), config.alpha, prior, rng, engine=engine)
    return WorkerShard(shard.worker_id, shard.X, z)


def summarize(shard: WorkerShard) -> WorkerSummary:
    table = group_stats(np.swapaxes(shard.X, 0, 1), shard.z.labels, shard.z.num_clusters).T
    return WorkerSummary(
        worker_id=shard.worker_id,
        cluster_sizes=shard.z.sizes.copy(),
        column_stats=StatsArray(
            np.ascontiguousarray(table.count), np.ascontiguousarray(table.mean),
            np.ascontiguousarray(table.scatter),
        ),
        local_labels=shard.z.labels.copy(),
    )
