"""Cluster membership bookkeeping, sampler configuration and categorical draws."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

# spawn_key roles for the per-(role, worker, iteration) random streams
ROLE_WORKER = 0
ROLE_MASTER = 1
ROLE_CENTRALIZED = 2


@dataclass(frozen=True)
class InferenceConfig:
    alpha: float = 1.0
    beta: float = 1.0
    iterations: int = 100
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ValueError(f"iterations must be a non-negative integer, got {self.iterations}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ValueError(f"workers must be a positive integer, got {self.workers}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def to_dict(self) -> dict:
        return asdict(self)


def stream(seed: int, role: int, worker: int, iteration: int) -> np.random.Generator:
    """Independent, reproducible generator for one (role, worker, iteration)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(role, worker, iteration)))


class Membership:
    """Labels of n items over K clusters, kept contiguous with no empty cluster.

    An item taken out with ``remove`` carries the label -1 until it is put
    back with ``add``.
    """

    def __init__(self, labels):
        labels = np.array(labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        k = int(labels.max()) + 1 if labels.size else 0
        sizes = np.bincount(labels, minlength=k)
        if np.any(sizes == 0):
            raise ValueError("labels are not contiguous")
        self.labels = labels
        self.sizes = sizes

    @classmethod
    def single(cls, n: int) -> "Membership":
        return cls(np.zeros(n, dtype=np.int64))

    @property
    def num_clusters(self) -> int:
        return self.sizes.shape[0]

    def __len__(self):
        return self.labels.shape[0]

    def remove(self, index: int):
        """Take item ``index`` out of its cluster.

        Returns the cluster index if that cluster emptied and was deleted
        (labels above it shift down by one), else None.
        """
        k = int(self.labels[index])
        if k < 0:
            raise ValueError(f"item {index} is not assigned")
        self.labels[index] = -1
        self.sizes[k] -= 1
        if self.sizes[k] > 0:
            return None
        self.sizes = np.delete(self.sizes, k)
        self.labels[self.labels > k] -= 1
        return k

    def add(self, index: int, k: int):
        """Put item ``index`` into cluster ``k``; ``k == num_clusters`` opens a new one."""
        if self.labels[index] >= 0:
            raise ValueError(f"item {index} is already assigned")
        K = self.num_clusters
        if k == K:
            self.sizes = np.append(self.sizes, 1)
        elif 0 <= k < K:
            self.sizes[k] += 1
        else:
            raise ValueError(f"cluster {k} out of range for {K} clusters")
        self.labels[index] = k

    def validate(self):
        assigned = self.labels[self.labels >= 0]
        K = self.num_clusters
        assert np.all(self.sizes > 0), "empty cluster"
        if assigned.size:
            assert assigned.max() < K, "label out of range"
        counts = np.bincount(assigned, minlength=K)
        assert np.array_equal(counts, self.sizes), "sizes disagree with labels"
        assert self.sizes.sum() == assigned.size

    def copy(self) -> "Membership":
        out = object.__new__(Membership)
        out.labels = self.labels.copy()
        out.sizes = self.sizes.copy()
        return out


def sample_categorical_log(log_weights, rng: np.random.Generator) -> int:
    """Draw an index with probability proportional to exp(log_weights)."""
    return categorical_from_uniform(log_weights, rng.random())


def categorical_from_uniform(log_weights, u: float) -> int:
    """Inverse-CDF categorical draw driven by a given uniform variate ``u``."""
    lw = np.asarray(log_weights, dtype=float)
    if np.isnan(lw).any():
        raise ValueError("log weights contain NaN")
    top = lw.max()
    if not np.isfinite(top):
        if np.isposinf(top):
            raise ValueError("log weights contain +inf")
        raise ValueError("all log weights are -inf")
    cum = np.cumsum(np.exp(lw - top))
    return int(min(np.searchsorted(cum, u * cum[-1], side="right"), lw.shape[0] - 1))
