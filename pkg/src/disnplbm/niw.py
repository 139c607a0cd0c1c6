"""Normal-Inverse-Wishart conjugate algebra over Gaussian sufficient statistics.

Everything here works on (count, mean, scatter) triples, so the same
functions serve the centralized sampler, the workers and the master.
Batched variants take arrays whose leading axes index many statistics at
once; ``StatsArray`` is the container for those.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

SYMMETRY_TOL = 1e-9
PSD_TOL = 1e-8


class NotPositiveDefiniteError(ValueError):
    """Raised when a posterior scale matrix fails its Cholesky factorization."""

    def __init__(self, pivot: float, message: str | None = None):
        self.pivot = float(pivot)
        super().__init__(message or f"scale matrix is not positive definite (smallest pivot {self.pivot:.3e})")


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@dataclass(frozen=True, eq=False)
class SuffStats:
    """Count, mean vector and centered scatter matrix of a set of d-vectors."""

    count: int
    mean: np.ndarray
    scatter: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float)).copy()
        d = mean.shape[0]
        scatter = np.asarray(self.scatter, dtype=float).reshape(d, d).copy()
        count = int(self.count)
        if count < 0:
            raise ValueError("count must be non-negative")
        if count == 0:
            mean[:] = 0.0
            scatter[:] = 0.0
        elif count == 1:
            scatter[:] = 0.0
        if np.max(np.abs(scatter - scatter.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.abs(scatter).max()):
            raise ValueError("scatter matrix is not symmetric")
        scatter = _symmetrize(scatter)
        mean.setflags(write=False)
        scatter.setflags(write=False)
        object.__setattr__(self, "count", count)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scatter", scatter)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def empty(cls, d: int) -> "SuffStats":
        return cls(0, np.zeros(d), np.zeros((d, d)))

    def allclose(self, other: "SuffStats", rtol: float = 1e-8, atol: float = 1e-10) -> bool:
        return (
            self.count == other.count
            and np.allclose(self.mean, other.mean, rtol=rtol, atol=atol)
            and np.allclose(self.scatter, other.scatter, rtol=rtol, atol=atol)
        )

    def __repr__(self):
        return f"SuffStats(count={self.count}, mean={self.mean.tolist()}, scatter={self.scatter.tolist()})"


@dataclass(frozen=True, eq=False)
class NiwParams:
    """NIW hyper-parameters: location ``mu``, precision scale ``kappa``,
    scale matrix ``psi`` and degrees of freedom ``nu``."""

    mu: np.ndarray
    kappa: float
    psi: np.ndarray
    nu: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float)).copy()
        d = mu.shape[0]
        psi = np.asarray(self.psi, dtype=float).reshape(d, d).copy()
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.nu > d - 1:
            raise ValueError(f"nu must exceed d - 1 = {d - 1}, got {self.nu}")
        if np.max(np.abs(psi - psi.T)) > SYMMETRY_TOL * max(1.0, np.abs(psi).max()):
            raise ValueError("psi is not symmetric")
        psi = _symmetrize(psi)
        _logdet(psi[None])  # raises on a non-SPD scale
        mu.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @property
    def logdet_psi(self) -> float:
        return float(_logdet(self.psi[None])[0])


class StatsArray:
    """A grid of sufficient statistics: ``count`` has shape ``S``, ``mean``
    ``S + (d,)`` and ``scatter`` ``S + (d, d)``.

    Indexing slices the grid; ``at`` extracts one entry as SuffStats.
    """

    __slots__ = ("count", "mean", "scatter")

    def __init__(self, count, mean, scatter):
        self.count = np.asarray(count)
        self.mean = np.asarray(mean, dtype=float)
        self.scatter = np.asarray(scatter, dtype=float)

    def __iter__(self):
        return iter((self.count, self.mean, self.scatter))

    @property
    def shape(self):
        return self.count.shape

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    def __getitem__(self, idx) -> "StatsArray":
        return StatsArray(self.count[idx], self.mean[idx], self.scatter[idx])

    def at(self, *idx) -> SuffStats:
        return SuffStats(int(self.count[idx]), self.mean[idx], self.scatter[idx])

    @property
    def T(self) -> "StatsArray":
        """Swap the first two grid axes."""
        return StatsArray(
            np.swapaxes(self.count, 0, 1), np.swapaxes(self.mean, 0, 1), np.swapaxes(self.scatter, 0, 1)
        )

    def copy(self) -> "StatsArray":
        return StatsArray(self.count.copy(), self.mean.copy(), self.scatter.copy())

    @classmethod
    def stack(cls, stats: Sequence[SuffStats]) -> "StatsArray":
        return cls(
            np.array([s.count for s in stats], dtype=np.int64),
            np.array([s.mean for s in stats], dtype=float),
            np.array([s.scatter for s in stats], dtype=float),
        )

    @classmethod
    def from_stats(cls, stats: SuffStats) -> "StatsArray":
        return cls(np.array(stats.count, dtype=np.int64), stats.mean, stats.scatter)


# --------------------------------------------------------------------------
# sufficient statistics


def stats_from_points(points) -> SuffStats:
    """Sufficient statistics of a list of d-dimensional points.

    An empty list returns the canonical empty statistics; d is then taken
    as 1 unless ``points`` is an array with an explicit trailing axis.
    """
    if isinstance(points, np.ndarray) and points.ndim == 2 and points.shape[0] == 0:
        return SuffStats.empty(points.shape[1])
    rows = [np.atleast_1d(np.asarray(x, dtype=float)) for x in points]
    if not rows:
        return SuffStats.empty(1)
    d = rows[0].shape[0]
    for i, x in enumerate(rows):
        if x.ndim != 1 or x.shape[0] != d:
            raise ValueError(f"point {i} has dimension {x.shape}, expected ({d},)")
    arr = np.stack(rows)
    mean = arr.mean(axis=0)
    centered = arr - mean
    return SuffStats(len(rows), mean, centered.T @ centered)


def pool(parts: Sequence[SuffStats]) -> SuffStats:
    """Aggregate statistics of disjoint sets into statistics of their union.

    mean = sum(n_h T_h) / n and
    scatter = sum(S_h) + sum(n_h T_h T_h^T) - n T T^T.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("pool needs at least one part")
    d = parts[0].dim
    for i, s in enumerate(parts):
        if s.dim != d:
            raise ValueError(f"part {i} has dimension {s.dim}, expected {d}")
    n = sum(s.count for s in parts)
    if n == 0:
        return SuffStats.empty(d)
    mean = sum(s.count * s.mean for s in parts) / n
    scatter = (
        sum(s.scatter for s in parts)
        + sum(s.count * np.outer(s.mean, s.mean) for s in parts)
        - n * np.outer(mean, mean)
    )
    return SuffStats(n, mean, _symmetrize(scatter))


def group_stats(cells: np.ndarray, labels: np.ndarray, num_groups: int) -> StatsArray:
    """Statistics of each item's cells grouped by a labelling of the cell axis.

    ``cells`` has shape (items, m, d) and ``labels`` length m. Returns a
    StatsArray of shape (items, num_groups): entry (i, g) summarizes
    ``cells[i, labels == g]``.
    """
    cells = np.asarray(cells, dtype=float)
    labels = np.asarray(labels)
    onehot = np.zeros((labels.shape[0], num_groups))
    onehot[np.arange(labels.shape[0]), labels] = 1.0
    counts = onehot.sum(axis=0)
    sums = np.einsum("imd,mg->igd", cells, onehot)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts[None, :, None] > 0, sums / counts[None, :, None], 0.0)
    centered = cells - means[:, labels, :]
    scatter = np.einsum("imd,ime,mg->igde", centered, centered, onehot)
    count = np.broadcast_to(counts.astype(np.int64), (cells.shape[0], num_groups)).copy()
    return StatsArray(count, means, _symmetrize(scatter))


def pool_groups(stats: StatsArray, labels: np.ndarray, num_groups: int) -> StatsArray:
    """Pool the rows of a (items, ...) StatsArray sharing the same label.

    Applies the aggregation identities of ``pool`` along axis 0; the result
    has shape (num_groups, ...).
    """
    labels = np.asarray(labels)
    onehot = np.zeros((num_groups, labels.shape[0]))
    onehot[labels, np.arange(labels.shape[0])] = 1.0
    n_i = stats.count.astype(float)
    count = np.tensordot(onehot, n_i, axes=1)
    weighted = np.tensordot(onehot, n_i[..., None] * stats.mean, axes=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count[..., None] > 0, weighted / count[..., None], 0.0)
    outer_i = n_i[..., None, None] * stats.mean[..., :, None] * stats.mean[..., None, :]
    scatter = (
        np.tensordot(onehot, stats.scatter, axes=1)
        + np.tensordot(onehot, outer_i, axes=1)
        - count[..., None, None] * mean[..., :, None] * mean[..., None, :]
    )
    return StatsArray(np.rint(count).astype(np.int64), mean, _symmetrize(scatter))


def merge(a: StatsArray, b: StatsArray) -> StatsArray:
    """Elementwise (broadcasting) pool of two StatsArrays.

    Uses the mean-difference form of the aggregation identities, which is
    algebraically identical to ``pool`` and better conditioned for the many
    incremental updates made by the samplers.
    """
    n = a.count + b.count
    nf = n.astype(float)
    safe = np.where(nf > 0, nf, 1.0)
    delta = b.mean - a.mean
    frac_b = (b.count / safe)[..., None]
    mean = a.mean + delta * frac_b
    w = (a.count * b.count / safe)[..., None, None]
    scatter = a.scatter + b.scatter + w * delta[..., :, None] * delta[..., None, :]
    return StatsArray(n, mean, _symmetrize(scatter))


def unmerge(total: StatsArray, part: StatsArray) -> StatsArray:
    """Inverse of ``merge``: statistics of ``total`` with ``part`` taken out."""
    n = total.count - part.count
    if np.any(n < 0):
        raise ValueError("cannot remove more points than the statistics hold")
    nf = n.astype(float)
    safe = np.where(nf > 0, nf, 1.0)
    mean = (total.count[..., None] * total.mean - part.count[..., None] * part.mean) / safe[..., None]
    delta = part.mean - mean
    w = (n * part.count / np.where(total.count > 0, total.count, 1))[..., None, None]
    scatter = total.scatter - part.scatter - w * delta[..., :, None] * delta[..., None, :]
    empty = n == 0
    if np.any(empty):
        mean = np.where(empty[..., None], 0.0, mean)
        scatter = np.where(empty[..., None, None], 0.0, scatter)
    return StatsArray(n, mean, _symmetrize(scatter))


# --------------------------------------------------------------------------
# densities


def multivariate_log_gamma(d: int, x):
    """log Gamma_d(x) = d(d-1)/4 log(pi) + sum_{i=1..d} log Gamma(x + (1-i)/2)."""
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    d = int(d)
    x = np.asarray(x, dtype=float)
    if np.any(x <= (d - 1) / 2):
        raise ValueError(f"multivariate_log_gamma requires x > {(d - 1) / 2}")
    offsets = (1.0 - np.arange(1, d + 1)) / 2.0
    out = d * (d - 1) / 4.0 * np.log(np.pi) + gammaln(x[..., None] + offsets).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _smallest_pivot(a: np.ndarray) -> float:
    a = np.array(a, dtype=float)
    d = a.shape[0]
    pivots = []
    for j in range(d):
        piv = a[j, j]
        pivots.append(piv)
        if piv <= 0:
            break
        a[j + 1:, j + 1:] -= np.outer(a[j + 1:, j], a[j, j + 1:]) / piv
    return float(min(pivots))


def _logdet(mats: np.ndarray) -> np.ndarray:
    """Log-determinants of a stack of SPD matrices via Cholesky."""
    if mats.shape[-1] == 1:
        diag = mats[..., 0, 0]
        if np.any(~(diag > 0)):
            raise NotPositiveDefiniteError(np.min(diag))
        return np.log(diag)
    try:
        chol = np.linalg.cholesky(mats)
    except np.linalg.LinAlgError:
        flat = mats.reshape(-1, mats.shape[-2], mats.shape[-1])
        raise NotPositiveDefiniteError(min(_smallest_pivot(m) for m in flat)) from None
    return 2.0 * np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(axis=-1)


def posterior(prior: NiwParams, stats: SuffStats) -> NiwParams:
    """NIW posterior after observing points summarized by ``stats``."""
    if stats.dim != prior.dim:
        raise ValueError(f"stats dimension {stats.dim} does not match prior dimension {prior.dim}")
    n = stats.count
    if n == 0:
        return prior
    kappa = prior.kappa + n
    diff = prior.mu - stats.mean
    return NiwParams(
        mu=(prior.kappa * prior.mu + n * stats.mean) / kappa,
        kappa=kappa,
        psi=_symmetrize(prior.psi + stats.scatter + (prior.kappa * n / kappa) * np.outer(diff, diff)),
        nu=prior.nu + n,
    )


class PriorCache:
    """A prior with its log-determinant and log-gamma terms precomputed,
    used by the batched density routines in the samplers' inner loops."""

    __slots__ = ("prior", "d", "mu", "kappa", "psi", "nu", "logdet_psi", "lgamma_nu")

    def __init__(self, prior: NiwParams):
        self.prior = prior
        self.d = prior.dim
        self.mu = prior.mu
        self.kappa = prior.kappa
        self.psi = prior.psi
        self.nu = prior.nu
        self.logdet_psi = prior.logdet_psi
        self.lgamma_nu = multivariate_log_gamma(self.d, self.nu / 2.0)


def _as_cache(prior) -> PriorCache:
    return prior if isinstance(prior, PriorCache) else PriorCache(prior)


def log_marginal_batch(prior, stats: StatsArray) -> np.ndarray:
    """``log_marginal`` evaluated elementwise over a StatsArray."""
    c = _as_cache(prior)
    d = c.d
    n = stats.count.astype(float)
    kappa_n = c.kappa + n
    nu_n = c.nu + n
    diff = c.mu - stats.mean
    w = (c.kappa * n / kappa_n)[..., None, None]
    psi_n = c.psi + stats.scatter + w * diff[..., :, None] * diff[..., None, :]
    logdet_n = _logdet(psi_n)
    offsets = (1.0 - np.arange(1, d + 1)) / 2.0
    lgamma_n = d * (d - 1) / 4.0 * np.log(np.pi) + gammaln((nu_n / 2.0)[..., None] + offsets).sum(axis=-1)
    return (
        -0.5 * n * d * np.log(np.pi)
        + 0.5 * d * (np.log(c.kappa) - np.log(kappa_n))
        + lgamma_n - c.lgamma_nu
        + 0.5 * c.nu * c.logdet_psi - 0.5 * nu_n * logdet_n
    )


def log_marginal(prior: NiwParams, stats: SuffStats) -> float:
    """Log prior predictive density of the points summarized by ``stats``.

    Zero for empty statistics. Raises NotPositiveDefiniteError (carrying
    the smallest pivot) if the posterior scale cannot be factorized.
    """
    if stats.dim != prior.dim:
        raise ValueError(f"stats dimension {stats.dim} does not match prior dimension {prior.dim}")
    if stats.count == 0:
        return 0.0
    return float(log_marginal_batch(prior, StatsArray.from_stats(stats)))


def log_predictive(prior: NiwParams, cluster: SuffStats, candidate: SuffStats) -> float:
    """Log posterior predictive of ``candidate`` given the points in ``cluster``."""
    if cluster.dim != candidate.dim:
        raise ValueError("cluster and candidate dimensions differ")
    return log_marginal(posterior(prior, cluster), candidate)


def empirical_prior(cells: np.ndarray) -> NiwParams:
    """Data-driven prior: mean and covariance of all cells, kappa = 1, nu = d + 1.

    A singular covariance (e.g. constant data) is regularized by adding
    1e-6 times the average diagonal (at least 1e-6) to the diagonal.
    """
    cells = np.asarray(cells, dtype=float)
    d = cells.shape[-1]
    flat = cells.reshape(-1, d)
    mu = flat.mean(axis=0)
    centered = flat - mu
    cov = centered.T @ centered / flat.shape[0]
    try:
        if d == 1 and not cov[0, 0] > 0:
            raise np.linalg.LinAlgError
        np.linalg.cholesky(cov)
        if np.min(np.linalg.eigvalsh(cov)) <= 1e-12 * max(np.trace(cov), 1e-300):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        scale = max(np.trace(cov) / d, 1.0)
        cov = cov + 1e-6 * scale * np.eye(d)
    return NiwParams(mu=mu, kappa=1.0, psi=cov, nu=d + 1.0)
