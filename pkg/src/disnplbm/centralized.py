"""Collapsed Gibbs sampler for the non-parametric latent block model.

The sampler alternates a pass over row memberships (columns fixed) with a
pass over column memberships (rows fixed). Both passes reduce to the same
operation, ``gibbs_pass``: items (rows or columns) each carry one
sufficient-statistics entry per group of the other axis, and an item's
weight for a cluster is the sum over groups of its log predictive given
the block statistics of that cluster.
"""

from __future__ import annotations

import time

import numpy as np
from scipy.special import gammaln

from .niw import (
    NiwParams,
    PriorCache,
    StatsArray,
    empirical_prior,
    group_stats,
    log_marginal_batch,
    merge,
    pool_groups,
    unmerge,
)
from ._kernel import gibbs_pass_kernel
from .partition import ROLE_CENTRALIZED, InferenceConfig, Membership, categorical_from_uniform, stream
from .result import FitResult, TraceRecord


class AuditError(AssertionError):
    pass


def _audit_blocks(blocks: StatsArray, items: StatsArray, membership: Membership, tol: float = 1e-7):
    labels = membership.labels
    keep = labels >= 0
    fresh = pool_groups(items[keep], labels[keep], membership.num_clusters)
    scale = 1.0 + np.abs(fresh.scatter).max() + np.abs(fresh.mean).max()
    if not (
        np.array_equal(fresh.count, blocks.count)
        and np.allclose(fresh.mean, blocks.mean, rtol=tol, atol=tol * scale)
        and np.allclose(fresh.scatter, blocks.scatter, rtol=tol, atol=tol * scale)
    ):
        raise AuditError("incremental block statistics diverged from recomputation")


def gibbs_pass(items: StatsArray, membership: Membership, concentration: float, prior, rng,
               audit: bool = False, engine: str = "compiled") -> Membership:
    """One sequential collapsed Gibbs pass over every item.

    ``items`` has shape (N, G): entry (i, g) summarizes the cells of item i
    falling in group g of the other axis. ``membership`` is updated in
    place and returned.

    ``engine="compiled"`` runs the numba kernel; ``engine="numpy"`` runs the
    vectorized reference loop. Both draw one uniform per item from ``rng``
    up front, so they consume the stream identically. ``audit`` forces the
    reference loop and checks the incrementally maintained block table
    against a recomputation after every move.
    """
    if engine not in ("compiled", "numpy"):
        raise ValueError(f"unknown engine {engine!r}")
    cache = prior if isinstance(prior, PriorCache) else PriorCache(prior)
    n_items = items.shape[0]
    log_conc = float(np.log(concentration))
    uniforms = rng.random(n_items)
    blocks = pool_groups(items, membership.labels, membership.num_clusters)
    lm_blocks = log_marginal_batch(cache, blocks)
    lm_items = log_marginal_batch(cache, items).sum(axis=1)

    if engine == "compiled" and not audit:
        labels = membership.labels.copy()
        K = gibbs_pass_kernel(
            np.ascontiguousarray(items.count, dtype=np.int64),
            np.ascontiguousarray(items.mean), np.ascontiguousarray(items.scatter),
            labels, membership.sizes.astype(np.int64),
            np.ascontiguousarray(blocks.count, dtype=np.int64),
            np.ascontiguousarray(blocks.mean), np.ascontiguousarray(blocks.scatter),
            np.ascontiguousarray(lm_blocks), np.ascontiguousarray(lm_items),
            log_conc, uniforms,
            np.ascontiguousarray(cache.mu), cache.kappa, np.ascontiguousarray(cache.psi),
            cache.nu, cache.logdet_psi, cache.lgamma_nu,
        )
        membership.labels = labels
        membership.sizes = np.bincount(labels, minlength=K)
        return membership

    for i in range(n_items):
        item = items[i]
        k_old = int(membership.labels[i])
        gone = membership.remove(i)
        if gone is not None:
            keep = np.arange(blocks.shape[0]) != gone
            blocks = blocks[keep]
            lm_blocks = lm_blocks[keep]
        else:
            rest = unmerge(blocks[k_old], item)
            blocks.count[k_old] = rest.count
            blocks.mean[k_old] = rest.mean
            blocks.scatter[k_old] = rest.scatter
            lm_blocks[k_old] = log_marginal_batch(cache, rest)

        K = blocks.shape[0]
        logw = np.empty(K + 1)
        if K:
            cand = merge(blocks, item)
            lm_cand = log_marginal_batch(cache, cand)
            logw[:K] = np.log(membership.sizes) + (lm_cand - lm_blocks).sum(axis=1)
        logw[K] = log_conc + lm_items[i]
        k_new = categorical_from_uniform(logw, uniforms[i])
        membership.add(i, k_new)

        if k_new == K:
            blocks = StatsArray(
                np.concatenate([blocks.count, item.count[None]]),
                np.concatenate([blocks.mean, item.mean[None]]),
                np.concatenate([blocks.scatter, item.scatter[None]]),
            )
            lm_blocks = np.concatenate([lm_blocks, log_marginal_batch(cache, item)[None]])
        else:
            blocks.count[k_new] = cand.count[k_new]
            blocks.mean[k_new] = cand.mean[k_new]
            blocks.scatter[k_new] = cand.scatter[k_new]
            lm_blocks[k_new] = lm_cand[k_new]
        if audit:
            membership.validate()
            _audit_blocks(blocks, items, membership)
    return membership


def _check_inputs(X, z, w):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[..., None]
    if X.ndim != 3:
        raise ValueError("X must have shape (n, p) or (n, p, d)")
    z = Membership(z)
    w = Membership(w)
    if len(z) != X.shape[0] or len(w) != X.shape[1]:
        raise ValueError("membership lengths do not match the data shape")
    return X, z, w


def row_sweep(X, z, w, config: InferenceConfig, prior: NiwParams, rng, audit: bool = False) -> np.ndarray:
    """Resample every row membership once, columns held fixed. Returns new labels."""
    X, z, w = _check_inputs(X, z, w)
    items = group_stats(X, w.labels, w.num_clusters)
    return gibbs_pass(items, z, config.alpha, prior, rng, audit=audit).labels


def column_sweep(X, z, w, config: InferenceConfig, prior: NiwParams, rng, audit: bool = False) -> np.ndarray:
    """Resample every column membership once, rows held fixed. Returns new labels."""
    X, z, w = _check_inputs(X, z, w)
    items = group_stats(np.swapaxes(X, 0, 1), z.labels, z.num_clusters)
    return gibbs_pass(items, w, config.beta, prior, rng, audit=audit).labels


def crp_log_prior(sizes, concentration: float) -> float:
    """Log probability of a partition with the given cluster sizes under a CRP."""
    sizes = np.asarray(sizes, dtype=float)
    n = sizes.sum()
    return float(
        sizes.shape[0] * np.log(concentration) + gammaln(sizes).sum()
        + gammaln(concentration) - gammaln(concentration + n)
    )


def log_posterior_proxy(cell_stats: StatsArray, z_sizes, w, config: InferenceConfig, prior) -> float:
    """Sum of block log marginals plus both CRP log priors.

    ``cell_stats`` is the (K, p) table of per-(row cluster, column) statistics.
    """
    w = np.asarray(w)
    L = int(w.max()) + 1
    blocks = pool_groups(cell_stats.T, w, L)
    return float(
        log_marginal_batch(prior, blocks).sum()
        + crp_log_prior(z_sizes, config.alpha)
        + crp_log_prior(np.bincount(w, minlength=L), config.beta)
    )


def fit_centralized(X, config: InferenceConfig, prior: NiwParams | None = None, audit: bool = False) -> FitResult:
    """Run ``config.iterations`` row/column alternations from a single block."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[..., None]
    if prior is None:
        prior = empirical_prior(X)
    cache = PriorCache(prior)
    n, p, _ = X.shape
    z = Membership.single(n)
    w = Membership.single(p)
    trace = []
    start = time.perf_counter()
    for it in range(config.iterations):
        t0 = time.perf_counter()
        rng = stream(config.seed, ROLE_CENTRALIZED, 0, it)
        gibbs_pass(group_stats(X, w.labels, w.num_clusters), z, config.alpha, cache, rng, audit=audit)
        column_items = group_stats(np.swapaxes(X, 0, 1), z.labels, z.num_clusters)
        gibbs_pass(column_items, w, config.beta, cache, rng, audit=audit)
        cell_stats = column_items.T
        trace.append(TraceRecord(
            iteration=it,
            K=z.num_clusters,
            L=w.num_clusters,
            wall_ms=(time.perf_counter() - t0) * 1e3,
            log_posterior=log_posterior_proxy(cell_stats, z.sizes, w.labels, config, cache),
        ))
    return FitResult(
        row_labels=z.labels.copy(),
        column_labels=w.labels.copy(),
        trace=trace,
        config=dict(config.to_dict(), mode="centralized"),
        wall_ms=(time.perf_counter() - start) * 1e3,
    )
