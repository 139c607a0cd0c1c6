"""Raw-data audit of everything the master computes from statistics alone."""

import numpy as np

from disnplbm.master import GlobalRowState, block_table, global_labels, join
from disnplbm.niw import SuffStats, empirical_prior, log_predictive
from disnplbm.partition import InferenceConfig, Membership
from disnplbm.runtime import shard_bounds
from disnplbm.worker import WorkerShard, summarize

from oracles import moment_log_marginal, raw_log_predictive


def _raw_triple(cells):
    cells = np.asarray(cells, dtype=float).reshape(-1, cells.shape[-1])
    n = cells.shape[0]
    mean = cells.mean(axis=0)
    dev = cells - mean
    return n, mean, dev.T @ dev


def _rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(1.0, np.abs(np.asarray(b)))))


def audit_random_dataset(seed):
    """Build a random sharded dataset, join every summary and return the
    largest relative discrepancies (stats, predictives) against raw data."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 61))
    p = int(rng.integers(1, 9))
    d = int(rng.integers(1, 4))
    X = rng.normal(size=(n, p, d)) * rng.uniform(0.5, 5) + rng.integers(0, 3, size=(n, 1, 1)) * 6.0
    E = int(rng.integers(1, min(4, n) + 1))
    prior = empirical_prior(X)
    config = InferenceConfig(alpha=float(rng.uniform(0.2, 3)))
    bounds = shard_bounds(n, E)
    local = {}
    state = GlobalRowState(n, p, d)
    for e, (a, b) in enumerate(bounds):
        labels = np.unique(rng.integers(0, 3, size=b - a), return_inverse=True)[1]
        local[e] = labels
        join(state, summarize(WorkerShard(e, X[a:b], Membership(labels))), config, prior, rng)
    state.validate()
    z = global_labels(state, local)
    w = np.unique(rng.integers(0, 3, size=p), return_inverse=True)[1]
    stat_err = pred_err = 0.0

    # per (global cluster, column) statistics
    for k in range(state.num_clusters):
        for j in range(p):
            cnt, mean, scat = _raw_triple(X[z == k, j])
            s = state.column_stats.at(k, j)
            assert s.count == cnt
            stat_err = max(stat_err, _rel(s.mean, mean), _rel(s.scatter, scat))

    # per (global cluster, column cluster) blocks
    blocks = block_table(state, w)
    for k in range(state.num_clusters):
        for l in range(w.max() + 1):
            cnt, mean, scat = _raw_triple(X[z == k][:, w == l])
            s = blocks.at(k, l)
            assert s.count == cnt
            stat_err = max(stat_err, _rel(s.mean, mean), _rel(s.scatter, scat))

    # cluster-level (column averaged) statistics pooled over member local clusters
    for k in range(state.num_clusters):
        tot = np.zeros(d)
        sq = np.zeros((d, d))
        nk = 0
        for (e, h), kk in state.assignment_map.items():
            if kk != k:
                continue
            a, b = bounds[e]
            rows = X[a:b][local[e] == h]
            nh = rows.shape[0]
            T = np.mean([rows[:, j].mean(axis=0) for j in range(p)], axis=0)
            S = np.mean([_raw_triple(rows[:, j])[2] for j in range(p)], axis=0)
            tot += nh * T
            sq += S + nh * np.outer(T, T)
            nk += nh
        Tk = tot / nk
        Sk = sq - nk * np.outer(Tk, Tk)
        s = state.cluster_stats.at(k)
        assert s.count == nk
        stat_err = max(stat_err, _rel(s.mean, Tk), _rel(s.scatter, Sk))

        # join-style predictive of this cluster's average against a unit-weight copy of itself
        cand = SuffStats(nk, Tk, Sk)
        ours = log_predictive(prior, s, cand)
        both_sq = 2 * (Sk + nk * np.outer(Tk, Tk))
        ref = (moment_log_marginal(2 * nk, 2 * tot, both_sq, prior.mu, prior.kappa, prior.psi, prior.nu)
               - moment_log_marginal(nk, tot, sq, prior.mu, prior.kappa, prior.psi, prior.nu))
        pred_err = max(pred_err, _rel(ours, ref))

    # column-sweep predictives: block (k, l) against column j restricted to cluster k
    for k in range(state.num_clusters):
        for l in range(w.max() + 1):
            for j in range(p):
                ours = log_predictive(prior, blocks.at(k, l), state.column_stats.at(k, j))
                ref = raw_log_predictive(X[z == k][:, w == l].reshape(-1, d), X[z == k, j],
                                         prior.mu, prior.kappa, prior.psi, prior.nu)
                pred_err = max(pred_err, _rel(ours, ref))
    return stat_err, pred_err
