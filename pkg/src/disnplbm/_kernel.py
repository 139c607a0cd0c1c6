"""Compiled inner loop of the collapsed Gibbs pass.

Mirrors ``centralized.gibbs_pass`` step for step on preallocated arrays.
Uniform variates are drawn by the caller (one per item, in item order) so
both implementations consume a random stream identically.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _log_marginal(n, mean, scat, mu0, kappa0, psi0, nu0, logdet0, lgamma0, work):
    if n == 0:
        return 0.0
    d = mean.shape[0]
    kn = kappa0 + n
    nun = nu0 + n
    w = kappa0 * n / kn
    for a in range(d):
        da = mu0[a] - mean[a]
        for b in range(d):
            work[a, b] = psi0[a, b] + scat[a, b] + w * da * (mu0[b] - mean[b])
    # in-place Cholesky; only the lower triangle is read
    logdet = 0.0
    for j in range(d):
        s = work[j, j]
        for k in range(j):
            s -= work[j, k] * work[j, k]
        if not s > 0.0:
            raise ValueError("posterior scale matrix is not positive definite")
        r = math.sqrt(s)
        work[j, j] = r
        logdet += 2.0 * math.log(r)
        for i in range(j + 1, d):
            t = work[i, j]
            for k in range(j):
                t -= work[i, k] * work[j, k]
            work[i, j] = t / r
    lg = d * (d - 1) / 4.0 * math.log(math.pi)
    for i in range(d):
        lg += math.lgamma(nun / 2.0 + (1.0 - (i + 1)) / 2.0)
    return (
        -0.5 * n * d * math.log(math.pi)
        + 0.5 * d * (math.log(kappa0) - math.log(kn))
        + lg - lgamma0
        + 0.5 * nu0 * logdet0 - 0.5 * nun * logdet
    )


@njit(cache=True, nogil=True)
def _merge_into(na, ma, sa, nb, mb, sb, out_m, out_s):
    n = na + nb
    d = ma.shape[0]
    if n == 0:
        for a in range(d):
            out_m[a] = 0.0
            for b in range(d):
                out_s[a, b] = 0.0
        return 0
    fb = nb / n
    w = na * nb / n
    for a in range(d):
        out_m[a] = ma[a] + (mb[a] - ma[a]) * fb
    for a in range(d):
        da = mb[a] - ma[a]
        for b in range(d):
            out_s[a, b] = sa[a, b] + sb[a, b] + w * da * (mb[b] - ma[b])
    for a in range(d):
        for b in range(a + 1, d):
            v = 0.5 * (out_s[a, b] + out_s[b, a])
            out_s[a, b] = v
            out_s[b, a] = v
    return n


@njit(cache=True, nogil=True)
def _unmerge_inplace(nt, mt, st, npart, mp, sp):
    n = nt - npart
    d = mt.shape[0]
    if n == 0:
        for a in range(d):
            mt[a] = 0.0
            for b in range(d):
                st[a, b] = 0.0
        return 0
    for a in range(d):
        mt[a] = (nt * mt[a] - npart * mp[a]) / n
    w = n * npart / nt
    for a in range(d):
        da = mp[a] - mt[a]
        for b in range(d):
            st[a, b] = st[a, b] - sp[a, b] - w * da * (mp[b] - mt[b])
    for a in range(d):
        for b in range(a + 1, d):
            v = 0.5 * (st[a, b] + st[b, a])
            st[a, b] = v
            st[b, a] = v
    return n


@njit(cache=True, nogil=True)
def gibbs_pass_kernel(item_n, item_mean, item_scat, labels, sizes_in,
                      blk_n0, blk_mean0, blk_scat0, lm_blk0, lm_items,
                      log_conc, uniforms, mu0, kappa0, psi0, nu0, logdet0, lgamma0):
    N, G = item_n.shape
    d = item_mean.shape[2]
    cap = N + 1
    K = sizes_in.shape[0]
    sizes = np.zeros(cap, dtype=np.int64)
    blk_n = np.zeros((cap, G), dtype=np.int64)
    blk_mean = np.zeros((cap, G, d))
    blk_scat = np.zeros((cap, G, d, d))
    lm_blk = np.zeros((cap, G))
    sizes[:K] = sizes_in
    blk_n[:K] = blk_n0
    blk_mean[:K] = blk_mean0
    blk_scat[:K] = blk_scat0
    lm_blk[:K] = lm_blk0

    work = np.zeros((d, d))
    cand_m = np.zeros(d)
    cand_s = np.zeros((d, d))
    logw = np.zeros(cap)
    cum = np.zeros(cap)

    for i in range(N):
        k = labels[i]
        labels[i] = -1
        sizes[k] -= 1
        if sizes[k] == 0:
            for kk in range(k, K - 1):
                sizes[kk] = sizes[kk + 1]
                blk_n[kk] = blk_n[kk + 1]
                blk_mean[kk] = blk_mean[kk + 1]
                blk_scat[kk] = blk_scat[kk + 1]
                lm_blk[kk] = lm_blk[kk + 1]
            K -= 1
            for r in range(N):
                if labels[r] > k:
                    labels[r] -= 1
        else:
            for g in range(G):
                blk_n[k, g] = _unmerge_inplace(blk_n[k, g], blk_mean[k, g], blk_scat[k, g],
                                               item_n[i, g], item_mean[i, g], item_scat[i, g])
                lm_blk[k, g] = _log_marginal(blk_n[k, g], blk_mean[k, g], blk_scat[k, g],
                                             mu0, kappa0, psi0, nu0, logdet0, lgamma0, work)

        for kk in range(K):
            acc = math.log(sizes[kk])
            for g in range(G):
                nc = _merge_into(blk_n[kk, g], blk_mean[kk, g], blk_scat[kk, g],
                                 item_n[i, g], item_mean[i, g], item_scat[i, g], cand_m, cand_s)
                acc += _log_marginal(nc, cand_m, cand_s, mu0, kappa0, psi0, nu0,
                                     logdet0, lgamma0, work) - lm_blk[kk, g]
            logw[kk] = acc
        logw[K] = log_conc + lm_items[i]

        top = logw[0]
        for kk in range(1, K + 1):
            if logw[kk] > top:
                top = logw[kk]
        total = 0.0
        for kk in range(K + 1):
            total += math.exp(logw[kk] - top)
            cum[kk] = total
        u = uniforms[i] * total
        k_new = K
        for kk in range(K + 1):
            if cum[kk] > u:
                k_new = kk
                break

        labels[i] = k_new
        if k_new == K:
            sizes[K] = 1
            for g in range(G):
                blk_n[K, g] = item_n[i, g]
                blk_mean[K, g] = item_mean[i, g]
                blk_scat[K, g] = item_scat[i, g]
                lm_blk[K, g] = _log_marginal(item_n[i, g], item_mean[i, g], item_scat[i, g],
                                             mu0, kappa0, psi0, nu0, logdet0, lgamma0, work)
            K += 1
        else:
            sizes[k_new] += 1
            for g in range(G):
                nc = _merge_into(blk_n[k_new, g], blk_mean[k_new, g], blk_scat[k_new, g],
                                 item_n[i, g], item_mean[i, g], item_scat[i, g], cand_m, cand_s)
                blk_n[k_new, g] = nc
                blk_mean[k_new, g] = cand_m
                blk_scat[k_new, g] = cand_s
                lm_blk[k_new, g] = _log_marginal(nc, cand_m, cand_s, mu0, kappa0, psi0, nu0,
                                                 logdet0, lgamma0, work)
    return K
