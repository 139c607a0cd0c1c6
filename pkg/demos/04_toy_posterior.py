"""The sampler targets the right distribution.

With three rows there are only five partitions, so the exact posterior
(CRP prior times NIW block marginals) can be enumerated and compared to the
visit frequencies of a long Gibbs run.
"""

from itertools import product

import numpy as np
from scipy.special import gammaln

from disnplbm.centralized import gibbs_pass
from disnplbm.niw import NiwParams, PriorCache, group_stats, log_marginal, stats_from_points
from disnplbm.partition import Membership

X = np.array([[0.1, 0.4], [0.3, -0.2], [1.4, 1.1]])[..., None]
w = np.array([0, 1])
prior = NiwParams(mu=np.zeros(1), kappa=1.0, psi=np.eye(1), nu=2.0)
alpha = 1.0


def canonical(labels):
    seen = {}
    return tuple(seen.setdefault(int(v), len(seen)) for v in labels)


partitions = sorted({canonical(z) for z in product(range(3), repeat=3)})
logp = []
for z in partitions:
    z = np.array(z)
    sizes = np.bincount(z)
    s = len(sizes) * np.log(alpha) + gammaln(sizes).sum()
    for k in range(len(sizes)):
        for l in range(2):
            s += log_marginal(prior, stats_from_points(X[z == k][:, w == l].reshape(-1, 1)))
    logp.append(s)
exact = np.exp(np.array(logp) - max(logp))
exact /= exact.sum()

items = group_stats(X, w, 2)
cache = PriorCache(prior)
rng = np.random.default_rng(0)
m = Membership.single(3)
counts = dict.fromkeys(partitions, 0)
sweeps = 50_000
for _ in range(sweeps):
    gibbs_pass(items, m, alpha, cache, rng)
    counts[canonical(m.labels)] += 1

print("partition   exact   sampled")
for z, pr in zip(partitions, exact):
    print(z, f"{pr:.4f}  {counts[z] / sweeps:.4f}")
print("total variation", 0.5 * sum(abs(counts[z] / sweeps - pr) for z, pr in zip(partitions, exact)))
