"""Sufficient statistics carry everything the sampler needs.

Splits a point cloud in three, pools the per-part (count, mean, scatter)
triples back together, and shows that the NIW log marginal and log
predictive computed from statistics agree with a direct computation over
the raw points.
"""

import numpy as np

from disnplbm.niw import NiwParams, log_marginal, log_predictive, pool, posterior, stats_from_points

rng = np.random.default_rng(0)
points = rng.multivariate_normal([1.0, -2.0], [[2.0, 0.6], [0.6, 1.0]], size=300)
parts = np.array_split(points, [40, 170])

whole = stats_from_points(points)
pooled = pool([stats_from_points(p) for p in parts])
print("count       ", whole.count, pooled.count)
print("max |dmean| ", np.abs(whole.mean - pooled.mean).max())
print("max |dscat| ", np.abs(whole.scatter - pooled.scatter).max())

prior = NiwParams(mu=np.zeros(2), kappa=1.0, psi=np.eye(2), nu=3.0)
post = posterior(prior, whole)
print("posterior mean", post.mu, "kappa", post.kappa, "nu", post.nu)

# chain rule: p(a, b) = p(a) p(b | a)
a, b = stats_from_points(parts[0]), stats_from_points(parts[1])
lhs = log_marginal(prior, pool([a, b]))
rhs = log_marginal(prior, a) + log_predictive(prior, a, b)
print(f"log p(a,b) = {lhs:.10f}")
print(f"log p(a) + log p(b|a) = {rhs:.10f}")
