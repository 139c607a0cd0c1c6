"""Bayesian non-parametric latent block model co-clustering with a
centralized collapsed Gibbs sampler and a master/worker distributed sampler
that exchanges only sufficient statistics."""

__version__ = "0.1.0"

from .centralized import column_sweep, fit_centralized, gibbs_pass, row_sweep
from .data import LabeledDataset, SyntheticSpec, ari, generate, grid_spec, nmi, read_csv, reorder, write_csv
from .master import GlobalRowState, column_sweep_master, global_labels, join
from .niw import (
    NiwParams,
    NotPositiveDefiniteError,
    StatsArray,
    SuffStats,
    empirical_prior,
    log_marginal,
    log_predictive,
    multivariate_log_gamma,
    pool,
    posterior,
    stats_from_points,
)
from .partition import InferenceConfig, Membership, sample_categorical_log
from .result import FitResult, TraceRecord
from .runtime import DistributedSampler, deserialize_summary, fit_distributed, serialize_summary
from .worker import WorkerShard, WorkerSummary, local_row_sweep, summarize
