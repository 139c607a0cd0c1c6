"""Distributed fit: shard rows, run worker sweeps in parallel, fold their
summaries into the master as they arrive, then resample columns.

Workers run on a thread pool by default (the compiled sweep releases the
GIL); a process pool is available too. Either way a summary crosses the
worker/master boundary only in its serialized byte form.

Summary wire layout, all little-endian::

    worker_id u32 | K u32 | p u32 | d u32
    cluster sizes        K x u32
    local row labels     n_e x u32      (n_e = sum of sizes)
    statistics table     K x p records, row-major, each
                         count u64 | mean d x f64 | scatter d*d x f64
"""

from __future__ import annotations

import struct
import time
from concurrent.futures import FIRST_COMPLETED, Executor, ProcessPoolExecutor, ThreadPoolExecutor, wait

import numpy as np

from .master import GlobalRowState, column_sweep_master, global_labels, join
from .niw import NiwParams, PriorCache, StatsArray, empirical_prior
from .partition import ROLE_MASTER, ROLE_WORKER, InferenceConfig, Membership, stream
from .result import FitResult, TraceRecord
from .centralized import log_posterior_proxy
from .worker import WorkerShard, WorkerSummary, local_row_sweep, summarize

_HEADER = struct.Struct("<IIII")


class WorkerFailure(RuntimeError):
    def __init__(self, worker_id: int, cause: BaseException):
        self.worker_id = worker_id
        super().__init__(f"worker {worker_id} failed: {cause!r}")


class SummaryFormatError(ValueError):
    pass


def _record_dtype(d: int) -> np.dtype:
    return np.dtype([("count", "<u8"), ("mean", "<f8", (d,)), ("scatter", "<f8", (d, d))])


def summary_nbytes(K: int, n_e: int, p: int, d: int) -> int:
    return _HEADER.size + 4 * K + 4 * n_e + K * p * (8 + 8 * d + 8 * d * d)


def serialize_summary(summary: WorkerSummary) -> bytes:
    K, p, d = summary.num_clusters, summary.p, summary.d
    records = np.empty((K, p), dtype=_record_dtype(d))
    records["count"] = summary.column_stats.count
    records["mean"] = summary.column_stats.mean
    records["scatter"] = summary.column_stats.scatter
    return b"".join((
        _HEADER.pack(summary.worker_id, K, p, d),
        summary.cluster_sizes.astype("<u4").tobytes(),
        summary.local_labels.astype("<u4").tobytes(),
        records.tobytes(),
    ))


def deserialize_summary(payload: bytes) -> WorkerSummary:
    if len(payload) < _HEADER.size:
        raise SummaryFormatError(f"payload of {len(payload)} bytes is shorter than the header")
    worker_id, K, p, d = _HEADER.unpack_from(payload, 0)
    if d < 1 or p < 1:
        raise SummaryFormatError(f"invalid dimensions p={p}, d={d}")
    offset = _HEADER.size
    if len(payload) < offset + 4 * K:
        raise SummaryFormatError("payload truncated inside the cluster sizes")
    sizes = np.frombuffer(payload, dtype="<u4", count=K, offset=offset).astype(np.int64)
    if np.any(sizes == 0):
        raise SummaryFormatError("summary contains an empty cluster")
    n_e = int(sizes.sum())
    expected = summary_nbytes(K, n_e, p, d)
    if len(payload) != expected:
        raise SummaryFormatError(f"payload has {len(payload)} bytes, layout requires {expected}")
    offset += 4 * K
    labels = np.frombuffer(payload, dtype="<u4", count=n_e, offset=offset).astype(np.int64)
    offset += 4 * n_e
    records = np.frombuffer(payload, dtype=_record_dtype(d), count=K * p, offset=offset).reshape(K, p)
    stats = StatsArray(
        records["count"].astype(np.int64), records["mean"].astype(float), records["scatter"].astype(float)
    )
    try:
        return WorkerSummary(worker_id, sizes, stats, labels)
    except ValueError as exc:
        raise SummaryFormatError(str(exc)) from None


def shard_bounds(n: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous row ranges; the first ``n % workers`` shards get one extra row."""
    if workers > n:
        raise ValueError(f"cannot split {n} rows over {workers} workers")
    base, extra = divmod(n, workers)
    bounds, start = [], 0
    for e in range(workers):
        stop = start + base + (1 if e < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


_PROCESS_DATA: np.ndarray | None = None


def _install_process_data(X):
    global _PROCESS_DATA
    _PROCESS_DATA = X


def run_worker(worker_id: int, X_e, bounds, labels, w_labels, config: InferenceConfig,
               prior: NiwParams, iteration: int, engine: str = "compiled") -> bytes:
    """Map step: local sweep then summary, returned in wire form."""
    if X_e is None:
        X_e = _PROCESS_DATA[bounds[0]:bounds[1]]
    shard = WorkerShard(worker_id, X_e, Membership(labels))
    rng = stream(config.seed, ROLE_WORKER, worker_id, iteration)
    shard = local_row_sweep(shard, w_labels, config, prior, rng, engine=engine)
    return serialize_summary(summarize(shard))


class DistributedSampler:
    """Stateful driver of the master/worker iterations.

    ``backend`` is "serial" (inline, in worker order), "thread" or
    "process". With ``deterministic`` summaries are joined in worker-id
    order; otherwise in arrival order.
    """

    def __init__(self, X, config: InferenceConfig, prior: NiwParams | None = None,
                 backend: str | None = None, deterministic: bool = True, engine: str = "compiled"):
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            X = X[..., None]
        self.X = np.ascontiguousarray(X)
        self.n, self.p, self.d = X.shape
        self.config = config
        self.prior = prior if prior is not None else empirical_prior(X)
        self.cache = PriorCache(self.prior)
        self.bounds = shard_bounds(self.n, config.workers)
        if backend is None:
            backend = "serial" if config.workers == 1 else "thread"
        if backend not in ("serial", "thread", "process"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.deterministic = deterministic
        self.engine = engine
        self.local_labels = {e: np.zeros(b - a, dtype=np.int64) for e, (a, b) in enumerate(self.bounds)}
        self.w = np.zeros(self.p, dtype=np.int64)
        self.state: GlobalRowState | None = None
        self.summaries: dict[int, WorkerSummary] = {}
        self.iteration = 0
        self.trace: list[TraceRecord] = []
        self._pool: Executor | None = None

    def _executor(self) -> Executor | None:
        if self.backend == "serial":
            return None
        if self._pool is None:
            if self.backend == "thread":
                self._pool = ThreadPoolExecutor(max_workers=self.config.workers)
            else:
                self._pool = ProcessPoolExecutor(
                    max_workers=self.config.workers, initializer=_install_process_data, initargs=(self.X,)
                )
        return self._pool

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _task_args(self, e: int):
        a, b = self.bounds[e]
        X_e = None if self.backend == "process" else self.X[a:b]
        return (e, X_e, (a, b), self.local_labels[e], self.w, self.config, self.prior,
                self.iteration, self.engine)

    def _summaries(self):
        """Yield (worker_id, payload) in the order the master should join them."""
        pool = self._executor()
        E = self.config.workers
        if pool is None:
            for e in range(E):
                try:
                    yield e, run_worker(*self._task_args(e))
                except Exception as exc:
                    raise WorkerFailure(e, exc) from exc
            return
        futures = {pool.submit(run_worker, *self._task_args(e)): e for e in range(E)}
        try:
            if self.deterministic:
                for fut, e in sorted(futures.items(), key=lambda kv: kv[1]):
                    yield e, self._result(fut, e)
            else:
                pending = set(futures)
                while pending:
                    done, pending = wait(pending, return_when=FIRST_COMPLETED)
                    for fut in done:
                        yield futures[fut], self._result(fut, futures[fut])
        finally:
            for fut in futures:
                fut.cancel()

    @staticmethod
    def _result(fut, e):
        try:
            return fut.result()
        except Exception as exc:
            raise WorkerFailure(e, exc) from exc

    def step(self) -> TraceRecord:
        t0 = time.perf_counter()
        rng = stream(self.config.seed, ROLE_MASTER, 0, self.iteration)
        state = GlobalRowState(self.n, self.p, self.d)
        for e, payload in self._summaries():
            summary = deserialize_summary(payload)
            if summary.worker_id != e:
                raise WorkerFailure(e, ValueError(f"summary carries worker id {summary.worker_id}"))
            self.summaries[e] = summary
            self.local_labels[e] = summary.local_labels
            join(state, summary, self.config, self.cache, rng)
        self.state = state
        self.w = column_sweep_master(state, self.w, self.config, self.cache, rng, engine=self.engine)
        record = TraceRecord(
            iteration=self.iteration,
            K=state.num_clusters,
            L=int(self.w.max()) + 1,
            wall_ms=(time.perf_counter() - t0) * 1e3,
            log_posterior=log_posterior_proxy(state.column_stats, state.sizes, self.w, self.config, self.cache),
        )
        self.trace.append(record)
        self.iteration += 1
        return record

    def row_labels(self) -> np.ndarray:
        if self.state is None:
            return np.zeros(self.n, dtype=np.int64)
        return global_labels(self.state, self.local_labels)

    def result(self, wall_ms: float | None = None) -> FitResult:
        return FitResult(
            row_labels=self.row_labels(),
            column_labels=self.w.copy(),
            trace=list(self.trace),
            config=dict(self.config.to_dict(), mode="distributed", deterministic=self.deterministic),
            wall_ms=wall_ms,
        )


def fit_distributed(X, config: InferenceConfig, prior: NiwParams | None = None, backend: str | None = None,
                    deterministic: bool = True, engine: str = "compiled") -> FitResult:
    """Run ``config.iterations`` master/worker iterations from a single block."""
    start = time.perf_counter()
    with DistributedSampler(X, config, prior, backend=backend, deterministic=deterministic,
                            engine=engine) as sampler:
        for _ in range(config.iterations):
            sampler.step()
        return sampler.result(wall_ms=(time.perf_counter() - start) * 1e3)
