"""Synthetic block data, clustering metrics and CSV input/output."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SyntheticSpec:
    """Gaussian latent block design.

    ``block_means`` has shape (K, L, d) and ``block_covs`` (K, L, d, d).
    Row and column proportions default to uniform.
    """

    n: int
    p: int
    block_means: np.ndarray
    block_covs: np.ndarray
    row_proportions: np.ndarray | None = None
    column_proportions: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        self.block_means = np.asarray(self.block_means, dtype=float)
        if self.block_means.ndim == 2:
            self.block_means = self.block_means[..., None]
        K, L, d = self.block_means.shape
        self.block_covs = np.asarray(self.block_covs, dtype=float).reshape(K, L, d, d)
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        for k in range(K):
            for l in range(L):
                c = self.block_covs[k, l]
                if not np.allclose(c, c.T):
                    raise ValueError(f"covariance of block ({k}, {l}) is not symmetric")
                np.linalg.cholesky(c)
        if self.row_proportions is None:
            self.row_proportions = np.full(K, 1.0 / K)
        if self.column_proportions is None:
            self.column_proportions = np.full(L, 1.0 / L)
        self.row_proportions = np.asarray(self.row_proportions, dtype=float)
        self.column_proportions = np.asarray(self.column_proportions, dtype=float)
        if self.row_proportions.shape != (K,) or self.column_proportions.shape != (L,):
            raise ValueError("proportions do not match the block grid")

    @property
    def K(self) -> int:
        return self.block_means.shape[0]

    @property
    def L(self) -> int:
        return self.block_means.shape[1]

    @property
    def d(self) -> int:
        return self.block_means.shape[2]


def grid_spec(n: int, p: int, d: int = 1, K: int = 10, L: int = 3, seed: int = 0,
              spacing: float = 5.0, variance: float = 1.0) -> SyntheticSpec:
    """Well separated K x L design: block (k, l) has mean spacing * (L k + l)
    in every coordinate and covariance ``variance * I``."""
    if min(n, p, d, K, L) < 1:
        raise ValueError("n, p, d, K and L must all be positive")
    idx = (L * np.arange(K)[:, None] + np.arange(L)[None, :]).astype(float)
    means = spacing * np.repeat(idx[..., None], d, axis=-1)
    covs = np.broadcast_to(variance * np.eye(d), (K, L, d, d)).copy()
    return SyntheticSpec(n=n, p=p, block_means=means, block_covs=covs, seed=seed)


@dataclass
class LabeledDataset:
    matrix: np.ndarray
    true_z: np.ndarray
    true_w: np.ndarray
    spec: SyntheticSpec | None = field(default=None, repr=False)


def generate(spec: SyntheticSpec) -> LabeledDataset:
    rng = np.random.default_rng(spec.seed)
    z = rng.choice(spec.K, size=spec.n, p=spec.row_proportions)
    w = rng.choice(spec.L, size=spec.p, p=spec.column_proportions)
    noise = rng.standard_normal((spec.n, spec.p, spec.d))
    chol = np.linalg.cholesky(spec.block_covs)
    chol_cells = chol[z][:, w]
    X = spec.block_means[z][:, w] + np.einsum("ijab,ijb->ija", chol_cells, noise)
    return LabeledDataset(X, z.astype(np.int64), w.astype(np.int64), spec)


# --------------------------------------------------------------------------
# metrics


def _contingency(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label vectors must be 1-d with equal length, got {a.shape} and {b.shape}")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max(initial=-1) + 1, bi.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def ari(a, b) -> float:
    """Adjusted Rand index from the contingency table.

    Two partitions whose pair counts leave the index undefined (both all in
    one cluster, or both all singletons) score 1.0.
    """
    table = _contingency(a, b)
    n = table.sum()

    def comb2(x):
        x = np.asarray(x, dtype=float)
        return (x * (x - 1) / 2.0).sum()

    index = comb2(table)
    sum_a = comb2(table.sum(axis=1))
    sum_b = comb2(table.sum(axis=0))
    total = n * (n - 1) / 2.0
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def _entropy(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    pr = counts[counts > 0] / counts.sum()
    return float(-(pr * np.log(pr)).sum())


def nmi(a, b) -> float:
    """Mutual information normalized by the arithmetic mean of both entropies.

    When both entropies vanish (each labelling is a single cluster) the
    partitions are identical and the score is 1.0.
    """
    table = _contingency(a, b)
    n = table.sum()
    ha = _entropy(table.sum(axis=1))
    hb = _entropy(table.sum(axis=0))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    nonzero = table > 0
    if np.all(nonzero.sum(axis=0) == 1) and np.all(nonzero.sum(axis=1) == 1):
        # same partition up to relabeling; avoid 1 - eps from rounding
        return 1.0
    pij = table / n
    pi = pij.sum(axis=1, keepdims=True)
    pj = pij.sum(axis=0, keepdims=True)
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / (pi @ pj)[nz])).sum())
    return float(np.clip(mi / (0.5 * (ha + hb)), 0.0, 1.0))


# --------------------------------------------------------------------------
# CSV


class CsvFormatError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def _header(p: int, d: int) -> list[str]:
    if d == 1:
        return [f"c{j}" for j in range(p)]
    return [f"c{j}_{k}" for j in range(p) for k in range(d)]


def write_csv(matrix, path):
    """Write an (n, p, d) array; each cell takes d consecutive columns."""
    from .result import atomic_write

    X = np.asarray(matrix, dtype=float)
    if X.ndim == 2:
        X = X[..., None]
    n, p, d = X.shape
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_header(p, d))
    for row in X.reshape(n, p * d):
        writer.writerow([repr(float(v)) for v in row])
    atomic_write(path, buf.getvalue())


def read_csv(path, d: int = 1) -> np.ndarray:
    """Read a matrix written by ``write_csv`` into an (n, p, d) array."""
    if d < 1:
        raise ValueError("d must be positive")
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if lineno == 1 and fields[0].strip().startswith("c"):
                width = len(fields)
                if width % d:
                    raise CsvFormatError(lineno, f"{width} columns is not a multiple of d={d}")
                continue
            if width is None:
                width = len(fields)
                if width % d:
                    raise CsvFormatError(lineno, f"{width} columns is not a multiple of d={d}")
            if len(fields) != width:
                raise CsvFormatError(lineno, f"expected {width} fields, found {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise CsvFormatError(lineno, f"non-numeric field ({exc})") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(rows, dtype=float)
    return arr.reshape(arr.shape[0], width // d, d)


def write_labels(labels, path, name: str = "label"):
    from .result import atomic_write

    lines = [name] + [str(int(v)) for v in np.asarray(labels)]
    atomic_write(path, "\n".join(lines) + "\n")


def read_labels(path) -> np.ndarray:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields:
                continue
            if len(fields) != 1:
                raise CsvFormatError(lineno, f"expected one field, found {len(fields)}")
            try:
                out.append(int(fields[0]))
            except ValueError:
                if lineno == 1:
                    continue
                raise CsvFormatError(lineno, f"not an integer label: {fields[0]!r}") from None
    return np.array(out, dtype=np.int64)


def reorder(matrix, z, w) -> np.ndarray:
    """Rows sorted by (z, index) and columns by (w, index): blocks become contiguous."""
    X = np.asarray(matrix)
    rows = np.lexsort((np.arange(len(z)), np.asarray(z)))
    cols = np.lexsort((np.arange(len(w)), np.asarray(w)))
    return X[rows][:, cols]
