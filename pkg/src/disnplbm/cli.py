"""Command line entry point: generate, fit, evaluate and bench.

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .centralized import fit_centralized
from .data import ari, generate, grid_spec, nmi, read_csv, read_labels, reorder, write_csv, write_labels
from .niw import empirical_prior
from .partition import InferenceConfig
from .result import atomic_write
from .runtime import fit_distributed


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _non_negative_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _int_list(text):
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated integer list: {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"values must be positive: {text!r}")
    return values


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _versions() -> dict:
    return {"disnplbm": __version__, "numpy": np.__version__, "python": platform.python_version()}


def _manifest(argv, config, digest, paths) -> dict:
    return {"command": list(argv), "config": config, "dataset_digest": digest,
            "results": [os.fspath(p) for p in paths], "versions": _versions()}


def cmd_generate(args, argv) -> int:
    os.makedirs(args.out, exist_ok=True)
    ds = generate(grid_spec(args.n, args.p, d=args.d, K=args.k, L=args.l, seed=args.seed))
    data_path = os.path.join(args.out, "data.csv")
    z_path = os.path.join(args.out, "z.csv")
    w_path = os.path.join(args.out, "w.csv")
    write_csv(ds.matrix, data_path)
    write_labels(ds.true_z, z_path, "z")
    write_labels(ds.true_w, w_path, "w")
    config = {"n": args.n, "p": args.p, "d": args.d, "k": args.k, "l": args.l, "seed": args.seed}
    print(json.dumps(_manifest(argv, config, file_digest(data_path), [data_path, z_path, w_path]), indent=2))
    return 0


def run_fit(X, mode: str, config: InferenceConfig, deterministic: bool = True, backend: str | None = None):
    prior = empirical_prior(X)
    if mode == "centralized":
        return fit_centralized(X, config, prior)
    return fit_distributed(X, config, prior, backend=backend, deterministic=deterministic)


def cmd_fit(args, argv) -> int:
    X = read_csv(args.data, d=args.d)
    if args.workers > X.shape[0]:
        raise ValueError(f"--workers {args.workers} exceeds the {X.shape[0]} rows of {args.data}")
    config = InferenceConfig(alpha=args.alpha, beta=args.beta, iterations=args.iterations,
                             seed=args.seed, workers=args.workers)
    result = run_fit(X, args.mode, config, deterministic=args.deterministic, backend=args.backend)
    result.config["data_digest"] = file_digest(args.data)
    atomic_write(args.out, result.to_json(timings=not args.deterministic) + "\n")
    paths = [args.out]
    if args.emit:
        os.makedirs(args.emit, exist_ok=True)
        z_path = os.path.join(args.emit, "z.csv")
        w_path = os.path.join(args.emit, "w.csv")
        r_path = os.path.join(args.emit, "reordered.csv")
        write_labels(result.row_labels, z_path, "z")
        write_labels(result.column_labels, w_path, "w")
        write_csv(reorder(X, result.row_labels, result.column_labels), r_path)
        paths += [z_path, w_path, r_path]
    print(json.dumps(_manifest(argv, result.config, result.config["data_digest"], paths), indent=2))
    return 0


def _load_labels(path) -> np.ndarray:
    if os.fspath(path).endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            return np.asarray(json.load(fh)["row_labels"], dtype=np.int64)
    return read_labels(path)


def evaluate_labels(pred, truth) -> dict:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"label vectors differ in length: {pred.shape[0]} vs {truth.shape[0]}")
    return {"ari": ari(pred, truth), "nmi": nmi(pred, truth),
            "K_pred": int(np.unique(pred).size), "K_truth": int(np.unique(truth).size)}


def cmd_evaluate(args, argv) -> int:
    metrics = evaluate_labels(_load_labels(args.pred), _load_labels(args.truth))
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if args.out:
        atomic_write(args.out, text + "\n")
    print(text)
    return 0


BENCH_FIELDS = ["n", "mode", "workers", "seed", "ari", "nmi", "K", "L", "wall_ms"]


def bench_rows(sizes, workers, repeats, p=90, d=1, k=10, l=3, iterations=100, seed=0,
               backend=None, deterministic=True):
    """Yield one dict per (size, repeat, mode/worker count) run."""
    for n in sizes:
        for r in range(repeats):
            run_seed = seed + r
            ds = generate(grid_spec(n, p, d=d, K=k, L=l, seed=run_seed))
            runs = [("centralized", 1)] + [("distributed", e) for e in workers]
            for mode, e in runs:
                config = InferenceConfig(iterations=iterations, seed=run_seed, workers=e)
                t0 = time.perf_counter()
                result = run_fit(ds.matrix, mode, config, deterministic=deterministic, backend=backend)
                wall_ms = (time.perf_counter() - t0) * 1e3
                yield {"n": n, "mode": mode, "workers": e, "seed": run_seed,
                       "ari": ari(result.row_labels, ds.true_z), "nmi": nmi(result.row_labels, ds.true_z),
                       "K": result.K, "L": result.L, "wall_ms": round(wall_ms, 3)}


def cmd_bench(args, argv) -> int:
    if max(args.workers) > min(args.sizes):
        raise ValueError("a worker count exceeds the smallest dataset size")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in bench_rows(args.sizes, args.workers, args.repeats, p=args.p, d=args.d, k=args.k, l=args.l,
                          iterations=args.iterations, seed=args.seed, backend=args.backend):
        writer.writerow(row)
        print(",".join(str(row[f]) for f in BENCH_FIELDS), file=sys.stderr)
    atomic_write(args.out, buf.getvalue())
    print(buf.getvalue(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="disnplbm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic Gaussian block dataset")
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--p", type=_positive_int, required=True)
    g.add_argument("--d", type=_positive_int, default=1)
    g.add_argument("--k", type=_positive_int, default=10)
    g.add_argument("--l", type=_positive_int, default=3)
    g.add_argument("--seed", type=_non_negative_int, default=0)
    g.add_argument("--out", default=".", help="output directory for data.csv, z.csv, w.csv")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="co-cluster a dataset")
    f.add_argument("--data", required=True)
    f.add_argument("--d", type=_positive_int, default=1)
    f.add_argument("--mode", choices=["centralized", "distributed"], default="distributed")
    f.add_argument("--workers", type=_positive_int, default=1)
    f.add_argument("--alpha", type=_positive_float, default=1.0)
    f.add_argument("--beta", type=_positive_float, default=1.0)
    f.add_argument("--iterations", type=_non_negative_int, default=100)
    f.add_argument("--seed", type=_non_negative_int, default=0)
    f.add_argument("--deterministic", action="store_true",
                   help="join summaries in worker order and omit timings from the result")
    f.add_argument("--backend", choices=["serial", "thread", "process"], default=None)
    f.add_argument("--emit", default=None, help="directory for label CSVs and the reordered matrix")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("evaluate", help="compare predicted labels with ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="centralized vs distributed timing and accuracy table")
    b.add_argument("--sizes", type=_int_list, required=True)
    b.add_argument("--workers", type=_int_list, required=True)
    b.add_argument("--repeats", type=_positive_int, default=1)
    b.add_argument("--p", type=_positive_int, default=90)
    b.add_argument("--d", type=_positive_int, default=1)
    b.add_argument("--k", type=_positive_int, default=10)
    b.add_argument("--l", type=_positive_int, default=3)
    b.add_argument("--iterations", type=_non_negative_int, default=100)
    b.add_argument("--seed", type=_non_negative_int, default=0)
    b.add_argument("--backend", choices=["serial", "thread", "process"], default=None)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, ["disnplbm"] + argv)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"disnplbm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
