"""Fit results and their JSON document form."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

SCHEMA_VERSION = 1


@dataclass
class TraceRecord:
    iteration: int
    K: int
    L: int
    wall_ms: float | None
    log_posterior: float


@dataclass
class FitResult:
    row_labels: np.ndarray
    column_labels: np.ndarray
    trace: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    wall_ms: float | None = None

    def __post_init__(self):
        self.row_labels = np.asarray(self.row_labels, dtype=np.int64)
        self.column_labels = np.asarray(self.column_labels, dtype=np.int64)

    @property
    def K(self) -> int:
        return int(self.row_labels.max()) + 1 if self.row_labels.size else 0

    @property
    def L(self) -> int:
        return int(self.column_labels.max()) + 1 if self.column_labels.size else 0

    def to_dict(self, timings: bool = True) -> dict:
        """JSON-ready dict. ``timings=False`` nulls every wall-clock field so
        that reruns under a fixed seed serialize to identical bytes."""
        trace = []
        for rec in self.trace:
            r = asdict(rec)
            if not timings:
                r["wall_ms"] = None
            trace.append(r)
        return {
            "schema": SCHEMA_VERSION,
            "row_labels": self.row_labels.tolist(),
            "column_labels": self.column_labels.tolist(),
            "K": self.K,
            "L": self.L,
            "trace": trace,
            "wall_ms": self.wall_ms if timings else None,
            "config": self.config,
        }

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings=timings), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "FitResult":
        if doc.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported result schema {doc.get('schema')!r}")
        return cls(
            row_labels=doc["row_labels"],
            column_labels=doc["column_labels"],
            trace=[TraceRecord(**r) for r in doc["trace"]],
            config=doc["config"],
            wall_ms=doc["wall_ms"],
        )


def atomic_write(path, data: str | bytes):
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
