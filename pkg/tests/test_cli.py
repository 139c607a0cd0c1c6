import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from disnplbm.cli import file_digest, main
from disnplbm.data import read_labels


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def dataset(tmp_path, capsys):
    out = tmp_path / "data"
    code, stdout, _ = run(["generate", "--n", 100, "--p", 9, "--d", 1, "--k", 2, "--l", 3,
                           "--seed", 7, "--out", out], capsys)
    assert code == 0
    return out, json.loads(stdout)


def test_generate_writes_three_files(dataset):
    out, manifest = dataset
    assert sorted(p.name for p in out.iterdir()) == ["data.csv", "w.csv", "z.csv"]
    lines = (out / "data.csv").read_text().splitlines()
    assert len(lines) == 101
    assert manifest["dataset_digest"] == file_digest(out / "data.csv")
    assert manifest["config"]["k"] == 2
    assert {"command", "config", "dataset_digest", "results", "versions"} <= set(manifest)


def test_generate_is_deterministic(tmp_path, capsys, dataset):
    out, manifest = dataset
    code, stdout, _ = run(["generate", "--n", 100, "--p", 9, "--d", 1, "--k", 2, "--l", 3,
                           "--seed", 7, "--out", tmp_path / "again"], capsys)
    assert code == 0
    assert json.loads(stdout)["dataset_digest"] == manifest["dataset_digest"]
    for name in ("data.csv", "z.csv", "w.csv"):
        assert (out / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_usage_errors(tmp_path, capsys):
    assert run(["generate", "--n", 10, "--p", 3, "--k", 0, "--out", tmp_path], capsys)[0] == 2
    assert run(["fit", "--data", "x.csv"], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2


def test_fit_zero_iterations(dataset, tmp_path, capsys):
    out, _ = dataset
    code, _, _ = run(["fit", "--data", out / "data.csv", "--iterations", 0, "--out", tmp_path / "r.json"], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["row_labels"] == [0] * 100 and doc["column_labels"] == [0] * 9
    assert doc["K"] == 1 and doc["L"] == 1 and doc["trace"] == []


def test_fit_deterministic_byte_identical(dataset, tmp_path, capsys):
    out, _ = dataset
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        code, _, _ = run(["fit", "--data", out / "data.csv", "--mode", "distributed", "--workers", 1,
                          "--iterations", 5, "--deterministic", "--out", p], capsys)
        assert code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


@pytest.mark.parametrize("mode,workers", [("centralized", 1), ("distributed", 3)])
def test_fit_recovers_and_emits(dataset, tmp_path, capsys, mode, workers):
    out, _ = dataset
    emit = tmp_path / "emit"
    code, stdout, _ = run(["fit", "--data", out / "data.csv", "--mode", mode, "--workers", workers,
                           "--iterations", 20, "--seed", 1, "--emit", emit, "--out", tmp_path / "r.json"], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["config"]["mode"] == mode
    assert np.array_equal(read_labels(emit / "z.csv"), doc["row_labels"])
    assert (emit / "reordered.csv").exists()
    code, stdout, _ = run(["evaluate", "--pred", tmp_path / "r.json", "--truth", out / "z.csv"], capsys)
    assert code == 0
    assert json.loads(stdout)["ari"] == 1.0


def test_fit_errors(dataset, tmp_path, capsys):
    out, _ = dataset
    code, _, err = run(["fit", "--data", out / "data.csv", "--workers", 101, "--out", tmp_path / "r.json"], capsys)
    assert code == 1 and "workers" in err
    code, _, err = run(["fit", "--data", tmp_path / "missing.csv", "--out", tmp_path / "r.json"], capsys)
    assert code == 1
    assert not (tmp_path / "r.json").exists()


def test_evaluate_fixtures(tmp_path, capsys):
    def labels(name, values):
        (tmp_path / name).write_text("label\n" + "\n".join(map(str, values)) + "\n")
        return tmp_path / name

    a = labels("a.csv", [0, 0, 1, 1])
    b = labels("b.csv", [0, 1, 0, 1])
    one = labels("one.csv", [0, 0, 0, 0])
    short = labels("short.csv", [0, 0, 1])
    code, stdout, _ = run(["evaluate", "--pred", a, "--truth", a], capsys)
    assert json.loads(stdout) == {"ari": 1.0, "nmi": 1.0, "K_pred": 2, "K_truth": 2}
    code, stdout, _ = run(["evaluate", "--pred", a, "--truth", b, "--out", tmp_path / "m.json"], capsys)
    assert json.loads(stdout)["ari"] == pytest.approx(-0.5)
    assert json.loads((tmp_path / "m.json").read_text())["ari"] == pytest.approx(-0.5)
    code, stdout, _ = run(["evaluate", "--pred", one, "--truth", one], capsys)
    assert json.loads(stdout)["nmi"] == 1.0
    assert run(["evaluate", "--pred", a, "--truth", short], capsys)[0] == 1


def test_bench_row_count(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code, _, _ = run(["bench", "--sizes", 1000, "--workers", "1,4", "--repeats", 2, "--p", 12, "--k", 3,
                      "--iterations", 3, "--out", out], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 6
    assert [r["mode"] for r in rows].count("centralized") == 2
    assert set(rows[0]) == {"n", "mode", "workers", "seed", "ari", "nmi", "K", "L", "wall_ms"}
    assert all(float(r["ari"]) == 1.0 for r in rows)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "disnplbm", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
