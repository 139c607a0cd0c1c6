"""The command line workflow: generate, fit both ways, evaluate, bench.

Equivalent shell session::

    disnplbm generate --n 1000 --p 30 --k 4 --l 3 --seed 3 --out run
    disnplbm fit --data run/data.csv --mode distributed --workers 4 --deterministic --out run/fit.json
    disnplbm evaluate --pred run/fit.json --truth run/z.csv
"""

import json
import tempfile
from pathlib import Path

from disnplbm.cli import main

out = Path(tempfile.mkdtemp(prefix="disnplbm-demo-"))
main(["generate", "--n", "1000", "--p", "30", "--k", "4", "--l", "3", "--seed", "3", "--out", str(out)])
for mode, workers in (("centralized", "1"), ("distributed", "4")):
    result = out / f"{mode}.json"
    main(["fit", "--data", str(out / "data.csv"), "--mode", mode, "--workers", workers, "--iterations", "30",
          "--deterministic", "--emit", str(out / mode), "--out", str(result)])
    doc = json.loads(result.read_text())
    print(mode, "K =", doc["K"], "L =", doc["L"])
    main(["evaluate", "--pred", str(result), "--truth", str(out / "z.csv")])
main(["bench", "--sizes", "1000", "--workers", "2", "--p", "30", "--k", "4", "--iterations", "20",
      "--out", str(out / "bench.csv")])
print("files in", out, sorted(p.name for p in out.iterdir()))
