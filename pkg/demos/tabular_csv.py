"""End-to-end CSV pipeline: synthesize a multi-feature tabular regression
set (numeric + categorical columns), train bbb_ncp passively on it, and
evaluate the saved checkpoint on the held-out split.

Run from the repo root:  python3 demos/tabular_csv.py [outdir]

Mirrors how a real tabular data set (e.g. flight delays) flows through
the tool: gen CSV -> train -> eval, all through the CLI, with categorical
features handled by flip-resampling NCP noise instead of Gaussian jitter.
"""
import csv
import json
import math
import pathlib
import random
import sys

from ncprior.cli import main

OUT = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "out/tabular")
CSV = OUT / "synthetic.csv"
N = 4000

OUT.mkdir(parents=True, exist_ok=True)
rng = random.Random(7)
with open(CSV, "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["load", "temp", "wind", "sector", "delay"])
    for _ in range(N):
        load = rng.gauss(0.0, 1.0)
        temp = rng.gauss(15.0, 8.0)
        wind = abs(rng.gauss(0.0, 5.0))
        sector = rng.choice(["north", "south", "east", "west"])
        bump = {"north": 2.0, "south": -1.0, "east": 0.0, "west": 1.0}[sector]
        delay = (3.0 * load + 0.2 * temp + math.sin(wind) + bump
                 + rng.gauss(0.0, 1.0 + 0.1 * wind))
        w.writerow([f"{load:.4f}", f"{temp:.4f}", f"{wind:.4f}",
                    sector, f"{delay:.4f}"])
print(f"wrote {N} rows -> {CSV}")

rc = main(["train", "--out", str(OUT / "run"), "--seed", "3",
           "--set", "data.source=csv",
           "--set", f"data.csv_path={CSV}",
           "--set", "data.target=delay",
           "--set", "data.categorical=sector",
           "--set", "data.test_fraction=0.2",
           "--set", "model.kind=bbb_ncp",
           "--set", "model.hidden=32,32",
           "--set", "train.lr=1e-3",
           "--set", "train.batch_size=128",
           "--set", "train.epochs_per_round=40",
           "--set", "train.rounds=1",
           "--set", "ncp.gamma=0.1"])
assert rc == 0, "training failed"

first, last = [json.loads(ln) for ln in
               (OUT / "run" / "metrics.jsonl").read_text().strip().splitlines()]
print(f"untrained nlpd {first['nlpd']:.3f} -> trained {last['nlpd']:.3f}"
      f"  (rmse {first['rmse']:.3f} -> {last['rmse']:.3f})")

rc = main(["eval", "--checkpoint", str(OUT / "run" / "checkpoint.json"),
           "--set", "data.source=csv",
           "--set", f"data.csv_path={CSV}",
           "--set", "data.target=delay",
           "--set", "data.categorical=sector",
           "--set", "data.test_fraction=0.2",
           "--seed", "3",
           "--out", str(OUT / "eval")])
assert rc == 0, "eval failed"
print(f"eval artifacts: {OUT}/eval/eval.json")
