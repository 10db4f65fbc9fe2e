"""Active-learning comparison on the toy task: all four model kinds pick
labels by expected information gain, and the test metrics are tracked
round by round.

Run from the repo root:  python3 demos/active_learning_curves.py [outdir]

Prints an RMSE/NLPD table across acquisition rounds per model. The NCP
models keep their predictive density honest while the pool is still
small; the baselines overfit the handful of visible points early on.
"""
import json
import pathlib
import sys

from ncprior.cli import main

OUT = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "out/al_curves")
KINDS = ("det", "bbb", "bbb_ncp", "odc_ncp")
ROUNDS = 12

history = {}
for kind in KINDS:
    rc = main(["active-learn", "--out", str(OUT / kind), "--seed", "1",
               "--set", f"model.kind={kind}",
               "--set", "model.hidden=64,64",
               "--set", "train.lr=1e-3",
               "--set", "train.epochs_per_round=200",
               "--set", f"train.rounds={ROUNDS}",
               "--set", "ncp.gamma=0.1"])
    assert rc == 0, f"{kind} run failed"
    lines = (OUT / kind / "metrics.jsonl").read_text().strip().splitlines()
    history[kind] = [json.loads(ln) for ln in lines]

for metric in ("rmse", "nlpd"):
    print(f"\ntest {metric} by round (10 initial labels + 1 per round)")
    print(f"{'round':>5s} " + " ".join(f"{k:>9s}" for k in KINDS))
    for i in range(ROUNDS):
        row = [history[k][i][metric] for k in KINDS]
        print(f"{i:5d} " + " ".join(f"{v:9.3f}" if v < 1e4 else f"{v:9.2e}"
                                    for v in row))

print(f"\nFull per-round records: {OUT}/<kind>/metrics.jsonl"
      f" (and metrics.csv for spreadsheets).")
