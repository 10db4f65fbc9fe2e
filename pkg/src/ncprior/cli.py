"""Command-line entry point.

Subcommands:
  train         passive training on the full train split
  active-learn  the acquisition loop
  sweep         noise-kind × σ_x² robustness grid
  eval          score a saved checkpoint on a split
  gen-toy       write the two-band toy dataset to CSV

Every run writes a manifest.json whose config_text is the fully resolved
configuration; passing that manifest as --config replays the run exactly
(metrics.jsonl is byte-identical under the default deterministic timing).
Plot data is emitted for 1-feature datasets as plotdata_<kind>.csv with
columns x, mean, epistemic_std, aleatoric_std in original target units; for
the OOD-classifier kind the epistemic column is the mixture's variance
excess over the aleatoric part, clipped at zero.

Exit codes: 0 success, 1 usage/other, 2 config, 3 data, 4 round budget
exceeded (partial results are still written).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, config_to_text, parse_config
from .data import (Dataset, ParseError, SchemaError, Standardizer,
                   apply_standardizer, generate_toy, load_csv, random_split,
                   save_csv, save_splits, with_test_split)
from .harness import (STREAM_DATA, STREAM_SPLIT, RunResult, TrainState,
                      evaluate, run_active_learning, run_passive, run_sweep,
                      write_metrics_csv, write_metrics_jsonl, write_sweep_csv)
from .models import WeightPrior, load_checkpoint, predict_batch, save_checkpoint
from .optim import adam_init
from .rng import make_rng


class _CliArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits the process on bad args; raise instead so main can
    # map every usage problem to exit code 1 with the usage text.
    def error(self, message):
        raise _CliArgError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ncprior",
                     description="Uncertainty-aware regression with noise "
                                 "contrastive priors.")
    parser.add_argument("--version", action="version", version=f"ncprior {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="config file or manifest.json to replay")
        p.add_argument("--out", default="runs", help="output directory (default: runs)")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")

    common(sub.add_parser("train", help="passive training on the full train split"))
    common(sub.add_parser("active-learn", help="run the acquisition loop"))
    p_sweep = sub.add_parser("sweep", help="noise robustness grid")
    common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=None,
                         help="concurrent sweep cells (override run.jobs)")
    p_eval = sub.add_parser("eval", help="score a saved checkpoint")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--standardizer", default=None,
                        help="standardizer.json (default: next to the checkpoint)")
    p_eval.add_argument("--split", choices=("test", "train"), default="test")
    common(sub.add_parser("gen-toy", help="write the toy dataset to CSV"))
    return parser


def _load_config_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    if text.lstrip().startswith("{"):
        try:
            return json.loads(text)["config_text"]
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            raise ConfigError(f"{path}: not a valid manifest: {err}") from None
    return text


def _resolve_config(args) -> RunConfig:
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if getattr(args, "jobs", None) is not None:
        overrides.append(f"run.jobs={args.jobs}")
    text = _load_config_text(args.config) if args.config else ""
    return parse_config(text, overrides)


def _build_dataset(rc: RunConfig, seed: int) -> Dataset:
    d = rc.data
    if d.source == "toy":
        return generate_toy(d.toy_n_per_band, make_rng(seed, STREAM_DATA),
                            bands=d.toy_bands, test_interval=d.toy_test_interval,
                            test_count=d.toy_test_points,
                            exclude_bands_from_test=d.toy_exclude_bands_from_test)
    ds = load_csv(d.csv_path, d.target, d.categorical)
    _, test_idx = random_split(ds.n_rows, d.test_fraction, make_rng(seed, STREAM_SPLIT))
    return with_test_split(ds, test_idx)


def _write_manifest(out: Path, command: str, rc: RunConfig, t0: float,
                    outputs: list[str], **extra) -> None:
    manifest = {
        "artifact": "ncprior",
        "version": __version__,
        "command": command,
        "seed": rc.experiment.seed,
        "config_text": config_to_text(rc),
        "outputs": outputs,
        "wall_seconds": time.monotonic() - t0,
    }
    manifest.update(extra)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def _write_plotdata(res: RunResult, path: Path) -> None:
    ds, std, state = res.dataset, res.standardizer, res.state
    idx = ds.test_idx[np.argsort(ds.x[ds.test_idx, 0], kind="stable")]
    pb = predict_batch(state.model_kind, state.params, state.posterior, ds.x[idx])
    if pb.ood_probability is not None:
        pred_var = ((1.0 - pb.ood_probability) * pb.aleatoric_variance
                    + pb.ood_probability * state.ncp.sigma_y_sq)
        epistemic = np.maximum(pred_var - pb.aleatoric_variance, 0.0)
    else:
        epistemic = pb.epistemic_variance
    x = std.inverse_features(ds.x[idx])[:, 0]
    mean = std.inverse_target(pb.mean)
    e_std = np.sqrt(std.inverse_target_variance(epistemic))
    a_std = np.sqrt(std.inverse_target_variance(pb.aleatoric_variance))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,mean,epistemic_std,aleatoric_std\n")
        for row in zip(x, mean, e_std, a_std):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _run_training(args, rc: RunConfig, out: Path, t0: float, active: bool) -> int:
    ds = _build_dataset(rc, rc.experiment.seed)
    res = (run_active_learning if active else run_passive)(rc.experiment, ds)
    outputs = ["metrics.jsonl", "metrics.csv", "checkpoint.json",
               "standardizer.json", "splits.json"]
    write_metrics_jsonl(res.records, str(out / "metrics.jsonl"))
    write_metrics_csv(res.records, str(out / "metrics.csv"))
    save_checkpoint(str(out / "checkpoint.json"), res.state.model_kind,
                    res.state.params, res.state.posterior, res.state.ncp)
    with open(out / "standardizer.json", "w", encoding="utf-8") as fh:
        json.dump(res.standardizer.to_json(), fh)
    save_splits(res.dataset, str(out / "splits.json"),
                provenance={"seed": rc.experiment.seed})
    if res.dataset.n_features == 1:
        name = f"plotdata_{res.state.model_kind}.csv"
        _write_plotdata(res, out / name)
        outputs.append(name)
    _write_manifest(out, args.command, rc, t0, outputs, partial=res.partial,
                    pool_label_reads=res.pool_label_reads)
    final = res.records[-1]
    print(f"{args.command}: {len(res.records)} records, final rmse {final.rmse:.4f}, "
          f"nlpd {final.nlpd:.4f} -> {out}")
    if res.partial:
        print("error: round budget exceeded; results are partial", file=sys.stderr)
        return 4
    return 0


def _run_sweep(args, rc: RunConfig, out: Path, t0: float) -> int:
    sw = run_sweep(rc.experiment, rc.sweep.noise_kinds, rc.sweep.sigma_x_sq_grid,
                   rc.sweep.seeds, lambda seed: _build_dataset(rc, seed),
                   jobs=rc.sweep.jobs)
    write_sweep_csv(sw, str(out / "sweep.csv"))
    _write_manifest(out, "sweep", rc, t0, ["sweep.csv"],
                    seeds=list(sw.seeds), seed_list_identical_across_cells=True,
                    errors=sw.errors)
    print(f"sweep: {len(sw.rows)} aggregate rows, {len(sw.errors)} failed runs "
          f"-> {out / 'sweep.csv'}")
    if sw.errors:
        print(f"warning: {len(sw.errors)} runs failed; see manifest.json",
              file=sys.stderr)
    return 0


def _run_eval(args, rc: RunConfig, out: Path, t0: float) -> int:
    kind, params, posterior, ncp = load_checkpoint(args.checkpoint)
    std_path = args.standardizer or str(Path(args.checkpoint).parent / "standardizer.json")
    with open(std_path, "r", encoding="utf-8") as fh:
        std = Standardizer.from_json(json.load(fh))
    ds = _build_dataset(rc, rc.experiment.seed)
    ds.set_visible(ds.pool_idx)
    ds = apply_standardizer(ds, std)
    state = TrainState(model_kind=kind, layer_widths=params.layer_widths,
                       params=params, posterior=posterior, opt=adam_init(0),
                       prior=WeightPrior(), ncp=ncp)
    idx = ds.test_idx if args.split == "test" else ds.train_idx
    rmse, nlpd = evaluate(state, ds, idx, std)
    result = {"split": args.split, "n": int(idx.size), "rmse": rmse, "nlpd": nlpd}
    with open(out / "eval.json", "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2)
    _write_manifest(out, "eval", rc, t0, ["eval.json"], checkpoint=args.checkpoint)
    print(json.dumps(result))
    return 0


def _run_gen_toy(args, rc: RunConfig, out: Path, t0: float) -> int:
    ds = _build_dataset(rc, rc.experiment.seed)
    save_csv(ds, str(out / "toy.csv"), include_split=True)
    _write_manifest(out, "gen-toy", rc, t0, ["toy.csv"], rows=ds.n_rows)
    print(f"gen-toy: {ds.n_rows} rows -> {out / 'toy.csv'}")
    return 0


def _dispatch(args) -> int:
    t0 = time.monotonic()
    rc = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "train":
        return _run_training(args, rc, out, t0, active=False)
    if args.command == "active-learn":
        return _run_training(args, rc, out, t0, active=True)
    if args.command == "sweep":
        return _run_sweep(args, rc, out, t0)
    if args.command == "eval":
        return _run_eval(args, rc, out, t0)
    if args.command == "gen-toy":
        return _run_gen_toy(args, rc, out, t0)
    raise AssertionError(f"unhandled command {args.command!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _CliArgError as err:
        print(parser.format_usage().strip(), file=sys.stderr)
        print(f"error: {err}", file=sys.stderr)
        return 1
    try:
        return _dispatch(args)
    except ConfigError as err:
        print(f"error: config: {err}", file=sys.stderr)
        return 2
    except (SchemaError, ParseError) as err:
        print(f"error: data: {err}", file=sys.stderr)
        return 3
    except FileNotFoundError as err:
        print(f"error: data: {err}", file=sys.stderr)
        return 3
    except Exception as err:  # one-line diagnostic, never a traceback
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
