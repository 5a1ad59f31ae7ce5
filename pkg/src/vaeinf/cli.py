"""Command line entry point: ``vaeinf <command> --config cfg.json [overrides]``.

Exit codes: 0 success, 1 config error, 2 data/artifact error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .artifact import load_artifact, save_artifact
from .calibration import decide_batch
from .config import ExperimentConfig, GridSpec, config_from_dict, load_config
from .data import generate_synthetic, load_csv, write_csv
from .errors import ArtifactError, ConfigError, DataError, DivergenceError
from .pipeline import (aggregate_runs, load_dataset, prepare_data, render_report, run_calibrate_and_eval,
                       run_train)
from .projection import MODES, score_batch

log = logging.getLogger("vaeinf")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--delta", type=_floats, help="comma-separated Type-I levels, e.g. 0.01,0.05")
    common.add_argument("--mode", choices=MODES, help="latent code used for scoring")
    common.add_argument("--rho", type=float, help="subsample training minority to this proportion")
    common.add_argument("--data", type=Path, help="CSV file (overrides the config's data source)")
    common.add_argument("--label-column", help="name of the label column in the CSV")
    common.add_argument("--label-positive", help="label value marking the minority class")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="vaeinf", description="Two-stage VAE anomaly detection with calibrated Type-I control")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write the configured synthetic dataset as CSV")
    sub.add_parser("train", parents=[common], help="Stage 1 + reference + Stage 2; writes model.json")
    g = sub.add_parser("grid", parents=[common], help="like train, but selects (alpha, beta) on validation AUC-PR")
    g.add_argument("--alphas", type=_floats)
    g.add_argument("--betas", type=_floats)
    sub.add_parser("calibrate", parents=[common], help="calibrate thresholds and evaluate; writes metrics/curves/report")
    s = sub.add_parser("score", parents=[common], help="score a CSV with a saved model")
    s.add_argument("--model", type=Path, required=True)
    s.add_argument("--input", type=Path, required=True)
    sub.add_parser("sweep", parents=[common], help="100-point threshold sweep; writes curves.csv")
    r = sub.add_parser("report", parents=[common], help="render report.md; with --seeds, rerun per seed and aggregate")
    r.add_argument("--seeds", type=_ints)
    return p


def resolve_config(args, validate: bool = True) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=str(args.out))
    if args.delta:
        cfg = replace(cfg, deltas=args.delta)
    if args.mode:
        cfg = replace(cfg, mode=args.mode)
    if args.rho is not None:
        cfg = replace(cfg, target_rho=args.rho)
    data = cfg.data
    if args.data is not None:
        data = replace(data, csv=str(args.data), synthetic=None)
    if args.label_column:
        data = replace(data, label_column=args.label_column)
    if args.label_positive is not None:
        data = replace(data, label_positive=args.label_positive)
    cfg = replace(cfg, data=data)
    if getattr(args, "alphas", None) or getattr(args, "betas", None):
        base = cfg.grid or GridSpec()
        cfg = replace(cfg, grid=GridSpec(args.alphas or base.alphas, args.betas or base.betas))
    return cfg.validate() if validate else cfg


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _nan_to_none(obj):
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    if isinstance(obj, float) and obj != obj:
        return None
    return obj


def cmd_synth(cfg, args):
    if cfg.data.synthetic is None:
        raise ConfigError("synth needs a 'data.synthetic' section in the config")
    out = Path(cfg.out) / "data.csv"
    write_csv(generate_synthetic(cfg.data.synthetic), out, include_split=False)
    print(out)


def cmd_train(cfg, args):
    outcome = run_train(cfg)
    out = Path(cfg.out)
    save_artifact(outcome.artifact, out / "model.json")
    if outcome.grid is not None:
        _write(out / "grid.csv", outcome.grid.to_csv())
        print(f"selected alpha={outcome.selected[0]:g} beta={outcome.selected[1]:g}")
    print(out / "model.json")
    return outcome


def _eval(cfg):
    out = Path(cfg.out)
    artifact = load_artifact(out / "model.json")
    raw = load_dataset(cfg)
    _, ds = prepare_data(cfg, raw, standardizer=artifact.standardizer)
    f1_rho = cfg.f1_rho if cfg.f1_rho is not None else raw.minority_fraction
    rep = run_calibrate_and_eval(artifact, ds, cfg.deltas, f1_rho, cfg.type2_target)
    return artifact, rep


def cmd_calibrate(cfg, args):
    artifact, rep = _eval(cfg)
    out = Path(cfg.out)
    save_artifact(artifact, out / "model.json")
    metrics = _nan_to_none(rep.metrics)
    _write(out / "metrics.json", _dump_json(metrics))
    _write(out / "curves.csv", rep.curves.to_csv())
    _write(out / "report.md", render_report(metrics))
    t = metrics["test"]
    print(f"test AUC-ROC={t['auc_roc']:.4f} AUC-PR={t['auc_pr']:.4f} F1={t['f1']:.4f}")
    for row in metrics["per_delta"]:
        print(f"delta={row['delta']}: test Type-I={row['test']['type1']['rate']} Type-II={row['test']['type2']['rate']}")


def cmd_sweep(cfg, args):
    _, rep = _eval(cfg)
    _write(Path(cfg.out) / "curves.csv", rep.curves.to_csv())
    print(f"val-vs-test Type-I MAD = {rep.curves.mad:.6f}")


def cmd_score(cfg, args):
    artifact = load_artifact(args.model)
    prov = artifact.provenance
    label_col = args.label_column or cfg.data.label_column

    with open(args.input, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if label_col in header:
        ds = load_csv(args.input, label_col, args.label_positive or cfg.data.label_positive)
        x = ds.features
    else:
        x = _read_feature_csv(args.input)
    if x.shape[1] != artifact.model.input_dim:
        raise DataError(f"{args.input}: {x.shape[1]} features, model expects {artifact.model.input_dim}")
    scores = score_batch(artifact.model, artifact.reference, artifact.directions, artifact.standardizer.apply(x),
                         args.mode or artifact.mode, artifact.score_seed, np.arange(x.shape[0]))
    deltas = sorted(artifact.rules)
    lines = ["row,score" + "".join(f",decision_delta_{d!r}" for d in deltas)]
    for i, s in enumerate(scores):
        dec = [int(decide_batch([s], artifact.rules[d])[0]) for d in deltas]
        lines.append(f"{i},{float(s)!r}" + "".join(f",{v}" for v in dec))
    out = Path(cfg.out) / "scores.csv"
    _write(out, "\n".join(lines) + "\n")
    print(out)
    log.debug("scored with model trained under config %s", prov.get("config_hash"))


def _read_feature_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    try:
        return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as e:
        raise DataError(f"{path}: non-numeric feature value ({e})") from None


def cmd_report(cfg, args):
    out = Path(cfg.out)
    if not args.seeds:
        path = out / "metrics.json"
        if not path.exists():
            raise DataError(f"{path} not found; run 'calibrate' first or pass --seeds")
        metrics = json.loads(path.read_text(encoding="utf-8"))
        _write(out / "report.md", render_report(metrics))
        return
    per_seed = []
    for seed in args.seeds:
        c = replace(cfg, seed=seed, out=str(out / f"seed_{seed}"))
        outcome = run_train(c)
        save_artifact(outcome.artifact, Path(c.out) / "model.json")
        rep = run_calibrate_and_eval(outcome.artifact, outcome.data, c.deltas, outcome.f1_rho, c.type2_target)
        m = _nan_to_none(rep.metrics)
        _write(Path(c.out) / "metrics.json", _dump_json(m))
        per_seed.append(m)
    agg = aggregate_runs(per_seed)
    _write(out / "aggregate.json", _dump_json({"seeds": args.seeds, "test": agg}))
    lines = [f"# Aggregate over seeds {args.seeds}", "", "| metric | mean | std | n |", "|---|---|---|---|"]
    for key, v in agg.items():
        mean = "n/a" if v["mean"] is None else f"{v['mean']:.4f}"
        lines.append(f"| {key} | {mean} | {v['std']:.4f} | {v['n']} |")
    _write(out / "report.md", "\n".join(lines) + "\n")
    print("\n".join(lines))


COMMANDS = {
    "synth": cmd_synth, "train": cmd_train, "grid": cmd_train, "calibrate": cmd_calibrate,
    "score": cmd_score, "sweep": cmd_sweep, "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        needs_data = not (args.command == "score" or (args.command == "report" and not args.seeds))
        cfg = resolve_config(args, validate=needs_data)
        if args.command == "grid" and cfg.grid is None:
            cfg = replace(cfg, grid=GridSpec())
        COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ArtifactError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
