"""End-to-end training and calibrated evaluation on top of the library modules."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .artifact import ModelArtifact
from .calibration import calibrate_for_type2, calibrate_threshold
from .config import ExperimentConfig
from .data import (MAJORITY, MINORITY, LabeledDataset, Standardizer, fit_standardizer, generate_synthetic, load_csv,
                   stratified_split, subsample_minority)
from .errors import DataError
from .evaluation import ErrorCurves, f1_at_proportion, threshold_sweep, type1_type2
from .finetune import GridSearchReport, grid_search_alpha_beta, train_stage2
from .projection import draw_direction_set, score_batch
from .reference import barycenter
from .vae import TrainingHistory, VaeModel, encode, init_vae, train_stage1

log = logging.getLogger(__name__)


def load_dataset(config: ExperimentConfig) -> LabeledDataset:
    src = config.data
    if src.synthetic is not None:
        return generate_synthetic(src.synthetic)
    return load_csv(src.csv, src.label_column, src.label_positive)


def prepare_data(config: ExperimentConfig, raw: LabeledDataset | None = None,
                 standardizer: Standardizer | None = None):
    """Split, standardize, then subsample training minority rows.

    The standardizer is fit on the full train split unless one is passed in
    (e.g. from a saved artifact). Returns ``(standardizer, standardized
    dataset)``. Rows that already carry train/val/test tags keep them.
    """
    ds = load_dataset(config) if raw is None else raw
    if not np.all(np.isin(ds.split, ("train", "val", "test"))):
        ds = stratified_split(ds, config.split_ratios, config.seed)
    if standardizer is None:
        standardizer = fit_standardizer(ds.features[ds.split == "train"])
    elif standardizer.mean.shape[0] != ds.n_features:
        raise DataError(f"data has {ds.n_features} features, standardizer expects {standardizer.mean.shape[0]}")
    ds = ds.with_features(standardizer.apply(ds.features))
    if config.target_rho is not None:
        ds = subsample_minority(ds, config.target_rho, config.seed)
    return standardizer, ds


@dataclass
class TrainOutcome:
    artifact: ModelArtifact
    data: LabeledDataset  # standardized, split-tagged
    stage1_model: VaeModel
    stage1_history: TrainingHistory
    stage2_history: TrainingHistory | None = None
    grid: GridSearchReport | None = None
    selected: tuple[float, float] = (math.nan, math.nan)
    f1_rho: float = math.nan
    notes: list[str] = field(default_factory=list)


def _rows(ds, split, label):
    return ds.features[(ds.split == split) & (ds.labels == label)]


def run_train(config: ExperimentConfig, raw: LabeledDataset | None = None) -> TrainOutcome:
    config.validate()
    seed = config.seed
    loaded = load_dataset(config) if raw is None else raw
    f1_rho = config.f1_rho if config.f1_rho is not None else loaded.minority_fraction
    standardizer, ds = prepare_data(config, loaded)

    x1_train = _rows(ds, "train", MAJORITY)
    if x1_train.shape[0] < 1:
        raise DataError("no majority training rows")
    x1_val = _rows(ds, "val", MAJORITY)
    if x1_val.shape[0] < 1:
        raise DataError("empty majority validation split; calibration impossible")

    s1 = replace(config.stage1, seed=seed)
    model0 = init_vae(ds.n_features, config.latent_dim, config.hidden, seed)
    log.info("stage 1: %d majority rows, %d epochs", x1_train.shape[0], s1.epochs)
    stage1, h1 = train_stage1(model0, x1_train, s1, x1_val)

    reference = barycenter(encode(stage1, x1_train))
    directions = draw_direction_set(seed, config.n_directions, config.latent_dim)

    x2_train = _rows(ds, "train", MINORITY)
    x2_val = _rows(ds, "val", MINORITY)
    s2 = replace(config.stage2, seed=seed)
    grid = None
    if config.grid is not None:
        val = ds.part("val")
        splits = {
            "train_majority": x1_train, "train_minority": x2_train,
            "val_majority": x1_val, "val_minority": x2_val,
            "val_x": val.features, "val_y": val.labels, "val_ids": val.row_ids,
        }
        grid = grid_search_alpha_beta(config.grid.alphas, config.grid.betas, stage1, reference, splits, s2,
                                      directions, config.mode, seed)
        a, b = grid.selected
        s2 = replace(s2, alpha=a, beta=b)
        final = grid.models[(a, b)]
        h2 = None
    else:
        log.info("stage 2: alpha=%g beta=%g, %d minority rows", s2.alpha, s2.beta, x2_train.shape[0])
        final, h2 = train_stage2(stage1, reference, x1_train, x2_train, s2, x1_val, x2_val)

    artifact = ModelArtifact(
        final, reference, directions, standardizer, {}, config.mode, seed,
        provenance={
            "config_hash": config.fingerprint(),
            "seed": seed,
            "alpha": s2.alpha,
            "beta": s2.beta,
            "dataset": ds.name,
            "feature_names": list(ds.feature_names),
            "label_values": {str(k): v for k, v in ds.label_values.items()},
            "stage1_best_epoch": h1.best_epoch,
            "stage2_best_epoch": None if h2 is None else h2.best_epoch,
        },
    )
    calibrate_rules(artifact, ds, config.deltas)
    return TrainOutcome(artifact, ds, stage1, h1, h2, grid, (s2.alpha, s2.beta), f1_rho)


def score_split(artifact: ModelArtifact, ds: LabeledDataset, split: str | None = None, model: VaeModel | None = None):
    part = ds if split is None else ds.part(split)
    s = score_batch(model or artifact.model, artifact.reference, artifact.directions, part.features,
                    artifact.mode, artifact.score_seed, part.row_ids)
    return s, part.labels


def calibrate_rules(artifact: ModelArtifact, ds: LabeledDataset, deltas) -> None:
    cal = ds.part("val", MAJORITY)
    if len(cal) == 0:
        raise DataError("empty majority validation split; calibration impossible")
    s, _ = score_split(artifact, cal)
    artifact.rules = {float(d): calibrate_threshold(s, d) for d in deltas}


def _tau_json(tau):
    if math.isinf(tau):
        return "inf" if tau > 0 else "-inf"
    return tau


def _rate(er, which):
    if which == 1:
        n = er.fp + er.tn
        return {"rate": er.type1, "count": er.fp, "n": n}
    n = er.fn + er.tp
    return {"rate": er.type2, "count": er.fn, "n": n}


@dataclass
class EvalReport:
    metrics: dict
    curves: ErrorCurves


def run_calibrate_and_eval(artifact: ModelArtifact, ds: LabeledDataset, deltas, f1_rho: float,
                           type2_target: float = 0.1, model: VaeModel | None = None) -> EvalReport:
    """Calibrate on majority validation rows and report on validation and test.

    ``ds`` must already be standardized with the artifact's standardizer.
    """
    if model is None:
        calibrate_rules(artifact, ds, deltas)
    vs, vy = score_split(artifact, ds, "val", model)
    ts, ty = score_split(artifact, ds, "test", model)
    cal_scores = vs[vy == MAJORITY]
    if cal_scores.size == 0:
        raise DataError("empty majority validation split; calibration impossible")

    per_delta = []
    for d in deltas:
        rule = calibrate_threshold(cal_scores, d)
        ev, et = type1_type2(vs, vy, rule.tau), type1_type2(ts, ty, rule.tau)
        per_delta.append({
            "delta": float(d), "k": rule.k, "n_cal": rule.n_cal,
            "tau": _tau_json(rule.tau),
            "val": {"type1": _rate(ev, 1), "type2": _rate(ev, 2)},
            "test": {"type1": _rate(et, 1), "type2": _rate(et, 2),
                     "confusion": {"tn": et.tn, "fp": et.fp, "fn": et.fn, "tp": et.tp}},
        })

    type2_protocol = None
    if np.any(vy == MINORITY):
        t2 = calibrate_for_type2(vs[vy == MINORITY], cal_scores, type2_target)
        et = type1_type2(ts, ty, t2.tau)
        type2_protocol = {
            "target": type2_target,
            "tau": _tau_json(t2.tau),
            "val": {"type1": t2.type1, "type2": t2.type2},
            "test": {"type1": _rate(et, 1), "type2": _rate(et, 2)},
        }

    curves = threshold_sweep(vs, vy, ts, ty)
    metrics = {
        "val": f1_at_proportion(vs, vy, f1_rho, "val").to_dict(),
        "test": f1_at_proportion(ts, ty, f1_rho, "test").to_dict(),
        "per_delta": per_delta,
        "type2_protocol": type2_protocol,
        "sweep_mad": curves.mad,
        "provenance": artifact.provenance,
    }
    return EvalReport(metrics, curves)


def render_report(metrics: dict, title: str = "VAE-Inf run") -> str:
    def fmt(v):
        return "n/a" if v is None else f"{v:.4f}"

    lines = [f"# {title}", ""]
    prov = metrics.get("provenance", {})
    if prov:
        lines += [f"config hash `{prov.get('config_hash')}`, seed {prov.get('seed')}, "
                  f"alpha={prov.get('alpha')}, beta={prov.get('beta')}", ""]
    lines += ["| split | AUC-ROC | AUC-PR | F1 | TP | FP | TN | FN |", "|---|---|---|---|---|---|---|---|"]
    for split in ("val", "test"):
        m = metrics[split]
        lines.append(f"| {split} | {fmt(m['auc_roc'])} | {fmt(m['auc_pr'])} | {fmt(m['f1'])} | "
                     f"{m['tp']} | {m['fp']} | {m['tn']} | {m['fn']} |")
    lines += ["", "## Calibrated Type-I / Type-II", "",
              "| delta | split | Type-I | Type-II |", "|---|---|---|---|"]
    for row in metrics["per_delta"]:
        for split in ("val", "test"):
            r1, r2 = row[split]["type1"], row[split]["type2"]
            lines.append(f"| {row['delta']} | {split} | {fmt(r1['rate'])} ({r1['count']}/{r1['n']}) | "
                         f"{fmt(r2['rate'])} ({r2['count']}/{r2['n']}) |")
    t2 = metrics.get("type2_protocol")
    if t2:
        lines += ["", f"## Type-II target {t2['target']}", "",
                  f"validation Type-II {fmt(t2['val']['type2'])}, Type-I {fmt(t2['val']['type1'])}; "
                  f"test Type-II {fmt(t2['test']['type2']['rate'])}, Type-I {fmt(t2['test']['type1']['rate'])}"]
    lines += ["", f"Validation-vs-test Type-I MAD over the 100-point sweep: {metrics['sweep_mad']:.4f}", ""]
    return "\n".join(lines)


def aggregate_runs(per_seed: list[dict]) -> dict:
    """Mean and sample std of the headline test metrics across seeds."""
    out = {}
    for key in ("auc_roc", "auc_pr", "f1"):
        vals = np.array([m["test"][key] for m in per_seed if m["test"][key] is not None], dtype=float)
        out[key] = {
            "mean": float(vals.mean()) if vals.size else None,
            "std": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
            "n": int(vals.size),
        }
    return out
