"""Stage 2: encoder fine-tuning with the projection margin loss, and (alpha, beta) grid search."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, NonFiniteError
from .evaluation import auc_pr
from .numkit import AdamState, RandomStream, adam_update, sample_unit_sphere
from .projection import DirectionSet, score_batch
from .reference import ReferenceModel
from .vae import TrainingHistory, VaeModel, _encoder_pass, backprop_latent

log = logging.getLogger(__name__)


@dataclass
class Stage2Config:
    alpha: float = 16.0
    beta: float = 2.0
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 2e-3
    n_directions: int = 32
    seed: int = 0
    patience: int = 20

    def validate(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError(f"invalid Stage2Config {self}")
        if self.n_directions < 1 or self.patience < 1:
            raise ValueError(f"invalid Stage2Config {self}")


@dataclass
class RegLoss:
    total: float
    majority_term: float
    minority_term: float  # already multiplied by beta
    grad_majority: np.ndarray
    grad_minority: np.ndarray


def margin_reg_loss(z_majority, z_minority, directions, reference: ReferenceModel, alpha, beta) -> RegLoss:
    """Hinge margin loss averaged over (sample, direction) pairs, with dL/dz.

    Majority pairs pay (d - alpha * a'Sa)_+, minority pairs pay
    beta * (alpha * a'Sa - d)_+, where d is the squared projected deviation.
    """
    z1 = np.atleast_2d(np.asarray(z_majority, dtype=float))
    z2 = np.atleast_2d(np.asarray(z_minority, dtype=float))
    a = np.atleast_2d(np.asarray(directions, dtype=float))
    if z2.shape[0] == 0 or z2.size == 0:
        raise ValueError("margin loss needs at least one minority latent")
    if z1.shape[0] == 0 or z1.size == 0:
        raise ValueError("margin loss needs at least one majority latent")
    radius = alpha * ((a * a) @ reference.sigma_ref_diag)  # (M,)

    p1 = (z1 - reference.mu_ref) @ a.T
    slack1 = p1 * p1 - radius
    on1 = slack1 > 0.0
    term1 = float(np.sum(slack1[on1]) / slack1.size)
    g1 = (on1 * 2.0 * p1) @ a / slack1.size

    p2 = (z2 - reference.mu_ref) @ a.T
    slack2 = radius - p2 * p2
    on2 = slack2 > 0.0
    term2 = float(beta * np.sum(slack2[on2]) / slack2.size)
    g2 = -beta * (on2 * 2.0 * p2) @ a / slack2.size

    return RegLoss(term1 + term2, term1, term2, g1, g2)


def reg_loss_value(model: VaeModel, x_maj, x_min, eps_maj, eps_min, directions, reference, alpha, beta) -> float:
    z1 = _sample_latents(model, x_maj, eps_maj)[0]
    if len(x_min) == 0:
        beta, z2 = 0.0, z1[:1]
    else:
        z2 = _sample_latents(model, x_min, eps_min)[0]
    return margin_reg_loss(z1, z2, directions, reference, alpha, beta).total


def _sample_latents(model, x, eps):
    ep = _encoder_pass(model, np.atleast_2d(x))
    return ep.mean + ep.std * eps, ep


def train_stage2(model: VaeModel, reference: ReferenceModel, x_majority, x_minority, config: Stage2Config,
                 x_val_majority=None, x_val_minority=None):
    """Fine-tune the encoder only; the decoder is returned untouched.

    Each epoch draws a fresh set of directions and sweeps the shuffled majority
    rows in minibatches, pairing every majority batch with an equally sized
    minority batch drawn with replacement.
    """
    config.validate()
    x1 = np.asarray(x_majority, dtype=float)
    x2 = np.asarray(x_minority, dtype=float)
    if x2.ndim != 2 or x2.shape[0] < 1:
        raise ValueError("Stage 2 needs at least one minority training sample")
    if x1.ndim != 2 or x1.shape[0] < 1:
        raise ValueError("Stage 2 needs at least one majority training sample")
    model = model.copy()
    k = model.latent_dim
    cfg = config

    have_val = x_val_majority is not None and len(x_val_majority) > 0
    if have_val:
        xv1 = np.asarray(x_val_majority, dtype=float)
        xv2 = np.asarray(x_val_minority, dtype=float) if x_val_minority is not None else np.zeros((0, model.input_dim))
        val_dirs = sample_unit_sphere(RandomStream(cfg.seed, "stage2-val-directions"), k, n=cfg.n_directions)
        ev1 = RandomStream(cfg.seed, "stage2-val-eps-majority").normal((xv1.shape[0], k))
        ev2 = RandomStream(cfg.seed, "stage2-val-eps-minority").normal((xv2.shape[0], k))

        def val_loss(m):
            return reg_loss_value(m, xv1, xv2, ev1, ev2, val_dirs, reference, cfg.alpha, cfg.beta)

    hist = TrainingHistory()
    if have_val:
        hist.val_loss.append(val_loss(model))
        best = hist.val_loss[0]
    best_params = model.encoder.parameters()
    params = model.encoder.parameters()
    state = AdamState.zeros_like(params, learning_rate=cfg.learning_rate)
    stale = 0
    n1, n2 = x1.shape[0], x2.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        dirs = sample_unit_sphere(RandomStream(cfg.seed, "stage2-directions", epoch), k, n=cfg.n_directions)
        order = RandomStream(cfg.seed, "stage2-shuffle", epoch).permutation(n1)
        draw = RandomStream(cfg.seed, "stage2-minority-batches", epoch)
        eps_stream = RandomStream(cfg.seed, "stage2-eps", epoch)
        epoch_loss = 0.0
        n_batches = 0
        for b, start in enumerate(range(0, n1, cfg.batch_size)):
            idx1 = order[start:start + cfg.batch_size]
            idx2 = draw.integers(0, n2, size=idx1.size)
            e1 = eps_stream.normal((idx1.size, k))
            e2 = eps_stream.normal((idx2.size, k))
            z1, ep1 = _sample_latents(model, x1[idx1], e1)
            z2, ep2 = _sample_latents(model, x2[idx2], e2)
            rl = margin_reg_loss(z1, z2, dirs, reference, cfg.alpha, cfg.beta)
            if not np.isfinite(rl.total):
                raise DivergenceError(f"Stage 2 diverged at epoch {epoch}, batch {b}", b, epoch)
            g1 = backprop_latent(model, ep1, e1, rl.grad_majority)
            g2 = backprop_latent(model, ep2, e2, rl.grad_minority)
            try:
                params, state = adam_update(params, [u + v for u, v in zip(g1, g2)], state)
            except NonFiniteError as e:
                raise DivergenceError(f"Stage 2 non-finite gradient at epoch {epoch}, batch {b}", b, epoch) from e
            model.encoder = model.encoder.with_parameters(params)
            epoch_loss += rl.total
            n_batches += 1
        hist.train_loss.append(epoch_loss / max(n_batches, 1))
        if have_val:
            v = val_loss(model)
            if not np.isfinite(v):
                raise DivergenceError(f"Stage 2 validation loss non-finite at epoch {epoch}", None, epoch)
            hist.val_loss.append(v)
            if v < best:
                best, stale, hist.best_epoch = v, 0, epoch
                best_params = model.encoder.parameters()
            else:
                stale += 1
                if stale >= cfg.patience:
                    hist.stopped_early = True
                    log.info("stage 2 early stop at epoch %d (best %d)", epoch, hist.best_epoch)
                    break
        else:
            hist.best_epoch = epoch
            best_params = model.encoder.parameters()
    model.encoder = model.encoder.with_parameters(best_params)
    return model, hist


DEFAULT_ALPHAS = (4.0, 9.0, 16.0, 25.0)
DEFAULT_BETAS = (1.0, 2.0, 4.0, 8.0, 10.0, 16.0)


@dataclass
class GridCell:
    alpha: float
    beta: float
    val_auc_pr: float | None
    runtime: float
    status: str = "ok"


@dataclass
class GridSearchReport:
    cells: list[GridCell]
    selected: tuple[float, float]
    models: dict = field(default_factory=dict, repr=False)

    def surface(self) -> dict[tuple[float, float], float | None]:
        return {(c.alpha, c.beta): c.val_auc_pr for c in self.cells}

    def to_csv(self) -> str:
        # runtime left out on purpose: the file must be reproducible byte for byte
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "beta", "val_auc_pr", "status"])
        for c in self.cells:
            w.writerow([repr(c.alpha), repr(c.beta), "" if c.val_auc_pr is None else repr(c.val_auc_pr), c.status])
        return buf.getvalue()


def select_cell(cells) -> tuple[float, float]:
    valid = [c for c in cells if c.status == "ok" and c.val_auc_pr is not None]
    if not valid:
        raise RuntimeError("every grid cell failed")
    best = min(valid, key=lambda c: (-c.val_auc_pr, c.alpha, c.beta))
    return best.alpha, best.beta


def grid_search_alpha_beta(alphas, betas, model: VaeModel, reference: ReferenceModel, splits: dict,
                           base_config: Stage2Config, directions: DirectionSet, mode: str = "sampled",
                           score_seed: int = 0, keep_models: bool = True) -> GridSearchReport:
    """Train Stage 2 per (alpha, beta) from the same checkpoint and rank by validation AUC-PR.

    ``splits`` holds arrays ``train_majority``, ``train_minority``,
    ``val_majority``, ``val_minority`` and ``val_x``/``val_y``/``val_ids`` for
    scoring.
    """
    alphas, betas = list(alphas), list(betas)
    if not alphas or not betas:
        raise ValueError("alpha and beta grids must be non-empty")
    cells, models = [], {}
    for a in alphas:
        for b in betas:
            cfg = Stage2Config(**{**base_config.__dict__, "alpha": float(a), "beta": float(b)})
            t0 = time.perf_counter()
            try:
                tuned, _ = train_stage2(model, reference, splits["train_majority"], splits["train_minority"], cfg,
                                        splits.get("val_majority"), splits.get("val_minority"))
                s = score_batch(tuned, reference, directions, splits["val_x"], mode, score_seed, splits.get("val_ids"))
                ap = auc_pr(s, splits["val_y"])
                cell = GridCell(float(a), float(b), ap, time.perf_counter() - t0)
                if keep_models:
                    models[(float(a), float(b))] = tuned
            except (DivergenceError, ValueError) as e:
                log.warning("grid cell alpha=%s beta=%s failed: %s", a, b, e)
                cell = GridCell(float(a), float(b), None, time.perf_counter() - t0, "failed")
            log.info("grid alpha=%g beta=%g val AUC-PR=%s", a, b, cell.val_auc_pr)
            cells.append(cell)
    return GridSearchReport(cells, select_cell(cells), models)
