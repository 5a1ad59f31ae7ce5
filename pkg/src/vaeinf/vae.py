"""Stage 1: a diagonal-Gaussian VAE trained on majority-class rows."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ShapeError
from .numkit import AdamState, DenseNet, RandomStream, adam_update, net_apply, net_gradients

log = logging.getLogger(__name__)

LOGVAR_MIN, LOGVAR_MAX = -10.0, 10.0


@dataclass
class DiagGaussian:
    """Mean and per-dimension variance. Arrays may be ``(k,)`` or batched ``(n, k)``."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.variance = np.asarray(self.variance, dtype=float)
        if self.mean.shape != self.variance.shape:
            raise ShapeError(f"mean {self.mean.shape} and variance {self.variance.shape} differ")
        if not np.all(np.isfinite(self.variance)) or np.any(self.variance <= 0):
            raise ValueError("variances must be positive and finite")

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def __len__(self):
        return 1 if self.mean.ndim == 1 else self.mean.shape[0]

    def __getitem__(self, i) -> "DiagGaussian":
        return DiagGaussian(self.mean[i], self.variance[i])


@dataclass
class VaeModel:
    encoder: DenseNet
    decoder: DenseNet
    latent_dim: int
    input_dim: int

    def __post_init__(self):
        k, p = self.latent_dim, self.input_dim
        if self.encoder.input_dim != p or self.encoder.output_dim != 2 * k:
            raise ShapeError(f"encoder must map {p} -> {2 * k}, got {self.encoder.layer_dims}")
        if self.decoder.input_dim != k or self.decoder.output_dim != p:
            raise ShapeError(f"decoder must map {k} -> {p}, got {self.decoder.layer_dims}")

    def copy(self) -> "VaeModel":
        return VaeModel(self.encoder.copy(), self.decoder.copy(), self.latent_dim, self.input_dim)


def init_vae(input_dim: int, latent_dim: int, hidden=(128, 64), seed: int = 0) -> VaeModel:
    hidden = list(hidden)
    acts = ["relu"] * len(hidden) + ["identity"]
    enc = DenseNet.init([input_dim] + hidden + [2 * latent_dim], acts, RandomStream(seed, "init-encoder"))
    dec = DenseNet.init([latent_dim] + hidden[::-1] + [input_dim], acts, RandomStream(seed, "init-decoder"))
    return VaeModel(enc, dec, latent_dim, input_dim)


@dataclass
class _EncoderPass:
    mean: np.ndarray
    raw_logvar: np.ndarray
    logvar: np.ndarray
    cache: object

    @property
    def std(self):
        return np.exp(0.5 * self.logvar)

    def logvar_mask(self):
        # clamp blocks the gradient outside the open interval
        return ((self.raw_logvar > LOGVAR_MIN) & (self.raw_logvar < LOGVAR_MAX)).astype(float)


def _encoder_pass(model: VaeModel, x) -> _EncoderPass:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.input_dim:
        raise ShapeError(f"input has {x.shape[-1]} features, model expects {model.input_dim}")
    out, cache = net_apply(model.encoder, x)
    k = model.latent_dim
    raw = out[..., k:]
    return _EncoderPass(out[..., :k], raw, np.clip(raw, LOGVAR_MIN, LOGVAR_MAX), cache)


def encode(model: VaeModel, x) -> DiagGaussian:
    ep = _encoder_pass(model, x)
    return DiagGaussian(ep.mean, np.exp(ep.logvar))


def reparameterize(posterior: DiagGaussian, eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    if eps.shape != posterior.mean.shape:
        raise ShapeError(f"eps shape {eps.shape} != posterior shape {posterior.mean.shape}")
    return posterior.mean + posterior.std * eps


def kl_to_standard_normal(posterior: DiagGaussian):
    """KL(N(mean, diag var) || N(0, I)); per row when batched."""
    mu, var = posterior.mean, posterior.variance
    return 0.5 * np.sum(mu * mu + var - 1.0 - np.log(var), axis=-1)


def decode(model: VaeModel, z) -> np.ndarray:
    return net_apply(model.decoder, z)[0]


def backprop_latent(model: VaeModel, ep: _EncoderPass, eps, grad_z, grad_mean=None, grad_logvar=None):
    """Encoder parameter gradients given dL/dz for ``z = mean + exp(logvar/2) * eps``."""
    d_mean = grad_z if grad_mean is None else grad_z + grad_mean
    d_logvar = grad_z * 0.5 * ep.std * eps
    if grad_logvar is not None:
        d_logvar = d_logvar + grad_logvar
    d_out = np.concatenate([d_mean, d_logvar * ep.logvar_mask()], axis=-1)
    grads, _ = net_gradients(model.encoder, ep.cache, d_out)
    return grads


def elbo_objective(model: VaeModel, batch, eps, batch_index: int | None = None):
    """Negative ELBO averaged over the batch, with exact gradients.

    Gaussian decoder with unit variance, so reconstruction is 0.5 * squared error.
    Returns ``(loss, encoder_grads, decoder_grads)``.
    """
    x = np.atleast_2d(np.asarray(batch, dtype=float))
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    n = x.shape[0]
    if eps.shape != (n, model.latent_dim):
        raise ShapeError(f"need one eps of size {model.latent_dim} per sample, got {eps.shape}")
    ep = _encoder_pass(model, x)
    var = np.exp(ep.logvar)
    z = ep.mean + ep.std * eps
    xhat, dcache = net_apply(model.decoder, z)
    resid = xhat - x
    rec = 0.5 * np.sum(resid * resid, axis=1)
    kl = 0.5 * np.sum(ep.mean**2 + var - 1.0 - ep.logvar, axis=1)
    loss = float(np.mean(rec + kl))
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite ELBO loss in batch {batch_index}", batch_index=batch_index)

    dec_grads, grad_z = net_gradients(model.decoder, dcache, resid / n)
    enc_grads = backprop_latent(
        model, ep, eps, grad_z, grad_mean=ep.mean / n, grad_logvar=0.5 * (var - 1.0) / n
    )
    return loss, enc_grads, dec_grads


def elbo_loss(model: VaeModel, x, eps) -> float:
    """Loss only (no gradients); used for monitoring."""
    post = encode(model, x)
    z = reparameterize(post, eps)
    resid = decode(model, z) - x
    return float(np.mean(0.5 * np.sum(resid * resid, axis=1) + kl_to_standard_normal(post)))


@dataclass
class Stage1Config:
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-4
    seed: int = 0
    patience: int = 20

    def validate(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0 or self.patience < 1:
            raise ValueError(f"invalid Stage1Config {self}")


@dataclass
class TrainingHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False


def train_stage1(model: VaeModel, x_train, config: Stage1Config, x_val=None):
    """Minibatch Adam on the negative ELBO with early stopping on ``x_val``.

    ``history.train_loss[0]``/``val_loss[0]`` are measured before the first
    update. The returned model holds the parameters of the best validation
    epoch (or the last epoch when no validation rows are given).
    """
    config.validate()
    x_train = np.asarray(x_train, dtype=float)
    if x_train.ndim != 2 or x_train.shape[0] < 1:
        raise ValueError("Stage 1 needs at least one majority training row")
    model = model.copy()
    k = model.latent_dim
    have_val = x_val is not None and len(x_val) > 0
    # fixed noise so validation losses are comparable across epochs
    train_eps = RandomStream(config.seed, "stage1-monitor-eps").normal((x_train.shape[0], k))
    if have_val:
        x_val = np.asarray(x_val, dtype=float)
        val_eps = RandomStream(config.seed, "stage1-val-eps").normal((x_val.shape[0], k))

    hist = TrainingHistory()
    hist.train_loss.append(elbo_loss(model, x_train, train_eps))
    if have_val:
        hist.val_loss.append(elbo_loss(model, x_val, val_eps))
    best = hist.val_loss[0] if have_val else None
    best_params = (model.encoder.parameters(), model.decoder.parameters())
    n_enc = len(model.encoder.parameters())
    params = model.encoder.parameters() + model.decoder.parameters()
    state = AdamState.zeros_like(params, learning_rate=config.learning_rate)
    stale = 0
    n = x_train.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = RandomStream(config.seed, "stage1-shuffle", epoch).permutation(n)
        eps_stream = RandomStream(config.seed, "stage1-eps", epoch)
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            eps = eps_stream.normal((idx.size, k))
            try:
                _, ge, gd = elbo_objective(model, x_train[idx], eps, batch_index=b)
            except DivergenceError as e:
                e.epoch = epoch
                raise DivergenceError(f"Stage 1 diverged at epoch {epoch}, batch {b}", b, epoch) from e
            params, state = adam_update(params, ge + gd, state)
            model.encoder = model.encoder.with_parameters(params[:n_enc])
            model.decoder = model.decoder.with_parameters(params[n_enc:])
        hist.train_loss.append(elbo_loss(model, x_train, train_eps))
        if not np.isfinite(hist.train_loss[-1]):
            raise DivergenceError(f"Stage 1 diverged at epoch {epoch}", None, epoch)
        if have_val:
            v = elbo_loss(model, x_val, val_eps)
            hist.val_loss.append(v)
            if v < best:
                best, stale, hist.best_epoch = v, 0, epoch
                best_params = (model.encoder.parameters(), model.decoder.parameters())
            else:
                stale += 1
                if stale >= config.patience:
                    hist.stopped_early = True
                    log.info("stage 1 early stop at epoch %d (best %d)", epoch, hist.best_epoch)
                    break
        else:
            hist.best_epoch = epoch
            best_params = (model.encoder.parameters(), model.decoder.parameters())
    model.encoder = model.encoder.with_parameters(best_params[0])
    model.decoder = model.decoder.with_parameters(best_params[1])
    return model, hist
