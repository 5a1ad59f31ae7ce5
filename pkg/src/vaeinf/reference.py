"""Global majority reference: diagonal 2-Wasserstein barycenter of posteriors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .vae import DiagGaussian

VARIANCE_FLOOR = 1e-12


@dataclass
class ReferenceModel:
    mu_ref: np.ndarray
    sigma_ref_diag: np.ndarray  # variances, not standard deviations
    n_source: int

    def __post_init__(self):
        self.mu_ref = np.asarray(self.mu_ref, dtype=float)
        self.sigma_ref_diag = np.asarray(self.sigma_ref_diag, dtype=float)
        if self.mu_ref.shape != self.sigma_ref_diag.shape or self.mu_ref.ndim != 1:
            raise ShapeError("mu_ref and sigma_ref_diag must be k-vectors")
        if np.any(self.sigma_ref_diag <= 0):
            raise ValueError("reference variances must be positive")
        if self.n_source < 1:
            raise ValueError("n_source must be >= 1")

    @property
    def latent_dim(self) -> int:
        return self.mu_ref.shape[0]

    def as_gaussian(self) -> DiagGaussian:
        return DiagGaussian(self.mu_ref, self.sigma_ref_diag)


def w2_sq_diag(g1: DiagGaussian, g2: DiagGaussian) -> float:
    """Squared 2-Wasserstein distance between diagonal Gaussians."""
    if g1.mean.shape != g2.mean.shape:
        raise ShapeError(f"dimension mismatch {g1.mean.shape} vs {g2.mean.shape}")
    dm = g1.mean - g2.mean
    ds = g1.std - g2.std
    return float(np.sum(dm * dm) + np.sum(ds * ds))


def barycenter(posteriors) -> ReferenceModel:
    """Uniform-weight barycenter: mean of means, squared mean of standard deviations.

    ``posteriors`` is either a list of ``DiagGaussian`` k-vectors or one batched
    ``DiagGaussian`` with ``(n, k)`` arrays.
    """
    if isinstance(posteriors, DiagGaussian):
        means = np.atleast_2d(posteriors.mean)
        stds = np.atleast_2d(posteriors.std)
    else:
        posteriors = list(posteriors)
        if not posteriors:
            raise ValueError("barycenter of an empty list")
        shapes = {g.mean.shape for g in posteriors}
        if len(shapes) != 1:
            raise ShapeError(f"posteriors have differing dimensions {sorted(shapes)}")
        means = np.stack([g.mean for g in posteriors])
        stds = np.stack([g.std for g in posteriors])
    if means.shape[0] == 0:
        raise ValueError("barycenter of an empty list")
    mu = means.mean(axis=0)
    var = stds.mean(axis=0) ** 2
    return ReferenceModel(mu, np.maximum(var, VARIANCE_FLOOR), means.shape[0])


def total_w2_sq(posteriors, mean, variance) -> float:
    """Sum of squared W2 distances from every posterior to ``N(mean, diag variance)``."""
    target = DiagGaussian(mean, variance)
    return sum(w2_sq_diag(g, target) for g in posteriors)
