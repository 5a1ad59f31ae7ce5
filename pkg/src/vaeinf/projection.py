"""Random-direction projection statistics and the aggregated anomaly score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numkit import RandomStream, sample_unit_sphere
from .reference import ReferenceModel
from .vae import VaeModel, encode, reparameterize

MODES = ("sampled", "posterior-mean")


@dataclass
class DirectionSet:
    directions: np.ndarray  # (M, k)
    seed: int
    purpose_tag: str = "inference-directions"

    def __post_init__(self):
        self.directions = np.atleast_2d(np.asarray(self.directions, dtype=float))

    @property
    def M(self) -> int:
        return self.directions.shape[0]

    @property
    def k(self) -> int:
        return self.directions.shape[1]


@dataclass
class ScoreRecord:
    score: float
    t_values: np.ndarray
    z_used: np.ndarray
    scoring_mode: str


def projected_deviation(z, a, mu_ref) -> float:
    z, a, mu_ref = (np.asarray(v, dtype=float) for v in (z, a, mu_ref))
    if not (z.shape == a.shape == mu_ref.shape):
        raise ShapeError(f"shapes differ: z {z.shape}, a {a.shape}, mu_ref {mu_ref.shape}")
    return float((a @ z - a @ mu_ref) ** 2)


def projection_statistic(z, a, reference: ReferenceModel) -> float:
    a = np.asarray(a, dtype=float)
    return projected_deviation(z, a, reference.mu_ref) / float(a * a @ reference.sigma_ref_diag)


def projection_statistics(z, directions, reference: ReferenceModel) -> np.ndarray:
    """T for every (row of ``z``, direction) pair; returns ``(n, M)``."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    a = np.atleast_2d(np.asarray(directions, dtype=float))
    if z.shape[1] != a.shape[1] or z.shape[1] != reference.latent_dim:
        raise ShapeError(f"latent dims differ: z {z.shape}, directions {a.shape}, reference {reference.latent_dim}")
    proj = (z - reference.mu_ref) @ a.T
    return proj * proj / ((a * a) @ reference.sigma_ref_diag)


def draw_direction_set(seed: int, M: int, k: int, purpose_tag: str = "inference-directions") -> DirectionSet:
    if M < 1 or k < 1:
        raise ShapeError(f"need M >= 1 and k >= 1, got M={M}, k={k}")
    dirs = sample_unit_sphere(RandomStream(seed, purpose_tag), k, n=M)
    return DirectionSet(dirs, seed, purpose_tag)


def latent_codes(model: VaeModel, x, mode: str = "sampled", seed: int = 0, indices=None) -> np.ndarray:
    """Latent codes used for scoring.

    In "sampled" mode row ``i`` uses noise from the stream keyed by
    ``indices[i]``, so a given sample gets the same draw whichever batch it is
    scored in.
    """
    if mode not in MODES:
        raise ValueError(f"unknown scoring mode {mode!r}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    post = encode(model, x)
    if mode == "posterior-mean":
        return post.mean
    if indices is None:
        indices = np.arange(x.shape[0])
    indices = np.asarray(indices)
    if indices.shape != (x.shape[0],):
        raise ShapeError("need one index per row")
    base = RandomStream(seed, "score-eps")
    eps = np.stack([base.substream(int(i)).normal(model.latent_dim) for i in indices]) if len(indices) else np.zeros((0, model.latent_dim))
    return reparameterize(post, eps)


def score_batch(model, reference, directions: DirectionSet, x, mode="sampled", seed=0, indices=None) -> np.ndarray:
    z = latent_codes(model, x, mode, seed, indices)
    return projection_statistics(z, directions.directions, reference).mean(axis=1)


def anomaly_score(x, model: VaeModel, reference: ReferenceModel, directions: DirectionSet,
                  mode: str = "sampled", seed: int = 0, index: int = 0) -> ScoreRecord:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("anomaly_score takes a single sample; use score_batch for many")
    z = latent_codes(model, x[None, :], mode, seed, [index])[0]
    t = projection_statistics(z, directions.directions, reference)[0]
    return ScoreRecord(float(t.mean()), t, z, mode)
