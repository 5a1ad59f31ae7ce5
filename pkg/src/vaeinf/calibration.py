"""Distribution-free threshold calibration and the resulting decision rule."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .data import MAJORITY, MINORITY
from .numkit import RandomStream


@dataclass
class CalibratedRule:
    tau: float  # may be +inf
    delta: float
    n_cal: int
    k: int
    fingerprint: str

    @property
    def exact_acceptance(self) -> float:
        """P(fresh exchangeable score <= tau) for almost-surely distinct scores."""
        return self.k / (self.n_cal + 1)


def order_index(n_cal: int, delta: float) -> int:
    # round first so that e.g. (1 - 0.1) * 10 = 9.000000000000002 does not ceil to 10
    return math.ceil(round((1.0 - delta) * (n_cal + 1), 9))


def scores_fingerprint(scores) -> str:
    arr = np.sort(np.asarray(scores, dtype=np.float64))
    return hashlib.sha256(arr.tobytes()).hexdigest()[:16]


def calibrate_threshold(cal_scores, delta: float) -> CalibratedRule:
    s = np.asarray(cal_scores, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("empty calibration set")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not np.all(np.isfinite(s)):
        raise ValueError("calibration scores must be finite")
    n = s.size
    k = order_index(n, delta)
    tau = float(np.sort(s, kind="stable")[k - 1]) if k <= n else math.inf
    return CalibratedRule(tau, float(delta), n, k, scores_fingerprint(s))


def decide(score: float, rule: CalibratedRule) -> int:
    """1 (majority) when score <= tau, else 2 (minority)."""
    return MAJORITY if score <= rule.tau else MINORITY


def decide_batch(scores, rule: CalibratedRule) -> np.ndarray:
    return np.where(np.asarray(scores, dtype=float) <= rule.tau, MAJORITY, MINORITY)


@dataclass
class Type2Calibration:
    tau: float
    type2: float
    type1: float
    target: float


def calibrate_for_type2(minority_val_scores, majority_val_scores, target_type2: float) -> Type2Calibration:
    """Threshold whose validation Type-II error is closest to ``target_type2``.

    Candidates are every observed score plus -inf/+inf. Ties in distance go to
    the smaller Type-I error, then to the smaller threshold.
    """
    s2 = np.sort(np.asarray(minority_val_scores, dtype=float).ravel())
    s1 = np.sort(np.asarray(majority_val_scores, dtype=float).ravel())
    if s1.size == 0 or s2.size == 0:
        raise ValueError("both score lists must be non-empty")
    cands = np.concatenate([[-math.inf], np.unique(np.concatenate([s1, s2])), [math.inf]])
    type2 = np.searchsorted(s2, cands, side="right") / s2.size
    type1 = 1.0 - np.searchsorted(s1, cands, side="right") / s1.size
    # round so that exact ties (e.g. |0 - 0.1| vs |0.2 - 0.1|) are not split by float noise
    dist = np.round(np.abs(type2 - target_type2), 12)
    # lexsort: last key is primary
    best = np.lexsort((cands, type1, dist))[0]
    return Type2Calibration(float(cands[best]), float(type2[best]), float(type1[best]), float(target_type2))


def coverage_simulation(n_cal: int, delta: float, trials: int, seed: int = 0) -> float:
    """Monte Carlo acceptance rate of a fresh iid score under the calibrated threshold."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    base = RandomStream(seed, f"coverage-{n_cal}-{delta!r}")
    accepted = 0
    for t in range(trials):
        draws = base.substream(t).uniform(size=n_cal + 1)
        rule = calibrate_threshold(draws[:n_cal], delta)
        accepted += decide(draws[n_cal], rule) == MAJORITY
    return accepted / trials
