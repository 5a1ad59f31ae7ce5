"""Dataset ingestion, splitting, standardization and synthetic generation.

Labels use the integer codes 1 (majority) and 2 (minority). Each row keeps a
stable ``row_id`` so that subsampling and scoring can refer back to the
original file position.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .numkit import RandomStream

MAJORITY = 1
MINORITY = 2
SPLITS = ("train", "val", "test")
SPLIT_TAGS = SPLITS + ("unassigned",)


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    name: str = "dataset"
    feature_names: list[str] = field(default_factory=list)
    row_ids: np.ndarray | None = None
    label_values: dict[int, str] = field(default_factory=lambda: {MAJORITY: "0", MINORITY: "1"})
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise DataError("features must be an N x p matrix")
        n = self.features.shape[0]
        self.labels = np.asarray(self.labels, dtype=int)
        self.split = np.asarray(self.split, dtype=object)
        if self.labels.shape != (n,) or self.split.shape != (n,):
            raise DataError("labels and split tags must have one entry per row")
        if not np.all(np.isin(self.labels, (MAJORITY, MINORITY))):
            raise DataError("labels must be 1 (majority) or 2 (minority)")
        bad = set(self.split.tolist()) - set(SPLIT_TAGS)
        if bad:
            raise DataError(f"unknown split tags {sorted(bad)}")
        if not np.all(np.isfinite(self.features)):
            raise DataError("feature matrix contains non-finite values")
        if self.row_ids is None:
            self.row_ids = np.arange(n)
        self.row_ids = np.asarray(self.row_ids, dtype=np.int64)
        if not self.feature_names:
            self.feature_names = [f"x{j}" for j in range(self.features.shape[1])]

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def minority_fraction(self) -> float:
        return float(np.mean(self.labels == MINORITY)) if len(self) else 0.0

    def subset(self, mask) -> "LabeledDataset":
        mask = np.asarray(mask)
        return replace(
            self,
            features=self.features[mask],
            labels=self.labels[mask],
            split=self.split[mask],
            row_ids=self.row_ids[mask],
            warnings=list(self.warnings),
        )

    def part(self, split: str, label: int | None = None) -> "LabeledDataset":
        mask = self.split == split
        if label is not None:
            mask &= self.labels == label
        return self.subset(mask)

    def with_features(self, features) -> "LabeledDataset":
        return replace(self, features=np.asarray(features, dtype=float), warnings=list(self.warnings))


def load_csv(path, label_column: str, minority_value: str, *, name: str | None = None) -> LabeledDataset:
    """Read a headed CSV; ``minority_value`` in ``label_column`` marks the minority class.

    A column called ``split`` (as written by :func:`write_csv`) is read back as
    split tags instead of a feature.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: header but no data rows")
    if label_column not in header:
        raise DataError(f"{path}: missing label column {label_column!r}")
    label_idx = header.index(label_column)
    split_idx = header.index("split") if "split" in header and label_column != "split" else None
    feat_idx = [j for j in range(len(header)) if j not in (label_idx, split_idx)]

    raw_labels, feats, tags = [], [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        raw_labels.append(row[label_idx].strip())
        try:
            vals = [float(row[j]) for j in feat_idx]
        except ValueError:
            bad = next(j for j in feat_idx if not _is_number(row[j]))
            raise DataError(f"{path}:{lineno}: non-numeric value {row[bad]!r} in column {header[bad]!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise DataError(f"{path}:{lineno}: missing or non-finite feature value")
        feats.append(vals)
        if split_idx is not None:
            tags.append(row[split_idx].strip())

    distinct = sorted(set(raw_labels))
    if len(distinct) > 2:
        raise DataError(f"{path}: label column {label_column!r} has {len(distinct)} distinct values {distinct[:5]}, expected 2")
    minority_value = str(minority_value)
    if not any(_label_match(v, minority_value) for v in distinct) and len(distinct) == 2:
        raise DataError(f"{path}: minority value {minority_value!r} not found among labels {distinct}")
    labels = np.array([MINORITY if _label_match(v, minority_value) else MAJORITY for v in raw_labels])
    majority_values = [v for v in distinct if not _label_match(v, minority_value)]
    minority_values = [v for v in distinct if _label_match(v, minority_value)]
    label_values = {
        MAJORITY: majority_values[0] if majority_values else "",
        MINORITY: minority_values[0] if minority_values else minority_value,
    }
    split = np.array(tags if split_idx is not None else ["unassigned"] * len(body), dtype=object)
    return LabeledDataset(
        features=np.array(feats, dtype=float).reshape(len(body), len(feat_idx)),
        labels=labels,
        split=split,
        name=name or path.stem,
        feature_names=[header[j] for j in feat_idx],
        label_values=label_values,
    )


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def _label_match(raw, minority_value):
    if raw == minority_value:
        return True
    # "1" and "1.0" denote the same class
    if _is_number(raw) and _is_number(minority_value):
        return float(raw) == float(minority_value)
    return False


def write_csv(ds: LabeledDataset, path, label_column: str = "label", include_split: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.feature_names + [label_column] + (["split"] if include_split else []))
        for x, y, s in zip(ds.features, ds.labels, ds.split):
            row = [repr(float(v)) for v in x] + [ds.label_values[int(y)]]
            if include_split:
                row.append(s)
            w.writerow(row)


def _largest_remainder(total: int, ratios) -> list[int]:
    quotas = [total * r for r in ratios]
    counts = [math.floor(q) for q in quotas]
    short = total - sum(counts)
    # ties go to the earlier split
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def stratified_split(ds: LabeledDataset, ratios=(6, 2, 2), seed: int = 0) -> LabeledDataset:
    """Tag rows train/val/test, class by class, with largest-remainder counts."""
    ratios = np.asarray(ratios, dtype=float)
    if ratios.shape != (3,) or np.any(ratios <= 0):
        raise DataError("split ratios must be three positive numbers")
    ratios = ratios / ratios.sum()
    split = np.empty(len(ds), dtype=object)
    notes = list(ds.warnings)
    for label in (MAJORITY, MINORITY):
        idx = np.flatnonzero(ds.labels == label)
        if idx.size == 0:
            continue
        if idx.size < len(SPLITS):
            msg = f"class {label} has only {idx.size} samples; some splits will be empty"
            notes.append(msg)
            warnings.warn(msg, stacklevel=2)
        counts = _largest_remainder(idx.size, ratios)
        perm = idx[RandomStream(seed, f"split-class-{label}").permutation(idx.size)]
        start = 0
        for name, c in zip(SPLITS, counts):
            split[perm[start:start + c]] = name
            start += c
    out = replace(ds, split=split, warnings=notes)
    return out


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    floor: float = 1e-8
    floored: list[int] = field(default_factory=list)

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.std


def fit_standardizer(train_rows, floor: float = 1e-8) -> Standardizer:
    x = np.asarray(train_rows, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError("standardizer needs at least 2 training rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1)
    floored = [int(j) for j in np.flatnonzero(std < floor)]
    std = np.where(std < floor, floor, std)
    return Standardizer(mean, std, floor, floored)


def fit_apply_standardizer(ds: LabeledDataset) -> tuple[Standardizer, LabeledDataset]:
    """Fit on the train split and standardize every row with those statistics."""
    train = ds.features[ds.split == "train"]
    st = fit_standardizer(train)
    return st, ds.with_features(st.apply(ds.features))


def largest_minority_count(n_majority: int, target_rho: float) -> int:
    """Largest n2 with n2 / (n_majority + n2) <= target_rho."""
    if target_rho >= 1.0:
        raise DataError("target proportion must be < 1")
    n2 = math.floor(target_rho * n_majority / (1.0 - target_rho))
    while n2 > 0 and n2 / (n_majority + n2) > target_rho:
        n2 -= 1
    while (n2 + 1) / (n_majority + n2 + 1) <= target_rho:
        n2 += 1
    return max(n2, 0)


def subsample_minority(ds: LabeledDataset, target_rho: float, seed: int = 0) -> LabeledDataset:
    """Drop minority training rows until the training minority share is <= ``target_rho``."""
    train = ds.split == "train"
    n1 = int(np.sum(train & (ds.labels == MAJORITY)))
    min_idx = np.flatnonzero(train & (ds.labels == MINORITY))
    n2 = min_idx.size
    current = n2 / (n1 + n2) if n1 + n2 else 0.0
    if target_rho > current + 1e-15:
        raise DataError(f"target proportion {target_rho} exceeds current training proportion {current:.6g}")
    keep_n = min(largest_minority_count(n1, target_rho), n2)
    if keep_n == n2:
        return ds
    kept = min_idx[np.sort(RandomStream(seed, "subsample-minority").choice(n2, keep_n, replace=False))]
    drop = np.ones(len(ds), dtype=bool)
    drop[min_idx] = False
    drop[kept] = True
    return ds.subset(drop)


@dataclass
class SyntheticSpec:
    dimension: int
    majority_mean: list[float] | float = 0.0
    majority_var: list[float] | float = 1.0
    minority_mean: list[float] | float = 2.5
    minority_var: list[float] | float = 1.0
    n_majority: int = 5000
    n_minority: int = 50
    seed: int = 0

    def vectors(self):
        p = self.dimension
        out = []
        for v in (self.majority_mean, self.majority_var, self.minority_mean, self.minority_var):
            arr = np.broadcast_to(np.asarray(v, dtype=float), (p,)).copy()
            out.append(arr)
        return out

    def validate(self):
        if self.dimension < 1:
            raise DataError("dimension must be positive")
        if self.n_majority < 0 or self.n_minority < 0:
            raise DataError("sample counts must be non-negative")
        try:
            _, v1, _, v2 = self.vectors()
        except ValueError as e:
            raise DataError(f"mean/variance vectors must have length {self.dimension}") from e
        if np.any(v1 <= 0) or np.any(v2 <= 0):
            raise DataError("variances must be positive")


def generate_synthetic(spec: SyntheticSpec, name: str = "synthetic") -> LabeledDataset:
    spec.validate()
    m1, v1, m2, v2 = spec.vectors()
    p = spec.dimension
    x1 = m1 + np.sqrt(v1) * RandomStream(spec.seed, "synthetic-majority").normal((spec.n_majority, p))
    x2 = m2 + np.sqrt(v2) * RandomStream(spec.seed, "synthetic-minority").normal((spec.n_minority, p))
    n = spec.n_majority + spec.n_minority
    return LabeledDataset(
        features=np.vstack([x1, x2]).reshape(n, p),
        labels=np.r_[np.full(spec.n_majority, MAJORITY), np.full(spec.n_minority, MINORITY)],
        split=np.array(["unassigned"] * n, dtype=object),
        name=name,
    )
