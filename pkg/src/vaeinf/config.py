"""Experiment configuration: JSON in, validated dataclasses out."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .data import SyntheticSpec
from .errors import ConfigError
from .finetune import DEFAULT_ALPHAS, DEFAULT_BETAS, Stage2Config
from .projection import MODES
from .vae import Stage1Config


@dataclass
class DataSource:
    csv: str | None = None
    label_column: str = "label"
    label_positive: str = "1"
    synthetic: SyntheticSpec | None = None


@dataclass
class GridSpec:
    alphas: list[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    betas: list[float] = field(default_factory=lambda: list(DEFAULT_BETAS))


@dataclass
class ExperimentConfig:
    data: DataSource = field(default_factory=DataSource)
    split_ratios: list[float] = field(default_factory=lambda: [6.0, 2.0, 2.0])
    target_rho: float | None = None
    latent_dim: int = 16
    hidden: list[int] = field(default_factory=lambda: [128, 64])
    stage1: Stage1Config = field(default_factory=Stage1Config)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    grid: GridSpec | None = None
    n_directions: int = 32
    deltas: list[float] = field(default_factory=lambda: [0.01, 0.05, 0.1])
    type2_target: float = 0.1
    mode: str = "sampled"
    seed: int = 0
    out: str = "runs/default"
    f1_rho: float | None = None  # defaults to the dataset's minority proportion

    def validate(self) -> "ExperimentConfig":
        if (self.data.csv is None) == (self.data.synthetic is None):
            raise ConfigError("data source needs exactly one of 'csv' or 'synthetic'")
        if len(self.split_ratios) != 3 or any(r <= 0 for r in self.split_ratios):
            raise ConfigError("split_ratios must be three positive numbers")
        if self.target_rho is not None and not 0.0 <= self.target_rho < 1.0:
            raise ConfigError("target_rho must lie in [0, 1)")
        if self.latent_dim < 1 or any(h < 1 for h in self.hidden) or self.n_directions < 1:
            raise ConfigError("latent_dim, hidden widths and n_directions must be positive")
        if not self.deltas or any(not 0.0 < d < 1.0 for d in self.deltas):
            raise ConfigError("every delta must lie in (0, 1)")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.grid is not None and (not self.grid.alphas or not self.grid.betas):
            raise ConfigError("grid alphas/betas must be non-empty")
        try:
            self.stage1.validate()
            self.stage2.validate()
            if self.data.synthetic is not None:
                self.data.synthetic.validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        """Hash of everything that affects results (the output directory does not)."""
        d = self.to_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _build(cls, raw, where):
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**raw)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from e


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    data = dict(raw.pop("data", {}) or {})
    data["synthetic"] = _build(SyntheticSpec, data.get("synthetic"), "data.synthetic")
    nested = {
        "data": _build(DataSource, data, "data"),
        "stage1": _build(Stage1Config, raw.pop("stage1", {}), "stage1"),
        "stage2": _build(Stage2Config, raw.pop("stage2", {}), "stage2"),
    }
    grid = raw.pop("grid", None)
    nested["grid"] = _build(GridSpec, grid, "grid") if grid is not None else None
    cfg = _build(ExperimentConfig, {**raw, **nested}, "config")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return config_from_dict(raw)
