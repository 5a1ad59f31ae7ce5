"""Self-contained model artifact stored as a single JSON document.

Floats are written with Python's shortest round-trip repr, so a save/load
cycle reproduces every parameter bit for bit. ``+inf`` thresholds are stored
as the string ``"inf"``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import CalibratedRule
from .data import Standardizer
from .errors import ArtifactError
from .numkit import DenseNet
from .projection import DirectionSet
from .reference import ReferenceModel
from .vae import VaeModel

FORMAT_VERSION = 1


@dataclass
class ModelArtifact:
    model: VaeModel
    reference: ReferenceModel
    directions: DirectionSet
    standardizer: Standardizer
    rules: dict[float, CalibratedRule] = field(default_factory=dict)
    mode: str = "sampled"
    score_seed: int = 0
    provenance: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION


def _net_to_dict(net: DenseNet):
    return {
        "layer_dims": list(net.layer_dims),
        "activations": list(net.activations),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _net_from_dict(d):
    return DenseNet(
        list(d["layer_dims"]),
        [np.array(w, dtype=float).reshape(o, i) for w, i, o in zip(d["weights"], d["layer_dims"][:-1], d["layer_dims"][1:])],
        [np.array(b, dtype=float) for b in d["biases"]],
        list(d["activations"]),
    )


def _tau_out(tau):
    return "inf" if math.isinf(tau) else tau


def _tau_in(tau):
    return math.inf if tau == "inf" else float(tau)


def artifact_to_dict(a: ModelArtifact) -> dict:
    return {
        "format_version": a.format_version,
        "architecture": {
            "input_dim": a.model.input_dim,
            "latent_dim": a.model.latent_dim,
            "encoder_dims": list(a.model.encoder.layer_dims),
            "decoder_dims": list(a.model.decoder.layer_dims),
        },
        "encoder": _net_to_dict(a.model.encoder),
        "decoder": _net_to_dict(a.model.decoder),
        "reference": {
            "mu_ref": a.reference.mu_ref.tolist(),
            "sigma_ref_diag": a.reference.sigma_ref_diag.tolist(),
            "n_source": a.reference.n_source,
        },
        "directions": {
            "seed": a.directions.seed,
            "purpose_tag": a.directions.purpose_tag,
            "vectors": a.directions.directions.tolist(),
        },
        "standardizer": {
            "mean": a.standardizer.mean.tolist(),
            "std": a.standardizer.std.tolist(),
            "floor": a.standardizer.floor,
            "floored": list(a.standardizer.floored),
        },
        "rules": [
            {"delta": r.delta, "tau": _tau_out(r.tau), "n_cal": r.n_cal, "k": r.k, "fingerprint": r.fingerprint}
            for _, r in sorted(a.rules.items())
        ],
        "scoring": {"mode": a.mode, "seed": a.score_seed},
        "provenance": a.provenance,
    }


def artifact_from_dict(d: dict) -> ModelArtifact:
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ArtifactError(f"artifact format version {version!r} not supported (expected {FORMAT_VERSION})")
    try:
        arch = d["architecture"]
        model = VaeModel(_net_from_dict(d["encoder"]), _net_from_dict(d["decoder"]), arch["latent_dim"], arch["input_dim"])
        ref = ReferenceModel(d["reference"]["mu_ref"], d["reference"]["sigma_ref_diag"], d["reference"]["n_source"])
        dirs = DirectionSet(d["directions"]["vectors"], d["directions"]["seed"], d["directions"]["purpose_tag"])
        st = d["standardizer"]
        standardizer = Standardizer(np.array(st["mean"], dtype=float), np.array(st["std"], dtype=float),
                                    st["floor"], list(st["floored"]))
        rules = {
            float(r["delta"]): CalibratedRule(_tau_in(r["tau"]), float(r["delta"]), r["n_cal"], r["k"], r["fingerprint"])
            for r in d["rules"]
        }
        return ModelArtifact(model, ref, dirs, standardizer, rules, d["scoring"]["mode"], d["scoring"]["seed"],
                             d.get("provenance", {}), version)
    except (KeyError, TypeError, ValueError) as e:
        raise ArtifactError(f"malformed artifact: {e}") from e


def dumps_artifact(a: ModelArtifact) -> str:
    return json.dumps(artifact_to_dict(a), sort_keys=True, indent=1, allow_nan=False) + "\n"


def save_artifact(a: ModelArtifact, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_artifact(a), encoding="utf-8")


def load_artifact(path) -> ModelArtifact:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ArtifactError(f"{path}: no such artifact") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ArtifactError(f"{path}: corrupt artifact ({e})") from None
    if not isinstance(d, dict):
        raise ArtifactError(f"{path}: corrupt artifact (not a JSON object)")
    return artifact_from_dict(d)
