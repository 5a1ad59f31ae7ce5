import copy
import json

import numpy as np
import pytest

from vaeinf.artifact import FORMAT_VERSION, dumps_artifact, load_artifact, save_artifact
from vaeinf.cli import main
from vaeinf.config import config_from_dict
from vaeinf.errors import ArtifactError, ConfigError
from vaeinf.pipeline import run_calibrate_and_eval, run_train, score_split
from vaeinf.projection import draw_direction_set, score_batch
from vaeinf.vae import init_vae

TINY = {
    "data": {"synthetic": {"dimension": 3, "n_majority": 300, "n_minority": 20, "minority_mean": 3.0, "seed": 1}},
    "latent_dim": 2,
    "hidden": [8],
    "n_directions": 8,
    "stage1": {"epochs": 3, "batch_size": 64, "learning_rate": 1e-3},
    "stage2": {"epochs": 2, "batch_size": 64, "n_directions": 4},
    "deltas": [0.05, 0.1],
}


@pytest.fixture(scope="module")
def trained():
    cfg = config_from_dict(TINY)
    return cfg, run_train(cfg)


def test_artifact_round_trip_is_byte_identical(trained, tmp_path):
    _, out = trained
    save_artifact(out.artifact, tmp_path / "a.json")
    back = load_artifact(tmp_path / "a.json")
    save_artifact(back, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert back.rules.keys() == out.artifact.rules.keys()


def test_loaded_artifact_scores_match(trained, tmp_path):
    _, out = trained
    save_artifact(out.artifact, tmp_path / "m.json")
    back = load_artifact(tmp_path / "m.json")
    s1, _ = score_split(out.artifact, out.data, "test")
    s2, _ = score_split(back, out.data, "test")
    np.testing.assert_array_equal(s1, s2)


def test_infinite_threshold_survives_round_trip(trained, tmp_path):
    _, out = trained
    art = copy.deepcopy(out.artifact)
    art.rules[0.05].tau = float("inf")
    save_artifact(art, tmp_path / "m.json")
    assert '"inf"' in (tmp_path / "m.json").read_text()
    assert load_artifact(tmp_path / "m.json").rules[0.05].tau == float("inf")


def test_bad_artifacts_raise(trained, tmp_path):
    _, out = trained
    text = dumps_artifact(out.artifact)
    (tmp_path / "cut.json").write_text(text[: len(text) // 2])
    with pytest.raises(ArtifactError):
        load_artifact(tmp_path / "cut.json")
    d = json.loads(text)
    d["format_version"] = FORMAT_VERSION + 1
    (tmp_path / "v.json").write_text(json.dumps(d))
    with pytest.raises(ArtifactError, match="version"):
        load_artifact(tmp_path / "v.json")
    with pytest.raises(ArtifactError):
        load_artifact(tmp_path / "missing.json")


def test_no_training_equals_initialization():
    raw = dict(TINY, stage1={"epochs": 0}, stage2={"epochs": 0})
    cfg = config_from_dict(raw)
    out = run_train(cfg)
    init = init_vae(3, 2, [8], seed=0)
    for a, b in zip(init.encoder.parameters() + init.decoder.parameters(),
                    out.artifact.model.encoder.parameters() + out.artifact.model.decoder.parameters()):
        assert np.array_equal(a, b)
    assert np.array_equal(out.artifact.directions.directions, draw_direction_set(0, 8, 2).directions)


def test_eval_metrics_shape(trained):
    cfg, out = trained
    rep = run_calibrate_and_eval(out.artifact, out.data, cfg.deltas, out.f1_rho)
    m = rep.metrics
    assert [r["delta"] for r in m["per_delta"]] == [0.05, 0.1]
    for r in m["per_delta"]:
        assert r["val"]["type1"]["n"] == r["n_cal"]
        # the exact guarantee on the calibration rows themselves: at most n - k exceed tau
        assert r["val"]["type1"]["count"] <= r["n_cal"] - r["k"]
    assert 0.0 <= m["test"]["auc_roc"] <= 1.0


def test_config_errors():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"latent": 3})
    with pytest.raises(ConfigError):
        config_from_dict({}).validate()
    with pytest.raises(ConfigError):
        config_from_dict(dict(TINY, deltas=[1.5])).validate()
    a = config_from_dict(dict(TINY, out="x")).fingerprint()
    assert a == config_from_dict(dict(TINY, out="y")).fingerprint()
    assert a != config_from_dict(dict(TINY, seed=3)).fingerprint()


def _write_cfg(tmp_path, raw):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(raw))
    return p


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "nope.json")]) == 1
    assert main(["train", "--config", str(_write_cfg(tmp_path, {"bogus": 1}))]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("a,label\n1,0\nx,1\n")
    cfg = _write_cfg(tmp_path, dict(TINY, data={"csv": str(bad)}))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert main(["calibrate", "--config", str(_write_cfg(tmp_path, TINY)), "--out", str(tmp_path / "empty")]) == 2


def test_cli_end_to_end(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, TINY)
    out = tmp_path / "run"
    common = ["--config", str(cfg), "--out", str(out)]
    assert main(["synth"] + common) == 0
    assert main(["train"] + common) == 0
    assert main(["calibrate"] + common) == 0
    for name in ("model.json", "metrics.json", "curves.csv", "report.md"):
        assert (out / name).exists()
    metrics = json.loads((out / "metrics.json").read_text())
    assert len(metrics["per_delta"]) == 2
    assert main(["score", "--model", str(out / "model.json"), "--input", str(out / "data.csv"), "--out", str(out)]) == 0
    rows = (out / "scores.csv").read_text().splitlines()
    assert rows[0] == "row,score,decision_delta_0.05,decision_delta_0.1" and len(rows) == 321
    assert main(["sweep"] + common) == 0
    assert len((out / "curves.csv").read_text().splitlines()) == 101
    assert main(["report"] + common) == 0
    assert (out / "report.md").read_text().startswith("# ")


def test_cli_score_matches_library(trained, tmp_path):
    cfg, out = trained
    save_artifact(out.artifact, tmp_path / "m.json")
    raw_test = np.array([[0.1, -0.2, 0.3], [3.0, 3.0, 3.0]])
    inp = tmp_path / "in.csv"
    inp.write_text("a,b,c\n" + "\n".join(",".join(repr(float(v)) for v in r) for r in raw_test) + "\n")
    assert main(["score", "--model", str(tmp_path / "m.json"), "--input", str(inp), "--out", str(tmp_path)]) == 0
    got = [float(line.split(",")[1]) for line in (tmp_path / "scores.csv").read_text().splitlines()[1:]]
    a = out.artifact
    expect = score_batch(a.model, a.reference, a.directions, a.standardizer.apply(raw_test), a.mode, a.score_seed,
                         np.arange(2))
    assert got == list(expect)
    assert got[1] > got[0]


def test_grid_command_writes_csv(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, TINY)
    out = tmp_path / "g"
    assert main(["grid", "--config", str(cfg), "--out", str(out), "--alphas", "4,9", "--betas", "2"]) == 0
    lines = (out / "grid.csv").read_text().splitlines()
    assert len(lines) == 3
    model = load_artifact(out / "model.json")
    assert (model.provenance["alpha"], model.provenance["beta"]) in {(4.0, 2.0), (9.0, 2.0)}
