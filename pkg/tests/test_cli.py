import json

import numpy as np
import pytest

from tgcn import cli

FAST = ["--hidden", "4", "--seq-len", "4", "--epochs", "3", "--batch", "32",
        "--eval-every", "1", "--seed", "7"]


def run(argv):
    return cli.main(argv)


def read_json(path):
    return json.loads(path.read_text())


def test_train_tgcn_writes_artifacts(tmp_path, ring_files):
    adj, feat = ring_files
    ckpt = tmp_path / "model.ckpt"
    metrics = tmp_path / "metrics.json"
    history = tmp_path / "history.csv"
    rc = run(["train", "--adj", adj, "--features", feat, "--model", "tgcn",
              *FAST, "--out", str(ckpt), "--metrics-out", str(metrics),
              "--history-out", str(history)])
    assert rc == 0
    assert ckpt.exists() and ckpt.with_suffix(".ckpt.final").exists()
    payload = read_json(metrics)
    assert payload["model"] == "tgcn"
    assert payload["dataset"] == "speed"
    assert payload["horizon_steps"] == 1
    assert set(payload) >= {"rmse", "mae", "accuracy", "r2", "var",
                            "n_points", "timestamp"}
    lines = history.read_text().strip().split("\n")
    assert lines[0] == "epoch,train_loss,rmse,mae,accuracy,r2,var"
    assert len(lines) == 4


def test_train_ha_no_training_needed(tmp_path, ring_files):
    adj, feat = ring_files
    metrics = tmp_path / "metrics.json"
    rc = run(["train", "--features", feat, "--model", "ha", "--seq-len", "4",
              "--metrics-out", str(metrics)])
    assert rc == 0
    payload = read_json(metrics)
    assert payload["model"] == "ha"
    assert payload["rmse"] > 0


def test_ha_horizon_invariant(tmp_path, ring_files):
    _, feat = ring_files
    values = []
    for horizon in ("1", "2"):
        metrics = tmp_path / f"m{horizon}.json"
        run(["train", "--features", feat, "--model", "ha", "--seq-len", "4",
             "--horizon-steps", horizon, "--metrics-out", str(metrics)])
        values.append(read_json(metrics)["rmse"])
    assert values[0] == pytest.approx(values[1], rel=0.02)


def test_missing_adj_usage_error(ring_files):
    _, feat = ring_files
    with pytest.raises(SystemExit) as exc:
        run(["train", "--features", feat, "--model", "tgcn", *FAST])
    assert exc.value.code == 2


def test_eval_reproduces_training_metrics(tmp_path, ring_files):
    adj, feat = ring_files
    ckpt = tmp_path / "model.ckpt"
    m_train = tmp_path / "train_metrics.json"
    m_eval = tmp_path / "eval_metrics.json"
    run(["train", "--adj", adj, "--features", feat, "--model", "tgcn", *FAST,
         "--out", str(ckpt), "--metrics-out", str(m_train)])
    rc = run(["eval", "--adj", adj, "--features", feat, "--model", "tgcn",
              "--seq-len", "4", "--checkpoint", str(ckpt),
              "--metrics-out", str(m_eval)])
    assert rc == 0
    a, b = read_json(m_train), read_json(m_eval)
    for key in ("rmse", "mae", "accuracy", "r2", "var", "n_points"):
        assert a[key] == b[key]


def test_eval_horizon_mismatch_fails(tmp_path, ring_files):
    adj, feat = ring_files
    ckpt = tmp_path / "model.ckpt"
    run(["train", "--adj", adj, "--features", feat, "--model", "tgcn", *FAST,
         "--out", str(ckpt)])
    rc = run(["eval", "--adj", adj, "--features", feat, "--model", "tgcn",
              "--seq-len", "4", "--horizon-steps", "2",
              "--checkpoint", str(ckpt)])
    assert rc == 1


def test_predict_writes_csv(tmp_path, ring_files):
    adj, feat = ring_files
    ckpt = tmp_path / "model.ckpt"
    preds = tmp_path / "preds.csv"
    run(["train", "--adj", adj, "--features", feat, "--model", "tgcn", *FAST,
         "--out", str(ckpt)])
    rc = run(["predict", "--adj", adj, "--features", feat, "--seq-len", "4",
              "--checkpoint", str(ckpt), "--predictions-out", str(preds)])
    assert rc == 0
    table = np.loadtxt(preds, delimiter=",")
    assert table.ndim == 2 and table.shape[1] == 10  # nodes * horizon


def test_perturb_single_setting(tmp_path, ring_files):
    adj, feat = ring_files
    metrics = tmp_path / "metrics.json"
    rc = run(["perturb", "--adj", adj, "--features", feat, "--model", "tgcn",
              *FAST, "--dist", "gaussian", "--param", "0.2",
              "--metrics-out", str(metrics)])
    assert rc == 0
    payload = read_json(metrics)
    assert payload["perturbation"] == {"dist": "gaussian", "param": 0.2,
                                       "seed": 7}


def test_perturb_poisson_runs(tmp_path, ring_files):
    adj, feat = ring_files
    metrics = tmp_path / "metrics.json"
    rc = run(["perturb", "--adj", adj, "--features", feat, "--model", "gru",
              *FAST, "--dist", "poisson", "--param", "16",
              "--metrics-out", str(metrics)])
    assert rc == 0
    assert read_json(metrics)["perturbation"]["dist"] == "poisson"


def test_perturb_zero_param_config_error(tmp_path, ring_files, capsys):
    adj, feat = ring_files
    rc = run(["perturb", "--adj", adj, "--features", feat, "--model", "tgcn",
              *FAST, "--dist", "gaussian", "--param", "0"])
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ConfigError"


def test_perturb_sweep(tmp_path, ring_files):
    adj, feat = ring_files
    metrics = tmp_path / "metrics.json"
    sweep = tmp_path / "sweep.csv"
    rc = run(["perturb", "--adj", adj, "--features", feat, "--model", "gru",
              "--hidden", "4", "--seq-len", "4", "--epochs", "1",
              "--batch", "64", "--eval-every", "1", "--seed", "7",
              "--dist", "gaussian", "--sweep",
              "--metrics-out", str(metrics), "--sweep-out", str(sweep)])
    assert rc == 0
    lines = sweep.read_text().strip().split("\n")
    assert lines[0] == "param,rmse,mae,accuracy,r2,var"
    assert len(lines) == 6  # five sigma settings
    for sigma in ("0.2", "0.4", "0.8", "1", "2"):
        assert (tmp_path / f"metrics_gaussian_{sigma}.json").exists()


def test_gradcheck_command(capsys):
    rc = run(["gradcheck", "--model", "tgcn", "--nodes", "4", "--hidden", "3",
              "--seq-len", "2"])
    assert rc == 0
    assert "PASS" in capsys.readouterr().out


def test_metrics_json_deterministic(tmp_path, ring_files):
    adj, feat = ring_files
    payloads = []
    for i in range(2):
        metrics = tmp_path / f"m{i}.json"
        run(["train", "--adj", adj, "--features", feat, "--model", "tgcn",
             *FAST, "--metrics-out", str(metrics)])
        p = read_json(metrics)
        p.pop("timestamp")
        payloads.append(json.dumps(p, sort_keys=True))
    assert payloads[0] == payloads[1]


def test_parse_error_reported_structured(tmp_path, ring_files, capsys):
    adj, _ = ring_files
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,nope\n")
    rc = run(["train", "--adj", adj, "--features", str(bad), "--model", "tgcn",
              *FAST])
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ParseError"
    assert "row 2" in err["message"]
