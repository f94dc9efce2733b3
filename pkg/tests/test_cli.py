import csv
import json
import os

import numpy as np
import pytest

from mixlearn.cli import main


def run(argv):
    return main(argv)


def test_print_config_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"epsilon": 0.02, "seed": 7}')
    assert run(["--config", str(cfg), "--print-config"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["epsilon"] == 0.02 and out["seed"] == 7
    assert run(["--config", str(cfg), "--seed", "9", "--print-config"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 9


def test_env_seed_override(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("FMD_SEED", "123")
    assert run(["--seed", "4", "--print-config"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 123


def test_unknown_config_key_rejected(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"bogus": 1}')
    assert run(["--config", str(bad), "lowerbound", "--k", "2"]) == 2


def test_generate_and_sample_round_trip(tmp_path):
    model = tmp_path / "m.json"
    assert run(["generate", "--k", "2", "--d", "4", "--out", str(model)]) == 0
    obj = json.loads(model.read_text())
    assert obj["kind"] == "mlr" and obj["k"] == 2 and obj["d"] == 4
    vecs = np.asarray(obj["vectors"])
    assert vecs.shape == (2, 4)
    out = tmp_path / "s.csv"
    assert run(["sample", "--model", str(model), "--n", "50", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["x_1", "x_2", "x_3", "x_4", "y"]
    assert len(rows) == 51


def test_sample_reruns_byte_identical(tmp_path):
    model = tmp_path / "m.json"
    run(["generate", "--k", "2", "--d", "3", "--out", str(model)])
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert run(["sample", "--model", str(model), "--n", "200", "--out", str(a)]) == 0
    assert run(["sample", "--model", str(model), "--n", "200", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_hyperplanes_and_mode_mismatch(tmp_path):
    model = tmp_path / "h.json"
    assert run(["generate", "--k", "2", "--d", "4", "--kind", "hyperplanes",
                "--out", str(model)]) == 0
    assert json.loads(model.read_text())["kind"] == "hyperplanes"
    est = tmp_path / "e.json"
    rep = tmp_path / "r.csv"
    assert run(["learn", "--model", str(model), "--mode", "noiseless",
                "--out", str(est), "--report", str(rep)]) == 2


def test_minvar_subcommand(tmp_path, capsys):
    data = tmp_path / "u.csv"
    rng = np.random.default_rng(0)
    vals = np.concatenate([0.5 * rng.standard_normal(60_000),
                           2.5 * rng.standard_normal(60_000)])
    with data.open("w") as fh:
        fh.write("y\n")
        np.savetxt(fh, vals, fmt="%.17g")
    assert run(["minvar", "--data", str(data), "--sigma-lower", "0.05",
                "--degree", "8", "--p-min", "0.5"]) == 0
    sigma = float(capsys.readouterr().out.strip())
    assert 0.4 <= sigma <= 0.6


def test_minvar_degenerate_column(tmp_path):
    data = tmp_path / "u.csv"
    data.write_text("y\n" + "1.0\n" * 100)
    assert run(["minvar", "--data", str(data)]) == 2


def test_lowerbound_subcommand(capsys):
    assert run(["lowerbound", "--k", "2", "--alpha", "0.25"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    header = lines[0].split(",")
    assert header == ["i", "sigma", "sigma_prime"]
    s1 = [float(v) for v in lines[1].split(",")[1:]]
    # degree-2 rows must agree, printed to 12 significant digits
    deg2 = [ln for ln in lines if ln.startswith("2,")][-1]
    _, m, mp = deg2.split(",")
    assert float(m) == pytest.approx(float(mp), rel=1e-9)
    assert s1[0] != s1[1]
    assert run(["lowerbound", "--k", "1"]) == 2


def test_bench_empty_grid(tmp_path, capsys):
    grid = tmp_path / "g.json"
    grid.write_text("[]")
    assert run(["bench", "--grid", str(grid)]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0].startswith("k,d,sep,noise,epsilon")
    assert len(out) == 1


def test_learn_noiseless_small(tmp_path):
    model = tmp_path / "m.json"
    assert run(["generate", "--k", "1", "--d", "4", "--out", str(model)]) == 0
    est = tmp_path / "e.json"
    rep = tmp_path / "r.csv"
    assert run(["learn", "--model", str(model), "--epsilon", "0.1",
                "--out", str(est), "--report", str(rep)]) == 0
    vec = np.asarray(json.loads(est.read_text())["estimates"])
    truth = np.asarray(json.loads(model.read_text())["vectors"])
    assert np.linalg.norm(vec[0] - truth[0]) <= 0.1
    rows = list(csv.reader(rep.open()))
    assert rows[0] == ["component", "matched", "error"]
    tail_keys = {r[0] for r in rows[1:]}
    assert {"max_error", "runtime_s", "samples"} <= tail_keys
