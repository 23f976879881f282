import csv
import json
import math
import time

import numpy as np

from momgan import cli
from momgan.network import load_checkpoint, save_checkpoint


def write_config(path, **overrides):
    doc = {
        "train": {"epochs": 1, "K": 4, "holdout_size": 300, "n_proj": 32},
        "data": {"source": "mixture"},
        "contamination": {"pi": 0.04, "noise": {"mean": 5.0}},
        "seeds": [0, 1],
    }
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(doc.get(k), dict):
            doc[k] = {**doc[k], **v}
        else:
            doc[k] = v
    path.write_text(json.dumps(doc))
    return str(path)


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_missing_config_exits_2(tmp_path, capsys):
    assert cli.main(["train", "--config", str(tmp_path / "nope.json")]) == 2
    assert "no such file" in capsys.readouterr().err


def test_invalid_config_exits_2(tmp_path, capsys):
    for bad in ({"train": {"lr": -1}}, {"bogus": 1}, {"seeds": []},
                {"train": {"unknown_field": 3}}, {"contamination": {"pi": 0.7}}):
        cfg = write_config(tmp_path / "c.json", **bad)
        assert cli.main(["train", "--config", cfg, "--out", str(tmp_path)]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert cli.main(["train", "--config", str(tmp_path / "broken.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_train_smoke_and_byte_identical_rerun(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    t0 = time.perf_counter()
    assert cli.main(["train", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert time.perf_counter() - t0 < 10
    assert cli.main(["train", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    for seed in (0, 1):
        a = (tmp_path / "a" / f"metrics_seed{seed}.csv").read_bytes()
        b = (tmp_path / "b" / f"metrics_seed{seed}.csv").read_bytes()
        assert a == b
        rows = read_rows(tmp_path / "a" / f"metrics_seed{seed}.csv")
        assert rows[0] == list(cli.METRIC_FIELDS)
        assert len(rows) == 2
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["seeds"] == [0, 1] and set(summary["sliced_w1"]) == {"mean", "std"}


def test_csv_has_17_significant_digits(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    cli.main(["train", "--config", cfg, "--out", str(tmp_path)])
    row = read_rows(tmp_path / "metrics_seed0.csv")[1]
    assert row[0] == "1"
    for cell in row[1:]:
        assert float(cell) == float(format(float(cell), ".17g"))
        assert cell == format(float(cell), ".17g")


def test_env_var_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    cfg = write_config(tmp_path / "c.json", seeds=[3])
    assert cli.main(["train", "--config", cfg]) == 0
    assert (tmp_path / "env" / "metrics_seed3.csv").exists()
    assert cli.main(["train", "--config", cfg, "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "metrics_seed3.csv").exists()


def test_seed_flag_overrides_seed_list(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    assert cli.main(["train", "--config", cfg, "--seed", "7", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "metrics_seed7.csv").exists()
    assert not (tmp_path / "metrics_seed0.csv").exists()


def test_parallel_workers_match_serial(tmp_path):
    cfg = write_config(tmp_path / "c.json", train={"epochs": 3}, seeds=[0, 1, 2])
    par = write_config(tmp_path / "p.json", train={"epochs": 3}, seeds=[0, 1, 2], workers=3)
    cli.main(["train", "--config", cfg, "--out", str(tmp_path / "s")])
    cli.main(["train", "--config", par, "--out", str(tmp_path / "p")])
    for s in (0, 1, 2):
        assert ((tmp_path / "s" / f"metrics_seed{s}.csv").read_bytes()
                == (tmp_path / "p" / f"metrics_seed{s}.csv").read_bytes())


def test_eval_round_trip_reproduces_final_scores(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", train={"epochs": 4})
    cli.main(["train", "--config", cfg, "--out", str(tmp_path)])
    capsys.readouterr()
    row = read_rows(tmp_path / "metrics_seed1.csv")[-1]
    ck = str(tmp_path / "checkpoint_seed1.json")
    assert cli.main(["eval", "--checkpoint", ck, "--out", str(tmp_path / "ev")]) == 0
    scores = json.loads(capsys.readouterr().out)
    assert cli.fmt(scores["sliced_w1"]) == row[3]
    assert cli.fmt(scores["frechet"]) == row[4]


def test_eval_stable_across_seeds(tmp_path):
    cfg = write_config(tmp_path / "c.json", train={"epochs": 20}, seeds=[0])
    cli.main(["train", "--config", cfg, "--out", str(tmp_path)])
    ck = str(tmp_path / "checkpoint_seed0.json")
    a = cli.evaluate_checkpoint(ck, seed=100, n_eval=10_000)
    b = cli.evaluate_checkpoint(ck, seed=200, n_eval=10_000)
    for key in ("sliced_w1", "frechet"):
        assert abs(a[key] / b[key] - 1) < 0.05


def test_eval_checkpoint_mismatch(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", seeds=[0])
    cli.main(["train", "--config", cfg, "--out", str(tmp_path)])
    ck = tmp_path / "checkpoint_seed0.json"
    nets, meta = load_checkpoint(ck)
    meta["config"]["train"]["latent_dim"] = 5
    save_checkpoint(tmp_path / "bad.json", **nets, **meta)
    assert cli.main(["eval", "--checkpoint", str(tmp_path / "bad.json")]) == 2
    assert "does not fit" in capsys.readouterr().err


def test_generate_writes_samples(tmp_path):
    cfg = write_config(tmp_path / "c.json", seeds=[0])
    cli.main(["train", "--config", cfg, "--out", str(tmp_path)])
    ck = str(tmp_path / "checkpoint_seed0.json")
    assert cli.main(["generate", "--checkpoint", ck, "--n", "50", "--out", str(tmp_path / "g")]) == 0
    rows = read_rows(tmp_path / "g" / "samples.csv")
    assert rows[0] == ["x0", "x1"] and len(rows) == 51
    x = np.array(rows[1:], dtype=float)
    assert np.all((x >= 0) & (x <= 1))


def test_ternary_search_matches_exhaustive():
    rng = np.random.default_rng(0)
    for _ in range(300):
        lo = int(rng.integers(2, 6))
        hi = lo + int(rng.integers(1, 15))
        star = int(rng.integers(lo, hi + 1))
        left, right = rng.exponential(1.0, size=2)
        f = lambda k: (left if k < star else right) * abs(k - star) + 0.1
        best, probes = cli.ternary_search_int(f, lo, hi)
        assert best == min(range(lo, hi + 1), key=lambda k: (f(k), k)) == star
        assert len(probes) <= hi - lo + 1


def test_ternary_search_examples():
    assert cli.ternary_search_int(lambda k: (k - 4) ** 2, 2, 10)[0] == 4
    best, probes = cli.ternary_search_int(lambda k: {5: 2.0, 6: 1.0}[k], 5, 6)
    assert best == 6 and set(probes) == {5, 6}


def test_ksearch_cli(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", train={"epochs": 20}, seeds=[0])
    assert cli.main(["ksearch", "--config", cfg, "--k-min", "2", "--k-max", "4",
                     "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "ksearch.json").read_text())
    assert rep["probe_epochs"] == 2 and 2 <= rep["K"] <= 4
    assert set(rep["probes"]) == {"2", "3", "4"}
    assert rep["K"] == int(min(rep["probes"], key=lambda k: (rep["probes"][k], int(k))))
    for lo, hi in ((1, 4), (4, 4), (2, 11)):
        assert cli.main(["ksearch", "--config", cfg, "--k-min", str(lo), "--k-max", str(hi),
                         "--out", str(tmp_path)]) == 2


def test_bounds_cli(tmp_path, capsys):
    inputs = {"n": 1000, "m": 1000, "p": 2, "K": 32, "N_G": 20, "L_G": 4, "N_D": 16,
              "L_D": 3, "eta": 1.0, "t": math.log(100)}
    path = tmp_path / "b.json"
    path.write_text(json.dumps(inputs))
    assert cli.main(["bounds", "--config", str(path)]) == 0
    out = capsys.readouterr()
    rep = json.loads(out.out)
    assert rep["probability"] == 0.0 and rep["vacuous"]
    assert "vacuous" in out.err

    path.write_text(json.dumps({**inputs, "K": 8, "eta": 0.4}))
    assert cli.main(["bounds", "--config", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["vacuous"]

    sweep = {**inputs, "K": 8, "sweep": {"n": [10**k for k in range(2, 7)], "m_equals_n": True}}
    path.write_text(json.dumps(sweep))
    assert cli.main(["bounds", "--config", str(path), "--out", str(tmp_path)]) == 0
    reps = json.loads(capsys.readouterr().out)
    totals = [r["total"] for r in reps]
    assert [r["n"] for r in reps] == sweep["sweep"]["n"]
    assert all(b <= a for a, b in zip(totals, totals[1:]))

    path.write_text(json.dumps({**inputs, "eps": 0.6}))
    assert cli.main(["bounds", "--config", str(path)]) == 2


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "momgan", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("train", "eval", "bounds", "ksearch", "generate"):
        assert sub in res.stdout
