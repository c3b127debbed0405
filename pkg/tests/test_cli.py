import json

import numpy as np
import pytest

from artifact.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_catalog(capsys, tmp_path):
    code, out, _ = run(capsys, "catalog", "--max-rows", "1", "--max-cols", "2")
    rows = json.loads(out)
    assert code == 0 and {(r["r"], r["c"]) for r in rows} >= {(1, 2), (0, 0)}
    code, out, _ = run(capsys, "catalog", "--format", "csv")
    assert out.splitlines()[0] == "r,c,edges_hex,aut,connected,class_id"
    run(capsys, "catalog", "--out", str(tmp_path / "c.json"))
    assert json.load(open(tmp_path / "c.json"))


def test_simulate_ustat_test(capsys, tmp_path):
    path = str(tmp_path / "y.csv")
    code, _, _ = run(capsys, "simulate", "--model", "poisson", "--lambda", "2", "--f", "power:1",
                     "--m", "6", "--n", "8", "--seed", "3", "--out", path)
    assert code == 0
    y = np.loadtxt(path, delimiter=",")
    assert y.shape == (6, 8)
    side = json.load(open(tmp_path / "y.json"))
    assert side["model"]["lambda"] == 2.0 and side["seed"] == 3
    code, out, _ = run(capsys, "ustat", "--kernel", "h6", "--in", path)
    fast = json.loads(out)
    code, out, _ = run(capsys, "ustat", "--kernel", "h6", "--in", path, "--path", "exact")
    assert json.loads(out)["value"] == pytest.approx(fast["value"], rel=1e-10)
    code, out, _ = run(capsys, "test", "--stat", "ZC", "--in", path, "--lambda", "2",
                       "--f", "power:1")
    res = json.loads(out)
    assert code == 0 and 0 <= res["p"] <= 1 and res["stat"] == "ZC"


def test_test_errors(capsys, tmp_path):
    path = tmp_path / "z.csv"
    np.savetxt(path, np.zeros((4, 4)), delimiter=",")
    code, _, err = run(capsys, "test", "--stat", "ZBprime", "--in", str(path))
    assert code == 2 and "error" in err
    code, out, _ = run(capsys, "test", "--stat", "ZA", "--in", str(path))
    assert json.loads(out)["value"] == 0.0
    code, _, err = run(capsys, "ustat", "--kernel", "h1", "--in", str(tmp_path / "missing.csv"))
    assert code == 2


def test_support(capsys, tmp_path):
    out = tmp_path / "s.json"
    code, _, _ = run(capsys, "support", "--model", "overdispersed", "--kernel", "h6",
                     "--pilot", "20000", "--out", str(out))
    rep = json.load(open(out))
    assert code == 0 and rep["principal_degree"] == 2 and rep["all_connected"]
    assert [(s["r"], s["c"]) for s in rep["support"]] == [(1, 1)]


def test_experiments_from_config(capsys, tmp_path):
    base = {"schema": 1, "model": {"variant": "gaussian_iid"}, "sizes": [8, 16], "K": 3}
    for name, extra in (("qq", {"statistic": "ZA"}),
                        ("power", {"statistic": "ZA", "deviations": [0.0],
                                   "deviation_kind": "alpha"}),
                        ("rate", {"statistic": "h1", "sizes": [8, 16, 32]})):
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(dict(base, experiment=name, **extra)))
        code, out, _ = run(capsys, name, "--config", str(path), "--out-dir", str(tmp_path / name),
                           "--run-name", "x", "--workers", "1")
        assert code == 0
        assert (tmp_path / name / "x.manifest.json").exists()
    code, _, err = run(capsys, "qq", "--config", str(tmp_path / "rate.json"))
    assert code == 2 and "not 'qq'" in err
    (tmp_path / "bad.json").write_text(json.dumps(dict(base, experiment="qq", K=1)))
    code, _, err = run(capsys, "qq", "--config", str(tmp_path / "bad.json"))
    assert code == 2


def test_verify_cli(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--samples", "5000", "--out", str(tmp_path / "v.json"))
    assert code == 0 and "FAIL" not in out and out.count("PASS") >= 10


def test_usage_errors():
    with pytest.raises(SystemExit):
        main([])
    with pytest.raises(SystemExit):
        main(["ustat", "--kernel", "h9", "--in", "x"])
