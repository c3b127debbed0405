import csv
import json
import os

import numpy as np
import pytest

from artifact import experiments as E
from artifact.models import DegreeFunction, ModelSpec

GAUSS = ModelSpec.gaussian()
POIS = ModelSpec.poisson(1.0, g=DegreeFunction("power", 1 + 2 ** 0.5))
OVER = ModelSpec.overdispersed(1.0, DegreeFunction("power", 1.0), DegreeFunction("power", 1.0))


def cfg(tmp_path, **kw):
    base = dict(experiment="qq", model=GAUSS, statistic="ZA", sizes=[16], K=2,
                out_dir=str(tmp_path), run_name="r")
    base.update(kw)
    return E.ExperimentConfig(**base).validate()


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_config_validation(tmp_path):
    bad = [dict(K=1), dict(rho=1.0), dict(statistic="ZQ"), dict(sizes=[2]),
           dict(experiment="rate", statistic="h1", sizes=[8, 16]),
           dict(experiment="rate", statistic="ZA", sizes=[8, 16, 32]),
           dict(experiment="power", deviations=[]),
           dict(experiment="power", deviations=[1.0], deviation_kind="beta"),
           dict(workers=0), dict(experiment="sweep")]
    for kw in bad:
        with pytest.raises(E.ConfigError):
            cfg(tmp_path, **kw)
    c = cfg(tmp_path)
    d = c.as_dict()
    assert d["schema"] == 1
    assert E.ExperimentConfig.from_dict(json.loads(json.dumps(d))).as_dict() == d
    with pytest.raises(E.ConfigError):
        E.ExperimentConfig.from_dict(dict(d, schema=2))
    with pytest.raises(E.ConfigError):
        E.ExperimentConfig.from_dict(dict(d, colour="red"))
    defaults = E.ExperimentConfig("qq")
    assert defaults.sizes == [8, 16, 32, 64, 128, 256] and defaults.K == 500 and defaults.rho == 0.5


def test_qq_minimal(tmp_path):
    man = E.run_qq(cfg(tmp_path))
    rows = read_csv(tmp_path / "r.csv")
    assert rows[0] == list(E.QQ_COLUMNS)
    assert len(rows) == 3
    lo, hi = E.qq_envelope(2)
    assert np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)
    assert [float(r[2]) for r in rows[1:]] == pytest.approx([-0.5894, 0.5894], abs=1e-3)
    mf = json.load(open(tmp_path / "r.manifest.json"))
    assert mf["seed"] == 0 and mf["seed_rule"] == E.SEED_RULE
    assert set(mf["outputs"]) == {"r.csv", "r.plot.py"} and man.outputs == mf["outputs"]
    assert mf["config"]["schema"] == 1 and "version" in mf and mf["wall_clock"] >= 0
    assert 'read_csv("r.csv")' in open(tmp_path / "r.plot.py").read()


def test_byte_reproducible_across_workers(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    E.run_qq(cfg(a, K=20, sizes=[8, 16], workers=1))
    E.run_qq(cfg(b, K=20, sizes=[8, 16], workers=2))
    assert (a / "r.csv").read_bytes() == (b / "r.csv").read_bytes()
    E.run_qq(cfg(b, K=20, sizes=[8, 16], workers=1, run_name="again"))
    assert (a / "r.csv").read_bytes() == (b / "again.csv").read_bytes()
    p1 = cfg(a, experiment="power", statistic="ZB", model=POIS, K=10, deviations=[1.0, 1.2])
    p2 = cfg(b, experiment="power", statistic="ZB", model=POIS, K=10, deviations=[1.0, 1.2],
             workers=2)
    E.run_power(p1)
    E.run_power(p2)
    assert (a / "r.csv").read_bytes() == (b / "r.csv").read_bytes()


def test_replay_from_manifest(tmp_path):
    E.run_qq(cfg(tmp_path, K=10, statistic="ZC", model=OVER))
    mf = json.load(open(tmp_path / "r.manifest.json"))
    c2 = E.ExperimentConfig.from_dict(dict(mf["config"], run_name="replay"))
    E.run_qq(c2)
    assert (tmp_path / "r.csv").read_bytes() == (tmp_path / "replay.csv").read_bytes()


def test_qq_za_inside_envelope(tmp_path):
    E.run_qq(cfg(tmp_path, sizes=[256], K=500))
    rows = read_csv(tmp_path / "r.csv")[1:]
    inside = [float(r[4]) <= float(r[3]) <= float(r[5]) for r in rows]
    assert np.mean(inside) >= 0.99


def test_qq_zb_alternative_upper_tail(tmp_path):
    model = E.deviated_model(ModelSpec.poisson(1.0), "f2", 1.2)
    E.run_qq(cfg(tmp_path, sizes=[256], K=500, statistic="ZB", model=model))
    rows = np.array([[float(x) for x in r] for r in read_csv(tmp_path / "r.csv")[1:]])
    upper = rows[-100:]
    assert np.mean(upper[:, 3] > upper[:, 5]) > 0.5


def test_power_minimal_and_monotone_alpha(tmp_path):
    E.run_power(cfg(tmp_path, experiment="power", statistic="ZC", model=OVER,
                    deviations=[0.0, 0.5], deviation_kind="alpha"))
    rows = read_csv(tmp_path / "r.csv")
    assert rows[0] == list(E.POWER_COLUMNS)
    assert all(float(r[2]) in (0.0, 0.5, 1.0) for r in rows[1:])
    c = cfg(tmp_path, experiment="power", statistic="ZC", model=OVER, sizes=[128], K=200,
            deviations=[0.0, 0.05, 0.1], deviation_kind="alpha")
    rates = [r[2] for r in E.power_rows(c)]
    cis = [(r[3], r[4]) for r in E.power_rows(c)]
    for (lo1, hi1), (lo2, hi2), r1, r2 in zip(cis, cis[1:], rates, rates[1:]):
        assert r2 >= r1 or hi2 >= lo1
    assert rates[-1] > rates[0]


def test_deviated_model_and_wald():
    m = E.deviated_model(ModelSpec.poisson(1.0), "f2", 1.2)
    from artifact.models import moment
    assert moment(m.f, 2) == pytest.approx(1.2, rel=1e-12)
    assert E.deviated_model(m, "f2", 1.0).f.family == "constant"
    assert E.deviated_model(OVER, "alpha", 0.1).alpha == 0.1
    assert E.wald_interval(0.0, 10) == (0.0, 0.0)
    lo, hi = E.wald_interval(0.5, 100)
    assert lo == pytest.approx(0.5 - 0.098, abs=1e-3) and hi == pytest.approx(0.5 + 0.098, abs=1e-3)


def test_rate_nondegenerate_slope(tmp_path):
    model = ModelSpec.poisson(1.0, DegreeFunction("power", 1.0), DegreeFunction("power", 1.0))
    res, man = E.run_rate(cfg(tmp_path, experiment="rate", statistic="h1", model=model,
                              sizes=[64, 128, 256, 512], K=200))
    assert abs(res["slope"] + 0.5) <= 0.15
    assert json.load(open(tmp_path / "r.json")) == res
    assert set(man.outputs) == {"r.json", "r.plot.py"}


def test_rate_fit_exact():
    res = E.rate_fit([10, 100, 1000], [1e-1, 1e-2, 1e-3])
    assert res["slope"] == pytest.approx(-1.0) and res["stderr"] == pytest.approx(0.0, abs=1e-12)


def test_envelope_coverage_calibration():
    cov = E.envelope_coverage(K=500, meta=200, seed=0)
    assert 0.002 <= cov["mean_pointwise_exceedance"] <= 0.03


def test_blom_and_seeds():
    assert E.blom_positions(2) == pytest.approx([0.625 / 2.25, 1.625 / 2.25])
    assert E.replicate_seed(0, "x", 8, 1) != E.replicate_seed(0, "x", 8, 2)
    assert E.replicate_seed(0, "x", 8, 1) != E.replicate_seed(1, "x", 8, 1)


def test_verify_default_and_report(tmp_path):
    out = tmp_path / "v.json"
    rep = E.run_verify(seed=0, out_path=str(out))
    assert rep["passed"], E.format_report(rep)
    names = {c["name"] for c in rep["checks"]}
    assert {"pair_coincidence", "sigma_closed_forms", "orbit_identity_r_c_le_3"} <= names
    assert json.load(open(out))["passed"]
    assert E.format_report(rep).count("PASS") == len(rep["checks"])


def test_verify_tampered_aut_fails():
    rep = E.run_verify(seed=0, samples=2000,
                       aut_override=lambda g: g.aut_count + (1 if g.r == 1 and g.c == 2 else 0))
    bad = [c["name"] for c in rep["checks"] if not c["passed"]]
    assert not rep["passed"] and bad == ["pair_coincidence"]


def test_verify_seed_independent():
    verdicts = [[c["passed"] for c in E.run_verify(seed=s, samples=5000)["checks"]]
                for s in (1, 2)]
    assert verdicts[0] == verdicts[1] and all(verdicts[0])
