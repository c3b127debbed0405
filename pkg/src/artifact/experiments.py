"""Batch experiments: Q-Q tables, power curves, rate regressions, verification."""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import stats

from . import __version__
from .asymptotics import (STAT_KERNEL, STATISTICS, SizeRegime, sigma1_sq, sigma3_sq, sigma6_sq,
                          sigma_squared_balanced, test_statistic, unbalanced_principal, v_table)
from .decomposition import plan_cross_moment, telescoping_check
from .graphs import (BipartiteGraph, GraphClass, automorphism_count, class_of, enumerate_gamma,
                     pair_coincidence_count)
from .kernels import BUILTIN_NAMES, builtin, constant, from_function, symmetrize
from .models import DegreeFunction, ModelSpec, moment, power_exponent_for_f2, sample
from .ustat import u_exact, u_fast, u_ordered

SCHEMA = 1
EXPERIMENTS = ("qq", "power", "rate", "verify")
SEED_RULE = "SeedSequence([base_seed, crc32(tag), N, replicate_index])"

QQ_COLUMNS = ("N", "k", "theoretical_q", "sample_q", "env_lo", "env_hi")
POWER_COLUMNS = ("N", "deviation", "reject_rate", "ci_lo", "ci_hi")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    model: ModelSpec = field(default_factory=ModelSpec)
    statistic: str = "ZA"
    sizes: list = field(default_factory=lambda: [2 ** i for i in range(3, 9)])
    K: int = 500
    seed: int = 0
    out_dir: str = "."
    run_name: str = "run"
    rho: float = 0.5
    level: float = 0.05
    envelope: float = 0.99
    deviations: list = field(default_factory=list)
    deviation_kind: str = "f2"
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if self.experiment == "verify":
            return self
        if self.K < 2:
            raise ConfigError("K must be >= 2")
        if not 0 < self.rho < 1:
            raise ConfigError("rho must lie in (0, 1)")
        kname = self.kernel_name()
        k = builtin(kname)
        for N in self.sizes:
            m, n = self.dims(N)
            if m < k.p or n < k.q:
                raise ConfigError(f"N={N} gives a {m}x{n} matrix, too small for {kname}")
        if self.experiment == "rate" and len(self.sizes) < 3:
            raise ConfigError("rate needs at least 3 sizes")
        if self.experiment == "power":
            if not self.deviations:
                raise ConfigError("power needs a deviation grid")
            if self.deviation_kind not in ("f2", "alpha"):
                raise ConfigError("deviation_kind must be 'f2' or 'alpha'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def kernel_name(self) -> str:
        if self.experiment == "rate":
            if self.statistic not in BUILTIN_NAMES:
                raise ConfigError(f"rate needs a builtin kernel name, got {self.statistic!r}")
            return self.statistic
        if self.statistic not in STATISTICS:
            raise ConfigError(f"statistic must be one of {STATISTICS}")
        return STAT_KERNEL[self.statistic]

    def dims(self, N: int) -> tuple:
        m = int(round(self.rho * N))
        return m, N - m

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["model"] = self.model.as_dict()
        d["schema"] = SCHEMA
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if d.pop("schema", SCHEMA) != SCHEMA:
            raise ConfigError(f"unsupported config schema; expected {SCHEMA}")
        if "model" in d:
            d["model"] = ModelSpec.from_dict(d["model"])
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d).validate()

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class RunManifest:
    config: dict
    seed: int
    seed_rule: str
    version: str
    wall_clock: float
    outputs: list

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def replicate_seed(base_seed: int, tag: str, N: int, k: int) -> list:
    return [int(base_seed), zlib.crc32(tag.encode()), int(N), int(k)]


# -- replicate evaluation ----------------------------------------------------

def _statistic_value(model: ModelSpec, stat: str, m: int, n: int, seed) -> float:
    y = sample(model, m, n, seed).Y
    return test_statistic(stat, y, lam=model.lam, f=model.f, g=model.g).value


def _ustat_value(model: ModelSpec, kname: str, m: int, n: int, seed) -> float:
    return u_fast(kname, sample(model, m, n, seed).Y).value


def _run_job(job):
    fn, args = job
    return fn(*args)


def _map(jobs: list, workers: int) -> list:
    if workers <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def simulate_statistic(model: ModelSpec, stat: str, N: int, K: int, seed: int, tag: str,
                       rho: float = 0.5, workers: int = 1) -> np.ndarray:
    """K replicate values of a test statistic at total size N."""
    m = int(round(rho * N))
    jobs = [(_statistic_value, (model, stat, m, N - m, replicate_seed(seed, tag, N, k)))
            for k in range(K)]
    return np.array(_map(jobs, workers))


def simulate_ustat(model: ModelSpec, kname: str, N: int, K: int, seed: int, tag: str,
                   rho: float = 0.5, workers: int = 1) -> np.ndarray:
    m = int(round(rho * N))
    jobs = [(_ustat_value, (model, kname, m, N - m, replicate_seed(seed, tag, N, k)))
            for k in range(K)]
    return np.array(_map(jobs, workers))


# -- Q-Q ---------------------------------------------------------------------

def blom_positions(K: int) -> np.ndarray:
    k = np.arange(1, K + 1)
    return (k - 0.375) / (K + 0.25)


def qq_envelope(K: int, level: float = 0.99):
    """Pointwise normal-scale envelope of sorted standard-normal samples."""
    k = np.arange(1, K + 1)
    tail = (1 - level) / 2
    lo = stats.norm.ppf(stats.beta.ppf(tail, k, K + 1 - k))
    hi = stats.norm.ppf(stats.beta.ppf(1 - tail, k, K + 1 - k))
    return lo, hi


def qq_rows(N: int, values: np.ndarray, level: float = 0.99) -> list:
    K = len(values)
    theo = stats.norm.ppf(blom_positions(K))
    lo, hi = qq_envelope(K, level)
    srt = np.sort(values)
    return [(N, k + 1, theo[k], srt[k], lo[k], hi[k]) for k in range(K)]


def envelope_coverage(K: int = 500, meta: int = 200, level: float = 0.99, seed: int = 0) -> dict:
    """Exceedance of the envelope by sorted standard-normal samples."""
    lo, hi = qq_envelope(K, level)
    rng = np.random.default_rng(seed)
    out = np.zeros(K)
    any_out = 0
    for _ in range(meta):
        s = np.sort(rng.standard_normal(K))
        bad = (s < lo) | (s > hi)
        out += bad
        any_out += bool(bad.any())
    per_point = out / meta
    return {"mean_pointwise_exceedance": float(per_point.mean()),
            "max_pointwise_exceedance": float(per_point.max()),
            "fraction_runs_with_exceedance": any_out / meta}


# -- writers -----------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(x) for x in r) + "\n")


def _write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


_PLOT_TEMPLATES = {
    "qq": '''import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("{csv}")
sizes = sorted(df.N.unique())
fig, axes = plt.subplots(1, len(sizes), figsize=(3 * len(sizes), 3), squeeze=False)
for ax, N in zip(axes[0], sizes):
    d = df[df.N == N]
    ax.plot(d.theoretical_q, d.sample_q, ".", ms=2)
    ax.plot(d.theoretical_q, d.env_lo, "r-", lw=0.8)
    ax.plot(d.theoretical_q, d.env_hi, "r-", lw=0.8)
    ax.plot(d.theoretical_q, d.theoretical_q, "k--", lw=0.5)
    ax.set_title(f"N = {{N}}")
fig.tight_layout()
fig.savefig("{stem}.pdf")
''',
    "power": '''import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("{csv}")
fig, ax = plt.subplots()
for N, d in df.groupby("N"):
    ax.errorbar(d.deviation, d.reject_rate,
                yerr=[d.reject_rate - d.ci_lo, d.ci_hi - d.reject_rate], label=f"N = {{N}}")
ax.set_xlabel("deviation")
ax.set_ylabel("rejection rate")
ax.legend()
fig.savefig("{stem}.pdf")
''',
    "rate": '''import json
import numpy as np
import matplotlib.pyplot as plt

res = json.load(open("{csv}"))
N = np.array([float(k) for k in res["sd"]])
sd = np.array(list(res["sd"].values()))
plt.loglog(N, sd, "o-")
plt.title(f"slope = {{res['slope']:.3f}} +/- {{res['stderr']:.3f}}")
plt.savefig("{stem}.pdf")
''',
}


def _finish(cfg: ExperimentConfig, outputs: list, started: float, data_path: str) -> RunManifest:
    stem = os.path.join(cfg.out_dir, cfg.run_name)
    plot = stem + ".plot.py"
    with open(plot, "w") as fh:
        fh.write(_PLOT_TEMPLATES[cfg.experiment].format(csv=os.path.basename(data_path),
                                                        stem=os.path.basename(stem)))
    outputs = outputs + [plot]
    man = RunManifest(cfg.as_dict(), cfg.seed, SEED_RULE, __version__,
                      time.time() - started, [os.path.basename(p) for p in outputs])
    man.write(stem + ".manifest.json")
    return man


# -- experiments -------------------------------------------------------------

def run_qq(cfg: ExperimentConfig) -> RunManifest:
    cfg.validate()
    if cfg.experiment != "qq":
        raise ConfigError("not a qq config")
    started = time.time()
    os.makedirs(cfg.out_dir, exist_ok=True)
    rows = []
    for N in cfg.sizes:
        vals = simulate_statistic(cfg.model, cfg.statistic, N, cfg.K, cfg.seed,
                                  f"qq:{cfg.statistic}", cfg.rho, cfg.workers)
        rows.extend(qq_rows(N, vals, cfg.envelope))
    path = os.path.join(cfg.out_dir, cfg.run_name + ".csv")
    _write_csv(path, QQ_COLUMNS, rows)
    return _finish(cfg, [path], started, path)


def deviated_model(model: ModelSpec, kind: str, value: float) -> ModelSpec:
    """Model with F2 of f set to ``value`` (kind 'f2') or dispersion ``value`` ('alpha')."""
    if kind == "f2":
        if value == 1:
            return dataclasses.replace(model, f=DegreeFunction())
        return dataclasses.replace(model, f=DegreeFunction("power", power_exponent_for_f2(value)))
    return dataclasses.replace(model, alpha=float(value))


def wald_interval(rate: float, K: int, z: float = 1.959963984540054) -> tuple:
    half = z * math.sqrt(rate * (1 - rate) / K)
    return max(0.0, rate - half), min(1.0, rate + half)


def power_rows(cfg: ExperimentConfig) -> list:
    crit = stats.norm.isf(cfg.level / 2)
    rows = []
    for N in cfg.sizes:
        for dev in cfg.deviations:
            model = deviated_model(cfg.model, cfg.deviation_kind, dev)
            vals = simulate_statistic(model, cfg.statistic, N, cfg.K, cfg.seed,
                                      f"power:{cfg.statistic}:{cfg.deviation_kind}:{dev!r}",
                                      cfg.rho, cfg.workers)
            rate = float(np.mean(np.abs(vals) > crit))
            lo, hi = wald_interval(rate, cfg.K)
            rows.append((N, float(dev), rate, lo, hi))
    return rows


def run_power(cfg: ExperimentConfig) -> RunManifest:
    cfg.validate()
    if cfg.experiment != "power":
        raise ConfigError("not a power config")
    started = time.time()
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, cfg.run_name + ".csv")
    _write_csv(path, POWER_COLUMNS, power_rows(cfg))
    return _finish(cfg, [path], started, path)


def rate_fit(sizes, sds) -> dict:
    res = stats.linregress(np.log(np.asarray(sizes, float)), np.log(np.asarray(sds, float)))
    return {"slope": float(res.slope), "stderr": float(res.stderr),
            "sd": {str(N): float(s) for N, s in zip(sizes, sds)}}


def rate_result(cfg: ExperimentConfig) -> dict:
    sds = []
    for N in cfg.sizes:
        u = simulate_ustat(cfg.model, cfg.statistic, N, cfg.K, cfg.seed,
                           f"rate:{cfg.statistic}", cfg.rho, cfg.workers)
        sds.append(float(np.std(u, ddof=1)))
    return rate_fit(cfg.sizes, sds)


def run_rate(cfg: ExperimentConfig) -> tuple:
    cfg.validate()
    if cfg.experiment != "rate":
        raise ConfigError("not a rate config")
    started = time.time()
    os.makedirs(cfg.out_dir, exist_ok=True)
    res = rate_result(cfg)
    path = os.path.join(cfg.out_dir, cfg.run_name + ".json")
    _write_json(path, res)
    return res, _finish(cfg, [path], started, path)


# -- verification suite ------------------------------------------------------

def _check(name: str, passed: bool, measured, detail: str = "") -> dict:
    return {"name": name, "passed": bool(passed), "measured": measured, "detail": detail}


def _catalog_checks() -> list:
    lvl2 = sum(len(enumerate_gamma(r, c)) for r, c in ((2, 0), (0, 2), (1, 1)))
    lvl3 = sum(len(enumerate_gamma(r, c)) for r, c in ((2, 1), (1, 2)))
    out = [_check("catalog_level2_count", lvl2 == 4, lvl2, "expected 4"),
           _check("catalog_level3_count", lvl3 == 6, lvl3, "expected 6")]
    a12 = automorphism_count(BipartiteGraph.complete(1, 2))
    a11 = automorphism_count(BipartiteGraph.complete(1, 1))
    out.append(_check("aut_K12_K11", (a12, a11) == (2, 1), [a12, a11], "expected [2, 1]"))
    bad = []
    for r in range(4):
        for c in range(4):
            s = sum(Fraction(math.factorial(r) * math.factorial(c), g.aut_count)
                    for g in enumerate_gamma(r, c))
            if s != 2 ** (r * c):
                bad.append([r, c, str(s)])
    out.append(_check("orbit_identity_r_c_le_3", not bad, bad))
    return out


def pair_coincidence_checks(max_mn: int = 5, max_pq: int = 2, aut_override=None) -> list:
    """All (m, n, p, q, G) cases; ``aut_override(cls) -> int`` tampers the closed form."""
    failures, total = [], 0
    for p in range(max_pq + 1):
        for q in range(max_pq + 1):
            classes = [g for r in range(p + 1) for c in range(q + 1) for g in enumerate_gamma(r, c)]
            for m in range(max(p, 1), max_mn + 1):
                for n in range(max(q, 1), max_mn + 1):
                    for g in classes:
                        aut = None if aut_override is None else aut_override(g)
                        lhs, rhs = pair_coincidence_count(m, n, p, q, g, aut_count=aut)
                        total += 1
                        if lhs != rhs:
                            failures.append([m, n, p, q, g.r, g.c, g.representative.edges, lhs, rhs])
    return [_check("pair_coincidence", not failures, {"cases": total, "failures": failures[:10]})]


def _model_zoo():
    pw = DegreeFunction("power", 1.0)
    return {
        "gaussian": ModelSpec.gaussian(),
        "poisson": ModelSpec.poisson(1.0, None, DegreeFunction("power", 1 + math.sqrt(2))),
        "overdispersed": ModelSpec.overdispersed(1.0, pw, pw, 0.5),
    }


def _ustat_checks(seed: int) -> list:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in BUILTIN_NAMES:
        for _ in range(10):
            m, n = rng.integers(2, 9, size=2)
            y = rng.poisson(1.5, size=(m, n)).astype(float)
            a, b = u_exact(builtin(name), y).value, u_fast(name, y).value
            worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    out = [_check("u_fast_vs_u_exact", worst <= 1e-10, worst, "relative error")]
    asym = from_function(lambda y: y[..., 0, 0] * (1 + y[..., 1, 1]) - y[..., 0, 1], 2, 2, "asym")
    resid = 0.0
    for _ in range(5):
        y = rng.normal(size=(4, 5))
        resid = max(resid, abs(u_ordered(asym, y).value - u_exact(symmetrize(asym), y).value))
        resid = max(resid, abs(u_ordered(builtin("h6"), y).value - u_exact(builtin("h6"), y).value))
    out.append(_check("ordered_unordered_identity", resid <= 1e-12, resid))
    y = rng.poisson(1.0, size=(4, 4)).astype(float)
    base = u_exact(builtin("h6"), y).value
    dev = 0.0
    for s1 in itertools.permutations(range(4)):
        for s2 in itertools.permutations(range(4)):
            dev = max(dev, abs(u_exact(builtin("h6"), y[list(s1)][:, list(s2)]).value - base))
    out.append(_check("permutation_invariance", dev == 0.0, dev))
    return out


def _projection_checks(seed: int, samples: int) -> list:
    out = []
    zoo = _model_zoo()
    resid = max(telescoping_check(builtin(k), m, seed) for k in BUILTIN_NAMES for m in zoo.values())
    resid = max(resid, telescoping_check(constant(2.5, 2, 2), zoo["gaussian"], seed))
    out.append(_check("telescoping", resid <= 1e-10, resid))
    g1 = BipartiteGraph.labeled([0], [0], [(0, 0)])
    g2 = BipartiteGraph.labeled([0], [0, 1], [(0, 0), (0, 1)])
    g3 = BipartiteGraph.labeled([0, 1], [0], [])
    zs = []
    for a, b in ((g1, g2), (g1, g3), (g2, g3)):
        est = plan_cross_moment(zoo["overdispersed"], builtin("h6"), a, b, samples, (seed, "orth"))
        zs.append(est.z)
    out.append(_check("orthogonality", all(abs(z) <= 3 for z in zs), [round(z, 3) for z in zs],
                      "z-scores of cross moments of distinct projections"))
    return out


def _formula_checks() -> list:
    out = []
    p1 = DegreeFunction("power", 1.0)
    pr = DegreeFunction("power", 1 + math.sqrt(2))
    vals = [moment(pr, 2), moment(p1, 2), moment(p1, 3)]
    ok = abs(vals[0] - 2) < 1e-12 and abs(vals[1] - 4 / 3) < 1e-12 and abs(vals[2] - 2) < 1e-12
    out.append(_check("degree_moments", ok, vals, "expected [2, 4/3, 2]"))
    half = Fraction(1, 2)
    s1 = sigma_squared_balanced(v_table(ModelSpec.gaussian(), builtin("h1")), 3, half)
    s3 = sigma_squared_balanced(
        v_table(ModelSpec.poisson(1.0, None, pr), builtin("h3"), samples=2), 3, half)
    s6 = sigma_squared_balanced(
        v_table(ModelSpec.overdispersed(1.0, p1, p1, 0.0), builtin("h6"), samples=2), 2, half)
    ok = (s1 == sigma1_sq(half) == 16 and s3 == sigma3_sq(1, half) == 16
          and s6 == sigma6_sq(1, p1, p1, half) == Fraction(1168, 81))
    out.append(_check("sigma_closed_forms", ok, [str(s1), str(s3), str(s6)],
                      "expected [16, 16, 1168/81]"))
    u1 = unbalanced_principal({(1, 0), (0, 2)}, SizeRegime.power(1, Fraction(1, 2)))
    u2 = unbalanced_principal({(1, 1), (0, 3)}, SizeRegime.power(1, Fraction(1, 2)))
    ok = u1.gamma_exponent == 1 and u2.gamma_exponent == Fraction(3, 2)
    out.append(_check("unbalanced_exponents", ok, [str(u1.gamma_exponent), str(u2.gamma_exponent)]))
    return out


def run_verify(seed: int = 0, samples: int = 20_000, aut_override=None,
               out_path: Optional[str] = None) -> dict:
    """Run every invariant check; failures are report entries, not exceptions."""
    started = time.time()
    checks = (_catalog_checks() + pair_coincidence_checks(aut_override=aut_override)
              + _ustat_checks(seed) + _projection_checks(seed, samples) + _formula_checks())
    report = {"passed": all(c["passed"] for c in checks), "checks": checks,
              "seed": seed, "version": __version__, "wall_clock": time.time() - started}
    if out_path:
        _write_json(out_path, report)
    return report


def format_report(report: dict) -> str:
    lines = []
    for c in report["checks"]:
        lines.append(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {json.dumps(c['measured'])}")
    return "\n".join(lines)
