"""Variance tables, asymptotic variances, regimes and test statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import stats

from .decomposition import projection_second_moment
from .graphs import enumerate_gamma
from .kernels import KernelSpec
from .models import GAUSSIAN, OVERDISPERSED, POISSON, DegreeFunction, ModelSpec, moment_exact
from .ustat import u_fast


# -- regimes -----------------------------------------------------------------

def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x).limit_denominator(10 ** 6)


@dataclass(frozen=True)
class SizeRegime:
    """``balanced`` with m/N -> rho, or ``power`` with m ~ N^a, n ~ N^b."""

    kind: str
    rho: Optional[float] = None
    a: Optional[Fraction] = None
    b: Optional[Fraction] = None

    def __post_init__(self):
        if self.kind == "balanced":
            if self.rho is None or not 0 < self.rho < 1:
                raise ValueError("balanced regime needs 0 < rho < 1")
        elif self.kind == "power":
            if self.a is None or self.b is None or self.a <= 0 or self.b <= 0:
                raise ValueError("power regime needs a, b > 0")
        else:
            raise ValueError(f"unknown regime {self.kind!r}")

    @classmethod
    def balanced(cls, rho: float) -> "SizeRegime":
        return cls("balanced", rho=rho)

    @classmethod
    def power(cls, a, b) -> "SizeRegime":
        return cls("power", a=_frac(a), b=_frac(b))

    def sizes(self, N: int) -> tuple:
        if self.kind == "balanced":
            m = int(round(self.rho * N))
            return m, N - m
        return math.ceil(N ** float(self.a)), math.ceil(N ** float(self.b))


# -- variance tables ---------------------------------------------------------

@dataclass(frozen=True)
class VEntry:
    value: float
    std_error: float = 0.0
    exact: bool = False


@dataclass
class VTable:
    p: int
    q: int
    entries: dict = field(default_factory=dict)  # (r, c) -> VEntry
    label: str = ""

    def __getitem__(self, rc) -> float:
        return self.entries[rc].value

    def nonzero(self, z: float = 3.0) -> set:
        """Entries that are exactly nonzero or exceed z standard errors."""
        out = set()
        for rc, e in self.entries.items():
            if e.exact or e.std_error == 0:
                if e.value != 0:
                    out.add(rc)
            elif e.value > z * e.std_error:
                out.add(rc)
        return out

    def as_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "label": self.label,
                "entries": [{"r": r, "c": c, "value": float(e.value),
                             "std_error": e.std_error, "exact": e.exact}
                            for (r, c), e in sorted(self.entries.items())]}

    @classmethod
    def from_values(cls, p: int, q: int, values: dict, exact: bool = True) -> "VTable":
        t = cls(p, q)
        for r in range(p + 1):
            for c in range(q + 1):
                if (r, c) != (0, 0):
                    t.entries[(r, c)] = VEntry(values.get((r, c), 0), 0.0, exact)
        return t


def prefactor(p: int, q: int, r: int, c: int) -> int:
    """p!^2 q!^2 / ((p-r)!^2 (q-c)!^2)."""
    return (math.perm(p, r) * math.perm(q, c)) ** 2


def _exact_entries(model: ModelSpec, kernel: KernelSpec) -> dict:
    """Closed-form V entries for the hardcoded (model, kernel) pairs."""
    name = kernel.name
    lam = _frac(model.lam)
    if name == "h1" and model.variant == GAUSSIAN:
        vals = {(r, c): Fraction(0) for r in range(2) for c in range(3) if (r, c) != (0, 0)}
        vals[(1, 2)] = Fraction(2)
        return vals
    if name == "h3" and model.variant == POISSON and model.f.family == "constant":
        vals = {(r, c): Fraction(0) for r in range(3) for c in range(3)
                if 0 < r + c <= 2 or (r, c) == (2, 1)}
        vals[(1, 2)] = 2 * lam ** 2
        return vals
    null = model.variant == POISSON or (model.variant == OVERDISPERSED and model.alpha == 0)
    if name == "h6" and null:
        F2, F3 = moment_exact(model.f, 2), moment_exact(model.f, 3)
        G2, G3 = moment_exact(model.g, 2), moment_exact(model.g, 3)
        vals = {rc: Fraction(0) for rc in ((1, 0), (0, 1), (2, 0), (0, 2))}
        vals[(1, 1)] = lam ** 4 * (lam * (F3 - F2 ** 2) * (G3 - G2 ** 2) + 2 * F2 * G2)
        return vals
    return {}


def v_table(model: ModelSpec, kernel: KernelSpec, samples: int = 20_000, seed=0,
            use_exact: bool = True) -> VTable:
    """V^{(r,c)} for all (0,0) < (r,c) <= (p,q), closed forms substituted where known."""
    p, q = kernel.p, kernel.q
    exact = _exact_entries(model, kernel) if use_exact else {}
    table = VTable(p, q, label=f"{kernel.name}/{model.variant}")
    for r in range(p + 1):
        for c in range(q + 1):
            if (r, c) == (0, 0):
                continue
            if (r, c) in exact:
                table.entries[(r, c)] = VEntry(exact[(r, c)], 0.0, True)
                continue
            pre = prefactor(p, q, r, c)
            total, var = 0.0, 0.0
            for cls in enumerate_gamma(r, c):
                est = projection_second_moment(model, kernel, cls, samples,
                                               (seed, r, c, cls.class_id))
                total += est.value / cls.aut_count
                var += (est.std_error / cls.aut_count) ** 2
            table.entries[(r, c)] = VEntry(pre * total, pre * math.sqrt(var), False)
    return table


def finite_variance(vt: VTable, m: int, n: int) -> float:
    """Var U_{m,n} = sum of (m-r)!/m! (n-c)!/n! V^{(r,c)}."""
    if m < vt.p or n < vt.q:
        raise ValueError(f"need m >= {vt.p} and n >= {vt.q}")
    total = 0.0
    for (r, c), e in vt.entries.items():
        total += float(e.value) / (math.perm(m, r) * math.perm(n, c))
    return total


def sigma_squared_balanced(vt: VTable, d: int, rho):
    """sum over r + c = d of rho^-r (1-rho)^-c V^{(r,c)}."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if d > vt.p + vt.q or d < 1:
        raise ValueError(f"degree {d} outside 1..{vt.p + vt.q}")
    exact = all(vt.entries[(r, d - r)].exact for r in range(d + 1) if (r, d - r) in vt.entries)
    rho_ = _frac(rho) if exact and isinstance(rho, (Fraction, int, str)) else rho
    total = 0
    for (r, c), e in vt.entries.items():
        if r + c == d:
            total += rho_ ** (-r) * (1 - rho_) ** (-c) * e.value
    return total


def principal_degree(vt: VTable, z: float = 3.0) -> Optional[int]:
    nz = vt.nonzero(z)
    return min((r + c for r, c in nz), default=None)


@dataclass(frozen=True)
class UnbalancedResult:
    support: frozenset
    gamma_exponent: Fraction
    alpha_weights: dict
    sigma2: Optional[float] = None


def unbalanced_principal(pattern, regime: SizeRegime) -> UnbalancedResult:
    """Principal degrees and rate exponent under m ~ N^a, n ~ N^b.

    ``pattern`` is a VTable or a collection of (r, c) pairs with V != 0.
    """
    if regime.kind == "balanced":
        regime = SizeRegime.power(1, 1)
    vt = pattern if isinstance(pattern, VTable) else None
    nz = vt.nonzero() if vt is not None else set(map(tuple, pattern))
    if not nz:
        raise ValueError("no nonzero V entries")
    e = {rc: regime.a * rc[0] + regime.b * rc[1] for rc in nz}
    best = min(e.values())
    S = frozenset(rc for rc, v in e.items() if v == best)
    alphas = {rc: 1 for rc in S}
    s2 = sum(float(vt.entries[rc].value) for rc in S) if vt is not None else None
    return UnbalancedResult(S, best, alphas, s2)


# -- closed-form asymptotic variances ----------------------------------------

def sigma1_sq(rho=Fraction(1, 2)):
    return 2 / (rho * (1 - rho) ** 2)


def sigma3_sq(lam=1, rho=Fraction(1, 2)):
    return 2 * lam ** 2 / (rho * (1 - rho) ** 2)


def sigma6_sq(lam=1, f: DegreeFunction = None, g: DegreeFunction = None, rho=Fraction(1, 2)):
    f = f or DegreeFunction()
    g = g or DegreeFunction()
    F2, F3 = moment_exact(f, 2), moment_exact(f, 3)
    G2, G3 = moment_exact(g, 2), moment_exact(g, 3)
    return lam ** 4 / (rho * (1 - rho)) * (lam * (F3 - F2 ** 2) * (G3 - G2 ** 2) + 2 * F2 * G2)


# -- test statistics ---------------------------------------------------------

STATISTICS = ("ZA", "ZB", "ZBprime", "ZC")


@dataclass(frozen=True)
class TestStatistic:
    __test__ = False  # not a pytest class

    name: str
    value: float
    variance_used: float
    two_sided_p: float

    def as_dict(self) -> dict:
        return {"stat": self.name, "value": self.value, "variance": self.variance_used,
                "p": self.two_sided_p}


def two_sided_p(z: float) -> float:
    return float(2 * stats.norm.sf(abs(z)))


def test_statistic(name: str, Y, lam: Optional[float] = None, f: DegreeFunction = None,
                   g: DegreeFunction = None) -> TestStatistic:
    """ZA, ZB, ZBprime or ZC of a data matrix, with rho = m / N."""
    y = np.asarray(Y, dtype=float)
    m, n = y.shape
    N = m + n
    rho = m / N
    if name == "ZA":
        var = float(sigma1_sq(rho))
        z = N ** 1.5 * u_fast("h1", y).value / math.sqrt(var)
    elif name in ("ZB", "ZBprime"):
        u3 = u_fast("h3", y).value
        if name == "ZB":
            if lam is None:
                raise ValueError("ZB needs lambda")
            var = float(sigma3_sq(lam, rho))
        else:
            u2 = u_fast("h2", y).value
            if not u2 > 0:
                raise ValueError("U(h2) <= 0: plug-in variance undefined")
            var = float(sigma3_sq(math.sqrt(u2), rho))
        z = N ** 1.5 * u3 / math.sqrt(var)
    elif name == "ZC":
        if lam is None:
            raise ValueError("ZC needs lambda")
        var = float(sigma6_sq(lam, f, g, rho))
        z = N * u_fast("h6", y).value / math.sqrt(var)
    else:
        raise ValueError(f"unknown statistic {name!r}; choose from {STATISTICS}")
    return TestStatistic(name, float(z), var, two_sided_p(z))


STAT_KERNEL = {"ZA": "h1", "ZB": "h3", "ZBprime": "h3", "ZC": "h6"}
