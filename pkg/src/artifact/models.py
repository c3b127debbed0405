"""Dissociated row-column exchangeable matrices in latent (AHK) form.

Every entry is ``Y[i, j] = phi(xi[i], eta[j], zeta[i, j])`` with i.i.d.
uniform latents, so holding a subset of latents fixed and redrawing the rest
realises conditioning on that subset.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import special, stats

GAUSSIAN = "gaussian_iid"
POISSON = "poisson_bedd"
OVERDISPERSED = "overdispersed_poisson_bedd"
VARIANTS = (GAUSSIAN, POISSON, OVERDISPERSED)

# uniforms are (k + 1/2) / 2**52 so that the 52-bit integer k is recoverable
_UBITS = 52
_HALF = 26

_ROLE_XI, _ROLE_ETA, _ROLE_ZETA = 0, 1, 2


# -- random streams ----------------------------------------------------------

def tag_id(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    return zlib.crc32(str(tag).encode())


def _flat(key) -> list:
    if isinstance(key, (list, tuple)):
        return [x for k in key for x in _flat(k)]
    return [tag_id(key)]


def stream(seed, *tags) -> np.random.Generator:
    """Independent generator keyed by ``(seed, *tags)``; ``seed`` may be a sequence."""
    entropy = _flat(seed) + _flat(list(tags))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def uniforms(rng: np.random.Generator, shape) -> np.ndarray:
    """Open-interval uniforms on the 2**-52 grid."""
    k = rng.integers(0, 1 << _UBITS, size=shape, dtype=np.int64)
    return (k + 0.5) / float(1 << _UBITS)


def split_uniform(u: np.ndarray):
    """Two independent uniforms carried by the bits of one grid uniform."""
    k = np.floor(np.asarray(u) * float(1 << _UBITS)).astype(np.int64)
    hi = k >> _HALF
    lo = k & ((1 << _HALF) - 1)
    scale = float(1 << _HALF)
    return (hi + 0.5) / scale, (lo + 0.5) / scale


# -- degree functions --------------------------------------------------------

@dataclass(frozen=True)
class DegreeFunction:
    """``constant`` (f = 1) or ``power`` with f(u) = (a+1) u**a; both integrate to 1."""

    family: str = "constant"
    exponent: float = 0.0

    def __post_init__(self):
        if self.family not in ("constant", "power"):
            raise ValueError(f"unknown degree family {self.family!r}")
        if self.exponent < 0:
            raise ValueError("exponent must be >= 0")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "constant":
            return np.ones_like(u)
        a = self.exponent
        return (a + 1.0) * u ** a

    @classmethod
    def parse(cls, text: str) -> "DegreeFunction":
        """``"const"`` / ``"constant"`` / ``"power:<a>"``."""
        if text in ("const", "constant", "1"):
            return cls()
        family, _, a = text.partition(":")
        if family != "power" or not a:
            raise ValueError(f"cannot parse degree function {text!r}")
        return cls("power", float(a))

    def label(self) -> str:
        return "constant" if self.family == "constant" else f"power:{self.exponent!r}"


def moment(d: DegreeFunction, k: int) -> float:
    """Closed-form integral of f**k over [0, 1]."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if d.family == "constant":
        return 1.0
    a = d.exponent
    return (a + 1.0) ** k / (a * k + 1.0)


def moment_exact(d: DegreeFunction, k: int):
    """``moment`` as a Fraction when the exponent is a dyadic float, else a float."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if d.family == "constant":
        return Fraction(1)
    a = Fraction(d.exponent)
    if a.denominator > 1 << 8:
        return moment(d, k)
    return (a + 1) ** k / (a * k + 1)


def power_exponent_for_f2(f2: float) -> float:
    """Exponent a of the power family with (a+1)^2/(2a+1) = f2 (f2 >= 1)."""
    if f2 < 1:
        raise ValueError("F2 >= 1 for any density")
    # a^2 + (2 - 2 f2) a + (1 - f2) = 0, positive root
    b = 2.0 - 2.0 * f2
    return (-b + np.sqrt(b * b - 4.0 * (1.0 - f2))) / 2.0


# -- mixing laws for overdispersion -----------------------------------------

def gamma_mixing(u, alpha: float):
    """Quantile transform to a mean-1, variance-alpha Gamma law."""
    if alpha == 0:
        return np.ones_like(np.asarray(u, dtype=float))
    return special.gammaincinv(1.0 / alpha, u) * alpha


MIXING = {"gamma": gamma_mixing}


# -- models ------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    variant: str = GAUSSIAN
    lam: float = 1.0
    f: DegreeFunction = field(default_factory=DegreeFunction)
    g: DegreeFunction = field(default_factory=DegreeFunction)
    alpha: float = 0.0
    mixing: str = "gamma"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown model variant {self.variant!r}")
        if self.lam <= 0:
            raise ValueError("lambda must be > 0")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.mixing not in MIXING:
            raise ValueError(f"unknown mixing family {self.mixing!r}")

    @classmethod
    def gaussian(cls) -> "ModelSpec":
        return cls(GAUSSIAN)

    @classmethod
    def poisson(cls, lam=1.0, f=None, g=None) -> "ModelSpec":
        return cls(POISSON, lam, f or DegreeFunction(), g or DegreeFunction())

    @classmethod
    def overdispersed(cls, lam=1.0, f=None, g=None, alpha=0.0, mixing="gamma") -> "ModelSpec":
        return cls(OVERDISPERSED, lam, f or DegreeFunction(), g or DegreeFunction(), alpha, mixing)

    def realize(self, xi, eta, zeta) -> np.ndarray:
        """phi applied entrywise; ``xi``/``eta`` broadcast against ``zeta``."""
        zeta = np.asarray(zeta, dtype=float)
        if self.variant == GAUSSIAN:
            return special.ndtri(zeta)
        mu = self.lam * self.f(xi) * self.g(eta)
        mu = np.broadcast_to(mu, zeta.shape)
        if self.variant == POISSON or self.alpha == 0:
            return poisson_quantile(zeta, mu)
        u_mix, u_count = split_uniform(zeta)
        w = MIXING[self.mixing](u_mix, self.alpha)
        return poisson_quantile(u_count, mu * w)

    def mixing_weights(self, zeta) -> np.ndarray:
        """The W_ij carried by each edge latent (ones unless overdispersed)."""
        zeta = np.asarray(zeta, dtype=float)
        if self.variant != OVERDISPERSED or self.alpha == 0:
            return np.ones_like(zeta)
        return MIXING[self.mixing](split_uniform(zeta)[0], self.alpha)

    def as_dict(self) -> dict:
        return {"variant": self.variant, "lambda": self.lam, "f": self.f.label(),
                "g": self.g.label(), "alpha": self.alpha, "mixing": self.mixing}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(d["variant"], float(d.get("lambda", 1.0)),
                   DegreeFunction.parse(d.get("f", "constant")),
                   DegreeFunction.parse(d.get("g", "constant")),
                   float(d.get("alpha", 0.0)), d.get("mixing", "gamma"))


def poisson_quantile(u, mu) -> np.ndarray:
    """Smallest k with P(Poisson(mu) <= k) >= u, by sequential search."""
    u = np.asarray(u, dtype=float)
    mu = np.asarray(mu, dtype=float)
    shape = np.broadcast_shapes(u.shape, mu.shape)
    u = np.broadcast_to(u, shape).ravel()
    mu = np.broadcast_to(mu, shape).ravel()
    out = np.zeros(u.shape, dtype=float)
    big = mu > 500.0
    if big.any():
        out[big] = stats.poisson.ppf(u[big], mu[big])
    idx = np.flatnonzero(~big)
    lam = mu[idx]
    uu = u[idx]
    pk = np.exp(-lam)
    cdf = pk.copy()
    k = np.zeros(idx.size)
    active = np.flatnonzero(uu > cdf)
    while active.size:
        k[active] += 1.0
        pk[active] *= lam[active] / k[active]
        cdf[active] += pk[active]
        still = uu[active] > cdf[active]
        # a cdf stuck below u by rounding: stop once far into the tail
        stuck = pk[active] < 1e-300
        active = active[still & ~stuck]
    out[idx] = k
    return out.reshape(shape)


def analytic_variance(model: ModelSpec) -> float:
    """Variance of a single entry."""
    if model.variant == GAUSSIAN:
        return 1.0
    lam = model.lam
    f2g2 = moment(model.f, 2) * moment(model.g, 2)
    if model.variant == POISSON:
        return lam ** 2 * (f2g2 - 1.0) + lam
    return lam ** 2 * (f2g2 * (model.alpha + 1.0) - 1.0) + lam


def analytic_mean(model: ModelSpec) -> float:
    return 0.0 if model.variant == GAUSSIAN else model.lam


# -- samples -----------------------------------------------------------------

@dataclass(frozen=True)
class AhkSample:
    model: ModelSpec
    xi: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    Y: np.ndarray
    seed: Optional[int] = None

    @property
    def m(self) -> int:
        return self.xi.shape[0]

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    def regenerate(self) -> np.ndarray:
        return self.model.realize(self.xi[:, None], self.eta[None, :], self.zeta)


def draw_latents(seed, m: int, n: int, batch=()):
    """Latent arrays of shapes batch+(m,), batch+(n,), batch+(m, n)."""
    batch = tuple(batch)
    xi = uniforms(stream(seed, _ROLE_XI), batch + (m,))
    eta = uniforms(stream(seed, _ROLE_ETA), batch + (n,))
    zeta = uniforms(stream(seed, _ROLE_ZETA), batch + (m, n))
    return xi, eta, zeta


def sample(model: ModelSpec, m: int, n: int, seed) -> AhkSample:
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be >= 1")
    xi, eta, zeta = draw_latents(seed, m, n)
    y = model.realize(xi[:, None], eta[None, :], zeta)
    for a in (xi, eta, zeta, y):
        a.setflags(write=False)
    return AhkSample(model, xi, eta, zeta, y, seed)


def resample_given(model: ModelSpec, base: AhkSample, g, seed) -> AhkSample:
    """Keep the latents of H(g) from ``base`` and redraw all others.

    ``g`` is a labeled :class:`~artifact.graphs.BipartiteGraph` whose labels
    are row/column indices of ``base``.
    """
    rows, cols = list(g.rows), list(g.cols)
    if any(not 0 <= i < base.m for i in rows) or any(not 0 <= j < base.n for j in cols):
        raise IndexError("graph labels outside the sample dimensions")
    xi, eta, zeta = draw_latents(seed, base.m, base.n)
    xi[rows] = base.xi[rows]
    eta[cols] = base.eta[cols]
    for i, j in g.global_edges():
        zeta[i, j] = base.zeta[i, j]
    y = model.realize(xi[:, None], eta[None, :], zeta)
    for a in (xi, eta, zeta, y):
        a.setflags(write=False)
    return AhkSample(model, xi, eta, zeta, y, seed)


def with_alpha(model: ModelSpec, alpha: float) -> ModelSpec:
    return replace(model, alpha=alpha)
