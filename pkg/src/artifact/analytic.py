"""Closed-form conditional expectations of h3, h6 under the BEDD models.

Identifiers ``F.1`` .. ``F.11`` cover h3 under Poisson-BEDD and ``G.1`` ..
``G.8`` cover h6 under the overdispersed model, numbered in order of the
conditioning sets below. Each also has a descriptive alias.

Inputs are keyword arguments: ``lam``, ``f``, ``g`` (DegreeFunction),
``alpha`` and whichever of ``xi1, xi2, eta1, eta2, Y11, Y12, Y21, rho`` the
formula uses. Latent and entry arguments may be numpy arrays.
"""

from __future__ import annotations

import numpy as np

from .models import DegreeFunction, moment


def _h3_xi1xi2(lam, f, g, a, v):
    f1, f2 = f(v["xi1"]), f(v["xi2"])
    return lam ** 2 / 2 * (f1 - f2) ** 2


def _h3_eta1eta2(lam, f, g, a, v):
    return lam ** 2 * (moment(f, 2) - 1) * g(v["eta1"]) * g(v["eta2"])


def _h3_xi1eta1(lam, f, g, a, v):
    f1, g1 = f(v["xi1"]), g(v["eta1"])
    return lam ** 2 / 2 * (f1 ** 2 - 2 * f1 + moment(f, 2)) * g1


def _h3_xi1eta1z11(lam, f, g, a, v):
    f1, g1 = f(v["xi1"]), g(v["eta1"])
    return lam / 2 * (f1 - 1) * v["Y11"] + lam ** 2 / 2 * (moment(f, 2) - f1) * g1


def _h3_xi1xi2eta1(lam, f, g, a, v):
    f1, f2, g1 = f(v["xi1"]), f(v["xi2"]), g(v["eta1"])
    return lam ** 2 / 2 * (f1 - f2) ** 2 * g1


def _h3_xi1xi2eta1z11(lam, f, g, a, v):
    f1, f2, g1 = f(v["xi1"]), f(v["xi2"]), g(v["eta1"])
    return lam / 2 * (f1 - f2) * v["Y11"] + lam ** 2 / 2 * (f2 - f1) * f2 * g1


def _h3_xi1xi2eta1z11z21(lam, f, g, a, v):
    f1, f2 = f(v["xi1"]), f(v["xi2"])
    return lam / 2 * (f1 - f2) * (v["Y11"] - v["Y21"])


def _h3_xi1eta1eta2(lam, f, g, a, v):
    f1, g1, g2 = f(v["xi1"]), g(v["eta1"]), g(v["eta2"])
    return lam ** 2 / 2 * (f1 ** 2 - 2 * f1 + moment(f, 2)) * g1 * g2


def _h3_xi1eta1eta2z11(lam, f, g, a, v):
    f1, g1, g2 = f(v["xi1"]), g(v["eta1"]), g(v["eta2"])
    return lam / 2 * (f1 - 1) * g2 * v["Y11"] + lam ** 2 / 2 * (moment(f, 2) - f1) * g1 * g2


def _h3_star(lam, f, g, a, v):
    g1, g2 = g(v["eta1"]), g(v["eta2"])
    y11, y12 = v["Y11"], v["Y12"]
    return 0.5 * y11 * y12 - lam / 2 * (g2 * y11 + g1 * y12) + lam ** 2 / 2 * moment(f, 2) * g1 * g2


def _h3_star_second_moment(lam, f, g, a, v):
    F2, F3, F4 = (moment(f, k) for k in (2, 3, 4))
    G2 = moment(g, 2)
    return (lam ** 2 / 4 * F2 + lam ** 3 / 2 * (F3 - 2 * F2 + 1) * G2
            + lam ** 4 / 4 * (F4 - 4 * F3 + 3 * F2 ** 2) * G2 ** 2)


def _h6_mean(lam, f, g, a, v):
    return lam ** 3 * moment(f, 2) * moment(g, 2) * a


def _h6_xi1(lam, f, g, a, v):
    f1 = f(v["xi1"])
    return lam ** 3 / 2 * f1 * (f1 + moment(f, 2)) * moment(g, 2) * a


def _h6_eta1(lam, f, g, a, v):
    g1 = g(v["eta1"])
    return lam ** 3 / 2 * moment(f, 2) * g1 * (g1 + moment(g, 2)) * a


def _h6_xi1xi2(lam, f, g, a, v):
    f1, f2 = f(v["xi1"]), f(v["xi2"])
    return lam ** 3 / 2 * (f1 ** 2 * f2 + f2 ** 2 * f1) * moment(g, 2) * a


def _h6_eta1eta2(lam, f, g, a, v):
    g1, g2 = g(v["eta1"]), g(v["eta2"])
    return lam ** 3 / 2 * moment(f, 2) * (g1 ** 2 * g2 + g2 ** 2 * g1) * a


def _h6_xi1eta1(lam, f, g, a, v):
    f1, g1 = f(v["xi1"]), g(v["eta1"])
    F2, G2 = moment(f, 2), moment(g, 2)
    return lam ** 3 / 4 * f1 * g1 * (f1 * g1 + f1 * G2 + F2 * g1 + F2 * G2) * a


def _h6_xi1eta1z11(lam, f, g, a, v):
    f1, g1, y = f(v["xi1"]), g(v["eta1"]), v["Y11"]
    F2, G2 = moment(f, 2), moment(g, 2)
    return (lam ** 3 / 4 * f1 * g1 * (f1 * G2 * (a + 1) + F2 * g1 * (a + 1) - F2 * G2)
            + lam ** 2 / 4 * y * (F2 * G2 * (a + 1) - f1 * G2 - F2 * g1 - f1 * g1)
            + lam / 4 * y * (y - 1))


def _h6_sigma2(lam, f, g, a, v):
    rho = v["rho"]
    F2, F3, G2, G3 = moment(f, 2), moment(f, 3), moment(g, 2), moment(g, 3)
    return lam ** 4 / (rho * (1 - rho)) * (lam * (F3 - F2 ** 2) * (G3 - G2 ** 2) + 2 * F2 * G2)


_TABLE = {
    "F.1": ("h3|xi1,xi2", _h3_xi1xi2),
    "F.2": ("h3|eta1,eta2", _h3_eta1eta2),
    "F.3": ("h3|xi1,eta1", _h3_xi1eta1),
    "F.4": ("h3|xi1,eta1,zeta11", _h3_xi1eta1z11),
    "F.5": ("h3|xi1,xi2,eta1", _h3_xi1xi2eta1),
    "F.6": ("h3|xi1,xi2,eta1,zeta11", _h3_xi1xi2eta1z11),
    "F.7": ("h3|xi1,xi2,eta1,zeta11,zeta21", _h3_xi1xi2eta1z11z21),
    "F.8": ("h3|xi1,eta1,eta2", _h3_xi1eta1eta2),
    "F.9": ("h3|xi1,eta1,eta2,zeta11", _h3_xi1eta1eta2z11),
    "F.10": ("h3|xi1,eta1,eta2,zeta11,zeta12", _h3_star),
    "F.11": ("E[(h3|K12)^2]", _h3_star_second_moment),
    "G.1": ("E[h6]", _h6_mean),
    "G.2": ("h6|xi1", _h6_xi1),
    "G.3": ("h6|eta1", _h6_eta1),
    "G.4": ("h6|xi1,xi2", _h6_xi1xi2),
    "G.5": ("h6|eta1,eta2", _h6_eta1eta2),
    "G.6": ("h6|xi1,eta1", _h6_xi1eta1),
    "G.7": ("h6|xi1,eta1,zeta11", _h6_xi1eta1z11),
    "G.8": ("sigma6^2", _h6_sigma2),
}

ALIASES = {alias: key for key, (alias, _) in _TABLE.items()}
ANALYTIC_IDS = tuple(_TABLE)


def analytic_cond_exp(id: str, lam: float = 1.0, f: DegreeFunction = None,
                      g: DegreeFunction = None, alpha: float = 0.0, **values):
    """Evaluate closed form ``id`` (or its alias) at the given inputs."""
    key = ALIASES.get(id, id)
    if key not in _TABLE:
        raise KeyError(f"unknown analytic id {id!r}; choose from {ANALYTIC_IDS}")
    f = f or DegreeFunction()
    g = g or DegreeFunction()
    fn = _TABLE[key][1]
    vals = {k: np.asarray(v, dtype=float) for k, v in values.items()}
    try:
        out = fn(lam, f, g, alpha, vals)
    except KeyError as e:
        raise ValueError(f"{key} needs input {e.args[0]!r}") from None
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def conditioning_set(id: str) -> str:
    return _TABLE[ALIASES.get(id, id)][0]
