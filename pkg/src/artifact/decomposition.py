"""Graph-indexed projections of a kernel and their Monte Carlo moments.

A conditional expectation E[h | H(F)] is realised by keeping the latents of
H(F) from a base draw and redrawing all other latents.  Products of two such
realisations built from independent redraws are unbiased for the product of
the conditional expectations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .graphs import BipartiteGraph, GraphClass, embed, enumerate_gamma, labeled_subgraphs
from .kernels import KernelSpec
from .models import ModelSpec, stream, uniforms

CHUNK = 20_000


# -- plans -------------------------------------------------------------------

def _normalize(g: BipartiteGraph) -> BipartiteGraph:
    return BipartiteGraph.labeled(g.rows, g.cols, g.global_edges())


@dataclass(frozen=True)
class ProjectionPlan:
    """p^G = sum of coef * E[X | H(F)] over the listed F."""

    target: BipartiteGraph
    terms: tuple  # ((BipartiteGraph, Fraction), ...)

    def coefficient(self, f: BipartiteGraph) -> Fraction:
        k = f.key()
        for g, c in self.terms:
            if g.key() == k:
                return c
        return Fraction(0)

    def as_dict(self) -> dict:
        return {"target": str(self.target),
                "terms": [{"rows": list(g.rows), "cols": list(g.cols),
                           "edges": sorted(map(list, g.global_edges())), "coef": str(c)}
                          for g, c in self.terms]}


_PLAN_MEMO: dict = {}


def _plan_coeffs(g: BipartiteGraph) -> dict:
    key = g.key()
    if key in _PLAN_MEMO:
        return _PLAN_MEMO[key]
    out = {key: (g, Fraction(1))}
    for f in labeled_subgraphs(g):
        if f.key() == key:
            continue
        for k, (h, c) in _plan_coeffs(f).items():
            prev = out.get(k, (h, Fraction(0)))[1]
            out[k] = (h, prev - c)
    _PLAN_MEMO[key] = out
    return out


def projection_plan(g: BipartiteGraph) -> ProjectionPlan:
    """Expand p^G into conditional expectations with exact rational weights."""
    g = _normalize(g)
    coeffs = _plan_coeffs(g)
    terms = [(h, c) for h, c in coeffs.values() if c != 0]
    terms.sort(key=lambda t: (t[0].n_nodes, t[0].n_edges, t[0].rows, t[0].cols,
                              sorted(t[0].global_edges())))
    return ProjectionPlan(g, tuple(terms))


# -- Monte Carlo engine ------------------------------------------------------

@dataclass(frozen=True)
class MomentEstimate:
    value: float
    std_error: float
    samples: int
    estimand: str = ""

    @property
    def z(self) -> float:
        if self.std_error > 0:
            return self.value / self.std_error
        return 0.0 if self.value == 0 else math.copysign(math.inf, self.value)

    def as_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error,
                "samples": self.samples, "estimand": self.estimand}


def _from_products(prod: np.ndarray, estimand: str) -> MomentEstimate:
    n = prod.size
    se = float(np.std(prod, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return MomentEstimate(float(np.mean(prod)), se, n, estimand)


def _masks(f: BipartiteGraph, P: int, Q: int):
    rm = np.zeros(P, bool)
    cm = np.zeros(Q, bool)
    em = np.zeros((P, Q), bool)
    rm[list(f.rows)] = True
    cm[list(f.cols)] = True
    for i, j in f.global_edges():
        em[i, j] = True
    return rm, cm, em


class _Draws:
    """Base latents and two independent redraws for one chunk of replicates."""

    def __init__(self, seed, tag, chunk: int, R: int, P: int, Q: int):
        def latents(which):
            return (uniforms(stream(seed, tag, chunk, which, 0), (R, P)),
                    uniforms(stream(seed, tag, chunk, which, 1), (R, Q)),
                    uniforms(stream(seed, tag, chunk, which, 2), (R, P, Q)))
        self.base = latents(0)
        self.fresh = (None, latents(1), latents(2))
        self.P, self.Q = P, Q
        self._memo = {}

    def merged(self, f: BipartiteGraph, which: int):
        rm, cm, em = _masks(f, self.P, self.Q)
        bx, be, bz = self.base
        fx, fe, fz = self.fresh[which]
        return np.where(rm, bx, fx), np.where(cm, be, fe), np.where(em, bz, fz)

    def cond_value(self, model, kernel, f, which: int, block) -> np.ndarray:
        """h on ``block`` after keeping H(f) and redrawing the rest from set ``which``."""
        key = (f.key(), which, block)
        if key not in self._memo:
            xi, eta, zeta = self.merged(f, which)
            y = model.realize(xi[:, :, None], eta[:, None, :], zeta)
            ib, jb = block
            sub = y[:, list(ib)][:, :, list(jb)]
            self._memo[key] = np.asarray(kernel(sub), dtype=float)
        return self._memo[key]

    def plan_value(self, model, kernel, terms, which: int, block) -> np.ndarray:
        total = 0.0
        for f, c in terms:
            total = total + float(c) * self.cond_value(model, kernel, f, which, block)
        return total


def _universe(kernel: KernelSpec, graphs, blocks, universe=None):
    P = max([kernel.p] + [max(g.rows, default=-1) + 1 for g in graphs]
            + [max(b[0]) + 1 for b in blocks])
    Q = max([kernel.q] + [max(g.cols, default=-1) + 1 for g in graphs]
            + [max(b[1]) + 1 for b in blocks])
    if universe is not None:
        if P > universe[0] or Q > universe[1]:
            raise ValueError(f"labels need a {P}x{Q} index universe, got {universe}")
        P, Q = universe
    return P, Q


def _default_block(kernel: KernelSpec):
    return (tuple(range(kernel.p)), tuple(range(kernel.q)))


def _products(model, kernel, terms_a, terms_b, samples: int, seed, tag: str,
              block_a=None, block_b=None, probe=None, universe=None) -> np.ndarray:
    """Per-replicate products of factor A (redraw set 1) and factor B (set 2 or probe)."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    block_a = block_a or _default_block(kernel)
    block_b = block_b or _default_block(kernel)
    graphs = [f for f, _ in terms_a] + [f for f, _ in terms_b]
    P, Q = _universe(kernel, graphs, [block_a, block_b], universe)
    out = []
    done, chunk = 0, 0
    while done < samples:
        R = min(CHUNK, samples - done)
        d = _Draws(seed, tag, chunk, R, P, Q)
        a = d.plan_value(model, kernel, terms_a, 1, block_a)
        if probe is None:
            b = d.plan_value(model, kernel, terms_b, 2, block_b)
        else:
            b = probe(d)
        out.append(np.broadcast_to(a * b, (R,)))
        done += R
        chunk += 1
    return np.concatenate(out)


def cond_exp_pair_moment(model: ModelSpec, kernel: KernelSpec, F1: BipartiteGraph,
                         F2: BipartiteGraph, samples: int, seed=0,
                         blocks: Optional[Sequence] = None, universe=None) -> MomentEstimate:
    """Estimate E[ E[h_1 | H(F1)] E[h_2 | H(F2)] ].

    ``blocks = ((rows1, cols1), (rows2, cols2))`` places the two kernel
    evaluations; by default both use rows 0..p-1 and columns 0..q-1.
    """
    ba, bb = blocks if blocks is not None else (None, None)
    prod = _products(model, kernel, [(_normalize(F1), 1)], [(_normalize(F2), 1)],
                     samples, seed, "pair", ba, bb, universe=universe)
    return _from_products(prod, f"E[E[h|{F1}]E[h|{F2}]]")


def class_embedding(cls) -> BipartiteGraph:
    """Representative of a class placed on rows 0..r-1 and columns 0..c-1."""
    rep = cls.representative if isinstance(cls, GraphClass) else cls
    return embed(rep, tuple(range(rep.r)), tuple(range(rep.c)))


def _second_moment_products(model, kernel, g: BipartiteGraph, samples, seed):
    if g.r > kernel.p or g.c > kernel.q:
        raise ValueError(f"graph {g.r}x{g.c} does not fit a {kernel.p}x{kernel.q} kernel")
    plan = projection_plan(g)
    tag = f"sq:{g.r}:{g.c}:{g.edges}"
    return _products(model, kernel, plan.terms, plan.terms, samples, seed, tag)


def projection_second_moment(model: ModelSpec, kernel: KernelSpec, cls, samples: int,
                             seed=0) -> MomentEstimate:
    """Estimate E[(p^G)^2] for a class (or an unlabeled graph) via one embedding."""
    g = class_embedding(cls)
    prod = _second_moment_products(model, kernel, g, samples, seed)
    return _from_products(prod, f"E[(p^G)^2] {g.r}x{g.c} edges={g.edges_hex()}")


def plan_cross_moment(model: ModelSpec, kernel: KernelSpec, G1: BipartiteGraph,
                      G2: BipartiteGraph, samples: int, seed=0) -> MomentEstimate:
    """Estimate E[p^{G1} p^{G2}] for labeled G1, G2 inside the kernel's index block."""
    p1, p2 = projection_plan(G1), projection_plan(G2)
    prod = _products(model, kernel, p1.terms, p2.terms, samples, seed, "cross")
    return _from_products(prod, f"E[p^{G1} p^{G2}]")


def annihilation_check(model: ModelSpec, kernel: KernelSpec, F: BipartiteGraph,
                       F_sub: BipartiteGraph, samples: int, seed=0,
                       probe: Optional[Callable] = None) -> MomentEstimate:
    """Estimate E[p^F * g(H(F_sub))] for F_sub strictly inside F.

    ``probe(xi, eta, zeta)`` receives batched latents in which everything
    outside H(F_sub) is replaced by 1/2.  By default the probe is an
    independent realisation of E[h | H(F_sub)].
    """
    F, F_sub = _normalize(F), _normalize(F_sub)
    if not F_sub.is_subgraph_of(F) or F_sub.key() == F.key():
        raise ValueError("F_sub must be a proper subgraph of F")
    plan = projection_plan(F)
    if probe is None:
        fn = None
        terms_b = [(F_sub, 1)]
    else:
        terms_b = []

        def fn(d):
            P, Q = d.P, d.Q
            rm, cm, em = _masks(F_sub, P, Q)
            bx, be, bz = d.base
            return np.asarray(probe(np.where(rm, bx, 0.5), np.where(cm, be, 0.5),
                                    np.where(em, bz, 0.5)), dtype=float)
    prod = _products(model, kernel, plan.terms, terms_b, samples, seed, "annih", probe=fn,
                     universe=_universe(kernel, [F, F_sub], [_default_block(kernel)]))
    return _from_products(prod, f"E[p^{F} g(H({F_sub}))]")


# -- principal support -------------------------------------------------------

@dataclass(frozen=True)
class SupportPolicy:
    pilot: int = 20_000
    alpha: float = 0.01
    escalation: int = 4
    borderline_z: float = 2.0
    max_level: Optional[int] = None
    seed: int = 0


@dataclass
class SupportReport:
    principal_degree: Optional[int]
    support: list  # [(GraphClass, MomentEstimate)]
    all_connected: bool
    log: list = field(default_factory=list)
    note: str = ""

    @property
    def degeneracy_order(self) -> Optional[int]:
        return None if self.principal_degree is None else self.principal_degree - 1

    @property
    def support_classes(self) -> list:
        return [c for c, _ in self.support]

    def as_dict(self) -> dict:
        return {
            "principal_degree": self.principal_degree,
            "degeneracy_order": self.degeneracy_order,
            "all_connected": self.all_connected,
            "support": [dict(c.as_dict(), estimate=e.as_dict()) for c, e in self.support],
            "log": self.log,
            "note": self.note,
        }


def level_classes(p: int, q: int, k: int) -> list:
    """Classes with r + c = k, r <= p, c <= q."""
    out = []
    for r in range(min(p, k) + 1):
        c = k - r
        if c <= q:
            out.extend(enumerate_gamma(r, c))
    return out


def detect_principal_support(model: ModelSpec, kernel: KernelSpec,
                             policy: SupportPolicy = SupportPolicy()) -> SupportReport:
    """Scan levels upward and stop at the first with a significantly nonzero E[(p^G)^2]."""
    top = kernel.p + kernel.q if policy.max_level is None else min(policy.max_level, kernel.p + kernel.q)
    log = []
    for k in range(1, top + 1):
        classes = level_classes(kernel.p, kernel.q, k)
        thr = float(stats.norm.isf(policy.alpha / len(classes)))
        found = []
        for cls in classes:
            g = class_embedding(cls)
            seed = (policy.seed, k, cls.r, cls.c, cls.representative.edges)
            prod = _second_moment_products(model, kernel, g, policy.pilot, [*seed, 0])
            est = _from_products(prod, "")
            escalated = False
            if policy.borderline_z < est.z < thr:
                more = _second_moment_products(model, kernel, g,
                                               policy.escalation * policy.pilot, [*seed, 1])
                est = _from_products(np.concatenate([prod, more]), "")
                escalated = True
            nonzero = est.z > thr
            log.append({"level": k, "r": cls.r, "c": cls.c,
                        "edges_hex": cls.representative.edges_hex(),
                        "value": est.value, "std_error": est.std_error, "z": est.z,
                        "threshold": thr, "samples": est.samples,
                        "escalated": escalated, "nonzero": bool(nonzero)})
            if nonzero:
                found.append((cls, MomentEstimate(est.value, est.std_error, est.samples,
                                                  f"E[(p^G)^2] class {cls.class_id} of {cls.r}x{cls.c}")))
        if found:
            return SupportReport(k, found, all(c.connected for c, _ in found), log)
    return SupportReport(None, [], False, log,
                         note=f"no support found up to level {top}; kernel is a.s. constant")


# -- telescoping -------------------------------------------------------------

def telescoping_check(kernel: KernelSpec, model: ModelSpec, seed=0, inner: int = 64) -> float:
    """|sum over F of p^F - h| at one latent draw, all conditional means from shared inner draws."""
    P, Q = kernel.p, kernel.q
    full = BipartiteGraph.complete(P, Q)
    subs = [_normalize(f) for f in labeled_subgraphs(full)]
    base = (uniforms(stream(seed, "tele", 0), (1, P)),
            uniforms(stream(seed, "tele", 1), (1, Q)),
            uniforms(stream(seed, "tele", 2), (1, P, Q)))
    fresh = (uniforms(stream(seed, "tele", 3), (inner, P)),
             uniforms(stream(seed, "tele", 4), (inner, Q)),
             uniforms(stream(seed, "tele", 5), (inner, P, Q)))
    ce = {}
    for f in subs:
        rm, cm, em = _masks(f, P, Q)
        xi = np.where(rm, base[0], fresh[0])
        eta = np.where(cm, base[1], fresh[1])
        zeta = np.where(em, base[2], fresh[2])
        y = model.realize(xi[:, :, None], eta[:, None, :], zeta)
        ce[f.key()] = float(np.mean(kernel(y)))
    total = 0.0
    for f in subs:
        total += sum(float(c) * ce[h.key()] for h, c in projection_plan(f).terms)
    y0 = model.realize(base[0][:, :, None], base[1][:, None, :], base[2])
    return abs(total - float(kernel(y0)[0]))
