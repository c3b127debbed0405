"""Kernels acting on p x q submatrices.

Evaluators take arrays of shape ``(..., p, q)`` and return ``(...)`` so that
Monte Carlo code can push whole batches of submatrices through one call.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    name: str
    p: int
    q: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    symmetric: bool = False

    def __call__(self, sub):
        return self.evaluator(np.asarray(sub, dtype=float))


def evaluate(k: KernelSpec, sub) -> float:
    sub = np.asarray(sub, dtype=float)
    if sub.shape != (k.p, k.q):
        raise KernelError(f"kernel {k.name} expects a {k.p}x{k.q} matrix, got {sub.shape}")
    return float(k.evaluator(sub))


# -- builtins ----------------------------------------------------------------

def _h1(y):
    return y[..., 0, 0] * y[..., 0, 1]


def _h2(y):
    return 0.5 * (y[..., 0, 0] * y[..., 1, 1] + y[..., 0, 1] * y[..., 1, 0])


def _h3(y):
    lift = 0.5 * (y[..., 0, 0] * y[..., 0, 1] + y[..., 1, 0] * y[..., 1, 1])
    return lift - _h2(y)


def _h4(y):
    a, b, c, d = y[..., 0, 0], y[..., 0, 1], y[..., 1, 0], y[..., 1, 1]
    return 0.25 * (a * (a - 1) * d + b * (b - 1) * c + c * (c - 1) * b + d * (d - 1) * a)


def _h5(y):
    a, b, c, d = y[..., 0, 0], y[..., 0, 1], y[..., 1, 0], y[..., 1, 1]
    return 0.25 * (a * b * d + b * d * c + d * c * a + c * a * b)


def _h6(y):
    return _h4(y) - _h5(y)


_BUILTINS = {
    "h1": (1, 2, _h1),
    "h2": (2, 2, _h2),
    "h3": (2, 2, _h3),
    "h4": (2, 2, _h4),
    "h5": (2, 2, _h5),
    "h6": (2, 2, _h6),
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin(name: str) -> KernelSpec:
    """The co-engagement (h1), cross-product (h2), heterogeneity (h3) and
    dispersion (h4, h5, h6 = h4 - h5) kernels."""
    try:
        p, q, fn = _BUILTINS[name]
    except KeyError:
        raise KernelError(f"unknown builtin kernel {name!r}; choose from {BUILTIN_NAMES}") from None
    return KernelSpec(name, p, q, fn, symmetric=True)


def constant(value: float, p: int = 1, q: int = 1) -> KernelSpec:
    return KernelSpec(f"const({value})", p, q,
                      lambda y: np.full(y.shape[:-2], float(value)), symmetric=True)


def from_function(fn, p: int, q: int, name: str = "user", seed: int = 0) -> KernelSpec:
    """Wrap a user evaluator; the symmetry flag comes from ``check_symmetry``."""
    k = KernelSpec(name, p, q, fn, symmetric=False)
    return KernelSpec(name, p, q, fn, symmetric=check_symmetry(k, trials=10, seed=seed))


def _permutation_pairs(p: int, q: int):
    return [(list(s1), list(s2)) for s1 in itertools.permutations(range(p))
            for s2 in itertools.permutations(range(q))]


def symmetrize(k: KernelSpec) -> KernelSpec:
    """Group average of ``k`` over all row and column permutations."""
    pairs = _permutation_pairs(k.p, k.q)
    fn = k.evaluator

    def h_s(y):
        total = 0.0
        for s1, s2 in pairs:
            total = total + fn(y[..., s1, :][..., :, s2])
        return total / len(pairs)

    return KernelSpec(f"sym({k.name})", k.p, k.q, h_s, symmetric=True)


def check_symmetry(k: KernelSpec, trials: int = 20, seed: int = 0, tol: float = 1e-12) -> bool:
    """Spot-check invariance under every permutation pair on random inputs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    pairs = _permutation_pairs(k.p, k.q)
    for _ in range(trials):
        y = rng.normal(size=(k.p, k.q))
        base = float(k.evaluator(y))
        for s1, s2 in pairs:
            if abs(float(k.evaluator(y[s1, :][:, s2])) - base) > tol:
                return False
    return True


def n_permutation_pairs(p: int, q: int) -> int:
    return math.factorial(p) * math.factorial(q)
