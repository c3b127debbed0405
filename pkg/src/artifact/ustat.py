"""U-statistics of a matrix over row and column index subsets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .kernels import BUILTIN_NAMES, KernelError, KernelSpec, builtin

EXACT_TERM_LIMIT = 10 ** 8
_CHUNK = 1 << 18  # submatrices evaluated per batch


@dataclass(frozen=True)
class UStatResult:
    value: float
    kernel: str
    m: int
    n: int
    p: int
    q: int
    path: str

    def as_dict(self) -> dict:
        return {"value": self.value, "kernel": self.kernel, "m": self.m, "n": self.n,
                "p": self.p, "q": self.q, "path": self.path}


def _check_dims(y: np.ndarray, p: int, q: int) -> None:
    if y.ndim != 2:
        raise ValueError("Y must be a 2-d matrix")
    m, n = y.shape
    if m < p or n < q:
        raise ValueError(f"a {m}x{n} matrix has no {p}x{q} submatrix")


def _block_average(k: KernelSpec, y: np.ndarray, row_sets: np.ndarray, col_sets: np.ndarray) -> float:
    """Mean of k over every (row set, column set) pair, batched."""
    nr, nc = len(row_sets), len(col_sets)
    per = max(1, _CHUNK // max(nc, 1))
    partial = []
    for start in range(0, nr, per):
        rs = row_sets[start:start + per]
        # (b, p, n) -> (b, nc, p, q)
        sub = y[rs]
        sub = sub[:, :, col_sets]                      # (b, p, nc, q)
        sub = np.moveaxis(sub, 2, 1)
        partial.append(np.sum(k(sub), dtype=float))
    return float(math.fsum(partial)) / (nr * nc)


def _index_sets(size: int, k: int, ordered: bool) -> np.ndarray:
    gen = itertools.permutations(range(size), k) if ordered else itertools.combinations(range(size), k)
    out = np.array(list(gen), dtype=np.intp)
    return out.reshape(-1, k)


def u_exact(k: KernelSpec, Y) -> UStatResult:
    """Average of k over all C(m,p) C(n,q) increasing index subsets."""
    y = np.asarray(Y, dtype=float)
    _check_dims(y, k.p, k.q)
    if not k.symmetric:
        raise KernelError(f"kernel {k.name} is not flagged symmetric; use u_ordered or symmetrize")
    m, n = y.shape
    if math.comb(m, k.p) * math.comb(n, k.q) > EXACT_TERM_LIMIT:
        raise ValueError("too many terms for exact enumeration; use the fast path")
    v = _block_average(k, y, _index_sets(m, k.p, False), _index_sets(n, k.q, False))
    return UStatResult(v, k.name, m, n, k.p, k.q, "exact")


def u_ordered(k: KernelSpec, Y) -> UStatResult:
    """Average of k over ordered tuples of distinct rows and distinct columns."""
    y = np.asarray(Y, dtype=float)
    _check_dims(y, k.p, k.q)
    m, n = y.shape
    if math.perm(m, k.p) * math.perm(n, k.q) > EXACT_TERM_LIMIT:
        raise ValueError("too many terms for ordered enumeration")
    v = _block_average(k, y, _index_sets(m, k.p, True), _index_sets(n, k.q, True))
    return UStatResult(v, k.name, m, n, k.p, k.q, "ordered")


# -- O(mn) accumulators ------------------------------------------------------

def _cross(a: np.ndarray, b: np.ndarray) -> float:
    """Sum of a[i1, j1] * b[i2, j2] over i1 != i2 and j1 != j2."""
    total = a.sum() * b.sum()
    rows = np.dot(a.sum(axis=1), b.sum(axis=1))
    cols = np.dot(a.sum(axis=0), b.sum(axis=0))
    diag = np.sum(a * b)
    return float(total - rows - cols + diag)


def _sum_h1(y):
    r = y.sum(axis=1)
    return float(np.sum(r * r) - np.sum(y * y)) / 2.0


def _sum_h2(y):
    return _cross(y, y) / 4.0


def _sum_h4(y):
    return _cross(y * (y - 1.0), y) / 4.0


def _sum_h5(y):
    r = y.sum(axis=1, keepdims=True)
    c = y.sum(axis=0, keepdims=True)
    return float(np.sum(y * (r - y) * (c - y))) / 4.0


def u_fast(name: str, Y) -> UStatResult:
    """Builtin kernels in O(mn) from row sums, column sums and Hadamard products."""
    if name not in BUILTIN_NAMES:
        raise KernelError(f"no fast path for {name!r}; choose from {BUILTIN_NAMES}")
    k = builtin(name)
    y = np.asarray(Y, dtype=float)
    _check_dims(y, k.p, k.q)
    m, n = y.shape
    n12 = m * math.comb(n, 2)
    if k.p == 2:
        n22 = math.comb(m, 2) * math.comb(n, 2)
    if name == "h1":
        v = _sum_h1(y) / n12
    elif name == "h2":
        v = _sum_h2(y) / n22
    elif name == "h3":
        # the (2,2)-lift of h1 has the same U-statistic as h1 itself
        v = _sum_h1(y) / n12 - _sum_h2(y) / n22
    elif name == "h4":
        v = _sum_h4(y) / n22
    elif name == "h5":
        v = _sum_h5(y) / n22
    else:
        v = (_sum_h4(y) - _sum_h5(y)) / n22
    return UStatResult(float(v), name, m, n, k.p, k.q, "fast")


def h1_lift(y):
    """h1 written as a 2x2 kernel (average over both rows)."""
    return 0.5 * (y[..., 0, 0] * y[..., 0, 1] + y[..., 1, 0] * y[..., 1, 1])


def u_statistic(k, Y, path: str = "fast") -> UStatResult:
    """Dispatch on ``path``; ``k`` is a builtin name or a KernelSpec."""
    if path == "fast":
        return u_fast(k if isinstance(k, str) else k.name, Y)
    spec = builtin(k) if isinstance(k, str) else k
    if path == "exact":
        return u_exact(spec, Y)
    if path == "ordered":
        return u_ordered(spec, Y)
    raise ValueError(f"unknown path {path!r}")


def u_fast_batch(name: str, Y: np.ndarray) -> np.ndarray:
    """u_fast over a stack of matrices of shape (K, m, n)."""
    return np.array([u_fast(name, y).value for y in Y])
