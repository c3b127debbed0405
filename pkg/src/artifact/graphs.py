"""Small labeled bipartite graphs, isomorphism classes and catalogs.

Graphs carry ``r`` row nodes and ``c`` column nodes and store their edges as
an integer bitmask in row-major order: bit ``i*c + j`` is set iff the edge
between row ``i`` and column ``j`` is present.  Optional ``row_labels`` /
``col_labels`` say which global rows/columns the local nodes stand for; they
are used for subgraphs of a fixed block ``K_{ib,jb}``.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Optional, Sequence

import numpy as np

R_MAX = 4
C_MAX = 4


class GraphSizeError(ValueError):
    """Raised when a graph exceeds the supported ``R_MAX x C_MAX`` size."""


class BudgetExceeded(RuntimeError):
    """Raised when an exhaustive count would be too large to enumerate."""


def _check_size(r: int, c: int) -> None:
    if r < 0 or c < 0 or r > R_MAX or c > C_MAX:
        raise GraphSizeError(f"graph size {r}x{c} outside 0..{R_MAX} x 0..{C_MAX}")


@dataclass(frozen=True)
class BipartiteGraph:
    r: int
    c: int
    edges: int = 0
    row_labels: Optional[tuple] = None
    col_labels: Optional[tuple] = None

    def __post_init__(self):
        _check_size(self.r, self.c)
        if self.edges < 0 or self.edges >> (self.r * self.c):
            raise ValueError(f"edge mask {self.edges:#x} does not fit {self.r}x{self.c}")
        for labels, size in ((self.row_labels, self.r), (self.col_labels, self.c)):
            if labels is None:
                continue
            if len(labels) != size:
                raise ValueError("label count does not match node count")
            if any(b <= a for a, b in zip(labels, labels[1:])):
                raise ValueError("labels must be strictly increasing")

    # construction helpers -------------------------------------------------
    @classmethod
    def complete(cls, r: int, c: int, row_labels=None, col_labels=None) -> "BipartiteGraph":
        return cls(r, c, (1 << (r * c)) - 1, _tup(row_labels), _tup(col_labels))

    @classmethod
    def from_edges(cls, r: int, c: int, edge_list) -> "BipartiteGraph":
        """Abstract graph from local ``(i, j)`` pairs (0-based)."""
        mask = 0
        for i, j in edge_list:
            if not (0 <= i < r and 0 <= j < c):
                raise ValueError(f"edge {(i, j)} outside {r}x{c}")
            mask |= 1 << (i * c + j)
        return cls(r, c, mask)

    @classmethod
    def labeled(cls, rows, cols, edge_set=()) -> "BipartiteGraph":
        """Labeled graph on global ``rows``/``cols`` with global edge pairs."""
        rows = tuple(sorted(rows))
        cols = tuple(sorted(cols))
        rpos = {v: k for k, v in enumerate(rows)}
        cpos = {v: k for k, v in enumerate(cols)}
        mask = 0
        for i, j in edge_set:
            if i not in rpos or j not in cpos:
                raise ValueError(f"edge {(i, j)} has an endpoint outside the node sets")
            mask |= 1 << (rpos[i] * len(cols) + cpos[j])
        return cls(len(rows), len(cols), mask, rows, cols)

    # views -----------------------------------------------------------------
    @property
    def n_edges(self) -> int:
        return bin(self.edges).count("1")

    @property
    def n_nodes(self) -> int:
        return self.r + self.c

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.edges >> (i * self.c + j) & 1)

    def edge_list(self) -> list:
        """Local ``(i, j)`` pairs of the edges, row-major."""
        return [(i, j) for i in range(self.r) for j in range(self.c) if self.has_edge(i, j)]

    @property
    def rows(self) -> tuple:
        return self.row_labels if self.row_labels is not None else tuple(range(self.r))

    @property
    def cols(self) -> tuple:
        return self.col_labels if self.col_labels is not None else tuple(range(self.c))

    def global_edges(self) -> frozenset:
        rows, cols = self.rows, self.cols
        return frozenset((rows[i], cols[j]) for i, j in self.edge_list())

    def key(self) -> tuple:
        """Hashable identity of a labeled graph: (rows, cols, edges)."""
        return (self.rows, self.cols, self.global_edges())

    def unlabeled(self) -> "BipartiteGraph":
        return BipartiteGraph(self.r, self.c, self.edges)

    def is_subgraph_of(self, other: "BipartiteGraph") -> bool:
        return (set(self.rows) <= set(other.rows)
                and set(self.cols) <= set(other.cols)
                and self.global_edges() <= other.global_edges())

    def edges_hex(self) -> str:
        return f"{self.edges:#x}"

    def __str__(self) -> str:
        return f"G[{self.r}x{self.c}, edges={sorted(self.global_edges())}]"


def _tup(x):
    return None if x is None else tuple(x)


# ---------------------------------------------------------------------------
# permutations acting on bitmasks

@lru_cache(maxsize=None)
def _perm_tables(r: int, c: int) -> np.ndarray:
    """Bit-position maps for every pair in S_r x S_c, shape (r!c!, r*c)."""
    tables = []
    for s1 in itertools.permutations(range(r)):
        for s2 in itertools.permutations(range(c)):
            tables.append([s1[i] * c + s2[j] for i in range(r) for j in range(c)])
    return np.array(tables, dtype=np.int64).reshape(len(tables), r * c)


def permute(g: BipartiteGraph, row_perm: Sequence[int], col_perm: Sequence[int]) -> BipartiteGraph:
    """Apply ``(row_perm, col_perm)``: local edge (i, j) moves to (row_perm[i], col_perm[j])."""
    mask = 0
    for i, j in g.edge_list():
        mask |= 1 << (row_perm[i] * g.c + col_perm[j])
    return BipartiteGraph(g.r, g.c, mask)


def _images(mask: int, r: int, c: int) -> np.ndarray:
    tables = _perm_tables(r, c)
    if r * c == 0:
        return np.zeros(len(tables), dtype=np.int64)
    bits = (mask >> np.arange(r * c)) & 1
    return (bits[None, :] << tables).sum(axis=1)


def canonical_form(g: BipartiteGraph) -> BipartiteGraph:
    """Unlabeled representative with the smallest bitmask over S_r x S_c."""
    _check_size(g.r, g.c)
    return BipartiteGraph(g.r, g.c, int(_images(g.edges, g.r, g.c).min()))


def automorphism_count(g: BipartiteGraph) -> int:
    _check_size(g.r, g.c)
    return int(np.count_nonzero(_images(g.edges, g.r, g.c) == g.edges))


def is_isomorphic(a: BipartiteGraph, b: BipartiteGraph) -> bool:
    return (a.r, a.c) == (b.r, b.c) and canonical_form(a).edges == canonical_form(b).edges


def is_connected(g: BipartiteGraph) -> bool:
    """Connectivity of the node set V1 u V2; the empty graph counts as connected."""
    n = g.r + g.c
    if n <= 1:
        return True
    adj = [[] for _ in range(n)]
    for i, j in g.edge_list():
        adj[i].append(g.r + j)
        adj[g.r + j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


# ---------------------------------------------------------------------------
# catalogs

@dataclass(frozen=True)
class GraphClass:
    representative: BipartiteGraph
    aut_count: int
    connected: bool
    class_id: int

    @property
    def r(self) -> int:
        return self.representative.r

    @property
    def c(self) -> int:
        return self.representative.c

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "c": self.c,
            "edges_hex": self.representative.edges_hex(),
            "aut": self.aut_count,
            "connected": self.connected,
            "class_id": self.class_id,
        }


@lru_cache(maxsize=None)
def _canonical_table(r: int, c: int) -> np.ndarray:
    """Canonical mask of every bitmask on r x c (vectorised over all masks)."""
    nbits = r * c
    masks = np.arange(1 << nbits, dtype=np.int64)
    if nbits == 0:
        return masks
    bits = (masks[:, None] >> np.arange(nbits)) & 1
    best = masks.copy()
    for table in _perm_tables(r, c):
        img = (bits << table[None, :]).sum(axis=1)
        np.minimum(best, img, out=best)
    return best


@lru_cache(maxsize=None)
def enumerate_gamma(r: int, c: int) -> tuple:
    """One class per isomorphism type of r x c graphs, sorted by (edges, mask)."""
    _check_size(r, c)
    reps = sorted(set(_canonical_table(r, c).tolist()), key=lambda m: (bin(m).count("1"), m))
    out = []
    for k, m in enumerate(reps):
        g = BipartiteGraph(r, c, m)
        out.append(GraphClass(g, automorphism_count(g), is_connected(g), k))
    return tuple(out)


@dataclass
class Catalog:
    """Classes of Gamma_{r,c} for all (r, c) up to (max_rows, max_cols)."""

    max_rows: int
    max_cols: int
    classes: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_size(self.max_rows, self.max_cols)
        for r in range(self.max_rows + 1):
            for c in range(self.max_cols + 1):
                self.classes[(r, c)] = enumerate_gamma(r, c)

    def gamma(self, r: int, c: int) -> tuple:
        return self.classes[(r, c)]

    def gamma_minus(self) -> list:
        """Classes with (0,0) < (r,c) <= (max_rows, max_cols)."""
        return [g for (r, c), cls in sorted(self.classes.items()) if (r, c) != (0, 0) for g in cls]

    def lookup(self, g: BipartiteGraph) -> GraphClass:
        canon = int(_canonical_table(g.r, g.c)[g.edges])
        for cl in self.classes[(g.r, g.c)]:
            if cl.representative.edges == canon:
                return cl
        raise KeyError(g)  # unreachable for in-range graphs

    def rows(self) -> list:
        return [cl.as_dict() for (r, c) in sorted(self.classes) for cl in self.classes[(r, c)]]


def class_of(g: BipartiteGraph) -> GraphClass:
    canon = canonical_form(g).edges
    for cl in enumerate_gamma(g.r, g.c):
        if cl.representative.edges == canon:
            return cl
    raise KeyError(g)


# ---------------------------------------------------------------------------
# labeled subgraphs

def labeled_subgraphs(g: BipartiteGraph) -> Iterator[BipartiteGraph]:
    """Every F with V(F) within V(G) and E(F) within E(G) on the kept nodes.

    Yields each subgraph once, carrying global labels, the empty graph first.
    """
    rows, cols = g.rows, g.cols
    gedges = g.global_edges()
    for nr in range(g.r + 1):
        for rsub in itertools.combinations(rows, nr):
            for nc in range(g.c + 1):
                for csub in itertools.combinations(cols, nc):
                    allowed = [(i, j) for i in rsub for j in csub if (i, j) in gedges]
                    for k in range(1 << len(allowed)):
                        es = [e for b, e in enumerate(allowed) if k >> b & 1]
                        yield BipartiteGraph.labeled(rsub, csub, es)


def embed(cls_rep: BipartiteGraph, rows: Sequence[int], cols: Sequence[int]) -> BipartiteGraph:
    """Place an abstract r x c graph on the given global rows/cols (in order)."""
    if len(rows) != cls_rep.r or len(cols) != cls_rep.c:
        raise ValueError("node count mismatch")
    return BipartiteGraph.labeled(rows, cols, [(rows[i], cols[j]) for i, j in cls_rep.edge_list()])


def count_isomorphic_subgraphs(g: BipartiteGraph, p: int, q: int) -> int:
    """Number of labeled subgraphs of K_{p,q} isomorphic to ``g`` (by scan)."""
    target = canonical_form(g.unlabeled()).edges
    n = 0
    for f in labeled_subgraphs(BipartiteGraph.complete(p, q)):
        if (f.r, f.c) == (g.r, g.c) and canonical_form(f.unlabeled()).edges == target:
            n += 1
    return n


# ---------------------------------------------------------------------------
# pair coincidence count (two embeddings, two permutation pairs)

def _block_images(rep: BipartiteGraph, ib: tuple, jb: tuple, first: bool) -> list:
    """Keys of Phi G_{ib,jb} for all Phi in S_p x S_q."""
    p, q = len(ib), len(jb)
    rows = ib[:rep.r] if first else ib[p - rep.r:]
    cols = jb[:rep.c] if first else jb[q - rep.c:]
    base = [(ib.index(rows[i]), jb.index(cols[j])) for i, j in rep.edge_list()]
    rpos = [ib.index(x) for x in rows]
    cpos = [jb.index(x) for x in cols]
    keys = []
    for s1 in itertools.permutations(range(p)):
        for s2 in itertools.permutations(range(q)):
            keys.append((
                frozenset(ib[s1[k]] for k in rpos),
                frozenset(jb[s2[k]] for k in cpos),
                frozenset((ib[s1[a]], jb[s2[b]]) for a, b in base),
            ))
    return keys


def pair_coincidence_closed_form(m: int, n: int, p: int, q: int, g: GraphClass) -> int:
    f = math.factorial
    return (f(m) * f(m - g.r) // f(m - p) ** 2) * (f(n) * f(n - g.c) // f(n - q) ** 2) * g.aut_count


def pair_coincidence_count(m: int, n: int, p: int, q: int, g: GraphClass,
                           budget: int = 5_000_000, literal: bool = False,
                           aut_count: Optional[int] = None) -> tuple:
    """Exhaustive left-hand count and closed-form right-hand count.

    Returns ``(brute_force, closed_form)``.  With ``literal=True`` the double
    sum over index pairs and permutation pairs is looped term by term;
    otherwise the same images are tallied once and matched by multiplicity.
    ``aut_count`` overrides the automorphism count used on the closed-form
    side (for negative controls).
    """
    if not (0 <= p <= m and 0 <= q <= n and g.r <= p and g.c <= q):
        raise ValueError("need r <= p <= m and c <= q <= n")
    blocks = [(ib, jb) for ib in itertools.combinations(range(m), p)
              for jb in itertools.combinations(range(n), q)]
    nperm = math.factorial(p) * math.factorial(q)
    rep = g.representative
    if literal:
        if (len(blocks) * nperm) ** 2 > budget:
            raise BudgetExceeded("literal pair enumeration exceeds budget")
        left = [_block_images(rep, ib, jb, True) for ib, jb in blocks]
        right = [_block_images(rep, ib, jb, False) for ib, jb in blocks]
        lhs = 0
        for a in left:
            for b in right:
                for ka in a:
                    for kb in b:
                        lhs += ka == kb
    else:
        if len(blocks) * nperm > budget:
            raise BudgetExceeded("pair enumeration exceeds budget")
        t1, t2 = Counter(), Counter()
        for ib, jb in blocks:
            t1.update(_block_images(rep, ib, jb, True))
            t2.update(_block_images(rep, ib, jb, False))
        lhs = sum(v * t2[k] for k, v in t1.items())
    gc = g if aut_count is None else GraphClass(rep, aut_count, g.connected, g.class_id)
    return lhs, pair_coincidence_closed_form(m, n, p, q, gc)
