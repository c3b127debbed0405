import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from artifact import graphs as G
from artifact.graphs import BipartiteGraph


def _cycle_lengths(perm):
    seen, out = set(), []
    for s in range(len(perm)):
        if s in seen:
            continue
        n, x = 0, s
        while x not in seen:
            seen.add(x)
            x = perm[x]
            n += 1
        out.append(n)
    return out


def burnside_count(r, c):
    """Orbits of S_r x S_c on 2^(r x c) via cycle counting."""
    total = 0
    for s1 in itertools.permutations(range(r)):
        a = _cycle_lengths(s1)
        for s2 in itertools.permutations(range(c)):
            b = _cycle_lengths(s2)
            total += 2 ** sum(math.gcd(x, y) for x in a for y in b)
    return total // (math.factorial(r) * math.factorial(c))


def brute_aut(g):
    edges = set(g.edge_list())
    n = 0
    for s1 in itertools.permutations(range(g.r)):
        for s2 in itertools.permutations(range(g.c)):
            n += {(s1[i], s2[j]) for i, j in edges} == edges
    return n


@pytest.mark.parametrize("r,c", [(r, c) for r in range(4) for c in range(4)] + [(1, 4), (2, 4)])
def test_gamma_size_matches_burnside(r, c):
    assert len(G.enumerate_gamma(r, c)) == burnside_count(r, c)


def test_known_gamma_sizes():
    assert [len(G.enumerate_gamma(1, c)) for c in range(5)] == [1, 2, 3, 4, 5]
    assert len(G.enumerate_gamma(2, 2)) == 7
    assert len(G.enumerate_gamma(3, 3)) == 36


def test_gamma_sorted_and_distinct():
    for r, c in [(2, 2), (2, 3), (3, 3)]:
        cls = G.enumerate_gamma(r, c)
        keys = [(cl.representative.n_edges, cl.representative.edges) for cl in cls]
        assert keys == sorted(keys)
        assert [cl.class_id for cl in cls] == list(range(len(cls)))
        canon = {G.canonical_form(cl.representative).edges for cl in cls}
        assert len(canon) == len(cls)


@pytest.mark.parametrize("r,c", [(1, 2), (2, 2), (2, 3), (3, 3)])
def test_aut_counts_match_brute_force(r, c):
    for cl in G.enumerate_gamma(r, c):
        assert cl.aut_count == brute_aut(cl.representative)


def test_aut_examples():
    assert G.automorphism_count(BipartiteGraph.complete(1, 2)) == 2
    assert G.automorphism_count(BipartiteGraph.complete(1, 1)) == 1
    assert G.automorphism_count(BipartiteGraph.complete(2, 2)) == 4
    assert G.automorphism_count(BipartiteGraph(2, 2, 0)) == 4


@pytest.mark.parametrize("r,c", [(r, c) for r in range(4) for c in range(4)])
def test_orbit_identity(r, c):
    s = sum(Fraction(math.factorial(r) * math.factorial(c), cl.aut_count)
            for cl in G.enumerate_gamma(r, c))
    assert s == 2 ** (r * c)


@st.composite
def graphs(draw):
    r = draw(st.integers(0, 3))
    c = draw(st.integers(0, 3))
    mask = draw(st.integers(0, (1 << (r * c)) - 1)) if r * c else 0
    return BipartiteGraph(r, c, mask)


@settings(max_examples=100, deadline=None)
@given(graphs(), st.randoms(use_true_random=False))
def test_canonical_form_is_permutation_invariant(g, rnd):
    s1 = list(range(g.r))
    s2 = list(range(g.c))
    rnd.shuffle(s1)
    rnd.shuffle(s2)
    h = G.permute(g, s1, s2)
    assert G.canonical_form(h) == G.canonical_form(g)
    assert G.is_isomorphic(g, h)
    assert G.automorphism_count(h) == G.automorphism_count(g)
    assert G.is_connected(h) == G.is_connected(g)


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_orbit_stabilizer(g):
    images = set()
    for s1 in itertools.permutations(range(g.r)):
        for s2 in itertools.permutations(range(g.c)):
            images.add(G.permute(g, s1, s2).edges)
    assert len(images) * G.automorphism_count(g) == math.factorial(g.r) * math.factorial(g.c)


def test_connectivity():
    assert G.is_connected(BipartiteGraph.complete(1, 2))
    assert G.is_connected(BipartiteGraph(1, 0))
    assert G.is_connected(BipartiteGraph(0, 0))
    assert not G.is_connected(BipartiteGraph(1, 1, 0))
    assert not G.is_connected(BipartiteGraph.from_edges(2, 2, [(0, 0), (1, 1)]))
    assert G.is_connected(BipartiteGraph.from_edges(2, 2, [(0, 0), (0, 1), (1, 1)]))


def test_level_counts_of_small_classes():
    lvl2 = sum(len(G.enumerate_gamma(r, c)) for r, c in [(2, 0), (0, 2), (1, 1)])
    lvl3 = sum(len(G.enumerate_gamma(r, c)) for r, c in [(2, 1), (1, 2)])
    assert (lvl2, lvl3) == (4, 6)


def _count_labeled_subgraphs(p, q):
    return sum(math.comb(p, a) * math.comb(q, b) * 2 ** (a * b)
               for a in range(p + 1) for b in range(q + 1))


@pytest.mark.parametrize("p,q", [(1, 1), (1, 2), (2, 2), (2, 3)])
def test_labeled_subgraph_count(p, q):
    subs = list(G.labeled_subgraphs(BipartiteGraph.complete(p, q)))
    assert len(subs) == _count_labeled_subgraphs(p, q)
    assert len({s.key() for s in subs}) == len(subs)
    assert subs[0].n_nodes == 0


def test_subgraph_counts_k22_k12():
    assert len(list(G.labeled_subgraphs(BipartiteGraph.complete(2, 2)))) == 47
    assert len(list(G.labeled_subgraphs(BipartiteGraph.complete(1, 2)))) == 13


@pytest.mark.parametrize("p,q", [(2, 2), (2, 3)])
def test_isomorphic_subgraph_count(p, q):
    for r in range(p + 1):
        for c in range(q + 1):
            for cl in G.enumerate_gamma(r, c):
                expect = (math.comb(p, r) * math.comb(q, c) * math.factorial(r)
                          * math.factorial(c) // cl.aut_count)
                assert G.count_isomorphic_subgraphs(cl.representative, p, q) == expect


@pytest.mark.parametrize("m,n,p,q", [(2, 2, 1, 1), (3, 2, 1, 2), (3, 3, 2, 2), (4, 3, 2, 1)])
def test_pair_coincidence_literal_matches_grouped(m, n, p, q):
    for r in range(p + 1):
        for c in range(q + 1):
            for cl in G.enumerate_gamma(r, c):
                lit = G.pair_coincidence_count(m, n, p, q, cl, literal=True, budget=10 ** 8)
                grp = G.pair_coincidence_count(m, n, p, q, cl)
                assert lit == grp
                assert lit[0] == lit[1]


def test_pair_coincidence_negative_control():
    cl = G.class_of(BipartiteGraph.complete(1, 2))
    lhs, rhs = G.pair_coincidence_count(4, 4, 1, 2, cl, aut_count=cl.aut_count + 1)
    assert lhs != rhs


def test_pair_coincidence_budget():
    cl = G.enumerate_gamma(1, 1)[1]
    with pytest.raises(G.BudgetExceeded):
        G.pair_coincidence_count(5, 5, 2, 2, cl, literal=True, budget=10)


def test_graph_validation():
    with pytest.raises(G.GraphSizeError):
        BipartiteGraph(5, 1)
    with pytest.raises(ValueError):
        BipartiteGraph(1, 1, 2)
    with pytest.raises(ValueError):
        BipartiteGraph(2, 1, 0, (3, 1), None)
    with pytest.raises(ValueError):
        BipartiteGraph.from_edges(1, 1, [(0, 1)])
    with pytest.raises(ValueError):
        BipartiteGraph.labeled([0], [0], [(1, 0)])


def test_catalog_rows_and_lookup():
    cat = G.Catalog(2, 2)
    rows = cat.rows()
    assert set(rows[0]) == {"r", "c", "edges_hex", "aut", "connected", "class_id"}
    assert len(cat.gamma_minus()) == sum(len(G.enumerate_gamma(r, c))
                                         for r in range(3) for c in range(3)) - 1
    g = BipartiteGraph.from_edges(2, 2, [(1, 0)])
    assert cat.lookup(g).representative.edges == G.canonical_form(g).edges
    assert G.class_of(g) == cat.lookup(g)


def test_embed_places_labels():
    rep = BipartiteGraph.complete(1, 2)
    e = G.embed(rep, (3,), (1, 4))
    assert e.global_edges() == {(3, 1), (3, 4)}
    assert e.unlabeled() == rep
