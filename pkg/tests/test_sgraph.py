import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphs import bowtie, build, cycle, fig2_split, odd_k22, odd_k32, odd_k4, odd_triangle
from signedpsd.sgraph import (CUT_JOIN, LEAF_K32_FREE, LEAF_ODD_K32, ODD_K32, ODD_K4, SPLIT_JOIN, Edge, SignedGraph,
                              contract_even, decompose, find_cut_vertex, find_strong_2_split, has_minor, is_bipartite,
                              is_strong_2_split, is_virtual, resign)


@st.composite
def signed_graphs(draw, max_n=6, max_m=9):
    n = draw(st.integers(2, max_n))
    m = draw(st.integers(0, max_m))
    edges = []
    for k in range(m):
        u = draw(st.integers(0, n - 1))
        v = draw(st.integers(0, n - 1))
        edges.append(Edge(f"e{k}", u, v, draw(st.booleans())))
    return SignedGraph(n, tuple(edges))


def parity_of(g, ids):
    return sum(g.edge(i).odd for i in ids) % 2


def test_loops_dropped_and_ranges_checked():
    g = SignedGraph(2, (Edge("l", 1, 1, True), Edge("e", 0, 1, False)))
    assert g.ids == ["e"]
    with pytest.raises(ValueError):
        SignedGraph(2, (Edge("x", 0, 2, False),))
    with pytest.raises(ValueError):
        SignedGraph(2, (Edge("x", 0, 1, False), Edge("x", 1, 0, True)))


def test_resign_one_vertex_of_odd_triangle():
    h = resign(odd_triangle(), {0})
    assert not h.edge("a").odd and not h.edge("c").odd
    assert h.edge("b").odd


def test_resign_empty_and_range():
    g = odd_triangle()
    assert resign(g, set()) == g
    with pytest.raises(ValueError):
        resign(g, {3})


@given(signed_graphs(), st.sets(st.integers(0, 5)))
def test_resign_involution_keeps_ids(g, s):
    s = {w for w in s if w < g.n}
    h = resign(g, s)
    assert h.ids == g.ids
    assert resign(h, s) == g
    for e in g.edges:
        assert h.edge(e.id).odd == (e.odd ^ ((e.u in s) != (e.v in s)))


@settings(max_examples=40)
@given(signed_graphs(max_n=6, max_m=8), st.sets(st.integers(0, 5)))
def test_resign_keeps_cycle_parity(g, s):
    from signedpsd.oracle import all_cycles
    s = {w for w in s if w < g.n}
    h = resign(g, s)
    for cyc in all_cycles(g):
        assert parity_of(g, cyc) == parity_of(h, cyc)


def test_contract_even_path():
    g = build(3, [("a", 0, 1, "even"), ("b", 1, 2, "odd")])
    h, vmap = contract_even(g, "a")
    assert h.n == 2 and h.ids == ["b"]
    assert vmap == [0, 0, 1]


def test_contract_even_two_cycle_leaves_nothing():
    g = build(2, [("a", 0, 1, "even"), ("b", 0, 1, "even")])
    h, _ = contract_even(g, "a")
    assert h.n == 1 and h.edges == ()


def test_contract_with_pendant_keeps_parallel_pair_apart():
    # odd-K2^2 on {0, 1} and a pendant even edge 1-2; contracting the pendant keeps the pair intact
    g = build(3, [("e", 0, 1, "even"), ("o", 0, 1, "odd"), ("p", 1, 2, "even")])
    h, vmap = contract_even(g, "p")
    assert h.n == 2 and sorted(h.ids) == ["e", "o"]
    assert vmap[1] == vmap[2]
    # contracting the even edge of the pair turns the odd edge into a loop, which is dropped
    h2, _ = contract_even(g, "e")
    assert sorted(h2.ids) == ["p"]


def test_contract_odd_rejected():
    with pytest.raises(ValueError):
        contract_even(odd_triangle(), "a")


def test_is_bipartite_examples():
    ok, s = is_bipartite(cycle([False] * 4))
    assert ok and s == frozenset()
    ok, wit = is_bipartite(odd_triangle())
    assert not ok and sorted(wit) == ["a", "b", "c"]
    ok, wit = is_bipartite(odd_k22())
    assert not ok and sorted(wit) == ["e", "o"]


@given(signed_graphs())
def test_is_bipartite_witness(g):
    ok, out = is_bipartite(g)
    if ok:
        assert not resign(g, out).odd_edges()
    else:
        assert parity_of(g, out) == 1
        degree = {}
        for eid in out:
            e = g.edge(eid)
            degree[e.u] = degree.get(e.u, 0) + 1
            degree[e.v] = degree.get(e.v, 0) + 1
        assert all(d == 2 for d in degree.values())


def test_cut_vertex_of_bowtie():
    assert find_cut_vertex(bowtie()) == 2
    assert find_cut_vertex(odd_triangle()) is None


def test_strong_split_found():
    g = fig2_split()
    sp = find_strong_2_split(g)
    assert sp is not None and {sp.u, sp.v} == {0, 1}
    assert is_strong_2_split(g, sp.e1, sp.e2)


def test_strong_split_on_eight_vertices():
    # two odd-K3^2 blocks glued on {0, 1}, each side with its own 0-1 edge pair
    edges = []

    def k32(tag, a, b, c):
        for p, q in ((a, b), (b, c), (a, c)):
            edges.append((f"{tag}e{p}{q}", p, q, "even"))
            edges.append((f"{tag}o{p}{q}", p, q, "odd"))

    k32("L", 0, 1, 2)
    k32("R", 0, 1, 3)
    g = build(4, edges)
    sp = find_strong_2_split(g)
    assert sp is not None and {sp.u, sp.v} == {0, 1}
    # an eight-vertex instance: two odd pentagons through 0 and 1 with chords to further vertices
    big = build(8, [("a", 0, 2, "odd"), ("b", 2, 3, "even"), ("c", 3, 1, "even"), ("d", 0, 1, "even"),
                    ("e", 0, 4, "odd"), ("f", 4, 5, "even"), ("g", 5, 1, "even"), ("h", 0, 1, "odd"),
                    ("i", 2, 6, "odd"), ("j", 6, 3, "even"), ("k", 4, 7, "odd"), ("l", 7, 5, "even")])
    sp = find_strong_2_split(big)
    assert sp is not None
    assert is_strong_2_split(big, sp.e1, sp.e2)
    # brute force over all bipartitions agrees that one exists
    ids = big.ids
    assert any(is_strong_2_split(big, [i for k, i in enumerate(ids) if mask >> k & 1],
                                 [i for k, i in enumerate(ids) if not mask >> k & 1])
               for mask in range(1, 1 << (len(ids) - 1)))


def test_odd_k32_has_neither_split():
    g = odd_k32()
    assert find_cut_vertex(g) is None
    assert find_strong_2_split(g) is None


def test_minor_examples():
    assert has_minor(odd_k4(), ODD_K4)
    assert not has_minor(odd_k32(), ODD_K4)
    assert has_minor(odd_k32(), ODD_K32)
    assert not has_minor(odd_triangle(), ODD_K32)
    with pytest.raises(ValueError):
        has_minor(odd_k4(), "k5")


def test_minor_size_limit():
    g = build(9, [(f"e{k}", k, (k + 1) % 9, "odd") for k in range(9)] +
              [(f"f{k}", k, (k + 2) % 9, "even") for k in range(9)])
    with pytest.raises(ValueError):
        has_minor(g, ODD_K4)


def test_odd_k4_found_after_subdivision_and_resigning():
    # subdivide one edge of odd-K4 into an odd + even path, then resign a vertex
    g = build(5, [("01", 0, 1, "odd"), ("02", 0, 2, "odd"), ("03", 0, 3, "odd"), ("12", 1, 2, "odd"),
                  ("13", 1, 3, "odd"), ("24", 2, 4, "odd"), ("43", 4, 3, "even")])
    assert has_minor(g, ODD_K4)
    assert has_minor(resign(g, {1, 4}), ODD_K4)
    # an all-even K4 has no odd-K4 minor
    even_k4 = SignedGraph(4, tuple(Edge(e.id, e.u, e.v, False) for e in odd_k4().edges))
    assert not has_minor(even_k4, ODD_K4)


def test_minor_monotone_under_deletion(catalog):
    seen = set()
    for gi, g, _, free in catalog:
        if gi in seen or not free:
            continue
        seen.add(gi)
        for e in g.edges:
            rest = SignedGraph(g.n, tuple(f for f in g.edges if f.id != e.id))
            assert not has_minor(rest, ODD_K4)


def test_decompose_examples():
    t = decompose(odd_k32())
    assert t.kind == LEAF_ODD_K32 and not t.children
    assert decompose(odd_triangle()).kind == LEAF_K32_FREE
    t = decompose(bowtie())
    assert t.kind == CUT_JOIN and t.cut_vertex == 2 and len(t.children) == 2
    t = decompose(fig2_split())
    assert t.kind == SPLIT_JOIN and len(t.children) == 2
    for child in t.children:
        virt = [e for e in child.piece.edges if is_virtual(e.id)]
        assert sorted(e.odd for e in virt) == [False, True]
        assert len({frozenset((e.u, e.v)) for e in virt}) == 1
        assert not has_minor(child.piece, ODD_K32)


def _leaf_checks(tree):
    for leaf in tree.leaves():
        g = leaf.piece
        if g.n <= 2:
            continue
        assert find_cut_vertex(g) is None
        assert find_strong_2_split(g) is None
        assert (leaf.kind == LEAF_ODD_K32) != (not has_minor(g, ODD_K32))


def test_decompose_regluing_and_leaves(catalog):
    seen = set()
    for gi, g, _, free in catalog:
        if gi in seen or not free or not g.is_connected():
            continue
        seen.add(gi)
        tree = decompose(g)
        assert sorted(map(str, tree.real_edge_ids())) == sorted(map(str, g.ids))
        _leaf_checks(tree)


def test_decompose_generated_splits():
    from signedpsd.oracle import WITH_SPLITS, generate_instance
    kinds = []
    for seed in range(5):
        g, _ = generate_instance(seed, 8, WITH_SPLITS)
        tree = decompose(g)
        assert sorted(map(str, tree.real_edge_ids())) == sorted(map(str, g.ids))

        def walk(node):
            yield node.kind
            for c in node.children:
                yield from walk(c)

        kinds.append(SPLIT_JOIN in set(walk(tree)))
    assert any(kinds)


def test_decompose_needs_connected():
    with pytest.raises(ValueError):
        decompose(build(3, [("a", 0, 1, "odd")]))

