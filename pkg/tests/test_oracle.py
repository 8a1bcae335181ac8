import time

import numpy as np
import pytest

from graphs import build, c_half, const, even_edge, odd_k22, odd_k32, odd_k4, odd_triangle
from signedpsd.metpoly import met_membership, tight_flags, to_c
from signedpsd.oracle import (CATALOG_MODES, K32_FREE, WITH_K32_LEAVES, WITH_SPLITS, BestResidual, FoundPoint,
                              FoundTwo, LooksUnique, OracleError, all_cycles, feasibility_oracle, generate_instance,
                              met_oracle, random_weights, signed_graph_catalog, uniqueness_oracle)
from signedpsd.sgraph import ODD_K32, ODD_K4, SPLIT_JOIN, decompose, has_minor


def test_met_oracle_examples():
    g = odd_k4()
    assert met_oracle(g, const(g, 2 / 3))
    assert not met_oracle(odd_k22(), {"e": 0.3, "o": 0.5})
    allev = build(3, [("a", 0, 1, "even"), ("b", 1, 2, "even"), ("c", 0, 2, "even")])
    assert met_oracle(allev, {"a": 0.0, "b": 1.0, "c": 0.3})


def test_all_cycles_counts():
    assert len(all_cycles(odd_k4())) == 7
    assert len(all_cycles(odd_k32())) == 11
    with pytest.raises(RuntimeError):
        all_cycles(odd_k4(), limit=3)


def test_feasibility_triangle():
    g = odd_triangle()
    out = feasibility_oracle(g, c_half(g))
    assert isinstance(out, FoundPoint) and out.residual <= 1e-9
    assert np.allclose(np.diag(out.X), 1.0)
    assert np.all(out.X[~np.eye(3, dtype=bool)] <= -0.5 + 1e-4)


def test_feasibility_odd_k4_counterexample():
    g = odd_k4()
    start = time.perf_counter()
    out = feasibility_oracle(g, c_half(g), restarts=64)
    assert time.perf_counter() - start < 2.0
    assert isinstance(out, BestResidual) and not out.found
    assert out.residual >= 0.01
    # the residual bound follows from |sum p_i|^2 = 4 + 2 sum p_i.p_j >= 0
    assert met_membership(g, const(g, 2 / 3)).inside


def test_feasibility_even_edge():
    assert feasibility_oracle(even_edge(), {"e": 0.5}).found


def test_feasibility_no_edges():
    out = feasibility_oracle(build(3, []), {})
    assert out.found and np.allclose(np.diag(out.X), 1.0)


def test_uniqueness_examples():
    out = uniqueness_oracle(even_edge(), {"e": 0.5})
    assert isinstance(out, FoundTwo) and out.gap > 1e-6
    assert isinstance(uniqueness_oracle(odd_triangle(), c_half(odd_triangle())), LooksUnique)
    g = odd_k32()
    out = uniqueness_oracle(g, to_c(const(g, 0.5)))
    assert out.unique and np.allclose(out.X, np.eye(3), atol=1e-6)


def test_uniqueness_needs_a_feasible_point():
    g = odd_k4()
    with pytest.raises(OracleError):
        uniqueness_oracle(g, to_c(const(g, 0.8)), trials=4)


def test_generator_examples():
    g, x = generate_instance(1, 5, K32_FREE)
    assert not has_minor(g, ODD_K4) and not has_minor(g, ODD_K32)
    assert met_oracle(g, x) == met_membership(g, x).inside
    g, x = generate_instance(0, 8, WITH_SPLITS)
    tree = decompose(g)

    def kinds(node):
        yield node.kind
        for c in node.children:
            yield from kinds(c)

    assert SPLIT_JOIN in set(kinds(tree))


@pytest.mark.parametrize("kind", [K32_FREE, WITH_K32_LEAVES, WITH_SPLITS])
def test_generated_instances_are_odd_k4_free(kind):
    for seed in range(12):
        g, x = generate_instance(seed, 4 + seed % 4, kind, mode=["boundary", "tight", "inside", "raw"][seed % 4])
        assert g.is_connected() and g.n <= 4 + seed % 4 + 2
        assert not has_minor(g, ODD_K4)
        assert met_oracle(g, x) == met_membership(g, x).inside
        if kind == WITH_K32_LEAVES:
            assert has_minor(g, ODD_K32)


def test_generator_is_deterministic():
    a = generate_instance(7, 6, WITH_SPLITS)
    b = generate_instance(7, 6, WITH_SPLITS)
    assert a[0] == b[0] and a[1] == b[1]


def test_weight_modes():
    g, _ = generate_instance(3, 6, K32_FREE)
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert met_membership(g, random_weights(g, rng, "boundary")).inside
        x = random_weights(g, rng, "inside")
        assert met_membership(g, x).margin > 0
        x = random_weights(g, rng, "tight")
        f = tight_flags(g, x)
        assert all(f.tight[k] or f.degenerate[k] for k in x)
        assert not met_membership(g, random_weights(g, rng, "outside")).inside
        raw = random_weights(g, rng, "raw")
        assert all(abs(v * 12 - round(v * 12)) < 1e-12 for v in raw.values())


def test_catalog_shape():
    graphs = signed_graph_catalog()
    assert len(graphs) == 355
    assert graphs[0].n == 1
    assert all(g.is_connected() and g.n <= 5 and len(g.edges) <= 8 for g in graphs)
    assert sum(1 for g in graphs if not has_minor(g, ODD_K4)) == 339
    assert len(CATALOG_MODES) == 10


def test_catalog_membership_matches_oracle(catalog):
    for _, g, x, _ in catalog:
        assert met_membership(g, x).inside == met_oracle(g, x)
