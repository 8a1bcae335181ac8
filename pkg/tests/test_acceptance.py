"""Acceptance criteria, one test each.  Every test records a PASS/FAIL line shown in the terminal summary."""
import json
import time

import networkx as nx
import numpy as np

from conftest import nondegenerate, report
from signedpsd.classify import INFEASIBLE, Tensegrity, classify_rigidity, classify_unique, super_stable_check
from signedpsd.cli import main
from signedpsd.complete import (PieceSolution, closure_error, cycle_stress, glue_certificates, numerical_rank,
                                realize_tight_cycle, solve)
from signedpsd.metpoly import lambda_even, lambda_odd, make_cycle, met_membership, tight_flags, to_c
from signedpsd.oracle import (K32_FREE, WITH_K32_LEAVES, WITH_SPLITS, BestResidual, feasibility_oracle,
                              generate_instance, met_oracle, uniqueness_oracle)
from signedpsd.sgraph import ODD_K32, Edge, SignedGraph, has_minor
from signedpsd.tightstruct import build_hypergraph, enumerate_tight_cycles, hypergraph_structure

RANK_TOL = 1e-7


def respects(g, c, xm, tol=1e-8):
    if not np.allclose(np.diag(xm), 1.0, atol=tol) or np.linalg.eigvalsh(xm)[0] < -tol:
        return False
    for e in g.edges:
        d = xm[e.u, e.v] - c[e.id]
        if (d > tol) if e.odd else (d < -tol):
            return False
    return True


def sign_feasible(g, dual):
    for e in g.edges:
        w = dual.edge_weights.get(e.id, 0.0)
        if (w < 0) if e.odd else (w > 0):
            return False
    return True


def random_tight_cycle(rng, length, prefix="c", first=None):
    """Odd cycle of the given length whose contributions are positive and sum to one.

    first: optional (odd, x) forcing the parity and weight of edge 0.
    """
    parities = list(rng.integers(0, 2, size=length).astype(bool))
    contrib = rng.dirichlet(np.ones(length))
    if first is not None:
        parities[0] = first[0]
        c0 = first[1] if not first[0] else 1.0 - first[1]
        contrib = np.concatenate([[c0], (1.0 - c0) * rng.dirichlet(np.ones(length - 1))])
    if sum(parities) % 2 == 0:
        parities[-1] = not parities[-1]
    g = SignedGraph(length, tuple(Edge(f"{prefix}{i}", i, (i + 1) % length, bool(p))
                                  for i, p in enumerate(parities)))
    x = {e.id: (1.0 - a if e.odd else a) for e, a in zip(g.edges, contrib)}
    if first is not None:
        x[g.edges[0].id] = first[1]
    return g, x


# ---------------------------------------------------------------- 1


def test_feasibility_equals_membership():
    kinds = [K32_FREE, WITH_K32_LEAVES, WITH_SPLITS]
    modes = ["boundary", "boundary", "tight", "inside", "outside", "raw"]
    start = time.perf_counter()
    bad = []
    count = 0
    for s in range(510):
        g, x = generate_instance(s, size=4 + s % 5, kind=kinds[s % 3], mode=modes[s % 6])
        assert g.n <= 10
        solved = solve(g, x=x).solved
        inside = met_membership(g, x).inside
        found = feasibility_oracle(g, to_c(x), seed=s).residual <= 1e-9
        count += 1
        if not solved == inside == found:
            bad.append((s, solved, inside, found))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 60.0 and count >= 500
    report(1, "feasibility equals membership", ok, f"{count} instances, {len(bad)} disagreements", elapsed)
    assert ok, bad[:5]


# ---------------------------------------------------------------- 2


def test_counterexample(tmp_path, capsys):
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    data = {"n": 4, "edges": [{"id": f"e{u}{v}", "u": u, "v": v, "sign": "odd", "c": -0.5} for u, v in pairs]}
    path = tmp_path / "odd_k4.json"
    path.write_text(json.dumps(data))
    start = time.perf_counter()
    code = main(["check-met", str(path)])
    rep = json.loads(capsys.readouterr().out)
    g = SignedGraph.build(4, [(f"e{u}{v}", u, v, "odd") for u, v in pairs])
    out = feasibility_oracle(g, {e.id: -0.5 for e in g.edges}, restarts=64)
    elapsed = time.perf_counter() - start
    ok = (code == 0 and abs(rep["margin"]) <= 1e-12 and isinstance(out, BestResidual) and out.residual >= 0.01
          and elapsed < 2.0)
    report(2, "odd-K4 counterexample", ok,
           f"exit {code}, margin {rep['margin']:.1e}, best residual {out.residual:.4f}", elapsed)
    assert ok


# ---------------------------------------------------------------- 3


def test_strict_complementarity(catalog_solved):
    start = time.perf_counter()
    checked = 0
    bad = []
    for gi, g, x, res in catalog_solved:
        if not res.solved or not nondegenerate(g, x):
            continue
        checked += 1
        om = res.dual.Omega
        norm = max(np.linalg.norm(om), 1.0)
        strict = set(tight_flags(g, x).edges("strictly_tight"))
        ok = (numerical_rank(res.max_rank.X, RANK_TOL) + numerical_rank(om, RANK_TOL) == g.n
              and set(res.dual.support()) <= strict
              and sign_feasible(g, res.dual)
              and np.linalg.eigvalsh(om)[0] >= -1e-8 * norm
              and abs(np.sum(om * res.max_rank.X)) <= 1e-8 * norm)
        if not ok:
            bad.append((gi, x))
    elapsed = time.perf_counter() - start
    ok = not bad and checked > 0
    report(3, "strict complementarity", ok, f"{checked - len(bad)}/{checked} nondegenerate solved instances", elapsed)
    assert ok, bad[:5]


# ---------------------------------------------------------------- 4


def test_rank_bounds(catalog_solved):
    start = time.perf_counter()
    k32 = {}
    checked = 0
    bad = []
    for gi, g, x, res in catalog_solved:
        if not res.solved:
            continue
        checked += 1
        if gi not in k32:
            k32[gi] = has_minor(g, ODD_K32)
        bound = 3 if k32[gi] else 2
        if res.low_rank.rank > bound:
            bad.append((gi, x, res.low_rank.rank))
    elapsed = time.perf_counter() - start
    ok = not bad and checked > 0
    report(4, "rank bounds", ok, f"{checked - len(bad)}/{checked} solved instances within bound", elapsed)
    assert ok, bad[:5]


# ---------------------------------------------------------------- 5


def test_uniqueness_classification(catalog_free):
    start = time.perf_counter()
    bad = []
    counts = {"unique": 0, "not unique": 0, "infeasible": 0}
    for gi, g, x in catalog_free:
        c = to_c(x)
        v = classify_unique(g, x=x)
        if v.cls == INFEASIBLE:
            counts["infeasible"] += 1
            if met_oracle(g, x):
                bad.append((gi, x, "infeasible"))
            continue
        probe = uniqueness_oracle(g, c)
        counts["unique" if v.unique else "not unique"] += 1
        if v.unique != probe.unique:
            bad.append((gi, x, v.cls))
        elif not v.unique:
            w = v.witness
            if w is None or not respects(g, c, w) or np.max(np.abs(w - v.solution)) <= 1e-6:
                bad.append((gi, x, "witness"))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 600.0
    detail = ", ".join(f"{k} {n}" for k, n in counts.items())
    report(5, "uniqueness classification", ok, f"{len(bad)} disagreements ({detail})", elapsed)
    assert ok, bad[:5]


# ---------------------------------------------------------------- 6


def test_tight_cycle_primitives():
    rng = np.random.default_rng(6)
    start = time.perf_counter()
    bad = []
    for trial in range(100):
        g, x = random_tight_cycle(rng, int(rng.integers(3, 10)))
        cyc = make_cycle(g, x, 0, g.ids)
        c = to_c(x)
        comp = realize_tight_cycle(g, x, cyc)
        err = max(abs(comp.X[e.u, e.v] - c[e.id]) for e in g.edges)
        dual = cycle_stress(g, x, cyc)
        ws = dual.edge_weights
        ok = (err <= 1e-9 and closure_error(g, x, cyc) <= 1e-9
              and g.n - numerical_rank(dual.Omega, RANK_TOL) == 2
              and all(abs(ws[e.id]) > 1e-12 for e in g.edges)
              and all((ws[e.id] > 0) == e.odd for e in g.edges))
        if not ok:
            bad.append((trial, x))
    elapsed = time.perf_counter() - start
    report(6, "tight-cycle primitives", not bad, f"{100 - len(bad)}/100 random tight cycles", elapsed)
    assert not bad, bad[:5]


# ---------------------------------------------------------------- 7


def _prefixed(g, x, prefix):
    h = SignedGraph(g.n, tuple(Edge(f"{prefix}{e.id}", e.u, e.v, e.odd) for e in g.edges))
    return h, {f"{prefix}{k}": v for k, v in x.items()}


def _piece(g, x):
    res = solve(g, x=x)
    if not res.strict_complementarity:
        return None
    return PieceSolution(g, x, res.low_rank.P, res.max_rank.P, res.dual)


def _forced_edges(piece):
    """Nondegenerate edges whose Gram entry agrees with c in both stored solutions."""
    c = to_c(piece.x)
    xl, xh = piece.low.T @ piece.low, piece.high.T @ piece.high
    return [e for e in piece.graph.edges if 1e-6 < piece.x[e.id] < 1 - 1e-6
            and abs(xl[e.u, e.v] - c[e.id]) <= 1e-10 and abs(xh[e.u, e.v] - c[e.id]) <= 1e-10]


def _glue_case(rng, seed, shared):
    kinds = [K32_FREE, WITH_K32_LEAVES, WITH_SPLITS]
    ga, xa = generate_instance(seed, size=4 + seed % 3, kind=kinds[seed % 3], mode="boundary")
    ga, xa = _prefixed(ga, xa, "A")
    a = _piece(ga, xa)
    if a is None:
        return None
    if shared == 1:
        gb, xb = generate_instance(seed + 1000, size=3 + seed % 3, kind=kinds[(seed + 1) % 3], mode="boundary")
        gb, xb = _prefixed(gb, xb, "B")
        b = _piece(gb, xb)
        if b is None:
            return None
        anchors = [int(rng.integers(ga.n))]
    else:
        forced = _forced_edges(a)
        if not forced:
            return None
        ea = forced[int(rng.integers(len(forced)))]
        gb, xb = random_tight_cycle(rng, int(rng.integers(3, 8)), prefix="B", first=(ea.odd, xa[ea.id]))
        b = _piece(gb, xb)
        anchors = [ea.u, ea.v]
    # B's vertices 0..shared-1 are identified with the anchors, the rest are new
    vmap_b = anchors + list(range(ga.n, ga.n + gb.n - shared))
    n = ga.n + gb.n - shared
    edges = list(ga.edges) + [Edge(e.id, vmap_b[e.u], vmap_b[e.v], e.odd) for e in gb.edges]
    parent = SignedGraph(n, tuple(edges))
    x = dict(xa, **xb)
    glued = glue_certificates(parent, [(a, range(ga.n)), (b, vmap_b)], x)
    return parent, x, glued


def test_gluing_preserves_strict_complementarity():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    done = {1: 0, 2: 0}
    bad = []
    seed = 0
    while min(done.values()) < 50 and seed < 2000:
        shared = 1 if seed % 2 == 0 else 2
        seed += 1
        if done[shared] >= 50:
            continue
        case = _glue_case(rng, seed, shared)
        if case is None:
            continue
        parent, x, glued = case
        done[shared] += 1
        c = to_c(x)
        om = glued.dual.Omega
        norm = max(np.linalg.norm(om), 1.0)
        ok = (numerical_rank(glued.high, RANK_TOL) + numerical_rank(om, RANK_TOL) == parent.n
              and np.linalg.eigvalsh(om)[0] >= -1e-8 * norm
              and np.max(np.abs(om @ glued.high.T), initial=0.0) <= 1e-8 * norm
              and sign_feasible(parent, glued.dual)
              and respects(parent, c, glued.high.T @ glued.high)
              and respects(parent, c, glued.low.T @ glued.low))
        if not ok:
            bad.append((seed, shared))
    elapsed = time.perf_counter() - start
    total = done[1] + done[2]
    ok = not bad and total == 100
    report(7, "gluing", ok, f"{total - len(bad)}/{total} glued pairs (cut vertex {done[1]}, shared pair {done[2]})",
           elapsed)
    assert ok, bad[:5]


# ---------------------------------------------------------------- 8


def test_hypergraph_acyclicity(catalog_free):
    start = time.perf_counter()
    checked = 0
    bad = []
    k32 = {}
    for gi, g, x in catalog_free:
        if gi not in k32:
            k32[gi] = has_minor(g, ODD_K32)
        if k32[gi] or not met_membership(g, x).inside:
            continue
        checked += 1
        if not hypergraph_structure(build_hypergraph(enumerate_tight_cycles(g, x), g.n)).acyclic:
            bad.append((gi, x))
    elapsed = time.perf_counter() - start
    ok = not bad and checked > 0
    report(8, "hypergraph acyclicity", ok, f"{checked - len(bad)}/{checked} odd-K3^2 free members", elapsed)
    assert ok, bad[:5]


# ---------------------------------------------------------------- 9


def _two_connected(g):
    if g.n == 2:
        return len(g.edges) >= 2
    simple = nx.Graph((e.u, e.v) for e in g.edges)
    return g.n >= 3 and simple.number_of_nodes() == g.n and nx.is_biconnected(simple)


def test_membership_engine_parity(catalog):
    start = time.perf_counter()
    met_bad = []
    lam_bad = []
    below_one = 0
    pairs = 0
    for gi, g, x, _ in catalog:
        if met_membership(g, x).inside != met_oracle(g, x):
            met_bad.append((gi, x))
        if not _two_connected(g):
            continue
        for u in range(g.n):
            for v in range(u + 1, g.n):
                for fn in (lambda_even, lambda_odd):
                    pairs += 1
                    walk = fn(g, x, u, v, mode="walk")
                    path = fn(g, x, u, v, mode="path")
                    if not (walk == path or abs(walk - path) <= 1e-9):
                        lam_bad.append((gi, u, v, fn.__name__, walk, path))
                        below_one += min(walk, path) < 1.0 - 1e-9
    elapsed = time.perf_counter() - start
    ok = not met_bad and not lam_bad
    report(9, "membership engine parity", ok,
           f"membership disagreements {len(met_bad)}/{len(catalog)}; walk/path lambda disagreements "
           f"{len(lam_bad)}/{pairs} ({below_one} below 1)", elapsed)
    assert ok, (met_bad[:3], lam_bad[:3])


# ---------------------------------------------------------------- 10


def test_super_stability_bridge(catalog_solved):
    start = time.perf_counter()
    bad = []
    counts = {True: 0, False: 0}
    for gi, g, x, res in catalog_solved:
        if not res.solved or not nondegenerate(g, x):
            continue
        t = Tensegrity.from_completion(g, res.max_rank)
        rigid = classify_rigidity(t, witness=False).unique
        stable = super_stable_check(t, res.dual).ok
        counts[rigid] += 1
        if rigid != stable:
            bad.append((gi, x, rigid, stable))
    elapsed = time.perf_counter() - start
    total = counts[True] + counts[False]
    ok = not bad and total > 0
    report(10, "super stability bridge", ok,
           f"{total - len(bad)}/{total} tensegrities agree ({counts[True]} rigid)", elapsed)
    assert ok, bad[:5]
