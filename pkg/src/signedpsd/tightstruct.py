"""Tight odd cycles, the hypergraph they induce, and the reduction of degenerate edges."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Hashable, Iterable, List, Mapping, Tuple

import networkx as nx
import numpy as np

from .metpoly import CYCLE_CAP, TOL_X, Cycle, check_weights, is_degenerate, odd_cycles
from .sgraph import Edge, SignedGraph, contract_even

SINGLE_VERTEX = "SingleVertex"
SPANNING_HYPEREDGE = "SpanningHyperedge"
TRIANGLE = "Triangle"
OTHER = "Other"


@dataclass(frozen=True)
class TightCycleSet:
    cycles: Tuple[Cycle, ...]
    cap: int = CYCLE_CAP

    def __len__(self):
        return len(self.cycles)

    def __iter__(self):
        return iter(self.cycles)

    def long(self) -> List[Cycle]:
        """Cycles of length at least three."""
        return [c for c in self.cycles if len(c) >= 3]


def enumerate_tight_cycles(g: SignedGraph, x: Mapping[Hashable, float], tol: float = TOL_X, cap: int = CYCLE_CAP) -> TightCycleSet:
    check_weights(g, x)
    cycles = odd_cycles(g, x, 1.0 + tol, cap)
    if cycles and cycles[0].value < 1.0 - tol:
        raise ValueError("weights are outside the metric polytope")
    return TightCycleSet(tuple(cycles), cap)


@dataclass(frozen=True)
class Hypergraph:
    n: int
    hyperedges: Tuple[FrozenSet[int], ...]

    def covered(self) -> set:
        out = set()
        for h in self.hyperedges:
            out |= h
        return out


def merge_vertex_sets(sets: Iterable[Iterable[int]]) -> List[FrozenSet[int]]:
    """Merge sets sharing two or more elements until no such pair is left."""
    merged: List[set] = []
    for s in sets:
        cur = set(s)
        if not cur:
            continue
        changed = True
        while changed:
            changed = False
            keep = []
            for m in merged:
                if len(m & cur) >= 2:
                    cur |= m
                    changed = True
                else:
                    keep.append(m)
            merged = keep
        merged.append(cur)
    return sorted((frozenset(m) for m in merged), key=lambda s: sorted(s))


def build_hypergraph(cycles: Iterable[Cycle], n: int) -> Hypergraph:
    return Hypergraph(n, tuple(merge_vertex_sets(c.vertices for c in cycles)))


def classify_hypergraph(h: Hypergraph) -> str:
    if h.n == 1:
        return SINGLE_VERTEX
    full = set(range(h.n))
    if any(set(e) == full for e in h.hyperedges):
        return SPANNING_HYPEREDGE
    if len(h.hyperedges) == 3 and h.covered() == full:
        a, b, c = h.hyperedges
        meets = [a & b, a & c, b & c]
        # pairwise single vertices, and three different ones (not a star through one vertex)
        if all(len(m) == 1 for m in meets) and len(set().union(*meets)) == 3:
            return TRIANGLE
    return OTHER


@dataclass(frozen=True)
class HypergraphStructure:
    acyclic: bool
    components: int
    cut_vertices: Tuple[int, ...]
    fractions: Dict[int, List[FrozenSet[int]]] = field(default_factory=dict)


def incidence_graph(h: Hypergraph) -> nx.Graph:
    inc = nx.Graph()
    inc.add_nodes_from(("v", w) for w in range(h.n))
    for k, e in enumerate(h.hyperedges):
        for w in e:
            inc.add_edge(("v", w), ("h", k))
    return inc


def hypergraph_structure(h: Hypergraph) -> HypergraphStructure:
    inc = incidence_graph(h)
    comps = nx.number_connected_components(inc)
    acyclic = inc.number_of_edges() == inc.number_of_nodes() - comps
    cuts = []
    fractions = {}
    for w in range(h.n):
        if inc.degree(("v", w)) < 2:
            continue
        cuts.append(w)
        rest = inc.copy()
        rest.remove_node(("v", w))
        parts = []
        for k in sorted(x[1] for x in inc.neighbors(("v", w))):
            if any(("h", k) in p for p in parts):
                continue
            parts.append(nx.node_connected_component(rest, ("h", k)))
        fractions[w] = [frozenset({w} | {node[1] for node in p if node[0] == "v"}) for p in parts]
    return HypergraphStructure(acyclic, comps, tuple(cuts), fractions)


# ---------------------------------------------------------------- degenerate edges

@dataclass(frozen=True)
class ReducedInstance:
    """Nondegenerate instance obtained by resigning and contracting degenerate edges.

    vertex_map[i] is the reduced vertex carrying original vertex i and sign[i]
    says whether its point is negated in the lift.  Edge ids are shared with the
    original graph; dropped lists the edges that disappeared as loops or
    contracted edges.
    """

    graph: SignedGraph
    x: Dict[Hashable, float]
    vertex_map: Tuple[int, ...]
    sign: Tuple[int, ...]
    dropped: Tuple[Hashable, ...]
    resigned: Tuple[int, ...] = ()

    @property
    def trivial(self) -> bool:
        return not self.dropped

    def lift(self, p: np.ndarray) -> np.ndarray:
        """Configuration of the reduced instance (d x n_reduced) -> original (d x n)."""
        p = np.asarray(p, dtype=float)
        return p[:, list(self.vertex_map)] * np.asarray(self.sign, dtype=float)[None, :]

    def lift_matrix(self, m: np.ndarray) -> np.ndarray:
        """Gram-type matrix on reduced vertices -> original vertices, with signs."""
        idx = list(self.vertex_map)
        s = np.asarray(self.sign, dtype=float)
        return np.asarray(m)[np.ix_(idx, idx)] * np.outer(s, s)

    def reduced_weight(self, eid: Hashable, x_orig: float) -> float:
        """Angle weight of an original edge seen in the reduced instance, after resigning."""
        e = self.graph.by_id.get(eid)
        return self.x[eid] if e is not None else x_orig


def degenerate_reduce(g: SignedGraph, x: Mapping[Hashable, float], tol: float = TOL_X) -> ReducedInstance:
    """Resign odd edges with x = 1 to even and contract every even edge with x = 0.

    Edges are scanned in graph order; the scan restarts after every contraction
    since resigning can make further edges degenerate.
    """
    check_weights(g, x)
    cur = g
    w = {e.id: float(x[e.id]) for e in g.edges}
    vmap = list(range(g.n))
    sign = [1] * g.n
    dropped: List[Hashable] = []
    resigned: List[int] = []
    while True:
        target = next((e for e in cur.edges if is_degenerate(e.odd, w[e.id], tol)), None)
        if target is None:
            break
        if target.odd:
            # resign the higher endpoint so the edge becomes even with x = 1 - x ~ 0
            v = max(target.u, target.v)
            resigned.append(v)
            edges = []
            for e in cur.edges:
                if (e.u == v) != (e.v == v):
                    w[e.id] = 1.0 - w[e.id]
                    edges.append(Edge(e.id, e.u, e.v, not e.odd))
                else:
                    edges.append(e)
            cur = SignedGraph(cur.n, tuple(edges))
            for i in range(g.n):
                if vmap[i] == v:
                    sign[i] = -sign[i]
        before = set(cur.ids)
        cur, m = contract_even(cur, target.id)
        lost = before - set(cur.ids)
        dropped.extend(e.id for e in g.edges if e.id in lost)
        for k in lost:
            w.pop(k, None)
        vmap = [m[t] for t in vmap]
    return ReducedInstance(cur, {e.id: w[e.id] for e in cur.edges}, tuple(vmap), tuple(sign), tuple(dropped), tuple(resigned))
