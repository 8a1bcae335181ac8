"""Signed metric polytope: membership, parity shortest paths, tightness and the push to tightness.

Weights live in two coordinates.  c is the cosine weight in [-1, 1] and
x = arccos(c) / pi is the angle weight in [0, 1].  Every tightness decision is
made in x, where the odd cycle inequalities are linear.

The value of an edge set charges x(e) for an even edge and 1 - x(e) for an
odd one, so x is in MET exactly when every odd cycle has value at least 1.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, List, Mapping, Sequence, Tuple

from .sgraph import SignedGraph

log = logging.getLogger(__name__)

TOL_X = 1e-9
CYCLE_CAP = 10000
_CLAMP = 1e-12


class CycleCapExceeded(RuntimeError):
    pass


# ---------------------------------------------------------------- coordinates

def _clamp(value: float, lo: float, hi: float, what: str) -> float:
    if not math.isfinite(value):
        raise ValueError(f"{what} weight {value!r} is not finite")
    if value < lo - _CLAMP or value > hi + _CLAMP:
        raise ValueError(f"{what} weight {value!r} outside [{lo}, {hi}]")
    return min(max(value, lo), hi)


def to_x(c: Mapping[Hashable, float]) -> Dict[Hashable, float]:
    return {k: math.acos(_clamp(float(v), -1.0, 1.0, "cosine")) / math.pi for k, v in c.items()}


def to_c(x: Mapping[Hashable, float]) -> Dict[Hashable, float]:
    return {k: math.cos(math.pi * _clamp(float(v), 0.0, 1.0, "angle")) for k, v in x.items()}


def check_weights(g: SignedGraph, w: Mapping[Hashable, float]) -> None:
    missing = [e.id for e in g.edges if e.id not in w]
    if missing:
        raise ValueError(f"no weight for edges {missing!r}")


def contribution(odd: bool, xe: float) -> float:
    return 1.0 - xe if odd else xe


def val(g: SignedGraph, x: Mapping[Hashable, float], h: Iterable[Hashable]) -> float:
    total = 0.0
    for eid in h:
        e = g.edge(eid)
        total += contribution(e.odd, x[eid])
    return total


def resign_weights(g: SignedGraph, w: Mapping[Hashable, float], s: Iterable[int], space: str = "x") -> Dict[Hashable, float]:
    """Weights after resigning on s: x -> 1 - x (or c -> -c) across the cut."""
    s = set(s)
    out = dict(w)
    for e in g.edges:
        if (e.u in s) != (e.v in s):
            out[e.id] = 1.0 - w[e.id] if space == "x" else -w[e.id]
    return out


# ---------------------------------------------------------------- cycles

@dataclass(frozen=True)
class Cycle:
    """Closed trail v0 -e0- v1 -e1- ... -e(k-1)- v0."""

    vertices: Tuple[int, ...]
    edges: Tuple[Hashable, ...]
    odd: bool
    value: float

    def __len__(self):
        return len(self.edges)


def make_cycle(g: SignedGraph, x: Mapping[Hashable, float], start: int, edge_ids: Sequence[Hashable]) -> Cycle:
    verts = [start]
    odd = False
    for eid in edge_ids:
        e = g.edge(eid)
        odd ^= e.odd
        verts.append(e.other(verts[-1]))
    if verts[-1] != start:
        raise ValueError("edge sequence does not close")
    return Cycle(tuple(verts[:-1]), tuple(edge_ids), odd, val(g, x, edge_ids))


def _cover_dijkstra(g: SignedGraph, weight: Mapping[Hashable, float], source, min_vertex: int = 0):
    """Shortest distances on the parity double cover from source = (vertex, parity).

    Returns (dist, pred) keyed by (vertex, parity); pred holds (prev node, edge id).
    """
    dist = {source: 0.0}
    pred = {}
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        w, p = node
        for e in g.incidence[w]:
            b = e.other(w)
            if b < min_vertex:
                continue
            nxt = (b, p ^ int(e.odd))
            nd = d + weight[e.id]
            if nd < dist.get(nxt, math.inf):
                dist[nxt] = nd
                pred[nxt] = (node, e.id)
                heapq.heappush(heap, (nd, nxt))
    return dist, pred


def _contribs(g: SignedGraph, x: Mapping[Hashable, float]) -> Dict[Hashable, float]:
    return {e.id: contribution(e.odd, x[e.id]) for e in g.edges}


def _walk_edges(pred, source, target) -> List[Hashable]:
    out = []
    node = target
    while node != source:
        node, eid = pred[node]
        out.append(eid)
    return out[::-1]


def split_closed_walk(g: SignedGraph, start: int, edge_ids: Sequence[Hashable]) -> List[Tuple[int, List[Hashable]]]:
    """Decompose a closed walk into simple closed trails (cycles or back-and-forth pairs)."""
    pieces = []
    stack_v = [start]
    stack_e: List[Hashable] = []
    where = {start: 0}
    for eid in edge_ids:
        b = g.edge(eid).other(stack_v[-1])
        stack_e.append(eid)
        if b in where:
            k = where[b]
            pieces.append((b, stack_e[k:]))
            for w in stack_v[k + 1:]:
                del where[w]
            stack_v = stack_v[:k + 1]
            stack_e = stack_e[:k]
        else:
            where[b] = len(stack_v)
            stack_v.append(b)
    return pieces


def min_odd_closed_walk(g: SignedGraph, weight: Mapping[Hashable, float]):
    """Cheapest odd closed walk under nonnegative edge weights: (cost, start vertex, edge ids) or None."""
    best = None
    for w in range(g.n):
        dist, pred = _cover_dijkstra(g, weight, (w, 0), min_vertex=w)
        d = dist.get((w, 1))
        if d is not None and (best is None or d < best[0]):
            best = (d, w, _walk_edges(pred, (w, 0), (w, 1)))
    return best


def odd_cycles(g: SignedGraph, x: Mapping[Hashable, float], bound: float, cap: int = CYCLE_CAP) -> List[Cycle]:
    """All simple odd cycles with value <= bound.

    Depth-first from each start vertex over higher-numbered vertices, pruned by
    the double-cover distance needed to close the cycle.
    """
    contrib = _contribs(g, x)
    found: Dict[frozenset, Cycle] = {}
    for s in range(g.n):
        dist, _ = _cover_dijkstra(g, contrib, (s, 0), min_vertex=s)
        close = lambda w, p: dist.get((w, 1 ^ p), math.inf)
        path_e: List[Hashable] = []
        on_path = {s}

        def extend(w, p, total):
            for e in g.incidence[w]:
                b = e.other(w)
                t = total + contrib[e.id]
                q = p ^ int(e.odd)
                if b == s:
                    if q == 1 and t <= bound and (not path_e or e.id != path_e[0]):
                        key = frozenset(path_e) | {e.id}
                        if key not in found and len(key) == len(path_e) + 1:
                            found[key] = make_cycle(g, x, s, path_e + [e.id])
                            if len(found) > cap:
                                raise CycleCapExceeded(f"more than {cap} cycles with value <= {bound}")
                    continue
                if b < s or b in on_path:
                    continue
                if t + close(b, q) > bound:
                    continue
                on_path.add(b)
                path_e.append(e.id)
                extend(b, q, t)
                path_e.pop()
                on_path.discard(b)

        extend(s, 0, 0.0)
    return sorted(found.values(), key=lambda c: (c.value, len(c.edges)))


# ---------------------------------------------------------------- lambda

def _lambda_walk(g, x, u, v, parity) -> float:
    dist, _ = _cover_dijkstra(g, _contribs(g, x), (u, 0))
    return dist.get((v, parity), math.inf)


def _lambda_path(g, x, u, v, parity) -> float:
    contrib = _contribs(g, x)
    # distances back from the target give an admissible bound for the rest of a path
    dist, _ = _cover_dijkstra(g, contrib, (v, parity))
    best = [math.inf]
    on_path = {u}

    def extend(w, p, total):
        for e in g.incidence[w]:
            b = e.other(w)
            if b in on_path:
                continue
            t = total + contrib[e.id]
            q = p ^ int(e.odd)
            if b == v:
                if q == parity and t < best[0]:
                    best[0] = t
                continue
            if t + dist.get((b, q), math.inf) >= best[0]:
                continue
            on_path.add(b)
            extend(b, q, t)
            on_path.discard(b)

    if u == v:
        raise ValueError("endpoints must differ")
    extend(u, 0, 0.0)
    return best[0]


def _lambda(g, x, u, v, parity, mode, tol):
    if u == v:
        raise ValueError("endpoints must differ")
    if mode == "walk":
        return _lambda_walk(g, x, u, v, parity)
    if mode == "path":
        return _lambda_path(g, x, u, v, parity)
    if mode in ("auto", "both"):
        walk = _lambda_walk(g, x, u, v, parity)
        if mode == "auto" and g.n > 16:
            return walk
        path = _lambda_path(g, x, u, v, parity)
        if not (walk == path or abs(walk - path) <= tol):
            # above 1 the two can differ legitimately inside the polytope; below 1 they should not
            level = logging.WARNING if min(walk, path) < 1.0 - tol else logging.DEBUG
            log.log(level, "walk and path values differ for %s-%s parity %d: %r vs %r", u, v, parity, walk, path)
        return path
    raise ValueError(f"unknown mode {mode!r}")


def lambda_even(g: SignedGraph, x, u: int, v: int, mode: str = "auto", tol: float = TOL_X) -> float:
    return _lambda(g, x, u, v, 0, mode, tol)


def lambda_odd(g: SignedGraph, x, u: int, v: int, mode: str = "auto", tol: float = TOL_X) -> float:
    return _lambda(g, x, u, v, 1, mode, tol)


# ---------------------------------------------------------------- membership

@dataclass(frozen=True)
class Inside:
    margin: float

    inside = True


@dataclass(frozen=True)
class Violated:
    witness: Cycle

    inside = False

    @property
    def margin(self) -> float:
        return self.witness.value - 1.0


def met_membership(g: SignedGraph, x: Mapping[Hashable, float], tol: float = TOL_X):
    check_weights(g, x)
    best = min_odd_closed_walk(g, _contribs(g, x))
    if best is None:
        return Inside(math.inf)
    value, start, walk = best
    if value >= 1.0 - tol:
        return Inside(value - 1.0)
    odd_pieces = [make_cycle(g, x, b, piece) for b, piece in split_closed_walk(g, start, walk)]
    odd_pieces = [c for c in odd_pieces if c.odd]
    return Violated(min(odd_pieces, key=lambda c: c.value))


# ---------------------------------------------------------------- tightness

@dataclass(frozen=True)
class TightFlags:
    degenerate: Dict[Hashable, bool]
    tight: Dict[Hashable, bool]
    strictly_tight: Dict[Hashable, bool]
    tol: float
    cycles: Tuple[Cycle, ...] = ()

    def edges(self, which: str) -> List[Hashable]:
        flags = getattr(self, which)
        return [k for k, v in flags.items() if v]


def is_degenerate(odd: bool, xe: float, tol: float = TOL_X) -> bool:
    return xe >= 1.0 - tol if odd else xe <= tol


def tight_flags(g: SignedGraph, x: Mapping[Hashable, float], tol: float = TOL_X, cap: int = CYCLE_CAP) -> TightFlags:
    check_weights(g, x)
    cycles = odd_cycles(g, x, 1.0 + tol, cap)
    if cycles and cycles[0].value < 1.0 - tol:
        raise ValueError("weights are outside the metric polytope")
    tight = {e.id: False for e in g.edges}
    strict = dict(tight)
    for cyc in cycles:
        for eid in cyc.edges:
            tight[eid] = True
            if len(cyc) >= 3:
                strict[eid] = True
    degen = {e.id: is_degenerate(e.odd, x[e.id], tol) for e in g.edges}
    return TightFlags(degen, tight, strict, tol, tuple(cycles))


def push_to_tight(g: SignedGraph, x: Mapping[Hashable, float], frozen: Iterable[Hashable] = (), tol: float = TOL_X,
                  cap: int = CYCLE_CAP) -> Dict[Hashable, float]:
    """Move every free edge toward tightness (even x down, odd x up) until each is tight or degenerate.

    Each round takes the largest common step that keeps x in the polytope and in
    [0, 1].  The step is found exactly by a parametric search: with edge weights
    contribution - step on free edges, the cheapest odd closed walk must stay at
    value >= 1, and the Newton update on that walk converges in finitely many rounds.
    """
    check_weights(g, x)
    x = {e.id: float(x[e.id]) for e in g.edges}
    frozen = set(frozen)
    while True:
        flags = tight_flags(g, x, tol, cap)
        frozen |= {k for k in x if flags.tight[k] or flags.degenerate[k]}
        free = [e for e in g.edges if e.id not in frozen]
        if not free:
            return x
        step = min(contribution(e.odd, x[e.id]) for e in free)
        base = _contribs(g, x)
        free_ids = {e.id for e in free}
        for _ in range(1000):
            weight = {k: (w - step if k in free_ids else w) for k, w in base.items()}
            weight = {k: max(w, 0.0) for k, w in weight.items()}
            best = min_odd_closed_walk(g, weight)
            if best is None or best[0] >= 1.0 - 1e-15:
                break
            _, _, walk = best
            total = sum(base[k] for k in walk)
            hits = sum(1 for k in walk if k in free_ids)
            new = (total - 1.0) / hits
            if new >= step:
                break
            step = max(new, 0.0)
        for e in free:
            x[e.id] = min(max(x[e.id] + (step if e.odd else -step), 0.0), 1.0)
        if step <= 0.0:
            # nothing can move; freeze the free edges that sit on a cycle of value 1
            log.debug("zero step in push_to_tight; freezing %d edges", len(free))
            frozen |= free_ids
