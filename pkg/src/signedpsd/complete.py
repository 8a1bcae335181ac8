"""Constructive solver for the signed completion problem.

Given unit diagonal and, per edge, X[u,v] >= c (even) or X[u,v] <= c (odd),
solve returns a rank <= 3 completion, a maximum rank completion and a dual
certificate Omega = sum w(i) E_ii + sum w(ij) E_ij with E_ij = (e_i e_j^T + e_j e_i^T) / 2.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.linalg import expm
from scipy.optimize import linprog

from . import metpoly
from .metpoly import CYCLE_CAP, TOL_X, Cycle, is_degenerate, met_membership, push_to_tight, to_c, to_x
from .sgraph import (CUT_JOIN, LEAF_ODD_K32, Edge, SignedGraph, decompose, has_minor,
                     ODD_K4, NotOddK4FreeError)
from .tightstruct import (Hypergraph, build_hypergraph, degenerate_reduce, enumerate_tight_cycles,
                          hypergraph_structure, merge_vertex_sets)

log = logging.getLogger(__name__)

RANK_TOL = 1e-7
RANK_FLOOR = 1e-12
CONSTRAINT_TOL = 1e-8


def numerical_rank(m, tol: float = RANK_TOL) -> int:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] <= RANK_FLOOR:
        return 0
    return int(np.sum(s > max(tol * s[0], RANK_FLOOR)))


def compress(p: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Rewrite a configuration with exactly rank-many rows and unit columns."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if p.shape[1] == 0:
        return np.zeros((0, 0))
    u, s, vt = np.linalg.svd(p, full_matrices=False)
    k = max(numerical_rank(p, tol), 1)
    q = s[:k, None] * vt[:k]
    q /= np.linalg.norm(q, axis=0, keepdims=True)
    # fix the sign of each row for reproducible output
    flip = np.sign(q[np.arange(k), np.argmax(np.abs(q), axis=1)])
    flip[flip == 0] = 1.0
    return q * flip[:, None]


@dataclass(frozen=True)
class Completion:
    P: np.ndarray
    vertices: Optional[Tuple[int, ...]] = None

    @classmethod
    def from_points(cls, p, vertices=None, tol: float = RANK_TOL) -> "Completion":
        return cls(compress(p, tol), None if vertices is None else tuple(vertices))

    @property
    def X(self) -> np.ndarray:
        return self.P.T @ self.P

    @property
    def rank(self) -> int:
        return self.P.shape[0]

    @property
    def n(self) -> int:
        return self.P.shape[1]


@dataclass(frozen=True)
class DualCertificate:
    vertex_weights: np.ndarray
    edge_weights: Dict[Hashable, float]
    Omega: np.ndarray

    @classmethod
    def assemble(cls, g: SignedGraph, vertex_weights, edge_weights: Mapping[Hashable, float]) -> "DualCertificate":
        vw = np.asarray(vertex_weights, dtype=float).reshape(g.n)
        om = np.diag(vw.copy())
        ew = {}
        for e in g.edges:
            w = float(edge_weights.get(e.id, 0.0))
            ew[e.id] = w
            om[e.u, e.v] += w / 2
            om[e.v, e.u] += w / 2
        return cls(vw, ew, om)

    @classmethod
    def zero(cls, g: SignedGraph) -> "DualCertificate":
        return cls.assemble(g, np.zeros(g.n), {})

    @property
    def omega(self) -> Dict[Hashable, float]:
        out: Dict[Hashable, float] = {("vertex", i): float(w) for i, w in enumerate(self.vertex_weights)}
        out.update(self.edge_weights)
        return out

    def support(self, rel: float = 1e-9) -> List[Hashable]:
        scale = max([abs(w) for w in self.edge_weights.values()] + [float(np.max(np.abs(self.vertex_weights), initial=0.0))])
        if scale == 0.0:
            return []
        return [k for k, w in self.edge_weights.items() if abs(w) > rel * scale]

    @property
    def rank(self) -> int:
        return numerical_rank(self.Omega)

    def __add__(self, other: "DualCertificate") -> "DualCertificate":
        ew = dict(self.edge_weights)
        for k, w in other.edge_weights.items():
            ew[k] = ew.get(k, 0.0) + w
        return DualCertificate(self.vertex_weights + other.vertex_weights, ew, self.Omega + other.Omega)

    def scaled(self, t: float) -> "DualCertificate":
        return DualCertificate(t * self.vertex_weights, {k: t * w for k, w in self.edge_weights.items()}, t * self.Omega)


# ---------------------------------------------------------------- tight cycles

def _angle_step(odd: bool, xe: float) -> float:
    return math.pi * xe if odd else -math.pi * xe


def realize_tight_cycle(g: SignedGraph, x: Mapping[Hashable, float], cycle: Cycle, tol: float = 1e-8) -> Completion:
    """Unit circle realization of a tight odd cycle; columns follow cycle.vertices.

    Walking the cycle, the angle advances by pi*x on odd edges and retreats by
    pi*x on even ones, so consecutive inner products are cos(pi*x) = c and the
    total turn is a multiple of 2*pi exactly when the cycle is tight.
    """
    theta = [0.0]
    for eid in cycle.edges:
        e = g.edge(eid)
        theta.append(theta[-1] + _angle_step(e.odd, x[eid]))
    closure = _wrap(theta[-1])
    if abs(closure) > tol:
        raise ValueError(f"cycle does not close (error {closure:.3g}); it is not tight")
    th = np.array(theta[:-1])
    return Completion(np.vstack([np.cos(th), np.sin(th)]), tuple(cycle.vertices))


def closure_error(g: SignedGraph, x: Mapping[Hashable, float], cycle: Cycle) -> float:
    total = sum(_angle_step(g.edge(eid).odd, x[eid]) for eid in cycle.edges)
    return abs(_wrap(total))


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def _triangle_kernel(pa, pb, pc) -> np.ndarray:
    m = np.column_stack([pa, pb, pc])
    return np.cross(m[0], m[1])


def _stress_on_points(points: List[np.ndarray]):
    """Equilibrium stress of a planar closed chain, by peeling one triangle at a time.

    Edge i joins points i and i+1 (mod k).  The last vertex is removed, the chain
    is closed by a virtual edge, and the triangle stress on the removed vertex is
    scaled so the two virtual entries cancel.
    """
    k = len(points)
    if k == 3:
        u = _triangle_kernel(*points)
        return u ** 2, np.array([2 * u[0] * u[1], 2 * u[1] * u[2], 2 * u[2] * u[0]])
    red_v, red_e = _stress_on_points(points[:-1])
    u = _triangle_kernel(points[k - 2], points[k - 1], points[0])
    virt = 2 * u[2] * u[0]
    if red_e[k - 2] == 0.0:
        raise ValueError("degenerate stress in the reduced chain")
    t = -virt / red_e[k - 2]
    if not t > 0:
        raise ValueError("triangle stress cannot cancel the virtual edge")
    vw = np.zeros(k)
    vw[:k - 1] = t * red_v
    vw[k - 2] += u[0] ** 2
    vw[k - 1] += u[1] ** 2
    vw[0] += u[2] ** 2
    ew = np.zeros(k)
    ew[:k - 2] = t * red_e[:k - 2]
    ew[k - 2] = 2 * u[0] * u[1]
    ew[k - 1] = 2 * u[1] * u[2]
    return vw, ew


def cycle_stress(g: SignedGraph, x: Mapping[Hashable, float], cycle: Cycle) -> DualCertificate:
    """Nice stress of a tight odd cycle, normalised to max vertex weight 1, embedded in g.

    A two-edge cycle gets the internal stress -1 on the even edge and +1 on the
    odd edge, whose matrix is zero.
    """
    if len(cycle) == 2:
        ew = {eid: (1.0 if g.edge(eid).odd else -1.0) for eid in cycle.edges}
        return DualCertificate.assemble(g, np.zeros(g.n), ew)
    pts = realize_tight_cycle(g, x, cycle).P
    k = len(cycle)
    last_err = None
    for shift in range(k):
        order = [(i + shift) % k for i in range(k)]
        try:
            vw, ew = _stress_on_points([pts[:, i] for i in order])
        except ValueError as err:
            last_err = err
            continue
        vws = np.zeros(k)
        ews = np.zeros(k)
        vws[order] = vw
        ews[order] = ew
        if not _stress_signs_ok(g, cycle, ews):
            last_err = ValueError("stress signs are not dual feasible")
            continue
        scale = float(np.max(vws))
        vfull = np.zeros(g.n)
        for i, w in zip(cycle.vertices, vws / scale):
            vfull[i] += w
        return DualCertificate.assemble(g, vfull, {eid: w / scale for eid, w in zip(cycle.edges, ews)})
    raise ValueError(f"no stress for cycle {cycle.edges!r}: {last_err}")


def _stress_signs_ok(g, cycle, ews) -> bool:
    for eid, w in zip(cycle.edges, ews):
        if g.edge(eid).odd and not w > 0:
            return False
        if not g.edge(eid).odd and not w < 0:
            return False
    return True


def sum_cycle_stresses(g: SignedGraph, x, cycles) -> DualCertificate:
    total = DualCertificate.zero(g)
    for cyc in cycles:
        if len(cyc) >= 3:
            total = total + cycle_stress(g, x, cyc)
    return total


# ---------------------------------------------------------------- paths

def _path_steps(g: SignedGraph, x, start: int, path: Sequence[Hashable]):
    """Walk a path resigned to all-even: vertex list, signs s_i and cumulative angles."""
    verts = [start]
    signs = [1]
    angles = [0.0]
    for eid in path:
        e = g.edge(eid)
        verts.append(e.other(verts[-1]))
        signs.append(signs[-1] * e.sign)
        step = math.pi * (1.0 - x[eid]) if e.odd else math.pi * x[eid]
        angles.append(angles[-1] + step)
    return verts, signs, angles


def place_path(p_start: np.ndarray, p_end: np.ndarray, g: SignedGraph, x, start: int, path: Sequence[Hashable],
               tol: float = 1e-7) -> Dict[int, np.ndarray]:
    """Points for the interior vertices of a path, on the arc between its placed endpoints."""
    verts, signs, angles = _path_steps(g, x, start, path)
    total = angles[-1]
    target = signs[-1] * p_end
    cosang = float(np.clip(p_start @ target, -1.0, 1.0))
    if abs(math.acos(cosang) - total) > tol:
        raise ValueError("path angle does not match its endpoints")
    w = target - cosang * p_start
    nw = np.linalg.norm(w)
    if nw < 1e-9:
        if p_start.shape[0] != 2:
            raise ValueError("arc direction undetermined")
        w = np.array([-p_start[1], p_start[0]])
    else:
        w = w / nw
    return {verts[i]: signs[i] * (math.cos(angles[i]) * p_start + math.sin(angles[i]) * w)
            for i in range(1, len(verts) - 1)}


@dataclass(frozen=True)
class PathReduction:
    graph: SignedGraph
    x: Dict[Hashable, float]
    new_edge: Hashable
    start: int
    end: int
    path: Tuple[Hashable, ...]
    removed: Tuple[int, ...]
    original: SignedGraph
    original_x: Dict[Hashable, float]

    def lift(self, p: np.ndarray) -> np.ndarray:
        """Configuration of the reduced graph (same vertex labels) -> original graph."""
        p = np.array(p, dtype=float)
        pts = place_path(p[:, self.start], p[:, self.end], self.original, self.original_x, self.start, self.path)
        for v, q in pts.items():
            p[:, v] = q
        return p


def path_reduce(g: SignedGraph, x: Mapping[Hashable, float], start: int, path: Sequence[Hashable],
                new_edge: Hashable = "reduced", tol: float = TOL_X) -> PathReduction:
    """Replace a path by one edge carrying the summed angle.

    The new edge has the parity of the path; its angle weight is the sum of the
    resigned angles (or one minus it for an odd path).  Interior vertices keep
    their labels but lose all their edges.
    """
    verts, signs, angles = _path_steps(g, x, start, path)
    total = angles[-1] / math.pi
    if total > 1.0 + tol:
        raise ValueError("path is not inside a tight odd cycle (angle sum exceeds pi)")
    total = min(total, 1.0)
    odd = signs[-1] < 0
    interior = set(verts[1:-1])
    keep = [e for e in g.edges if e.id not in set(path)]
    if any(e.u in interior or e.v in interior for e in keep):
        raise ValueError("interior path vertices must have degree two")
    new = Edge(new_edge, verts[0], verts[-1], odd)
    xr = {e.id: x[e.id] for e in keep}
    xr[new_edge] = 1.0 - total if odd else total
    return PathReduction(SignedGraph(g.n, tuple(keep) + (new,)), xr, new_edge, verts[0], verts[-1], tuple(path),
                         tuple(sorted(interior)), g, dict(x))


# ---------------------------------------------------------------- all-tight pieces

def _edge_gram_error(g, x, pts: Dict[int, np.ndarray], edges) -> float:
    worst = 0.0
    for e in edges:
        c = math.cos(math.pi * x[e.id])
        worst = max(worst, abs(float(pts[e.u] @ pts[e.v]) - c))
    return worst


def _place_hyperedge(g: SignedGraph, x, cycles: List[Cycle], tol: float) -> Dict[int, np.ndarray]:
    """Planar placement of the vertices of a set of tight cycles glued along >= 2 shared vertices.

    Starts from one realized cycle and attaches the remaining cycles as ears along
    arcs; every start cycle is tried before giving up.
    """
    edge_set = {eid for c in cycles for eid in c.edges}
    edges = [g.edge(eid) for eid in edge_set]
    order = sorted(range(len(cycles)), key=lambda i: (-len(cycles[i]), i))
    last = None
    for first in order:
        try:
            pts = _ear_placement(g, x, cycles, first)
        except ValueError as err:
            last = err
            continue
        if _edge_gram_error(g, x, pts, edges) <= tol:
            return pts
        last = ValueError("placement violates a tight edge")
    raise ValueError(f"could not place tight cycles: {last}")


def _ear_placement(g, x, cycles, first) -> Dict[int, np.ndarray]:
    start = cycles[first]
    real = realize_tight_cycle(g, x, start, tol=1e-6)
    pts = {v: real.P[:, k].copy() for k, v in enumerate(start.vertices)}
    placed_edges = set(start.edges)
    pending = [c for i, c in enumerate(cycles) if i != first]
    while pending:
        progress = False
        rest = []
        for cyc in pending:
            if set(cyc.edges) <= placed_edges:
                progress = True
                continue
            hits = [i for i, v in enumerate(cyc.vertices) if v in pts]
            if len(hits) < 2:
                rest.append(cyc)
                continue
            try:
                new_pts = _attach_ears(g, x, cyc, pts)
            except ValueError:
                rest.append(cyc)
                continue
            pts.update(new_pts)
            placed_edges |= set(cyc.edges)
            progress = True
        pending = rest
        if not progress:
            raise ValueError("no tight cycle can be attached")
    return pts


def _attach_ears(g, x, cyc: Cycle, pts) -> Dict[int, np.ndarray]:
    k = len(cyc)
    anchor = next(i for i, v in enumerate(cyc.vertices) if v in pts)
    new_pts: Dict[int, np.ndarray] = {}
    i = anchor
    walked = 0
    while walked < k:
        seg = []
        j = i
        while True:
            seg.append(cyc.edges[j % k])
            j += 1
            walked += 1
            if cyc.vertices[j % k] in pts:
                break
        a, b = cyc.vertices[i % k], cyc.vertices[j % k]
        if len(seg) > 1:
            new_pts.update(place_path(pts[a], pts[b], g, x, a, seg))
        i = j
    return new_pts


def solve_all_tight(g: SignedGraph, x: Mapping[Hashable, float], tol: float = TOL_X, cap: int = CYCLE_CAP,
                    check_tol: float = 1e-7) -> Completion:
    """Rank <= 2 completion of a connected instance in which every edge is tight or degenerate.

    Degenerate edges are contracted first.  Each hyperedge of tight cycles is
    placed in the plane, and hyperedges (and blocks) meeting in one vertex are
    glued by a planar rotation that matches the shared point.
    """
    red = degenerate_reduce(g, x, tol)
    h = red.graph
    xr = red.x
    if h.n == 1:
        return Completion.from_points(red.lift(np.ones((1, 1))))
    cycles = list(enumerate_tight_cycles(h, xr, tol, cap))
    groups: Dict[frozenset, List[Cycle]] = {}
    hyper = merge_vertex_sets(c.vertices for c in cycles)
    for c in cycles:
        key = next(e for e in hyper if set(c.vertices) <= e)
        groups.setdefault(key, []).append(c)
    covered = {e.id for c in cycles for e in map(h.edge, c.edges)}
    loose = [e for e in h.edges if e.id not in covered]
    if loose:
        raise ValueError(f"edges {[e.id for e in loose]!r} are neither tight nor degenerate")
    placements = [_place_hyperedge(h, xr, groups[key], check_tol) for key in hyper]
    pts = _glue_planar(h.n, placements)
    p = np.column_stack([pts[v] for v in range(h.n)])
    err = _edge_gram_error(h, xr, pts, h.edges)
    if err > check_tol:
        raise ValueError(f"all-tight placement is off by {err:.3g}")
    return Completion.from_points(red.lift(p))


def _rot2(a: float) -> np.ndarray:
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def _glue_planar(n: int, placements: List[Dict[int, np.ndarray]]) -> Dict[int, np.ndarray]:
    """Rotate planar pieces so that shared vertices agree; pieces must form a tree."""
    pts: Dict[int, np.ndarray] = {}
    remaining = list(range(len(placements)))
    while remaining:
        idx = next((i for i in remaining if set(placements[i]) & set(pts)), remaining[0])
        remaining.remove(idx)
        piece = placements[idx]
        shared = [v for v in piece if v in pts]
        if shared:
            v = shared[0]
            a = math.atan2(pts[v][1], pts[v][0]) - math.atan2(piece[v][1], piece[v][0])
            r = _rot2(a)
            piece = {w: r @ q for w, q in piece.items()}
        for w, q in piece.items():
            pts.setdefault(w, q)
    for v in range(n):
        if v not in pts:
            raise ValueError(f"vertex {v} is not on any tight cycle")
    return pts


# ---------------------------------------------------------------- maximum rank

def _constraint_slack(g: SignedGraph, c: Mapping[Hashable, float], xmat: np.ndarray) -> Dict[Hashable, float]:
    out = {}
    for e in g.edges:
        val = float(xmat[e.u, e.v])
        out[e.id] = c[e.id] - val if e.odd else val - c[e.id]
    return out


def hypergraph_rank(h: Hypergraph) -> int:
    st = hypergraph_structure(h)
    return len(h.hyperedges) + st.components


def rotate_fractions(p: np.ndarray, g: SignedGraph, x: Mapping[Hashable, float], h: Hypergraph, seed: int = 0,
                     tol: float = CONSTRAINT_TOL) -> np.ndarray:
    """Maximum rank completion from a low rank one by small rotations of hypergraph pieces.

    Every component of the hypergraph but the first is rotated as a whole, and
    at each cut vertex every fraction but the first is rotated about the cut
    vertex's point.  Rotations are random in a space with room for all the new
    directions; their size starts at 1 and is halved until the original
    constraints hold again and the target rank is reached.
    """
    st = hypergraph_structure(h)
    if not st.acyclic:
        raise ValueError("hypergraph is not acyclic")
    n = g.n
    target = len(h.hyperedges) + st.components
    c = to_c({e.id: x[e.id] for e in g.edges})
    p = np.asarray(p, dtype=float)
    dim = max(target + 2, p.shape[0])
    base = np.zeros((dim, n))
    base[:p.shape[0]] = p
    slack = _constraint_slack(g, c, base.T @ base)
    if min(slack.values(), default=0.0) < -1e-7:
        raise ValueError("starting configuration is infeasible")
    rng = np.random.default_rng(seed)
    comps = _vertex_components(h)
    moves = []
    for comp in comps[1:]:
        moves.append((None, sorted(comp), _random_skew(rng, dim)))
    for v in st.cut_vertices:
        for frac in st.fractions[v][1:]:
            moves.append((v, sorted(frac - {v}), _random_skew(rng, dim)))
    if not moves:
        return compress(base)
    floor = max(min([s for s in slack.values() if s > 1e-9], default=1.0) / (4 * n), 1e-6)
    scale = 1.0
    best = None
    while scale >= floor:
        q = _apply_moves(base, moves, scale)
        xm = q.T @ q
        sl = _constraint_slack(g, c, xm)
        ok = all(sl[k] >= min(slack[k], 0.0) - tol for k in sl)
        if ok:
            r = numerical_rank(q)
            if best is None or r > best[0]:
                best = (r, q)
            if r >= target:
                break
        scale /= 2
    if best is None:
        log.warning("no feasible rotation found; returning the low rank configuration")
        return compress(base)
    return compress(best[1])


def _vertex_components(h: Hypergraph) -> List[set]:
    uf = nx.utils.UnionFind(range(h.n))
    for e in h.hyperedges:
        e = list(e)
        for w in e[1:]:
            uf.union(e[0], w)
    comps: Dict[int, set] = {}
    for v in range(h.n):
        comps.setdefault(uf[v], set()).add(v)
    return sorted(comps.values(), key=min)


def _random_skew(rng, dim):
    a = rng.standard_normal((dim, dim))
    a = a - a.T
    return a / np.linalg.norm(a)


def _apply_moves(base, moves, scale):
    q = base.copy()
    for v, verts, a in moves:
        if v is not None:
            pv = q[:, v] / np.linalg.norm(q[:, v])
            proj = np.eye(len(pv)) - np.outer(pv, pv)
            a = proj @ a @ proj
        r = expm(scale * a)
        q[:, verts] = r @ q[:, verts]
    return q


# ---------------------------------------------------------------- leaves

@dataclass
class PieceSolution:
    """Solution of one piece, in the coordinates of that piece's graph."""

    graph: SignedGraph
    x: Dict[Hashable, float]
    low: np.ndarray
    high: np.ndarray
    dual: DualCertificate


def _tight_cycles(g, x, tol, cap):
    return list(enumerate_tight_cycles(g, x, tol, cap))


def solve_k32_free(g: SignedGraph, x: Mapping[Hashable, float], seed: int = 0, tol: float = TOL_X,
                   cap: int = CYCLE_CAP) -> PieceSolution:
    x = {e.id: x[e.id] for e in g.edges}
    if g.n == 1:
        one = np.ones((1, 1))
        return PieceSolution(g, x, one, one, DualCertificate.zero(g))
    cycles = _tight_cycles(g, x, tol, cap)
    dual = sum_cycle_stresses(g, x, cycles)
    pushed = push_to_tight(g, x, tol=tol, cap=cap)
    low = solve_all_tight(g, pushed, tol, cap).P
    h = build_hypergraph(cycles, g.n)
    high = rotate_fractions(low, g, x, h, seed)
    return PieceSolution(g, x, low, high, dual)


def _pair_windows(g: SignedGraph, x):
    """Per vertex pair, the admissible angle window [max odd x, min even x]."""
    win: Dict[Tuple[int, int], List[float]] = {}
    for e in g.edges:
        key = (min(e.u, e.v), max(e.u, e.v))
        lo, hi = win.setdefault(key, [0.0, 1.0])
        if e.odd:
            win[key][0] = max(lo, x[e.id])
        else:
            win[key][1] = min(hi, x[e.id])
    return win


def _gram_from_angles(theta: Dict[Tuple[int, int], float], n: int) -> np.ndarray:
    xm = np.eye(n)
    for (a, b), t in theta.items():
        xm[a, b] = xm[b, a] = math.cos(math.pi * t)
    return xm


def _factor(xm: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((xm + xm.T) / 2)
    w = np.clip(w, 0.0, None)
    p = (v * np.sqrt(w)).T
    p /= np.linalg.norm(p, axis=0, keepdims=True)
    return compress(p)


def solve_odd_k32(g: SignedGraph, x: Mapping[Hashable, float], seed: int = 0, tol: float = TOL_X,
                  cap: int = CYCLE_CAP) -> PieceSolution:
    """Three vertices, each pair carrying an odd two-cycle.

    If a triangle is tight it pins the unique planar solution.  Otherwise the
    weights are pushed to tightness: the low rank answer is a realized tight
    triangle if one appears, else the Gram of the tight pair angles.  The
    maximum rank answer is a Gram strictly inside all triangle inequalities.
    """
    x = {e.id: x[e.id] for e in g.edges}
    cycles = _tight_cycles(g, x, tol, cap)
    tri = [c for c in cycles if len(c) == 3]
    dual = sum_cycle_stresses(g, x, cycles)
    if tri:
        real = realize_tight_cycle(g, x, tri[0], tol=1e-6)
        p = np.zeros((2, 3))
        p[:, list(real.vertices)] = real.P
        p = compress(p)
        return PieceSolution(g, x, p, p, dual)
    pushed = push_to_tight(g, x, tol=tol, cap=cap)
    ptri = [c for c in _tight_cycles(g, pushed, tol, cap) if len(c) == 3]
    if ptri:
        real = realize_tight_cycle(g, pushed, ptri[0], tol=1e-6)
        low = np.zeros((2, 3))
        low[:, list(real.vertices)] = real.P
        low = compress(low)
    else:
        win = _pair_windows(g, pushed)
        low = _factor(_gram_from_angles({k: v[0] for k, v in win.items()}, 3))
    high = _factor(_gram_from_angles(_interior_angles(_pair_windows(g, x)), 3))
    return PieceSolution(g, x, low, high, dual)


def _interior_angles(win) -> Dict[Tuple[int, int], float]:
    """Angles in their windows maximising the smallest triangle-inequality slack (an LP)."""
    keys = [(0, 1), (0, 2), (1, 2)]
    # variables: three angles and the common slack t; maximise t
    a_ub, b_ub = [], []
    for k in range(3):
        row = [1.0, 1.0, 1.0, 1.0]
        row[k] = -1.0
        a_ub.append([-r for r in row[:3]] + [1.0])
        b_ub.append(0.0)
    a_ub.append([1.0, 1.0, 1.0, 1.0])
    b_ub.append(2.0)
    bounds = [tuple(win[k]) for k in keys] + [(None, 1.0)]
    res = linprog([0, 0, 0, -1.0], A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success or res.x[3] <= 0:
        raise ValueError("no interior point for the three pair angles")
    return {k: float(res.x[i]) for i, k in enumerate(keys)}


# ---------------------------------------------------------------- gluing

def _align_rows(a: np.ndarray, b: np.ndarray):
    """Orthogonal w with w @ b = [t; 0], where t is the reduced form of a."""
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    d = numerical_rank(a)
    t = s[:d, None] * vt[:d]
    m = t @ b.T
    uu, _, vv = np.linalg.svd(m, full_matrices=False)
    top = uu @ vv
    comp = _orth_complement(top, b.shape[0])
    return u.T, np.vstack([top, comp]), d


def _orth_complement(rows: np.ndarray, dim: int) -> np.ndarray:
    if rows.shape[0] >= dim:
        return np.zeros((0, dim))
    q, _ = np.linalg.qr(np.hstack([rows.T, np.eye(dim)]))
    return q[:, rows.shape[0]:dim].T


def glue_high(p1, v1, p2, v2):
    """Block concatenation of two configurations sharing vertices; rank r1 + r2 - d."""
    v1, v2 = list(v1), list(v2)
    shared = [v for v in v1 if v in set(v2)]
    p1, p2 = np.atleast_2d(p1), np.atleast_2d(p2)
    verts = v1 + [v for v in v2 if v not in set(v1)]
    pos = {v: k for k, v in enumerate(verts)}
    if not shared:
        out = np.zeros((p1.shape[0] + p2.shape[0], len(verts)))
        out[:p1.shape[0], [pos[v] for v in v1]] = p1
        out[p1.shape[0]:, [pos[v] for v in v2]] = p2
        return out, verts
    i1 = [v1.index(v) for v in shared]
    i2 = [v2.index(v) for v in shared]
    w1, w2, d = _align_rows(p1[:, i1], p2[:, i2])
    q1, q2 = w1 @ p1, w2 @ p2
    r1, r2 = q1.shape[0], q2.shape[0]
    out = np.zeros((d + (r1 - d) + (r2 - d), len(verts)))
    out[:r1, [pos[v] for v in v1]] = q1
    only2 = [k for k, v in enumerate(v2) if v not in set(v1)]
    out[:d, [pos[v2[k]] for k in only2]] = q2[:d, only2]
    out[r1:, [pos[v2[k]] for k in only2]] = q2[d:, only2]
    return out, verts


def glue_low(p1, v1, p2, v2):
    """Overlay two configurations in a common space of dimension max(r1, r2)."""
    v1, v2 = list(v1), list(v2)
    shared = [v for v in v1 if v in set(v2)]
    p1, p2 = np.atleast_2d(p1), np.atleast_2d(p2)
    dim = max(p1.shape[0], p2.shape[0])
    a = np.zeros((dim, p1.shape[1]))
    a[:p1.shape[0]] = p1
    b = np.zeros((dim, p2.shape[1]))
    b[:p2.shape[0]] = p2
    if shared:
        sa = a[:, [v1.index(v) for v in shared]]
        sb = b[:, [v2.index(v) for v in shared]]
        u, _, vt = np.linalg.svd(sa @ sb.T)
        b = (u @ vt) @ b
    verts = v1 + [v for v in v2 if v not in set(v1)]
    pos = {v: k for k, v in enumerate(verts)}
    out = np.zeros((dim, len(verts)))
    out[:, [pos[v] for v in v1]] = a
    only2 = [k for k, v in enumerate(v2) if v not in set(v1)]
    out[:, [pos[v2[k]] for k in only2]] = b[:, only2]
    return out, verts


def _pad_dual(dual: DualCertificate, vmap, n: int, graph: SignedGraph) -> Tuple[np.ndarray, Dict[Hashable, float]]:
    vw = np.zeros(n)
    for k, w in enumerate(dual.vertex_weights):
        vw[vmap[k]] += w
    return vw, dict(dual.edge_weights)


def glue_certificates(parent: SignedGraph, parts: Sequence[Tuple[PieceSolution, Sequence[int]]],
                      x: Mapping[Hashable, float], drop: Sequence[Hashable] = ()) -> PieceSolution:
    """Glue piece solutions whose vertex maps into parent share cut vertices or a split pair.

    Primal: aligned block concatenation for the maximum rank solution, overlay
    for the low rank one.  Dual: zero-padded sum, with the listed (cancelled)
    edge ids removed.
    """
    n = parent.n
    low = high = None
    lv = hv = None
    vw = np.zeros(n)
    ew: Dict[Hashable, float] = {}
    for sol, vmap in parts:
        vmap = list(vmap)
        if low is None:
            low, lv, high, hv = sol.low, vmap, sol.high, vmap
        else:
            low, lv = glue_low(low, lv, sol.low, vmap)
            high, hv = glue_high(high, hv, sol.high, vmap)
        pv, pe = _pad_dual(sol.dual, vmap, n, parent)
        vw += pv
        for k, w in pe.items():
            ew[k] = ew.get(k, 0.0) + w
    for k in drop:
        ew.pop(k, None)
    order_l = np.argsort(lv)
    order_h = np.argsort(hv)
    low = np.asarray(low)[:, order_l]
    high = np.asarray(high)[:, order_h]
    dual = DualCertificate.assemble(parent, vw, ew)
    return PieceSolution(parent, {e.id: x[e.id] for e in parent.edges}, compress(low), compress(high), dual)


# ---------------------------------------------------------------- splits

def split_lambdas(side: SignedGraph, x, u: int, v: int, mode: str = "auto", tol: float = TOL_X):
    """(lambda_e, lambda_o) for one side: the window [lambda_o, lambda_e] for the virtual angle."""
    le = metpoly.lambda_even(side, x, u, v, mode, tol)
    lo = metpoly.lambda_odd(side, x, u, v, mode, tol)
    return le, (1.0 - lo if math.isfinite(lo) else -math.inf)


def choose_virtual_angle(windows) -> float:
    lo = max([0.0] + [w[1] for w in windows])
    hi = min([1.0] + [w[0] for w in windows])
    if lo > hi + 1e-12:
        raise ValueError("empty interval for the virtual angle")
    return (lo + hi) / 2 if hi > lo else lo


def combine_split_duals(sols, virtuals, pair_local, lam: float, tol: float = TOL_X, cap: int = CYCLE_CAP):
    """Make the virtual-edge stresses of the two split parts cancel.

    sols are the two PieceSolution objects, virtuals the (even id, odd id) pair
    shared by both parts, pair_local the split pair in each part's labels.
    Returns the (possibly scaled and augmented) duals of both parts.
    """
    fe, fo = virtuals
    duals = [s.dual for s in sols]

    def net(d):
        return d.edge_weights.get(fe, 0.0) + d.edge_weights.get(fo, 0.0)

    scale = max(1.0, *(float(np.max(np.abs(d.Omega), initial=0.0)) for d in duals))
    eps = 1e-10 * scale
    t = [net(d) for d in duals]
    if abs(t[0]) <= eps and abs(t[1]) <= eps:
        return duals
    if t[0] * t[1] < 0 and abs(t[0]) > eps and abs(t[1]) > eps:
        return [duals[0], duals[1].scaled(-t[0] / t[1])]
    total = t[0] + t[1]
    want = -1 if total > 0 else 1
    # adjusters: cycle stresses through a virtual edge whose net contribution has the wanted sign
    for i, sol in enumerate(sols):
        target_edge = fe if want < 0 else fo
        for cyc in _tight_cycles(sol.graph, sol.x, tol, cap):
            if len(cyc) >= 3 and target_edge in cyc.edges:
                st = cycle_stress(sol.graph, sol.x, cyc)
                a = st.edge_weights[target_edge]
                gamma = abs(total) / abs(a)
                out = list(duals)
                out[i] = duals[i] + st.scaled(gamma)
                return out
    # absorbers: another edge on the split pair (real, or virtual from an enclosing split) with angle
    # lambda and the right parity carries the same constraint, so it can take the residual
    for i, sol in enumerate(sols):
        a, b = pair_local[i]
        for e in sol.graph.edges:
            if e.id in (fe, fo) or {e.u, e.v} != {a, b}:
                continue
            if abs(sol.x[e.id] - lam) <= 1e-9 and (e.odd == (total > 0)):
                out = list(duals)
                d = duals[i]
                ew = dict(d.edge_weights)
                ew[e.id] = ew.get(e.id, 0.0) + total
                ew[fe] = 0.0
                ew[fo] = 0.0
                out[i] = DualCertificate(d.vertex_weights, ew, d.Omega)
                other = 1 - i
                d2 = duals[other]
                ew2 = dict(d2.edge_weights)
                ew2[fe] = 0.0
                ew2[fo] = 0.0
                out[other] = DualCertificate(d2.vertex_weights, ew2, d2.Omega)
                return out
    raise RuntimeError("virtual-edge stresses of a strong 2-split cannot be cancelled")


# ---------------------------------------------------------------- driver

@dataclass
class SolveResult:
    status: str
    graph: SignedGraph
    x: Dict[Hashable, float]
    witness: Optional[Cycle] = None
    low_rank: Optional[Completion] = None
    max_rank: Optional[Completion] = None
    dual: Optional[DualCertificate] = None
    strict_complementarity: bool = False
    checks: Dict[str, object] = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.status == "Solved"


def _solve_tree(node, x, seed, tol, cap, mode) -> PieceSolution:
    g = node.piece
    if not node.children:
        if node.kind == LEAF_ODD_K32:
            return solve_odd_k32(g, x, seed, tol, cap)
        return solve_k32_free(g, x, seed, tol, cap)
    if node.kind == CUT_JOIN:
        parts = []
        for child in node.children:
            cx = {e.id: x[e.id] for e in child.piece.edges}
            parts.append((_solve_tree(child, cx, seed, tol, cap, mode), child.vertex_map))
        return glue_certificates(g, parts, x)
    # strong 2-split
    u, v = node.pair
    fe, fo = node.virtual_even, node.virtual_odd
    windows = []
    locals_ = []
    for child in node.children:
        real = [e.id for e in child.piece.edges if e.id not in (fe, fo)]
        side, order = child.piece.restrict(real)
        pos = {w: k for k, w in enumerate(order)}
        a, b = pos[child.vertex_map.index(u)], pos[child.vertex_map.index(v)]
        windows.append(split_lambdas(side, {k: x[k] for k in real}, a, b, mode, tol))
        locals_.append((child.vertex_map.index(u), child.vertex_map.index(v)))
    lam = choose_virtual_angle(windows)
    sols = []
    for child in node.children:
        cx = {e.id: (lam if e.id in (fe, fo) else x[e.id]) for e in child.piece.edges}
        sols.append(_solve_tree(child, cx, seed, tol, cap, mode))
    duals = combine_split_duals(sols, (fe, fo), locals_, lam, tol, cap)
    parts = []
    for sol, d, child in zip(sols, duals, node.children):
        parts.append((PieceSolution(sol.graph, sol.x, sol.low, sol.high, d), child.vertex_map))
    return glue_certificates(g, parts, x, drop=(fe, fo))


def _lift_dual(g: SignedGraph, red, dual: DualCertificate, red_x_orig, p: np.ndarray,
               tol: float = TOL_X) -> DualCertificate:
    """Carry a dual of the reduced instance back through resigning and contraction.

    Each reduced vertex weight goes to one representative; every contracted
    edge gets a rank one stress penalising the difference of its endpoints,
    scaled up until the result is PSD.  When a reduced stress lands on a
    non-representative vertex the lifted matrix no longer annihilates the
    primal p; then only the penalties are kept (a valid but smaller dual).
    """
    n = g.n
    sign = np.asarray(red.sign, dtype=float)
    vw = np.zeros(n)
    seen = set()
    for i in range(n):
        m = red.vertex_map[i]
        if m not in seen:
            seen.add(m)
            vw[i] = dual.vertex_weights[m]
    ew = {}
    for e in g.edges:
        if e.id in dual.edge_weights:
            # resigning flips the edge weight together with the parity
            ew[e.id] = dual.edge_weights[e.id] * sign[e.u] * sign[e.v]
    base = DualCertificate.assemble(g, vw, ew)
    # only degenerate edges are tight at X = +-1; other loops keep zero weight
    contracted = [g.edge(k) for k in red.dropped if is_degenerate(g.edge(k).odd, red_x_orig[k], tol)]
    if not contracted:
        return base
    pen_v = np.zeros(n)
    pen_e = {}
    for e in contracted:
        pen_v[e.u] += 1.0
        pen_v[e.v] += 1.0
        pen_e[e.id] = pen_e.get(e.id, 0.0) - 2.0 * sign[e.u] * sign[e.v]
    pen = DualCertificate.assemble(g, pen_v, pen_e)
    norm = max(1.0, float(np.linalg.norm(base.Omega)))
    if np.max(np.abs(base.Omega @ p.T), initial=0.0) > 1e-9 * norm:
        log.debug("reduced stress does not lift through the contraction; keeping penalties only")
        return pen
    t = 1.0
    for _ in range(40):
        cand = base + pen.scaled(t * norm)
        if np.linalg.eigvalsh(cand.Omega)[0] >= -1e-10 * norm:
            return cand
        t *= 2
    log.debug("lifted stress stays indefinite; keeping penalties only")
    return pen


def solve(g: SignedGraph, c: Optional[Mapping[Hashable, float]] = None, x: Optional[Mapping[Hashable, float]] = None,
          seed: int = 0, tol: float = TOL_X, cap: int = CYCLE_CAP, check_minor: bool = False, mode: str = "auto",
          rank_tol: float = RANK_TOL) -> SolveResult:
    """Decide feasibility and build low rank, maximum rank and dual solutions."""
    if (c is None) == (x is None):
        raise ValueError("pass exactly one of c or x")
    x = to_x(c) if x is None else {k: float(v) for k, v in x.items()}
    metpoly.check_weights(g, x)
    x = {e.id: x[e.id] for e in g.edges}
    if check_minor and has_minor(g, ODD_K4):
        raise NotOddK4FreeError("graph has an odd-K4 minor")
    verdict = met_membership(g, x, tol)
    if not verdict.inside:
        return SolveResult("Infeasible", g, x, witness=verdict.witness)
    red = degenerate_reduce(g, x, tol)
    h = red.graph
    pieces = []
    comps = _components(h)
    for comp in comps:
        ids = [e.id for e in h.edges if e.u in comp]
        sub, order = h.restrict(ids, extra_vertices=comp)
        tree = decompose(sub)
        sol = _solve_tree(tree, {k: red.x[k] for k in ids}, seed, tol, cap, mode)
        pieces.append((sol, order))
    glued = glue_certificates(h, pieces, red.x)
    low = Completion.from_points(red.lift(glued.low), tol=rank_tol)
    high = Completion.from_points(red.lift(glued.high), tol=rank_tol)
    dual = _lift_dual(g, red, glued.dual, x, high.P, tol)
    res = SolveResult("Solved", g, x, low_rank=low, max_rank=high, dual=dual)
    res.checks = certificate_checks(g, x, high, dual, tol, rank_tol)
    res.strict_complementarity = bool(res.checks["strict_complementarity"])
    return res


def _components(g: SignedGraph) -> List[List[int]]:
    uf = nx.utils.UnionFind(range(g.n))
    for e in g.edges:
        uf.union(e.u, e.v)
    comps: Dict[int, List[int]] = {}
    for v in range(g.n):
        comps.setdefault(uf[v], []).append(v)
    return sorted(comps.values(), key=min)


def certificate_checks(g: SignedGraph, x, completion: Completion, dual: DualCertificate, tol: float = TOL_X,
                       rank_tol: float = RANK_TOL) -> Dict[str, object]:
    """Primal/dual feasibility, complementarity and the rank sum for a solved instance."""
    c = to_c(x)
    xm = completion.X
    om = dual.Omega
    norm = max(float(np.linalg.norm(om)), 1e-300)
    slack = _constraint_slack(g, c, xm)
    sign_ok = all((w >= -1e-12 if g.edge(k).odd else w <= 1e-12) for k, w in dual.edge_weights.items())
    min_eig = float(np.linalg.eigvalsh(om)[0]) if g.n else 0.0
    comp_edges = max([abs((float(xm[g.edge(k).u, g.edge(k).v]) - c[k]) * w) for k, w in dual.edge_weights.items()],
                     default=0.0)
    inner = float(np.sum(xm * om))
    stationary = float(np.max(np.abs(om @ completion.P.T), initial=0.0))
    r_x = numerical_rank(completion.P, rank_tol)
    r_o = numerical_rank(om, rank_tol)
    unit = float(np.max(np.abs(np.linalg.norm(completion.P, axis=0) - 1.0), initial=0.0))
    psd_ok = min_eig >= -1e-8 * norm
    feas = min(slack.values(), default=0.0) >= -CONSTRAINT_TOL
    return {
        "primal_feasible": feas,
        "min_slack": min(slack.values(), default=math.inf),
        "unit_columns": unit <= 1e-10,
        "dual_sign_feasible": sign_ok,
        "dual_psd": psd_ok,
        "dual_min_eig": min_eig,
        "inner_product": inner,
        "edge_complementarity": comp_edges,
        "stationarity": stationary,
        "rank_primal": r_x,
        "rank_dual": r_o,
        "strict_complementarity": bool(feas and sign_ok and psd_ok and abs(inner) <= 1e-8 * max(1.0, norm)
                                       and comp_edges <= 1e-8 * max(1.0, norm)
                                       and stationary <= 1e-8 * max(1.0, norm) and r_x + r_o == g.n),
    }
