"""Brute-force verifiers and instance generators.

Nothing here relies on the structural theory used by the solver: membership is
checked cycle by cycle, feasibility and uniqueness by descent over unit vectors
in full dimension.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Hashable, List, Mapping, Optional, Tuple

import networkx as nx
import numpy as np

from .metpoly import TOL_X, contribution, min_odd_closed_walk, push_to_tight, to_c
from .sgraph import ODD_K4, Edge, SignedGraph, has_minor

FEASIBLE_RESIDUAL = 1e-9


# ---------------------------------------------------------------- membership

def all_cycles(g: SignedGraph, limit: int = 200000) -> List[Tuple[Hashable, ...]]:
    """Every cycle of the multigraph as a tuple of edge ids (parallel edges expanded)."""
    simple = nx.Graph()
    simple.add_nodes_from(range(g.n))
    between: Dict[frozenset, List[Hashable]] = {}
    for e in g.edges:
        simple.add_edge(e.u, e.v)
        between.setdefault(frozenset((e.u, e.v)), []).append(e.id)
    out = []
    for ids in between.values():
        out.extend(itertools.combinations(ids, 2))
    for nodes in nx.simple_cycles(simple):
        if len(nodes) < 3:
            continue
        hops = [between[frozenset((nodes[i], nodes[(i + 1) % len(nodes)]))] for i in range(len(nodes))]
        out.extend(itertools.product(*hops))
        if len(out) > limit:
            raise RuntimeError("too many cycles for the brute-force oracle")
    return out


def met_oracle(g: SignedGraph, x: Mapping[Hashable, float], tol: float = TOL_X) -> bool:
    for cyc in all_cycles(g):
        edges = [g.edge(k) for k in cyc]
        if sum(e.odd for e in edges) % 2 == 1:
            if sum(contribution(e.odd, x[e.id]) for e in edges) < 1.0 - tol:
                return False
    return True


# ---------------------------------------------------------------- descent machinery

def _edge_arrays(g: SignedGraph, c: Mapping[Hashable, float]):
    iu = np.array([e.u for e in g.edges], dtype=int)
    iv = np.array([e.v for e in g.edges], dtype=int)
    sgn = np.array([1.0 if not e.odd else -1.0 for e in g.edges])
    cc = np.array([float(c[e.id]) for e in g.edges])
    return iu, iv, sgn, cc


def _normalize(p):
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def _violation(p, iu, iv, sgn, cc):
    """p has shape (batch, n, d); returns the hinge violations (batch, m)."""
    xv = np.einsum("bkd,bkd->bk", p[:, iu], p[:, iv])
    return np.maximum(0.0, sgn * (cc - xv))


def _residual_grad(p, iu, iv, sgn, cc):
    viol = _violation(p, iu, iv, sgn, cc)
    f = np.sum(viol ** 2, axis=1)
    coef = -2.0 * sgn * viol
    # gradient of sum coef_e * <p_u, p_v> is W p with W the symmetric weighted adjacency matrix
    eye = np.eye(p.shape[1])
    w = np.einsum("mi,bm,mj->bij", eye[iu], coef, eye[iv])
    return f, (w + w.transpose(0, 2, 1)) @ p, viol


def _tangent(p, grad):
    return grad - np.sum(grad * p, axis=2, keepdims=True) * p


def _descend(p, value_grad, iters, target=None, stall=300, stall_ratio=1e-4):
    """Batched Riemannian gradient descent on products of spheres with per-run backtracking.

    value_grad(points, run_indices) returns values and Euclidean gradients.
    """
    b = p.shape[0]
    step = np.full(b, 0.1)
    f, grad = value_grad(p, np.arange(b))
    history = deque(maxlen=stall)
    for it in range(iters):
        d = _tangent(p, grad)
        active = np.ones(b, dtype=bool)
        newp = p.copy()
        newf = f.copy()
        newg = grad.copy()
        dn = np.sum(d ** 2, axis=(1, 2))
        for _ in range(40):
            cand = _normalize(p[active] - step[active, None, None] * d[active])
            fc, gc = value_grad(cand, np.flatnonzero(active))
            ok = fc <= f[active] - 1e-4 * step[active] * dn[active]
            idx = np.flatnonzero(active)
            good = idx[ok]
            newp[good], newf[good], newg[good] = cand[ok], fc[ok], gc[ok]
            active[good] = False
            bad = idx[~ok]
            step[bad] *= 0.5
            tiny = step[bad] < 1e-14
            active[bad[tiny]] = False
            if not active.any():
                break
        moved = newf < f
        step[moved] *= 2.0
        p, f, grad = newp, newf, newg
        if target is not None and np.min(f) <= target:
            break
        history.append(float(np.min(f)))
        if len(history) == stall and history[0] - history[-1] <= stall_ratio * history[0]:
            break
    return p, f


def _levenberg_marquardt(p, iu, iv, sgn, cc, rounds=60, target=1e-28, stall=50, stall_ratio=1e-3):
    """Batched Levenberg-Marquardt on the hinge residuals, keeping every column on the unit sphere.

    Stops when every run is below target, or when the best run improved by
    less than stall_ratio over the last stall rounds.
    """
    b, n, d = p.shape
    m = len(iu)
    p = _normalize(p)
    lam = np.full(b, 1e-3)
    ar = np.arange(m)

    def residual(q):
        return np.maximum(0.0, sgn * (cc - np.einsum("bkd,bkd->bk", q[:, iu], q[:, iv])))

    r = residual(p)
    f = np.sum(r ** 2, axis=1)
    eye = np.eye(n * d)
    history = deque(maxlen=stall)
    for _ in range(rounds):
        history.append(float(np.min(f)))
        if len(history) == stall and history[-1] > history[0] * (1.0 - stall_ratio):
            break
        live = f > target
        if not live.any():
            break
        q = p[live]
        rl = r[live]
        on = (rl > 0).astype(float)
        qu, qv = q[:, iu], q[:, iv]
        # derivative of the residual along the sphere tangent spaces
        du = qv - np.sum(qv * qu, axis=2, keepdims=True) * qu
        dv = qu - np.sum(qu * qv, axis=2, keepdims=True) * qv
        coef = (-sgn * on)[:, :, None]
        jac = np.zeros((len(q), m, n, d))
        jac[:, ar, iu] += coef * du
        jac[:, ar, iv] += coef * dv
        jac = jac.reshape(len(q), m, n * d)
        jtj = np.einsum("bmi,bmj->bij", jac, jac)
        jtr = np.einsum("bmi,bm->bi", jac, rl)
        scale = np.maximum(np.einsum("bii->b", jtj) / (n * d), 1e-300)
        step = np.linalg.solve(jtj + (lam[live] * scale)[:, None, None] * eye, -jtr[:, :, None])[:, :, 0]
        cand = _normalize(q + step.reshape(q.shape))
        rc = residual(cand)
        fc = np.sum(rc ** 2, axis=1)
        idx = np.flatnonzero(live)
        ok = fc < f[live]
        p[idx[ok]] = cand[ok]
        r[idx[ok]] = rc[ok]
        f[idx[ok]] = fc[ok]
        lam[idx[ok]] = np.maximum(lam[idx[ok]] / 3.0, 1e-12)
        lam[idx[~ok]] *= 4.0
        if np.all(lam[idx[~ok]] > 1e12) and not ok.any():
            break
    return p, f


@dataclass(frozen=True)
class FoundPoint:
    P: np.ndarray
    residual: float

    found = True

    @property
    def X(self):
        return self.P.T @ self.P


@dataclass(frozen=True)
class BestResidual:
    residual: float

    found = False


def feasibility_oracle(g: SignedGraph, c: Mapping[Hashable, float], d: Optional[int] = None, restarts: int = 64,
                       iters: int = 5000, seed: int = 0, threshold: float = FEASIBLE_RESIDUAL, polish: int = 2000):
    """Minimise the sum of squared constraint violations over unit vectors in dimension d (default n).

    Restarts run in two batches (8, then the rest).  Each batch descends until
    the best run reaches threshold or the batch stalls; the best few runs are
    then finished with Levenberg-Marquardt.
    """
    n = g.n
    d = n if d is None else d
    if not g.edges:
        p = np.zeros((max(d, 1), n))
        p[0] = 1.0
        return FoundPoint(p, 0.0)
    iu, iv, sgn, cc = _edge_arrays(g, c)
    rng = np.random.default_rng(seed)

    def vg(p, idx):
        f, grad, _ = _residual_grad(p, iu, iv, sgn, cc)
        return f, grad

    def _finish(p, f):
        top = np.argsort(f)[:4]
        if not polish:
            return p[top], f[top]
        return _levenberg_marquardt(p[top], iu, iv, sgn, cc, rounds=polish, target=threshold * 1e-2)

    best = math.inf
    first = min(8, restarts)
    for chunk in (first, restarts - first):
        if chunk <= 0:
            continue
        p0 = _normalize(rng.standard_normal((chunk, n, d)))
        p, f = _descend(p0, vg, min(iters, 300), target=threshold, stall=100, stall_ratio=1e-3)
        q, fq = _finish(p, f)
        if fq.min() > threshold and iters > 300:
            p, f = _descend(p, vg, iters - 300, target=threshold, stall=100, stall_ratio=1e-3)
            q, fq = _finish(p, f)
        k = int(np.argmin(fq))
        best = min(best, float(fq[k]))
        if fq[k] <= threshold:
            return FoundPoint(q[k].T.copy(), float(fq[k]))
    return BestResidual(best)


# ---------------------------------------------------------------- uniqueness

@dataclass(frozen=True)
class LooksUnique:
    X: np.ndarray

    unique = True


@dataclass(frozen=True)
class FoundTwo:
    X1: np.ndarray
    X2: np.ndarray

    unique = False

    @property
    def gap(self) -> float:
        return float(np.max(np.abs(self.X1 - self.X2)))


class OracleError(RuntimeError):
    pass


def uniqueness_oracle(g: SignedGraph, c: Mapping[Hashable, float], trials: int = 32, seed: int = 0,
                      gap: float = 1e-6, safety: float = 100.0, iters: int = 300, penalty: float = 100.0):
    """Maximise random linear functionals over the feasible set and compare the maximisers.

    Each trial runs a penalised ascent on <R, X> and then restores feasibility
    with Levenberg-Marquardt.  Two maximisers count as different when they
    differ by more than gap and by more than safety * sqrt(violation), which
    bounds how far an almost feasible point can sit from a unique solution.
    """
    n = g.n
    if n <= 1:
        return LooksUnique(np.ones((n, n)))
    iu, iv, sgn, cc = _edge_arrays(g, c)
    rng = np.random.default_rng(seed)
    r = rng.standard_normal((trials, n, n))
    r = (r + r.transpose(0, 2, 1)) / 2
    p = _normalize(rng.standard_normal((trials, n, n)))

    def vg(q, idx):
        lin = np.einsum("bij,bid,bjd->b", r[idx], q, q)
        glin = 2 * np.einsum("bij,bjd->bid", r[idx], q)
        if not len(iu):
            return -lin, -glin
        f, grad, _ = _residual_grad(q, iu, iv, sgn, cc)
        return penalty * f - lin, penalty * grad - glin

    p, _ = _descend(p, vg, iters, stall=50, stall_ratio=1e-7)
    if len(iu):
        p, fres = _levenberg_marquardt(p, iu, iv, sgn, cc, rounds=200, target=1e-30)
        vmax = np.max(_violation(p, iu, iv, sgn, cc), axis=1)
    else:
        fres = vmax = np.zeros(trials)
    mats = []
    viols = []
    for k in range(trials):
        if fres[k] > FEASIBLE_RESIDUAL:
            continue
        xk = p[k] @ p[k].T
        for xj, vj in zip(mats, viols):
            diff = float(np.max(np.abs(xk - xj)))
            if diff > gap and diff > safety * math.sqrt(max(vmax[k], vj)):
                return FoundTwo(xj, xk)
        mats.append(xk)
        viols.append(float(vmax[k]))
    if not mats:
        raise OracleError("no feasible point found")
    return LooksUnique(mats[0])


# ---------------------------------------------------------------- weights

X_EVEN0 = Fraction(7, 12)
X_ODD0 = Fraction(5, 12)


def _interior_point(g: SignedGraph) -> Dict[Hashable, float]:
    # every odd cycle has value >= 2 * 5/12 + ... >= 7/6 here, so this is strictly inside
    return {e.id: float(X_ODD0 if e.odd else X_EVEN0) for e in g.edges}


def retract_to_boundary(g: SignedGraph, x0: Mapping[Hashable, float], x1: Mapping[Hashable, float]) -> float:
    """Largest t in [0, 1] with x0 + t (x1 - x0) inside the polytope (x0 must be inside)."""
    t = 1.0
    for _ in range(200):
        xt = {k: x0[k] + t * (x1[k] - x0[k]) for k in x0}
        w = {e.id: contribution(e.odd, xt[e.id]) for e in g.edges}
        best = min_odd_closed_walk(g, w)
        if best is None or best[0] >= 1.0 - 1e-13:
            return t
        walk = best[2]
        v0 = sum(contribution(g.edge(k).odd, x0[k]) for k in walk)
        v1 = sum(contribution(g.edge(k).odd, x1[k]) for k in walk)
        new = (v0 - 1.0) / (v0 - v1)
        if new >= t:
            return t
        t = new
    return t


def random_weights(g: SignedGraph, rng, mode: str = "boundary", denominator: int = 12) -> Dict[Hashable, float]:
    """Random rational angle weights; mode picks raw, inside, boundary, tight or outside."""
    raw = {e.id: rng.integers(0, denominator + 1) / denominator for e in g.edges}
    if mode == "raw":
        return raw
    x0 = _interior_point(g)
    if mode == "outside":
        target = dict(raw)
        for _ in range(20):
            t = retract_to_boundary(g, x0, target)
            if t < 1.0:
                depth = float(rng.uniform(0.02, 0.05))
                return _push_out(g, x0, target, t, depth)
            target = {k: float(rng.integers(0, denominator + 1) / denominator) for k in raw}
        return target
    t = retract_to_boundary(g, x0, raw)
    if mode == "inside":
        t *= float(rng.uniform(0.3, 0.9))
    x = {k: x0[k] + t * (raw[k] - x0[k]) for k in x0}
    if mode == "tight":
        x = push_to_tight(g, x)
    return x


def _push_out(g, x0, x1, t, depth):
    """Point past the boundary on the segment whose minimum odd cycle value is 1 - depth (if reachable)."""
    lo, hi = t, 1.0

    def minval(s):
        xs = {k: x0[k] + s * (x1[k] - x0[k]) for k in x0}
        w = {e.id: contribution(e.odd, xs[e.id]) for e in g.edges}
        best = min_odd_closed_walk(g, w)
        return xs, (math.inf if best is None else best[0])

    xs, v = minval(hi)
    if v >= 1.0 - depth:
        return xs
    for _ in range(60):
        mid = (lo + hi) / 2
        xs, v = minval(mid)
        if v > 1.0 - depth:
            lo = mid
        else:
            hi = mid
    return minval(hi)[0]


# ---------------------------------------------------------------- generator

K32_FREE = "K32Free"
WITH_K32_LEAVES = "WithK32Leaves"
WITH_SPLITS = "WithSplits"


class _Builder:
    def __init__(self, rng):
        self.rng = rng
        self.n = 0
        self.edges: List[Tuple[int, int, bool]] = []

    def vertex(self):
        self.n += 1
        return self.n - 1

    def add(self, u, v, odd=None):
        if odd is None:
            odd = bool(self.rng.integers(0, 2))
        self.edges.append((u, v, odd))

    def path(self, u, v, length):
        prev = u
        for _ in range(length - 1):
            w = self.vertex()
            self.add(prev, w)
            prev = w
        self.add(prev, v)

    def odd_cycle_on(self, u, v, length):
        """Cycle through u and v whose parity is forced odd."""
        first = len(self.edges)
        self.path(u, v, max(1, length // 2))
        self.path(v, u, max(1, length - length // 2))
        odd = sum(e[2] for e in self.edges[first:]) % 2
        if not odd:
            a, b, o = self.edges[first]
            self.edges[first] = (a, b, not o)

    def k32_on(self, a, b):
        c = self.vertex()
        for p, q in ((a, b), (a, c), (b, c)):
            self.add(p, q, False)
            self.add(p, q, True)

    def graph(self) -> SignedGraph:
        return SignedGraph(self.n, tuple(Edge(f"e{k}", u, v, o) for k, (u, v, o) in enumerate(self.edges)))


def _random_sp(b: _Builder, u: int, v: int, budget: int):
    """Random series-parallel (hence K4-minor free) block between u and v using about budget new vertices."""
    if budget <= 0:
        b.add(u, v)
        return
    if b.rng.random() < 0.5:
        w = b.vertex()
        left = int(b.rng.integers(0, budget))
        _random_sp(b, u, w, left)
        _random_sp(b, w, v, budget - 1 - left)
    else:
        left = int(b.rng.integers(0, budget + 1))
        _random_sp(b, u, v, left)
        _random_sp(b, u, v, budget - left)


def generate_instance(seed: int, size: int = 6, kind: str = K32_FREE, mode: str = "boundary", tries: int = 200):
    """Odd-K4 minor free instance built from series-parallel pieces, odd cycles and odd-K3^2 copies.

    Returns (graph, angle weights).  Pieces are joined at cut vertices or
    grafted onto an existing vertex pair, which keeps the underlying graph
    series-parallel and therefore free of any K4 minor.
    """
    rng = np.random.default_rng(seed)
    size = max(size, 2)
    for _ in range(tries):
        b = _Builder(rng)
        a, c = b.vertex(), b.vertex()
        if kind == WITH_SPLITS:
            # two non-bipartite sides meeting in {a, c}
            b.odd_cycle_on(a, c, int(rng.integers(3, 5)))
            side = int(rng.integers(3, 5))
            b.odd_cycle_on(a, c, side)
            if rng.random() < 0.5:
                b.add(a, c)
        elif kind == WITH_K32_LEAVES:
            b.k32_on(a, c)
        else:
            b.odd_cycle_on(a, c, int(rng.integers(3, 6)))
        while b.n < size:
            r = rng.random()
            if kind == WITH_K32_LEAVES and r < 0.3:
                u = int(rng.integers(0, b.n))
                b.k32_on(u, b.vertex())
                continue
            u = int(rng.integers(0, b.n))
            if r < 0.55:
                # graft onto the endpoints of an existing edge (parallel composition)
                e = b.edges[int(rng.integers(0, len(b.edges)))]
                _random_sp(b, e[0], e[1], int(rng.integers(0, max(1, size - b.n) + 1)))
            else:
                w = b.vertex()
                if rng.random() < 0.5:
                    b.odd_cycle_on(u, w, int(rng.integers(2, 5)))
                else:
                    _random_sp(b, u, w, int(rng.integers(0, max(1, size - b.n) + 1)))
        g = b.graph()
        if g.n > size + 2:
            continue
        if kind == K32_FREE:
            from .sgraph import ODD_K32
            try:
                if has_minor(g, ODD_K32):
                    continue
            except ValueError:
                continue
        return g, random_weights(g, rng, mode)
    raise RuntimeError("could not generate an instance")


# ---------------------------------------------------------------- catalog

def _canonical_key(n, kinds):
    """kinds: dict (a, b) -> 0 even, 1 odd, 2 parallel pair.  Minimum over relabellings of a
    switching-normalised form (a BFS forest of single edges resigned to even)."""
    best = None
    for perm in itertools.permutations(range(n)):
        lab = {}
        for (a, b), k in kinds.items():
            pa, pb = perm[a], perm[b]
            lab[(min(pa, pb), max(pa, pb))] = k
        adj = {w: [] for w in range(n)}
        for (a, b), k in lab.items():
            if k < 2:
                adj[a].append((b, k))
                adj[b].append((a, k))
        s = [-1] * n
        for root in range(n):
            if s[root] != -1:
                continue
            s[root] = 0
            queue = deque([root])
            while queue:
                a = queue.popleft()
                for b, k in sorted(adj[a]):
                    if s[b] == -1:
                        s[b] = s[a] ^ k
                        queue.append(b)
        key = tuple(sorted((a, b, k if k == 2 else k ^ s[a] ^ s[b]) for (a, b), k in lab.items()))
        if best is None or key < best:
            best = key
    return (n, best)


def signed_graph_catalog(max_n: int = 5, max_edges: int = 8) -> List[SignedGraph]:
    """Connected signed multigraphs (parallel pairs allowed, one even and one odd) up to isomorphism and resigning."""
    seen = set()
    out = [SignedGraph(1, ())]
    for h in nx.graph_atlas_g():
        k = h.number_of_nodes()
        if k < 2 or k > max_n or not nx.is_connected(h):
            continue
        pairs = sorted((min(a, b), max(a, b)) for a, b in h.edges())
        if len(pairs) > max_edges:
            continue
        for kinds in itertools.product((0, 1, 2), repeat=len(pairs)):
            if len(pairs) + sum(1 for t in kinds if t == 2) > max_edges:
                continue
            kd = dict(zip(pairs, kinds))
            key = _canonical_key(k, kd)
            if key in seen:
                continue
            seen.add(key)
            out.append(_from_key(key))
    return out


def _from_key(key) -> SignedGraph:
    n, items = key
    edges = []
    for a, b, k in items:
        if k == 2:
            edges.append(Edge(f"e{len(edges)}", a, b, False))
            edges.append(Edge(f"e{len(edges)}", a, b, True))
        else:
            edges.append(Edge(f"e{len(edges)}", a, b, bool(k)))
    return SignedGraph(n, tuple(edges))


CATALOG_MODES = ("boundary", "boundary", "boundary", "tight", "tight", "inside", "inside", "raw", "raw", "outside")


def catalog_instances(max_n: int = 5, max_edges: int = 8, per_graph: int = 10, seed: int = 0):
    """(index, graph, angle weights) triples: each catalog graph with per_graph random weightings."""
    out = []
    for gi, g in enumerate(signed_graph_catalog(max_n, max_edges)):
        rng = np.random.default_rng([seed, gi])
        for k in range(per_graph):
            out.append((gi, g, random_weights(g, rng, CATALOG_MODES[k % len(CATALOG_MODES)])))
    return out


def odd_k4_free(g: SignedGraph) -> bool:
    return not has_minor(g, ODD_K4)


def weights_c(x: Mapping[Hashable, float]) -> Dict[Hashable, float]:
    return to_c(x)
