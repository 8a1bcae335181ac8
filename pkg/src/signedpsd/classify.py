"""Unique solvability, universal rigidity of spherical tensegrities and super stability."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable, Mapping, Optional

import numpy as np

from . import complete
from .complete import RANK_TOL, CONSTRAINT_TOL, Completion, DualCertificate, numerical_rank, solve
from .metpoly import CYCLE_CAP, TOL_X, met_membership, to_c, to_x
from .sgraph import ODD_K32, SignedGraph, has_minor
from .tightstruct import (OTHER, SINGLE_VERTEX, SPANNING_HYPEREDGE, TRIANGLE, Hypergraph, build_hypergraph,
                          classify_hypergraph, degenerate_reduce, enumerate_tight_cycles)

UNIQUE_RANK1 = "UniqueRank1"
UNIQUE_RANK2 = "UniqueRank2"
UNIQUE_RANK3 = "UniqueRank3"
NOT_UNIQUE = "NotUnique"
INFEASIBLE = "Infeasible"

_CLASS_OF = {SINGLE_VERTEX: UNIQUE_RANK1, SPANNING_HYPEREDGE: UNIQUE_RANK2, TRIANGLE: UNIQUE_RANK3, OTHER: NOT_UNIQUE}

WITNESS_GAP = 1e-6


@dataclass(frozen=True)
class UniquenessVerdict:
    cls: str
    hypergraph: Optional[Hypergraph] = None
    witness: Optional[np.ndarray] = None
    solution: Optional[np.ndarray] = None
    dimension_ok: Optional[bool] = None

    @property
    def unique(self) -> bool:
        return self.cls in (UNIQUE_RANK1, UNIQUE_RANK2, UNIQUE_RANK3)

    @property
    def rank(self) -> Optional[int]:
        return int(self.cls[-1]) if self.unique else None


def _feasible(g: SignedGraph, c, xm: np.ndarray, tol: float = CONSTRAINT_TOL) -> bool:
    if np.max(np.abs(np.diag(xm) - 1.0), initial=0.0) > 1e-9:
        return False
    if np.linalg.eigvalsh((xm + xm.T) / 2)[0] < -1e-8:
        return False
    return min(complete._constraint_slack(g, c, xm).values(), default=0.0) >= -tol


def _second_solution(g: SignedGraph, x, res, seed: int, tol: float) -> Optional[np.ndarray]:
    """A feasible X differing from res.max_rank.X by more than WITNESS_GAP, if one is found."""
    c = to_c(x)
    base = res.max_rank.X

    def differs(xm):
        return xm is not None and np.max(np.abs(xm - base)) > WITNESS_GAP and _feasible(g, c, xm)

    if differs(res.low_rank.X):
        return res.low_rank.X
    other = solve(g, x=x, seed=seed + 1, tol=tol)
    if other.solved and differs(other.max_rank.X):
        return other.max_rank.X
    # tighten every constraint off the tight cycles by eps and solve again
    tight_edges = set()
    try:
        for cyc in enumerate_tight_cycles(g, x, tol):
            tight_edges.update(cyc.edges)
    except ValueError:
        return None
    slack = [min(x[e.id], 1 - x[e.id]) for e in g.edges if e.id not in tight_edges]
    eps = 0.5 * min(slack) if slack else 0.0
    if eps > 0:
        moved = {e.id: (x[e.id] if e.id in tight_edges else min(max(x[e.id] + (eps if e.odd else -eps), 0.0), 1.0))
                 for e in g.edges}
        alt = solve(g, x=moved, seed=seed, tol=tol)
        if alt.solved:
            for cand in (alt.low_rank.X, alt.max_rank.X):
                if differs(cand):
                    return cand
    from .oracle import uniqueness_oracle
    probe = uniqueness_oracle(g, c, seed=seed)
    if not probe.unique:
        for cand in (probe.X1, probe.X2):
            if differs(cand):
                return cand
    return None


def classify_unique(g: SignedGraph, c: Optional[Mapping[Hashable, float]] = None, x=None, seed: int = 0,
                    tol: float = TOL_X, cap: int = CYCLE_CAP, witness: bool = True) -> UniquenessVerdict:
    """Decide whether the completion problem has exactly one solution.

    The class comes from the hypergraph of tight odd cycles after degenerate
    edges are reduced: a single vertex, one spanning hyperedge, or three
    hyperedges meeting pairwise in one vertex each mean a unique solution of
    rank 1, 2 or 3.  Anything else admits a second solution, returned as the
    witness when witness is true.
    """
    if (c is None) == (x is None):
        raise ValueError("pass exactly one of c or x")
    x = to_x(c) if x is None else {k: float(v) for k, v in x.items()}
    x = {e.id: x[e.id] for e in g.edges}
    if not met_membership(g, x, tol).inside:
        return UniquenessVerdict(INFEASIBLE)
    red = degenerate_reduce(g, x, tol)
    cycles = enumerate_tight_cycles(red.graph, red.x, tol, cap)
    h = build_hypergraph(cycles, red.graph.n)
    kind = classify_hypergraph(h)
    if kind == TRIANGLE and len(g.edges) <= 16 and not has_minor(g, ODD_K32):
        raise RuntimeError("triangle hypergraph on an odd-K3^2 minor free instance")
    cls = _CLASS_OF[kind]
    res = solve(g, x=x, seed=seed, tol=tol, cap=cap)
    second = None
    if cls == NOT_UNIQUE and witness:
        second = _second_solution(g, x, res, seed, tol)
    return UniquenessVerdict(cls, h, second, res.max_rank.X)


@dataclass(frozen=True)
class Tensegrity:
    """Signed graph with a unit vector per vertex; P is d x n."""

    graph: SignedGraph
    P: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.P, dtype=float)
        if p.ndim != 2 or p.shape[1] != self.graph.n:
            raise ValueError("configuration must be d x n")
        if np.max(np.abs(np.linalg.norm(p, axis=0) - 1.0), initial=0.0) > 1e-10:
            raise ValueError("configuration columns must be unit vectors")
        object.__setattr__(self, "P", p)

    @property
    def d(self) -> int:
        return self.P.shape[0]

    def weights(self):
        return {e.id: float(np.clip(self.P[:, e.u] @ self.P[:, e.v], -1.0, 1.0)) for e in self.graph.edges}

    @classmethod
    def from_completion(cls, g: SignedGraph, completion: Completion):
        return cls(g, complete.compress(completion.P))


def classify_rigidity(t: Tensegrity, seed: int = 0, tol: float = TOL_X, witness: bool = True) -> UniquenessVerdict:
    """Universal rigidity of a tensegrity: its completion problem has a unique solution."""
    v = classify_unique(t.graph, c=t.weights(), seed=seed, tol=tol, witness=witness)
    if v.unique:
        dim = numerical_rank(t.P)
        v = UniquenessVerdict(v.cls, v.hypergraph, v.witness, v.solution, dim <= v.rank)
    return v


@dataclass(frozen=True)
class SuperStable:
    ok = True


@dataclass(frozen=True)
class Fails:
    reason: str
    detail: str = ""

    ok = False


CORANK = "corank"
SAP_SPACE = "SAP-space"


def _tight_two_cycles(t: Tensegrity, tol: float):
    """Vertex pairs joined by an even and an odd edge that both hold with equality at p."""
    x = to_x(t.weights())
    seen = {}
    out = set()
    for e in t.graph.edges:
        key = (min(e.u, e.v), max(e.u, e.v))
        for other in seen.get(key, ()):
            if other.odd != e.odd and abs(x[other.id] - x[e.id]) <= tol:
                out.add(key)
        seen.setdefault(key, []).append(e)
    return out


def super_stable_check(t: Tensegrity, dual: DualCertificate, rank_tol: float = RANK_TOL, support_tol: float = 1e-9,
                       two_cycles: bool = True, tol: float = TOL_X):
    """Corank of Omega equals d, and no nonzero symmetric S has p(i)^T S p(j) = 0 on vertices and the stressed edges.

    A tight two-cycle carries a stress (-1 on the even edge, +1 on the odd one)
    that leaves Omega unchanged, so it can be added to any optimal dual.  With
    two_cycles those pairs join the stressed set.
    """
    om = dual.Omega
    n = t.graph.n
    if om.shape != (n, n):
        raise ValueError("dual and configuration sizes differ")
    corank = n - numerical_rank(om, rank_tol)
    if corank != t.d:
        return Fails(CORANK, f"corank {corank} != {t.d}")
    d = t.d
    basis = []
    for a, b in itertools.combinations_with_replacement(range(d), 2):
        s = np.zeros((d, d))
        s[a, b] = s[b, a] = 1.0
        basis.append(s)
    scale = max(1.0, max((abs(w) for w in dual.edge_weights.values()), default=0.0))
    pairs = [(i, i) for i in range(n)]
    pairs += [(t.graph.edge(k).u, t.graph.edge(k).v) for k, w in dual.edge_weights.items()
              if abs(w) > support_tol * scale]
    if two_cycles:
        pairs += sorted(_tight_two_cycles(t, tol))
    rows = np.array([[t.P[:, i] @ s @ t.P[:, j] for s in basis] for i, j in pairs])
    r = numerical_rank(rows, rank_tol)
    if r < len(basis):
        return Fails(SAP_SPACE, f"rank {r} < {len(basis)}")
    return SuperStable()
