"""Signed multigraphs and the structural operations the solver relies on.

A signed graph is a multigraph whose edges are tagged even or odd.  Resigning
on a vertex set flips the parity of every edge in the cut, contraction is
only allowed along even edges, and minors are taken with respect to those two
moves plus deletion.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

EVEN = "even"
ODD = "odd"

ODD_K4 = "odd-k4"
ODD_K32 = "odd-k32"

LEAF_ODD_K32 = "LeafOddK32"
LEAF_K32_FREE = "LeafK32Free"
CUT_JOIN = "CutJoin"
SPLIT_JOIN = "SplitJoin"


class NotOddK4FreeError(ValueError):
    """Raised when a structural step finds a piece that cannot occur in an odd-K4 minor free graph."""


def _parse_parity(parity) -> bool:
    if isinstance(parity, bool):
        return parity
    if parity in (ODD, "o", 1, -1):
        return True
    if parity in (EVEN, "e", 0):
        return False
    raise ValueError(f"unknown parity {parity!r}")


@dataclass(frozen=True)
class Edge:
    id: Hashable
    u: int
    v: int
    odd: bool

    @property
    def parity(self) -> str:
        return ODD if self.odd else EVEN

    @property
    def sign(self) -> int:
        return -1 if self.odd else 1

    def other(self, w: int) -> int:
        return self.v if w == self.u else self.u


@dataclass(frozen=True)
class SignedGraph:
    """Multigraph on vertices 0..n-1 with an odd/even tag per edge.

    Loops are dropped on construction.  Edge ids are arbitrary hashable
    tokens and survive resigning and contraction.
    """

    n: int
    edges: Tuple[Edge, ...] = ()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be nonnegative")
        kept = []
        seen = set()
        for e in self.edges:
            if not (0 <= e.u < self.n and 0 <= e.v < self.n):
                raise ValueError(f"edge {e.id!r} has an endpoint out of range")
            if e.id in seen:
                raise ValueError(f"duplicate edge id {e.id!r}")
            seen.add(e.id)
            if e.u != e.v:
                kept.append(e)
        object.__setattr__(self, "edges", tuple(kept))

    @classmethod
    def build(cls, n: int, triples: Iterable[Sequence]) -> "SignedGraph":
        """Build from (id, u, v, parity) records; parity is 'even'/'odd' or a bool meaning odd."""
        return cls(n, tuple(Edge(t[0], int(t[1]), int(t[2]), _parse_parity(t[3])) for t in triples))

    @cached_property
    def by_id(self) -> Dict[Hashable, Edge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def incidence(self) -> List[List[Edge]]:
        inc: List[List[Edge]] = [[] for _ in range(self.n)]
        for e in self.edges:
            inc[e.u].append(e)
            inc[e.v].append(e)
        return inc

    @property
    def ids(self) -> List[Hashable]:
        return [e.id for e in self.edges]

    def edge(self, eid: Hashable) -> Edge:
        try:
            return self.by_id[eid]
        except KeyError:
            raise KeyError(f"unknown edge id {eid!r}") from None

    def odd_edges(self) -> List[Hashable]:
        return [e.id for e in self.edges if e.odd]

    def restrict(self, edge_ids: Iterable[Hashable], extra_vertices: Iterable[int] = ()) -> Tuple["SignedGraph", Tuple[int, ...]]:
        """Subgraph on the given edges, relabelled compactly.

        Returns the subgraph and the tuple mapping new vertex -> old vertex.
        """
        chosen = [self.edge(i) for i in edge_ids]
        verts = set(extra_vertices)
        for e in chosen:
            verts.update((e.u, e.v))
        order = tuple(sorted(verts))
        pos = {w: k for k, w in enumerate(order)}
        sub = SignedGraph(len(order), tuple(Edge(e.id, pos[e.u], pos[e.v], e.odd) for e in chosen))
        return sub, order

    def with_edges(self, extra: Iterable[Edge]) -> "SignedGraph":
        return SignedGraph(self.n, self.edges + tuple(extra))

    def to_networkx(self) -> nx.MultiGraph:
        h = nx.MultiGraph()
        h.add_nodes_from(range(self.n))
        for e in self.edges:
            h.add_edge(e.u, e.v, key=e.id, odd=e.odd)
        return h

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        return nx.is_connected(self.to_networkx())


# ---------------------------------------------------------------- equivalence

def resign(g: SignedGraph, s: Iterable[int]) -> SignedGraph:
    s = set(s)
    for w in s:
        if not 0 <= w < g.n:
            raise ValueError(f"vertex {w} out of range")
    return SignedGraph(g.n, tuple(Edge(e.id, e.u, e.v, e.odd ^ ((e.u in s) != (e.v in s))) for e in g.edges))


def contract_even(g: SignedGraph, eid: Hashable) -> Tuple[SignedGraph, List[int]]:
    """Contract an even edge.  The higher endpoint is merged into the lower one.

    Returns the contracted graph and the map old vertex -> new vertex.
    """
    e = g.edge(eid)
    if e.odd:
        raise ValueError(f"edge {eid!r} is odd; resign before contracting")
    keep, gone = min(e.u, e.v), max(e.u, e.v)
    vmap = []
    for w in range(g.n):
        if w == gone:
            vmap.append(keep if keep < gone else keep - 1)
        else:
            vmap.append(w if w < gone else w - 1)
    edges = tuple(Edge(f.id, vmap[f.u], vmap[f.v], f.odd) for f in g.edges if f.id != eid)
    return SignedGraph(g.n - 1, edges), vmap


def is_bipartite(g: SignedGraph):
    """Return (True, S) with resign(g, S) all even, or (False, odd cycle as edge ids)."""
    side = [-1] * g.n
    parent: List[Optional[Edge]] = [None] * g.n
    depth = [0] * g.n
    for root in range(g.n):
        if side[root] != -1:
            continue
        side[root] = 0
        queue = deque([root])
        while queue:
            a = queue.popleft()
            for e in g.incidence[a]:
                b = e.other(a)
                want = side[a] ^ int(e.odd)
                if side[b] == -1:
                    side[b] = want
                    parent[b] = e
                    depth[b] = depth[a] + 1
                    queue.append(b)
                elif side[b] != want:
                    return False, _close_tree_cycle(a, b, e, parent, depth)
    return True, frozenset(w for w in range(g.n) if side[w] == 1)


def _close_tree_cycle(a, b, e, parent, depth):
    left, right = [], []
    x, y = a, b
    while depth[x] > depth[y]:
        left.append(parent[x].id)
        x = parent[x].other(x)
    while depth[y] > depth[x]:
        right.append(parent[y].id)
        y = parent[y].other(y)
    while x != y:
        left.append(parent[x].id)
        x = parent[x].other(x)
        right.append(parent[y].id)
        y = parent[y].other(y)
    # a -> lca -> b, then e closes the cycle
    return tuple(left) + tuple(reversed(right)) + (e.id,)


# ---------------------------------------------------------------- connectivity

def find_cut_vertex(g: SignedGraph) -> Optional[int]:
    if g.n < 3:
        return None
    simple = nx.Graph()
    simple.add_nodes_from(range(g.n))
    simple.add_edges_from((e.u, e.v) for e in g.edges)
    cuts = sorted(nx.articulation_points(simple))
    return cuts[0] if cuts else None


def _edges_connected_nonbipartite(g: SignedGraph, ids: Sequence[Hashable]) -> bool:
    sub, _ = g.restrict(ids)
    if not sub.is_connected():
        return False
    return not is_bipartite(sub)[0]


@dataclass(frozen=True)
class StrongSplit:
    e1: frozenset
    e2: frozenset
    u: int
    v: int


def find_strong_2_split(g: SignedGraph, max_groups: int = 22) -> Optional[StrongSplit]:
    """Exhaustive search for an edge bipartition meeting in exactly two vertices.

    For each pair {u, v} the edges are grouped by the components of g - {u, v}
    (u-v edges form singleton groups); every 2-colouring of the groups is tested
    against the four defining conditions.
    """
    for u, v in itertools.combinations(range(g.n), 2):
        groups = _split_groups(g, u, v)
        if len(groups) < 2 or len(groups) > max_groups:
            continue
        first, rest = groups[0], groups[1:]
        for mask in range(1 << len(rest)):
            e1 = list(first)
            e2 = []
            for k, grp in enumerate(rest):
                (e2 if (mask >> k) & 1 else e1).extend(grp)
            if not e2:
                continue
            if _is_strong_split(g, e1, e2):
                return StrongSplit(frozenset(e1), frozenset(e2), u, v)
    return None


def _split_groups(g: SignedGraph, u: int, v: int) -> List[List[Hashable]]:
    comp = [-1] * g.n
    label = 0
    for start in range(g.n):
        if start in (u, v) or comp[start] != -1:
            continue
        comp[start] = label
        stack = [start]
        while stack:
            a = stack.pop()
            for e in g.incidence[a]:
                b = e.other(a)
                if b not in (u, v) and comp[b] == -1:
                    comp[b] = label
                    stack.append(b)
        label += 1
    groups: List[List[Hashable]] = [[] for _ in range(label)]
    direct = []
    for e in g.edges:
        if {e.u, e.v} == {u, v}:
            direct.append([e.id])
        else:
            w = e.u if e.u not in (u, v) else e.v
            groups[comp[w]].append(e.id)
    return [grp for grp in groups if grp] + direct


def _vertices_of(g: SignedGraph, ids: Iterable[Hashable]) -> set:
    out = set()
    for i in ids:
        e = g.edge(i)
        out.update((e.u, e.v))
    return out


def _is_strong_split(g: SignedGraph, e1, e2) -> bool:
    v1, v2 = _vertices_of(g, e1), _vertices_of(g, e2)
    if len(v1 & v2) != 2 or len(v1) < 3 or len(v2) < 3:
        return False
    return _edges_connected_nonbipartite(g, e1) and _edges_connected_nonbipartite(g, e2)


def is_strong_2_split(g: SignedGraph, e1: Iterable[Hashable], e2: Iterable[Hashable]) -> bool:
    """Check the four conditions for a given edge bipartition."""
    e1, e2 = list(e1), list(e2)
    if set(e1) & set(e2) or set(e1) | set(e2) != set(g.ids):
        return False
    return _is_strong_split(g, e1, e2)


# ---------------------------------------------------------------- minors

def _pair_state(g: SignedGraph):
    pairs: Dict[Tuple[int, int], set] = {}
    for e in g.edges:
        a, b = min(e.u, e.v), max(e.u, e.v)
        pairs.setdefault((a, b), set()).add(int(e.odd))
    return g.n, pairs


def _normal_key(k: int, pairs: Dict[Tuple[int, int], set]):
    """Resign a BFS forest to all-even and serialise; parallel classes with both parities are fixed points."""
    adj: Dict[int, List[Tuple[int, int]]] = {w: [] for w in range(k)}
    for (a, b), par in pairs.items():
        p = min(par)
        adj[a].append((b, p))
        adj[b].append((a, p))
    s = [-1] * k
    for root in range(k):
        if s[root] != -1:
            continue
        s[root] = 0
        queue = deque([root])
        while queue:
            a = queue.popleft()
            for b, p in sorted(adj[a]):
                if s[b] == -1:
                    s[b] = s[a] ^ p
                    queue.append(b)
    return k, tuple(sorted((a, b, tuple(sorted(p ^ s[a] ^ s[b] for p in par))) for (a, b), par in pairs.items()))


def _contract_pair(k, pairs, a, b):
    flip = 0 not in pairs[(a, b)]
    merged: Dict[Tuple[int, int], set] = {}

    def relabel(w):
        if w == b:
            w = a
        return w if w < b else w - 1

    for (x, y), par in pairs.items():
        if (x, y) == (a, b):
            continue
        touches_b = (x == b) != (y == b)
        if flip and touches_b:
            par = {p ^ 1 for p in par}
        x2, y2 = relabel(x), relabel(y)
        if x2 == y2:
            continue
        key = (min(x2, y2), max(x2, y2))
        merged.setdefault(key, set()).update(par)
    return k - 1, merged


def _suppress_low_degree(k, pairs):
    # both patterns have at least three edges at every vertex, so a vertex
    # carrying at most two edges can be deleted or contracted away
    while True:
        load = [0] * k
        for (a, b), par in pairs.items():
            load[a] += len(par)
            load[b] += len(par)
        w = next((i for i in range(k) if load[i] <= 2), None)
        if w is None:
            return k, pairs
        nbrs = [p for p in pairs if w in p]
        if load[w] == 2 and len(nbrs) == 2:
            k, pairs = _contract_pair(k, pairs, *nbrs[0])
        else:
            pairs = {p: par for p, par in pairs.items() if w not in p}
            pairs = {(a - (a > w), b - (b > w)): par for (a, b), par in pairs.items()}
            k -= 1


def _contains_odd_k4(k, pairs) -> bool:
    if k < 4 or len(pairs) < 6:
        return False
    for quad in itertools.combinations(range(k), 4):
        ps = list(itertools.combinations(quad, 2))
        if any(p not in pairs for p in ps):
            continue
        options = [sorted(pairs[p]) for p in ps]
        idx = {p: i for i, p in enumerate(ps)}
        tris = [[idx[(x, y)], idx[(x, z)], idx[(y, z)]] for x, y, z in itertools.combinations(quad, 3)]
        for choice in itertools.product(*options):
            if all(choice[t[0]] ^ choice[t[1]] ^ choice[t[2]] for t in tris):
                return True
    return False


def _contains_odd_k32(k, pairs) -> bool:
    if k < 3:
        return False
    both = {p for p, par in pairs.items() if len(par) == 2}
    if len(both) < 3:
        return False
    for x, y, z in itertools.combinations(range(k), 3):
        if (x, y) in both and (x, z) in both and (y, z) in both:
            return True
    return False


def has_minor(g: SignedGraph, pattern: str, max_edges: int = 16) -> bool:
    """Exhaustive signed-minor test for odd-K4 or odd-K3^2.

    Every minor is a subgraph of some contraction, so the search walks the
    contraction lattice depth-first (memoised on a resign-normalised key) and
    looks for the pattern as a subgraph at each state.
    """
    if pattern not in (ODD_K4, ODD_K32):
        raise ValueError(f"unknown pattern {pattern!r}")
    k, pairs = _pair_state(g)
    size = sum(len(p) for p in pairs.values())
    if size > max_edges:
        raise ValueError(f"minor search limited to {max_edges} edges after merging parallels, got {size}")
    found = _contains_odd_k4 if pattern == ODD_K4 else _contains_odd_k32
    need = 4 if pattern == ODD_K4 else 3
    seen = set()
    stack = [(k, pairs)]
    while stack:
        k, pairs = _suppress_low_degree(*stack.pop())
        key = _normal_key(k, pairs)
        if key in seen:
            continue
        seen.add(key)
        if found(k, pairs):
            return True
        if k <= need:
            continue
        for a, b in pairs:
            stack.append(_contract_pair(k, pairs, a, b))
    return False


# ---------------------------------------------------------------- decomposition

def _is_odd_k32_shape(g: SignedGraph) -> bool:
    if g.n != 3:
        return False
    _, pairs = _pair_state(g)
    return len(pairs) == 3 and all(len(p) == 2 for p in pairs.values())


@dataclass
class DecompositionTree:
    kind: str
    piece: SignedGraph
    vertex_map: Tuple[int, ...]
    children: List["DecompositionTree"] = field(default_factory=list)
    cut_vertex: Optional[int] = None
    pair: Optional[Tuple[int, int]] = None
    virtual_even: Optional[Hashable] = None
    virtual_odd: Optional[Hashable] = None

    def leaves(self) -> List["DecompositionTree"]:
        if not self.children:
            return [self]
        return [leaf for c in self.children for leaf in c.leaves()]

    def real_edge_ids(self) -> List[Hashable]:
        """Edge ids of the input graph covered by this subtree, virtual edges dropped."""
        if not self.children:
            return [e.id for e in self.piece.edges if not is_virtual(e.id)]
        return [i for c in self.children for i in c.real_edge_ids()]


@dataclass(frozen=True)
class VirtualEdgeId:
    split: int
    odd: bool

    def __repr__(self):
        return f"virtual{self.split}{'o' if self.odd else 'e'}"


def is_virtual(eid: Hashable) -> bool:
    return isinstance(eid, VirtualEdgeId)


def decompose(g: SignedGraph, verify_leaves: bool = False) -> DecompositionTree:
    """Split recursively at cut vertices and strong 2-splits.

    Split parts receive a virtual even/odd pair of parallel edges on the shared
    vertices.  With verify_leaves, each K3^2-free leaf is checked by the
    exhaustive minor test and a violation raises NotOddK4FreeError.
    """
    if not g.is_connected():
        raise ValueError("decompose needs a connected graph")
    counter = itertools.count()
    return _decompose(g, tuple(range(g.n)), counter, verify_leaves)


def _decompose(piece: SignedGraph, vmap, counter, verify) -> DecompositionTree:
    if piece.n <= 2 or not piece.edges:
        return DecompositionTree(LEAF_K32_FREE, piece, vmap)
    if _is_odd_k32_shape(piece):
        return DecompositionTree(LEAF_ODD_K32, piece, vmap)
    cut = find_cut_vertex(piece)
    if cut is not None:
        node = DecompositionTree(CUT_JOIN, piece, vmap, cut_vertex=cut)
        for ids in _cut_groups(piece, cut):
            sub, order = piece.restrict(ids, extra_vertices=(cut,))
            node.children.append(_decompose(sub, order, counter, verify))
        return node
    split = find_strong_2_split(piece)
    if split is not None:
        k = next(counter)
        fe, fo = VirtualEdgeId(k, False), VirtualEdgeId(k, True)
        node = DecompositionTree(SPLIT_JOIN, piece, vmap, pair=(split.u, split.v), virtual_even=fe, virtual_odd=fo)
        for ids in (split.e1, split.e2):
            ordered = [i for i in piece.ids if i in ids]
            sub, order = piece.restrict(ordered)
            pos = {w: j for j, w in enumerate(order)}
            a, b = pos[split.u], pos[split.v]
            sub = sub.with_edges((Edge(fe, a, b, False), Edge(fo, a, b, True)))
            node.children.append(_decompose(sub, order, counter, verify))
        return node
    if verify and has_minor(piece, ODD_K32):
        raise NotOddK4FreeError("piece has no cut vertex or strong 2-split but contains an odd-K3^2 minor")
    return DecompositionTree(LEAF_K32_FREE, piece, vmap)


def _cut_groups(g: SignedGraph, cut: int) -> List[List[Hashable]]:
    comp = [-1] * g.n
    label = 0
    for start in range(g.n):
        if start == cut or comp[start] != -1:
            continue
        comp[start] = label
        stack = [start]
        while stack:
            a = stack.pop()
            for e in g.incidence[a]:
                b = e.other(a)
                if b != cut and comp[b] == -1:
                    comp[b] = label
                    stack.append(b)
        label += 1
    groups: List[List[Hashable]] = [[] for _ in range(label)]
    for e in g.edges:
        w = e.u if e.u != cut else e.v
        groups[comp[w]].append(e.id)
    return [grp for grp in groups if grp]
