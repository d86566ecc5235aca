"""Vertex/edge structure for locally interacting systems.

Graphs are a root vertex plus a neighbor function. Finite graphs also carry
their vertex set; infinite ones (the integer line) leave it unset and are
only ever materialized through truncation. Vertex labels must be mutually
sortable within one graph (generators use ints, edge lists use strings), so
every routine that needs an ordering can use plain sorted().
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Hashable, List, Optional, Set, Tuple

Vertex = Hashable


@dataclass(frozen=True)
class LocallyFiniteGraph:
    root: Vertex
    neighbor_fn: Callable[[Vertex], Tuple[Vertex, ...]]
    vertex_set: Optional[FrozenSet[Vertex]] = None
    name: str = "custom"

    @property
    def is_finite(self) -> bool:
        return self.vertex_set is not None

    def require_finite(self) -> FrozenSet[Vertex]:
        if self.vertex_set is None:
            raise ValueError(f"graph {self.name!r} is not finite; truncate it first")
        return self.vertex_set

    def neighbors(self, v: Vertex) -> Tuple[Vertex, ...]:
        return self.neighbor_fn(v)

    def degree(self, v: Vertex) -> int:
        return len(self.neighbor_fn(v))

    def vertices(self) -> List[Vertex]:
        """Canonically ordered vertex list (finite graphs only)."""
        return sorted(self.require_finite())

    def edges(self) -> Set[FrozenSet[Vertex]]:
        out: Set[FrozenSet[Vertex]] = set()
        for u in self.require_finite():
            for v in self.neighbor_fn(u):
                out.add(frozenset((u, v)))
        return out

    def max_degree(self) -> int:
        return max((self.degree(v) for v in self.require_finite()), default=0)


def _adjacency_graph(adj: Dict[Vertex, Set[Vertex]], root: Vertex, name: str) -> LocallyFiniteGraph:
    frozen = {u: tuple(sorted(vs)) for u, vs in adj.items()}

    def neighbor_fn(v: Vertex) -> Tuple[Vertex, ...]:
        return frozen.get(v, ())

    return LocallyFiniteGraph(root, neighbor_fn, frozenset(adj.keys()), name)


def from_edges(pairs, root: Optional[Vertex] = None, name: str = "custom") -> LocallyFiniteGraph:
    """Finite graph from undirected vertex pairs; first-seen vertex is the
    default root."""
    adj: Dict[Vertex, Set[Vertex]] = {}
    first = None
    for u, v in pairs:
        if u == v:
            raise ValueError(f"self-loop at {u!r}")
        if first is None:
            first = u
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    if not adj:
        raise ValueError("empty edge list")
    if root is None:
        root = first
    if root not in adj:
        raise ValueError(f"root {root!r} is not a vertex")
    return _adjacency_graph(adj, root, name)


def parse_edge_list(text: str, root: Optional[Vertex] = None) -> LocallyFiniteGraph:
    """One 'u v' pair per line; blank lines and #-comments skipped."""
    pairs = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line {line!r}")
        pairs.append((parts[0], parts[1]))
    return from_edges(pairs, root=root, name="edge-list")


def path_graph(k: int) -> LocallyFiniteGraph:
    if k < 2:
        raise ValueError("path graph needs at least 2 vertices")
    return from_edges([(i, i + 1) for i in range(k - 1)], root=0, name=f"path:{k}")


def cycle_graph(k: int) -> LocallyFiniteGraph:
    if k < 3:
        raise ValueError("cycle graph needs at least 3 vertices")
    return from_edges([(i, (i + 1) % k) for i in range(k)], root=0, name=f"cycle:{k}")


def integer_line() -> LocallyFiniteGraph:
    """The two-sided infinite line on the integers, rooted at 0."""

    def neighbor_fn(v: int) -> Tuple[int, int]:
        return (v - 1, v + 1)

    return LocallyFiniteGraph(0, neighbor_fn, None, "zline")


def tree_graph(branching: int, depth: int) -> LocallyFiniteGraph:
    """Rooted tree, every vertex above the leaf level with `branching`
    children, heap-numbered from the root at 0."""
    if branching < 1 or depth < 0:
        raise ValueError("need branching >= 1 and depth >= 0")
    count = sum(branching ** lev for lev in range(depth + 1))
    pairs = []
    for v in range(count):
        for c in range(branching * v + 1, branching * v + branching + 1):
            if c < count:
                pairs.append((v, c))
    if not pairs:
        adj = {0: set()}
        return _adjacency_graph(adj, 0, f"tree:{branching}:{depth}")
    return from_edges(pairs, root=0, name=f"tree:{branching}:{depth}")


def parse_graph(text: str) -> LocallyFiniteGraph:
    """Named generators: path:k, cycle:k, zline, tree:b:d."""
    parts = text.split(":")
    try:
        if parts[0] == "path" and len(parts) == 2:
            return path_graph(int(parts[1]))
        if parts[0] == "cycle" and len(parts) == 2:
            return cycle_graph(int(parts[1]))
        if parts[0] == "zline" and len(parts) == 1:
            return integer_line()
        if parts[0] == "tree" and len(parts) == 3:
            return tree_graph(int(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise ValueError(f"bad graph spec {text!r}") from exc
    raise ValueError(f"unknown graph spec {text!r}")


def boundary(graph: LocallyFiniteGraph, region) -> FrozenSet[Vertex]:
    """First-order boundary: vertices outside the region adjacent to it."""
    region = frozenset(region)
    out: Set[Vertex] = set()
    for u in region:
        for v in graph.neighbors(u):
            if v not in region:
                out.add(v)
    return frozenset(out)


def boundary2(graph: LocallyFiniteGraph, region) -> FrozenSet[Vertex]:
    """Second-order boundary: the boundary together with the boundary of the
    enlarged region."""
    region = frozenset(region)
    first = boundary(graph, region)
    return first | boundary(graph, region | first)


def boundary2_by_bfs(graph: LocallyFiniteGraph, region) -> FrozenSet[Vertex]:
    """Same set as boundary2 via a 2-step breadth-first sweep.

    Kept as an independent second route so the two can be compared exactly
    in tests rather than trusting one implementation of the definition.
    """
    region = frozenset(region)
    seen = set(region)
    frontier = set(region)
    collected: Set[Vertex] = set()
    for _ in range(2):
        nxt: Set[Vertex] = set()
        for u in frontier:
            for v in graph.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    nxt.add(v)
        collected |= nxt
        frontier = nxt
    return frozenset(collected)


def _bron_kerbosch(adj: Dict[Vertex, Set[Vertex]], r: Set[Vertex], p: Set[Vertex],
                   x: Set[Vertex], out: List[FrozenSet[Vertex]]) -> None:
    if not p and not x:
        out.append(frozenset(r))
        return
    pivot = max(p | x, key=lambda v: len(adj[v] & p))
    for v in sorted(p - adj[pivot]):
        _bron_kerbosch(adj, r | {v}, p & adj[v], x & adj[v], out)
        p = p - {v}
        x = x | {v}


def two_cliques(graph: LocallyFiniteGraph) -> List[FrozenSet[Vertex]]:
    """All maximal diameter-at-most-2 vertex sets, plus every closed
    neighborhood {u} and its neighbors.

    A set has diameter at most 2 in the base graph exactly when it is a
    clique of the distance-2 square graph, so the maximal ones come from a
    maximal-clique enumeration of the square. Closed neighborhoods are the
    factorization units and are appended even when not maximal.
    """
    verts = graph.require_finite()
    square: Dict[Vertex, Set[Vertex]] = {}
    for u in verts:
        near = set(graph.neighbors(u))
        for w in tuple(near):
            near |= set(graph.neighbors(w))
        near.discard(u)
        square[u] = near
    found: List[FrozenSet[Vertex]] = []
    _bron_kerbosch(square, set(), set(verts), set(), found)
    for u in verts:
        found.append(frozenset((u,) + graph.neighbors(u)))
    unique = set(found)
    return sorted(unique, key=lambda s: (len(s), sorted(map(repr, s))))


@dataclass(frozen=True)
class TruncatedGraph:
    """Radius-n ball with its outer two shells completed into a clique.

    v_n holds the whole ball, u_n the shell pair at distances n-1 and n,
    interior the untouched part V_{n-2} where drifts keep their original
    form. graph is the finite graph on v_n with the base edges plus the
    clique on u_n.
    """

    graph: LocallyFiniteGraph
    base_root: Vertex
    level: int
    v_n: FrozenSet[Vertex]
    u_n: FrozenSet[Vertex]
    interior: FrozenSet[Vertex]


def truncate(base: LocallyFiniteGraph, root: Optional[Vertex] = None, n: int = 4) -> TruncatedGraph:
    """Materialize the radius-n truncation of a (possibly infinite) graph."""
    if n < 4:
        raise ValueError("truncation level must be at least 4")
    if root is None:
        root = base.root
    dist: Dict[Vertex, int] = {root: 0}
    frontier = [root]
    for d in range(1, n + 1):
        nxt = []
        for u in frontier:
            for v in base.neighbors(u):
                if v not in dist:
                    dist[v] = d
                    nxt.append(v)
        frontier = nxt
    v_n = frozenset(dist.keys())
    interior = frozenset(v for v, d in dist.items() if d <= n - 2)
    u_n = v_n - interior
    adj: Dict[Vertex, Set[Vertex]] = {v: set() for v in v_n}
    for u in v_n:
        for v in base.neighbors(u):
            if v in v_n:
                adj[u].add(v)
    for u in u_n:
        adj[u] |= u_n - {u}
    finite = _adjacency_graph(adj, root, f"{base.name}|n={n}")
    return TruncatedGraph(finite, root, n, v_n, u_n, interior)
