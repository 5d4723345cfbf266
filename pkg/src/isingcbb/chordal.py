"""Dependency graphs, chordality tests and minimum-degree chordal extensions."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .model import ContractViolation, SpinModel


@dataclass(frozen=True)
class DependencyGraph:
    n: int
    adjacency: tuple[frozenset[int], ...]

    @classmethod
    def from_edges(cls, n: int, edges) -> DependencyGraph:
        adj: list[set[int]] = [set() for _ in range(n)]
        for a, b in edges:
            if a == b:
                raise ContractViolation(f"self-loop on vertex {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ContractViolation(f"edge ({a}, {b}) out of range")
            adj[a].add(b)
            adj[b].add(a)
        return cls(n, tuple(frozenset(s) for s in adj))

    def edges(self) -> list[tuple[int, int]]:
        return sorted((a, b) for a in range(self.n) for b in self.adjacency[a] if a < b)

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.adjacency[a]

    def neighbors(self, v: int) -> list[int]:
        return sorted(self.adjacency[v])


@dataclass(frozen=True)
class ChordalityResult:
    chordal: bool
    ordering: tuple[int, ...] | None = None
    cycle: tuple[int, ...] | None = None

    def __bool__(self) -> bool:
        return self.chordal


@dataclass(frozen=True)
class CliqueDecomposition:
    """Chordal extension of a dependency graph and its maximal cliques.

    ``ordering`` is a perfect elimination ordering of the extended graph
    (vertices listed in the order they are eliminated).
    """

    n: int
    ordering: tuple[int, ...]
    fill_edges: frozenset[tuple[int, int]]
    cliques: tuple[tuple[int, ...], ...]
    vertex_to_cliques: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def max_clique_size(self) -> int:
        return max((len(c) for c in self.cliques), default=0)

    def extended_graph(self, base: DependencyGraph) -> DependencyGraph:
        return DependencyGraph.from_edges(base.n, list(base.edges()) + sorted(self.fill_edges))

    def dump(self) -> str:
        """Plain-text listing: ordering, fill edges, then one clique per line."""
        lines = ["ordering " + " ".join(map(str, self.ordering))]
        lines.append(f"fill {len(self.fill_edges)}")
        lines += [f"{a} {b}" for a, b in sorted(self.fill_edges)]
        lines.append(f"cliques {len(self.cliques)}")
        lines += [" ".join(map(str, c)) for c in self.cliques]
        return "\n".join(lines) + "\n"


def dependency_graph(model: SpinModel) -> DependencyGraph:
    return DependencyGraph.from_edges(model.n, [(i, j) for i, j, _ in model.couplings])


def lex_bfs(g: DependencyGraph) -> list[int]:
    """Lexicographic breadth-first search order (partition refinement).

    The reverse of the returned order is a perfect elimination ordering
    whenever ``g`` is chordal.  Ties go to the smallest vertex index.
    """
    # each part is a sorted list; parts are kept in a list, highest label first
    parts: list[list[int]] = [list(range(g.n))] if g.n else []
    order: list[int] = []
    while parts:
        v = parts[0].pop(0)
        if not parts[0]:
            parts.pop(0)
        order.append(v)
        nbrs = g.adjacency[v]
        refined: list[list[int]] = []
        for part in parts:
            inside = [u for u in part if u in nbrs]
            outside = [u for u in part if u not in nbrs]
            if inside:
                refined.append(inside)
            if outside:
                refined.append(outside)
        parts = refined
    return order


def is_perfect_elimination_ordering(g: DependencyGraph, ordering: Sequence[int]) -> bool:
    if sorted(ordering) != list(range(g.n)):
        return False
    pos = {v: k for k, v in enumerate(ordering)}
    for v in ordering:
        later = [u for u in g.adjacency[v] if pos[u] > pos[v]]
        if not later:
            continue
        # it suffices that the earliest later neighbour sees all the others
        parent = min(later, key=pos.__getitem__)
        for u in later:
            if u != parent and u not in g.adjacency[parent]:
                return False
    return True


def _chordless_cycle(g: DependencyGraph) -> tuple[int, ...] | None:
    # For each vertex v and non-adjacent neighbours a, b: a shortest a-b path
    # avoiding v and v's other neighbours closes an induced cycle of length >= 4.
    for v in range(g.n):
        nbrs = sorted(g.adjacency[v])
        for x in range(len(nbrs)):
            for y in range(x + 1, len(nbrs)):
                a, b = nbrs[x], nbrs[y]
                if b in g.adjacency[a]:
                    continue
                blocked = (set(nbrs) | {v}) - {a, b}
                prev = {a: None}
                queue = deque([a])
                while queue and b not in prev:
                    u = queue.popleft()
                    for w in sorted(g.adjacency[u]):
                        if w not in prev and w not in blocked:
                            prev[w] = u
                            queue.append(w)
                if b in prev:
                    path = []
                    node = b
                    while node is not None:
                        path.append(node)
                        node = prev[node]
                    return (v,) + tuple(reversed(path))
    return None


def is_chordal(g: DependencyGraph) -> ChordalityResult:
    ordering = lex_bfs(g)[::-1]
    if is_perfect_elimination_ordering(g, ordering):
        return ChordalityResult(True, ordering=tuple(ordering))
    cycle = _chordless_cycle(g)
    assert cycle is not None, "a graph without a PEO must contain a chordless cycle"
    return ChordalityResult(False, cycle=cycle)


def elimination_candidates(g: DependencyGraph, ordering: Sequence[int]) -> list[frozenset[int]]:
    pos = {v: k for k, v in enumerate(ordering)}
    return [
        frozenset([v, *(u for u in g.adjacency[v] if pos[u] > pos[v])]) for v in ordering
    ]


def maximal_cliques(g: DependencyGraph, ordering: Sequence[int]) -> list[tuple[int, ...]]:
    """Maximal cliques of a chordal graph from one of its PEOs.

    Each vertex contributes ``{v} + later neighbours``; candidates contained
    in another candidate are dropped.  Output is sorted for determinism.
    """
    if not is_perfect_elimination_ordering(g, ordering):
        raise ContractViolation("ordering is not a perfect elimination ordering")
    cands = elimination_candidates(g, ordering)
    containing: dict[int, list[int]] = {}
    for k, c in enumerate(cands):
        for v in c:
            containing.setdefault(v, []).append(k)
    keep = []
    for k, c in enumerate(cands):
        # any strict superset must contain c's first-eliminated vertex ordering[k]
        rivals = containing[ordering[k]]
        if any(r != k and len(cands[r]) > len(c) and c < cands[r] for r in rivals):
            continue
        keep.append(tuple(sorted(c)))
    return sorted(set(keep), key=lambda c: (c[0], c))


def minimum_degree_elimination(g: DependencyGraph) -> tuple[list[int], set[tuple[int, int]]]:
    """Elimination game with exact minimum degree, ties to the smallest index."""
    adj = [set(s) for s in g.adjacency]
    alive = set(range(g.n))
    ordering: list[int] = []
    fill: set[tuple[int, int]] = set()
    # bucket degrees to avoid an O(n) scan per step on large graphs
    buckets: dict[int, set[int]] = {}
    for v in alive:
        buckets.setdefault(len(adj[v]), set()).add(v)
    degree = [len(adj[v]) for v in range(g.n)]

    def move(v: int, new: int) -> None:
        buckets[degree[v]].discard(v)
        degree[v] = new
        buckets.setdefault(new, set()).add(v)

    while alive:
        d = min(k for k, b in buckets.items() if b)
        v = min(buckets[d])
        buckets[d].discard(v)
        alive.discard(v)
        ordering.append(v)
        nbrs = sorted(adj[v])
        for x, a in enumerate(nbrs):
            for b in nbrs[x + 1 :]:
                if b not in adj[a]:
                    adj[a].add(b)
                    adj[b].add(a)
                    fill.add((a, b))
        for a in nbrs:
            adj[a].discard(v)
            move(a, len(adj[a]))
        adj[v] = set()
    return ordering, fill


def chordal_extension(g: DependencyGraph) -> CliqueDecomposition:
    ordering, fill = minimum_degree_elimination(g)
    extended = DependencyGraph.from_edges(g.n, list(g.edges()) + sorted(fill))
    cliques = maximal_cliques(extended, ordering)
    v2c: list[list[int]] = [[] for _ in range(g.n)]
    for k, c in enumerate(cliques):
        for v in c:
            v2c[v].append(k)
    return CliqueDecomposition(
        n=g.n,
        ordering=tuple(ordering),
        fill_edges=frozenset(fill),
        cliques=tuple(cliques),
        vertex_to_cliques=tuple(tuple(x) for x in v2c),
    )


def dense_decomposition(n: int) -> CliqueDecomposition:
    """Single clique on every vertex (the relaxation without sparsity)."""
    fill = frozenset((a, b) for a in range(n) for b in range(a + 1, n))
    cliques = (tuple(range(n)),) if n else ()
    return CliqueDecomposition(
        n=n,
        ordering=tuple(range(n)),
        fill_edges=fill,
        cliques=cliques,
        vertex_to_cliques=tuple((0,) for _ in range(n)),
    )


def decompose(model: SpinModel) -> CliqueDecomposition:
    return chordal_extension(dependency_graph(model))
