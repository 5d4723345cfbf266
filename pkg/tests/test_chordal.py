import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isingcbb.chordal import (
    DependencyGraph,
    chordal_extension,
    decompose,
    dense_decomposition,
    dependency_graph,
    is_chordal,
    is_perfect_elimination_ordering,
    lex_bfs,
    maximal_cliques,
    minimum_degree_elimination,
)
from isingcbb.model import ContractViolation, SpinModel, gen_chimera, gen_square, gen_triangular


def graph(n, edges):
    return DependencyGraph.from_edges(n, edges)


def cycle(n):
    return graph(n, [(k, (k + 1) % n) for k in range(n)])


def complete(n):
    return graph(n, list(itertools.combinations(range(n), 2)))


def path(n):
    return graph(n, [(k, k + 1) for k in range(n - 1)])


def to_nx(g):
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from(g.edges())
    return G


@st.composite
def random_graphs(draw, max_n=10):
    n = draw(st.integers(1, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return graph(n, edges)


def test_dependency_graph_examples():
    chain = SpinModel(3, ((0, 1, 1.0), (1, 2, 1.0)))
    assert dependency_graph(chain).edges() == [(0, 1), (1, 2)]
    sq = dependency_graph(gen_square(2, 1.0, 0))
    assert sorted(len(a) for a in sq.adjacency) == [2, 2, 2, 2]
    assert not is_chordal(sq)
    fields_only = SpinModel(3, (), ((0, 1.0), (2, -1.0)))
    assert dependency_graph(fields_only).edges() == []


def test_graph_validation():
    with pytest.raises(ContractViolation):
        graph(2, [(0, 0)])
    with pytest.raises(ContractViolation):
        graph(2, [(0, 2)])


def test_is_chordal_examples():
    r = is_chordal(path(5))
    assert r and is_perfect_elimination_ordering(path(5), r.ordering)
    assert is_chordal(complete(5))
    r = is_chordal(cycle(4))
    assert not r
    assert sorted(r.cycle) == [0, 1, 2, 3]


def _is_chordless_cycle(g, cyc):
    k = len(cyc)
    if k < 4 or len(set(cyc)) != k:
        return False
    for a, b in itertools.combinations(range(k), 2):
        adjacent = (b - a) in (1, k - 1)
        if g.has_edge(cyc[a], cyc[b]) != adjacent:
            return False
    return True


@given(random_graphs())
def test_is_chordal_matches_networkx(g):
    r = is_chordal(g)
    assert bool(r) == nx.is_chordal(to_nx(g))
    if r:
        assert is_perfect_elimination_ordering(g, r.ordering)
    else:
        assert _is_chordless_cycle(g, r.cycle)


def test_lex_bfs_visits_every_vertex():
    g = graph(5, [(0, 1), (3, 4)])
    assert sorted(lex_bfs(g)) == list(range(5))


def test_extension_examples():
    d = chordal_extension(path(3))
    assert d.fill_edges == frozenset() and d.cliques == ((0, 1), (1, 2))
    d = chordal_extension(cycle(4))
    assert len(d.fill_edges) == 1
    assert [len(c) for c in d.cliques] == [3, 3]


def test_zero_fill_on_chordal_inputs():
    rng = np.random.default_rng(1)
    for n in range(1, 12):
        parents = [int(rng.integers(0, k)) for k in range(1, n)]
        tree = graph(n, [(p, k + 1) for k, p in enumerate(parents)])
        assert chordal_extension(tree).fill_edges == frozenset()
    assert chordal_extension(path(7)).fill_edges == frozenset()
    assert chordal_extension(complete(6)).fill_edges == frozenset()
    assert chordal_extension(complete(6)).cliques == (tuple(range(6)),)


def _replay_outcomes(adj):
    """Every (fill, largest clique) reachable by min-degree with any tie-break.

    Also returns the outcome of always taking the smallest index.  Plain
    boolean matrix, written independently of the library routine.
    """
    outcomes = set()
    canonical = None

    def rec(A, alive, fill, largest, first):
        nonlocal canonical
        if not alive:
            outcomes.add((fill, largest))
            if first:
                canonical = (fill, largest)
            return
        deg = {v: int(A[v, list(alive)].sum()) for v in alive}
        d = min(deg.values())
        ties = sorted(v for v in alive if deg[v] == d)
        for k, v in enumerate(ties):
            B = A.copy()
            nb = [u for u in alive if B[v, u]]
            added = 0
            for a, b in itertools.combinations(nb, 2):
                if not B[a, b]:
                    B[a, b] = B[b, a] = True
                    added += 1
            rec(B, alive - {v}, fill + added, max(largest, len(nb) + 1), first and k == 0)

    rec(adj, frozenset(range(len(adj))), 0, 0, True)
    return outcomes, canonical


def test_grid_3x3_matches_exhaustive_replay():
    g = dependency_graph(gen_square(3, 1.0, 0))
    A = np.zeros((9, 9), dtype=bool)
    for a, b in g.edges():
        A[a, b] = A[b, a] = True
    outcomes, canonical = _replay_outcomes(A)
    d = chordal_extension(g)
    ours = (len(d.fill_edges), d.max_clique_size)
    assert ours in outcomes
    assert ours == canonical


def test_maximal_cliques_examples():
    k4 = complete(4)
    assert maximal_cliques(k4, [0, 1, 2, 3]) == [(0, 1, 2, 3)]
    chorded = graph(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)])
    assert maximal_cliques(chorded, [1, 3, 0, 2]) == [(0, 1, 2), (0, 2, 3)]


def test_maximal_cliques_rejects_bad_ordering():
    chorded = graph(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)])
    with pytest.raises(ContractViolation):
        maximal_cliques(chorded, [0, 1, 2, 3])


def test_sparse_extension_cliques_match_bron_kerbosch():
    g = dependency_graph(gen_square(4, 1.0, 0))
    d = chordal_extension(g)
    ext = d.extended_graph(g)
    oracle = sorted(tuple(sorted(c)) for c in nx.find_cliques(to_nx(ext)))
    assert sorted(d.cliques) == oracle
    assert {len(c) for c in d.cliques} >= {3, 4}


def _check_decomposition(g, d):
    ext = d.extended_graph(g)
    assert is_chordal(ext)
    assert is_perfect_elimination_ordering(ext, d.ordering)
    cover = [set(c) for c in d.cliques]
    for a, b in g.edges():
        assert any(a in c and b in c for c in cover)
    assert set().union(*cover) == set(range(g.n)) if g.n else True
    for x, y in itertools.permutations(cover, 2):
        assert not x < y
    for v, owners in enumerate(d.vertex_to_cliques):
        assert owners and all(v in d.cliques[k] for k in owners)
    assert len(d.cliques) <= g.n


@given(random_graphs(max_n=12))
def test_extension_invariants_random(g):
    d = chordal_extension(g)
    _check_decomposition(g, d)
    oracle = sorted(tuple(sorted(c)) for c in nx.find_cliques(to_nx(d.extended_graph(g))))
    assert sorted(d.cliques) == oracle


@given(random_graphs(max_n=12))
def test_fill_is_the_symbolic_fill_of_the_ordering(g):
    # replaying the recorded ordering must reproduce exactly the recorded fill
    ordering, fill = minimum_degree_elimination(g)
    adj = [set(a) for a in g.adjacency]
    replay = set()
    for v in ordering:
        nb = sorted(adj[v])
        for a, b in itertools.combinations(nb, 2):
            if b not in adj[a]:
                adj[a].add(b)
                adj[b].add(a)
                replay.add((a, b))
        for a in nb:
            adj[a].discard(v)
    assert replay == fill


def test_isolated_vertices_get_singleton_cliques():
    d = chordal_extension(graph(4, [(0, 1)]))
    assert (2,) in d.cliques and (3,) in d.cliques


@pytest.mark.parametrize(
    "model",
    [gen_square(6, 1.0, 0), gen_triangular(5, 4, 1.0, 0), gen_chimera(2, 1.0, 0)],
    ids=["square", "triangular", "chimera"],
)
def test_benchmark_families(model):
    g = dependency_graph(model)
    _check_decomposition(g, decompose(model))


def test_determinism_and_dump():
    m = gen_square(5, 1.0, 0)
    a, b = decompose(m), decompose(m)
    assert a == b and a.dump() == b.dump()
    lines = a.dump().splitlines()
    assert lines[0].startswith("ordering ")
    assert lines[1] == f"fill {len(a.fill_edges)}"


def test_dense_decomposition():
    d = dense_decomposition(4)
    assert d.cliques == ((0, 1, 2, 3),)
    assert len(d.fill_edges) == 6
    assert dense_decomposition(0).cliques == ()
