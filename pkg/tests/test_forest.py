import itertools

import pytest

from frcom.fixtures import random_connected_graph
from frcom.forest import PopWindow, find_cut_edges, joined_cut_edges, root_tree, split_tree
from frcom.graph import induced_subgraph
from frcom.oracle import all_spanning_trees, enumerate_partitions
from frcom.rng import RngStream


def star_graph():
    # center node 0, leaves 1..3 with pops 2,3,4
    from frcom.graph import EdgeRecord, Graph, NodeRecord
    nodes = [NodeRecord(0, 1), NodeRecord(1, 2), NodeRecord(2, 3), NodeRecord(3, 4)]
    edges = [EdgeRecord(0, 0, 1), EdgeRecord(1, 0, 2), EdgeRecord(2, 0, 3)]
    return Graph(nodes, edges)


def test_pop_window_normalization():
    w = PopWindow.from_bounds(1.4, 1.6)
    assert (w.lo, w.hi) == (2, 1)
    assert not any(w.contains(p) for p in range(10))
    assert PopWindow.from_bounds(1, 2) == PopWindow(1, 2)


def test_pop_window_from_deviation():
    # ideal 3, 5% deviation: [2.85, 3.15] -> integer window [3, 3]
    assert PopWindow.from_deviation(6, 2, 0.05) == PopWindow(3, 3)
    assert PopWindow.from_deviation(16, 2, 0.05) == PopWindow(8, 8)
    # a third of 10 with 0 deviation has no integer in range
    w = PopWindow.from_deviation(10, 3, 0.0)
    assert w.lo > w.hi


def test_root_tree_chain(p3):
    t = root_tree({0, 1, 2}, {0, 1}, p3, root=1)
    assert t.subtree_pop == {0: 1, 1: 1}
    t = root_tree({0, 1, 2}, {0, 1}, p3, root=0)
    # edge 1 = (b,c) carries 1; edge 0 = (a,b) carries b+c = 2
    assert t.subtree_pop == {1: 1, 0: 2}
    assert t.parent[1] == (0, 0)
    assert t.total_pop == 3


def test_root_tree_star():
    g = star_graph()
    t = root_tree({0, 1, 2, 3}, {0, 1, 2}, g, root=0)
    assert t.subtree_pop == {0: 2, 1: 3, 2: 4}


def test_root_tree_errors(p3, c4):
    with pytest.raises(ValueError, match="cardinality"):
        root_tree({0, 1, 2}, {0}, p3, root=0)
    # C4's full edge set is a cycle: right cardinality only if we drop a vertex
    with pytest.raises(ValueError):
        root_tree({0, 1, 2}, {0, 1, 2, 3}, c4, root=0)


def test_find_cut_edges_p3(p3):
    t = root_tree({0, 1, 2}, {0, 1}, p3, root=0)
    assert find_cut_edges(t, 3, PopWindow(1, 2)) == {0, 1}
    assert find_cut_edges(t, 3, PopWindow.from_bounds(1.4, 1.6)) == set()


def _eid(g, u, v):
    for w, e in g.adjacency[u]:
        if w == v:
            return e
    raise KeyError((u, v))


def test_find_cut_edges_snake(grid23):
    # snake path 0-1-2-5-4-3 through the 2x3 grid; only the middle edge
    # splits 3 / 3 (cumulative pops along the path: 1,2,3,4,5)
    eids = [_eid(grid23, u, v) for u, v in [(0, 1), (1, 2), (2, 5), (5, 4), (4, 3)]]
    t = root_tree(set(range(6)), set(eids), grid23, root=0)
    middle = eids[2]
    assert find_cut_edges(t, 6, PopWindow(3, 3)) == {middle}


def test_split_tree_round_trip(grid23):
    sub = induced_subgraph(grid23, range(6))
    for edges in all_spanning_trees(sub):
        t = root_tree(range(6), edges, grid23, root=0)
        for cut in edges:
            a, b = split_tree(t, cut, grid23)
            assert a.vertices | b.vertices == t.vertices
            assert a.vertices.isdisjoint(b.vertices)
            assert a.edges | b.edges | {cut} == t.edges
            # reassemble and re-root: same edge set
            again = root_tree(t.vertices, a.edges | b.edges | {cut}, grid23, root=0)
            assert again.edges == t.edges


def test_split_tree_examples(p3):
    t = root_tree({0, 1, 2}, {0, 1}, p3, root=0)
    a, b = split_tree(t, 0, p3)
    assert (a.vertices, b.vertices) == (frozenset({0}), frozenset({1, 2}))
    g = star_graph()
    t = root_tree({0, 1, 2, 3}, {0, 1, 2}, g, root=0)
    a, b = split_tree(t, 2, g)  # cut the (0,3) spoke: leaf singleton + rest
    assert (a.vertices, b.vertices) == (frozenset({0, 1, 2}), frozenset({3}))
    with pytest.raises(ValueError, match="not in the tree"):
        split_tree(t, 99, g)


def test_subtree_pop_consistency(grid33):
    rng = RngStream(11, "subtree")
    from frcom.wilson import wilson_ust
    sub = induced_subgraph(grid33, range(9))
    for _ in range(25):
        t = root_tree(range(9), wilson_ust(sub, rng), grid33, root=0)
        for e, below in t.subtree_pop.items():
            assert 1 <= below <= t.total_pop - 1
            assert below + (t.total_pop - below) == t.total_pop


def test_joined_cut_edges_p3(p3):
    t0 = root_tree({0}, set(), p3, 0)
    t1 = root_tree({1, 2}, {1}, p3, 1)
    assert joined_cut_edges(t0, t1, 0, p3, PopWindow(1, 2)) == {0, 1}
    assert joined_cut_edges(t0, t1, 0, p3, PopWindow(3, 3)) == set()
    with pytest.raises(ValueError, match="does not connect"):
        joined_cut_edges(t0, t1, 1, p3, PopWindow(1, 2))


def _exhaustive_joined_check(g, n_parts, window):
    """joined_cut_edges must equal find_cut_edges on the explicitly joined
    tree for every (partition, tree pair, connecting edge) combination."""
    wide = PopWindow(1, g.total_pop - 1)
    cat = enumerate_partitions(g, n_parts, wide)
    checked = 0
    for labels in cat.partitions:
        parts = [[v for v, lab in enumerate(labels) if lab == k] for k in range(n_parts)]
        for i, j in itertools.combinations(range(n_parts), 2):
            connecting = [e.id for e in g.edges
                          if {labels[e.u], labels[e.v]} == {i, j}]
            if not connecting:
                continue
            trees_i = all_spanning_trees(induced_subgraph(g, parts[i]))
            trees_j = all_spanning_trees(induced_subgraph(g, parts[j]))
            for ei, ej in itertools.product(trees_i, trees_j):
                ti = root_tree(parts[i], ei, g, min(parts[i]))
                tj = root_tree(parts[j], ej, g, min(parts[j]))
                for e in connecting:
                    fast = joined_cut_edges(ti, tj, e, g, window)
                    joined = root_tree(set(parts[i]) | set(parts[j]),
                                       set(ei) | set(ej) | {e}, g,
                                       min(min(parts[i]), min(parts[j])))
                    naive = find_cut_edges(joined, joined.total_pop, window)
                    assert fast == naive
                    checked += 1
    return checked


def test_joined_cut_edges_matches_naive(p3, c4, k4, grid23):
    total = 0
    for g in (p3, c4, k4, grid23):
        for window in (PopWindow(1, g.total_pop - 1),
                       PopWindow.from_deviation(g.total_pop, 2, 0.34),
                       PopWindow(g.total_pop, g.total_pop)):
            total += _exhaustive_joined_check(g, 2, window)
    assert total > 300  # guard against the loops going vacuous


def test_joined_cut_edges_random_graphs():
    rng = RngStream(5, "joined-random")
    for k in range(10):
        g = random_connected_graph(7, rng)
        window = PopWindow.from_deviation(g.total_pop, 2, 0.5)
        _exhaustive_joined_check(g, 2, window)
