"""Spanning-forest chain state and tree surgery.

A Tree is rooted with every non-root vertex pointing toward the root, and
carries per-edge subtree populations (the weight strictly below each edge,
away from the root).  Cut-edge discovery works either on a single rooted
tree or, via the truncated two-sided search, on the tree obtained by joining
two rooted trees with one connecting edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .graph import Assignment, Graph


@dataclass(frozen=True)
class PopWindow:
    """Inclusive integer population bounds; balance tests never touch floats.

    Real-valued bounds are normalized onto the integer lattice (ceil the low
    end, floor the high end), so a window like [1.4, 1.6] is empty.
    """

    lo: int
    hi: int

    @staticmethod
    def from_bounds(lo, hi) -> "PopWindow":
        return PopWindow(math.ceil(lo), math.floor(hi))

    @staticmethod
    def from_deviation(total_pop: int, n: int, deviation: float) -> "PopWindow":
        """Window [ideal*(1-f), ideal*(1+f)] with ideal = total/n, exactly."""
        if n < 1:
            raise ValueError("need n >= 1")
        if deviation < 0:
            raise ValueError("deviation must be nonnegative")
        ideal = Fraction(total_pop, n)
        f = Fraction(deviation)
        return PopWindow(math.ceil(ideal * (1 - f)), math.floor(ideal * (1 + f)))

    def contains(self, pop: int) -> bool:
        return self.lo <= pop <= self.hi


class Tree:
    """Rooted tree over a subset of graph vertices.

    ``parent[v] = (parent vertex, edge id)`` for every non-root v;
    ``subtree_pop[e]`` is the population strictly below edge e.
    """

    __slots__ = ("vertices", "edges", "root", "parent", "subtree_pop", "total_pop", "adj")

    def __init__(self, vertices, edges, root, parent, subtree_pop, total_pop, adj):
        self.vertices = vertices
        self.edges = edges
        self.root = root
        self.parent = parent
        self.subtree_pop = subtree_pop
        self.total_pop = total_pop
        self.adj = adj


def root_tree(vertices, edges, g: Graph, root: int) -> Tree:
    """Orient (vertices, edges) toward root and fill subtree populations.

    O(|V|): one outward pass to direct edges, one leaves-to-root pass to
    accumulate weights.
    """
    vertices = frozenset(vertices)
    edges = frozenset(edges)
    if root not in vertices:
        raise ValueError("root must belong to the vertex set")
    if len(edges) != len(vertices) - 1:
        raise ValueError("edge set is not a tree (wrong cardinality)")

    adj = {v: [] for v in vertices}
    for eid in edges:
        er = g.edges[eid]
        if er.u not in vertices or er.v not in vertices:
            raise ValueError(f"edge {eid} leaves the vertex set")
        adj[er.u].append((er.v, eid))
        adj[er.v].append((er.u, eid))
    adj = {v: tuple(lst) for v, lst in adj.items()}

    parent = {}
    order = [root]
    seen = {root}
    for u in order:  # BFS; order grows while iterating
        for v, eid in adj[u]:
            if v not in seen:
                seen.add(v)
                parent[v] = (u, eid)
                order.append(v)
    if len(order) != len(vertices):
        raise ValueError("edge set is disconnected (or cyclic)")

    subtree_pop = {}
    for v in reversed(order):
        if v == root:
            continue
        _, eid = parent[v]
        acc = g.pops[v]
        for w, child_eid in adj[v]:
            if child_eid != eid:
                acc += subtree_pop[child_eid]
        subtree_pop[eid] = acc

    total = sum(g.pops[v] for v in vertices)
    return Tree(vertices, edges, root, parent, subtree_pop, total, adj)


def find_cut_edges(t: Tree, total_pop: int, window: PopWindow) -> set:
    """Edges whose removal leaves both pieces inside the population window."""
    return {
        eid
        for eid, below in t.subtree_pop.items()
        if window.contains(below) and window.contains(total_pop - below)
    }


def _side_cut_edges(t: Tree, attach: int, far_lo: int, far_hi: int) -> set:
    """Valid cuts within one tree of a joined pair.

    Walk outward from the attachment vertex; for each tree edge the far side
    (the component not containing the attachment, hence not the other tree)
    has a population derivable from the stored subtree weights.  Far-side
    population only shrinks along a walk, so a branch is truncated as soon as
    it drops below far_lo.
    """
    out = set()
    stack = [attach]
    seen = {attach}
    while stack:
        u = stack.pop()
        for v, eid in t.adj[u]:
            if v in seen:
                continue
            if t.parent.get(v, (None, None))[1] == eid:
                far = t.subtree_pop[eid]  # v is u's child: far side is v's subtree
            else:
                far = t.total_pop - t.subtree_pop[eid]  # v is u's parent
            if far_lo <= far <= far_hi:
                out.add(eid)
            if far >= far_lo:  # deeper edges have far-side <= far
                seen.add(v)
                stack.append(v)
    return out


def joined_cut_edges(t_i: Tree, t_j: Tree, e: int, g: Graph, window: PopWindow) -> set:
    """Valid cuts of the tree formed by joining t_i and t_j with edge e.

    Equals find_cut_edges on the explicitly joined-and-rerooted tree, but
    reuses both trees' subtree weights and truncates hopeless search paths.
    """
    er = g.edges[e]
    if er.u in t_i.vertices and er.v in t_j.vertices:
        a, b = er.u, er.v
    elif er.v in t_i.vertices and er.u in t_j.vertices:
        a, b = er.v, er.u
    else:
        raise ValueError(f"edge {e} does not connect the two trees")

    total = t_i.total_pop + t_j.total_pop
    far_lo = max(window.lo, total - window.hi)
    far_hi = min(window.hi, total - window.lo)
    if far_lo > far_hi:
        return set()

    out = set()
    if window.contains(t_i.total_pop) and window.contains(t_j.total_pop):
        out.add(e)
    out |= _side_cut_edges(t_i, a, far_lo, far_hi)
    out |= _side_cut_edges(t_j, b, far_lo, far_hi)
    return out


def split_tree(t: Tree, cut: int, g: Graph):
    """Remove one edge and re-root the two pieces (root = smallest vertex id).

    Returned in deterministic order: the piece with the smaller minimum
    vertex id first.
    """
    if cut not in t.edges:
        raise ValueError(f"edge {cut} is not in the tree")
    er = g.edges[cut]
    child = er.u if t.parent.get(er.u, (None, None))[1] == cut else er.v

    below_vertices = {child}
    below_edges = set()
    stack = [child]
    while stack:
        u = stack.pop()
        for v, eid in t.adj[u]:
            if eid == cut or v in below_vertices:
                continue
            below_vertices.add(v)
            below_edges.add(eid)
            stack.append(v)

    rest_vertices = t.vertices - below_vertices
    rest_edges = t.edges - below_edges - {cut}
    first = root_tree(below_vertices, below_edges, g, min(below_vertices))
    second = root_tree(rest_vertices, rest_edges, g, min(rest_vertices))
    if min(first.vertices) > min(second.vertices):
        first, second = second, first
    return first, second


class SpanningForest:
    """Chain state: one spanning tree per partition, plus the induced labels.

    ``log_tau`` optionally caches each partition's log spanning-tree count;
    it is only maintained when the target measure needs it.
    """

    __slots__ = ("trees", "assignment", "log_tau")

    def __init__(self, trees, assignment: Assignment, log_tau=None):
        self.trees = tuple(trees)
        self.assignment = assignment
        self.log_tau = tuple(log_tau) if log_tau is not None else None

    @classmethod
    def from_trees(cls, g: Graph, trees, log_tau=None) -> "SpanningForest":
        labels = [-1] * g.num_nodes
        for i, t in enumerate(trees):
            for v in t.vertices:
                if labels[v] != -1:
                    raise ValueError(f"vertex {v} appears in two trees")
                labels[v] = i
        if any(lab == -1 for lab in labels):
            raise ValueError("trees do not span the graph")
        return cls(trees, Assignment(g, labels, len(trees)), log_tau)

    def replace_pair(self, g: Graph, i: int, j: int, tree_i: Tree, tree_j: Tree,
                     log_tau_pair=None) -> "SpanningForest":
        """New forest with partitions i and j redrawn; everything else shared."""
        trees = list(self.trees)
        trees[i] = tree_i
        trees[j] = tree_j
        labels = list(self.assignment.labels)
        for v in tree_i.vertices:
            labels[v] = i
        for v in tree_j.vertices:
            labels[v] = j
        log_tau = None
        if self.log_tau is not None:
            if log_tau_pair is None:
                raise ValueError("log_tau cache present but no replacement values given")
            log_tau = list(self.log_tau)
            log_tau[i], log_tau[j] = log_tau_pair
        return SpanningForest(trees, Assignment(g, labels, self.assignment.n), log_tau)
