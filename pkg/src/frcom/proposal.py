"""The forest-recombination proposal kernel.

One proposal = one (pair, tree, cut) attempt: pick two adjacent partitions,
draw a uniform spanning tree on their merged subgraph, and cut it at a
uniformly chosen balanced edge.  If no balanced cut exists the attempt is a
self-loop (the chain stays put but the step counts).

The forward and reverse proposal probabilities share the merged subgraph's
tree count, which therefore cancels from their ratio and is never computed.
What remains is, per direction, the pair-selection probability times the
"effective boundary" of the two trees: the sum over connecting edges e of
the probability that the joined tree built with e would be cut exactly at e.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import StateError
from .forest import PopWindow, SpanningForest, Tree, find_cut_edges, joined_cut_edges, \
    root_tree, split_tree
from .graph import Assignment, Graph, merged_subgraph, partition_adjacency
from .rng import RngStream
from .wilson import wilson_ust


class PairMethod(Enum):
    UNIFORM_NEIGHBOR = "uniform_neighbor"
    BOUNDARY_WEIGHTED = "boundary_weighted"


@dataclass(frozen=True)
class Proposal:
    """Candidate move plus everything the acceptance step needs.

    When ``self_loop`` is set no other field is meaningful.  Boundary and
    pair terms are stored in log space: ``log_bwd_*`` belong to the reverse
    move (current trees), ``log_fwd_*`` to the forward move (new trees).
    """

    pair: tuple
    self_loop: bool
    new_trees: tuple = None
    cut_edge: int = None
    log_fwd_boundary: float = math.nan
    log_bwd_boundary: float = math.nan
    log_pair_fwd: float = math.nan
    log_pair_bwd: float = math.nan


def _neighbor_map(adjacency: dict, n: int) -> dict:
    nbrs = {i: [] for i in range(n)}
    for (i, j) in adjacency:
        nbrs[i].append(j)
        nbrs[j].append(i)
    return nbrs


def pair_probability(method: PairMethod, g: Graph, a: Assignment, i: int, j: int) -> float:
    """Probability that the pair-selection step picks unordered {i, j}."""
    if i == j:
        raise ValueError("need two distinct partitions")
    adjacency = partition_adjacency(g, a)
    key = (min(i, j), max(i, j))
    if key not in adjacency:
        raise ValueError(f"partitions {i} and {j} are not adjacent")
    if method is PairMethod.UNIFORM_NEIGHBOR:
        nbrs = _neighbor_map(adjacency, a.n)
        return (1.0 / a.n) * (1.0 / len(nbrs[i]) + 1.0 / len(nbrs[j]))
    return adjacency[key] / sum(adjacency.values())


def sample_pair(method: PairMethod, g: Graph, a: Assignment, rng: RngStream) -> tuple:
    """Draw an adjacent pair exactly from pair_probability's distribution."""
    if a.n < 2:
        raise ValueError("need at least two partitions")
    if method is PairMethod.UNIFORM_NEIGHBOR:
        adjacency = partition_adjacency(g, a)
        nbrs = _neighbor_map(adjacency, a.n)
        i = rng.randint(a.n)
        j = sorted(nbrs[i])[rng.randint(len(nbrs[i]))]
        return (min(i, j), max(i, j))
    labels = a.labels
    crossing = [e for e in g.edges if labels[e.u] != labels[e.v]]
    e = crossing[rng.randint(len(crossing))]
    li, lj = labels[e.u], labels[e.v]
    return (min(li, lj), max(li, lj))


def effective_boundary(t_i: Tree, t_j: Tree, g: Graph, window: PopWindow) -> float:
    """Sum over connecting edges e of P(cut = e | joined tree built with e).

    Strictly positive whenever the current split itself satisfies the window
    (each joined tree then has at least one valid cut, namely e).
    """
    vi, vj = t_i.vertices, t_j.vertices
    connecting = []
    for e in g.edges:
        if (e.u in vi and e.v in vj) or (e.v in vi and e.u in vj):
            connecting.append(e.id)
    if not connecting:
        raise StateError("trees share no connecting edge; state is inconsistent")
    if not (window.contains(t_i.total_pop) and window.contains(t_j.total_pop)):
        raise StateError(
            "current split violates the population window; effective boundary is zero"
        )
    total = 0.0
    for e in connecting:
        cuts = joined_cut_edges(t_i, t_j, e, g, window)
        if e in cuts:
            total += 1.0 / len(cuts)
    return total


def propose(state: SpanningForest, method: PairMethod, window: PopWindow,
            g: Graph, rng: RngStream) -> Proposal:
    """One merge/redraw/cut attempt from the current forest."""
    a = state.assignment
    i, j = sample_pair(method, g, a, rng)
    sub = merged_subgraph(g, a, i, j)
    tree_edges = wilson_ust(sub, rng)
    merged = root_tree(sub.nodes, tree_edges, g, min(sub.nodes))
    cuts = find_cut_edges(merged, sub.total_pop, window)
    if not cuts:
        return Proposal(pair=(i, j), self_loop=True)

    cut = sorted(cuts)[rng.randint(len(cuts))]
    low, high = split_tree(merged, cut, g)  # lower label keeps the lower-id piece

    labels = list(a.labels)
    for v in low.vertices:
        labels[v] = i
    for v in high.vertices:
        labels[v] = j
    new_assignment = Assignment(g, labels, a.n)

    bwd = effective_boundary(state.trees[i], state.trees[j], g, window)
    fwd = effective_boundary(low, high, g, window)
    return Proposal(
        pair=(i, j),
        self_loop=False,
        new_trees=(low, high),
        cut_edge=cut,
        log_fwd_boundary=math.log(fwd),
        log_bwd_boundary=math.log(bwd),
        log_pair_fwd=math.log(pair_probability(method, g, a, i, j)),
        log_pair_bwd=math.log(pair_probability(method, g, new_assignment, i, j)),
    )


def log_proposal_ratio(p: Proposal) -> float:
    """log of (reverse proposal probability / forward proposal probability).

    The merged subgraph's tree count appears in both directions and cancels;
    it is never evaluated here.
    """
    if p.self_loop:
        raise ValueError("self-loop proposals have no proposal ratio")
    return (p.log_pair_bwd + p.log_bwd_boundary) - (p.log_pair_fwd + p.log_fwd_boundary)
