"""Exhaustive ground truth on small graphs.

Everything here recomputes from first principles: spanning trees by subset
enumeration, cut sets by explicitly splitting trees, tree counts by brute
force.  None of it reuses the fast search paths it is meant to validate.

States are compared on their label-free (canonical) form.  The production
chain carries partition labels for bookkeeping, but the measure and every
observable are label-invariant, and the deterministic relabeling used by the
proposal is only reversible up to label permutation; the kernel on canonical
forests is the object with exact detailed balance.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import SizeGuardError
from .forest import PopWindow, SpanningForest, root_tree
from .graph import Assignment, Graph, Subgraph, canonical_labels, induced_subgraph, \
    merged_subgraph, partition_adjacency
from .measure import MeasureParams, score
from .proposal import PairMethod, pair_probability
from .treecount import brute_count_trees, log_forest_count

_LABEL_SPACE_GUARD = 10 ** 9


@dataclass
class PartitionCatalog:
    """All balanced connected partitions of a graph, label-canonicalized."""

    n: int
    window: PopWindow
    partitions: tuple  # canonical label vectors
    log_weights: tuple = None

    def __len__(self):
        return len(self.partitions)

    def index(self) -> dict:
        return {labels: k for k, labels in enumerate(self.partitions)}


def _connected_set(g: Graph, vertices) -> bool:
    vertices = set(vertices)
    if not vertices:
        return False
    start = next(iter(vertices))
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v, _ in g.adjacency[u]:
            if v in vertices and v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(vertices)


def _connected_subsets(g: Graph, anchor: int, allowed, window: PopWindow):
    """All connected S with anchor in S, S within allowed, pop(S) in window.

    Classic candidate-list expansion: each candidate is either taken (and its
    new neighbors appended) or permanently excluded from the branch, so every
    subset is produced exactly once.  Branches are pruned once the population
    exceeds the window's top (populations are nonnegative).
    """
    allowed = set(allowed)
    pops = g.pops
    out = []

    def expand(current, pop_now, candidates, excluded):
        if window.contains(pop_now):
            out.append((frozenset(current), pop_now))
        for k, v in enumerate(candidates):
            pop_next = pop_now + pops[v]
            if pop_next > window.hi:
                continue
            new_excluded = excluded | set(candidates[:k])
            fresh = [
                w for w, _ in g.adjacency[v]
                if w in allowed and w not in current and w != v
                and w not in new_excluded and w not in candidates
            ]
            expand(current | {v}, pop_next, candidates[k + 1:] + sorted(set(fresh)),
                   new_excluded)

    if pops[anchor] <= window.hi:
        start_cands = sorted(w for w, _ in g.adjacency[anchor] if w in allowed)
        expand({anchor}, pops[anchor], start_cands, set())
    return out


def enumerate_partitions(g: Graph, n: int, window: PopWindow) -> PartitionCatalog:
    """Every balanced connected n-partition, exactly once, in canonical form.

    Grows the part containing the smallest unassigned node, recursing on the
    remainder; the growth order makes the output canonical by construction.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if n ** g.num_nodes > _LABEL_SPACE_GUARD:
        raise SizeGuardError(
            f"search space n^|V| = {n}^{g.num_nodes} exceeds the enumeration guard"
        )
    pops = g.pops
    results = []

    def rec(unassigned, unassigned_pop, parts_left, acc):
        if parts_left == 1:
            if window.contains(unassigned_pop) and _connected_set(g, unassigned):
                results.append(acc + [frozenset(unassigned)])
            return
        anchor = min(unassigned)
        rest_lo = window.lo * (parts_left - 1)
        rest_hi = window.hi * (parts_left - 1)
        for piece, piece_pop in _connected_subsets(g, anchor, unassigned, window):
            rest_pop = unassigned_pop - piece_pop
            if rest_lo <= rest_pop <= rest_hi:
                rec(unassigned - piece, rest_pop, parts_left - 1, acc + [piece])

    total = g.total_pop
    if window.lo * n <= total <= window.hi * n:
        rec(frozenset(range(g.num_nodes)), total, n, [])

    partitions = []
    for pieces in results:
        labels = [0] * g.num_nodes
        for k, piece in enumerate(pieces):
            for v in piece:
                labels[v] = k
        partitions.append(tuple(labels))
    return PartitionCatalog(n=n, window=window, partitions=tuple(sorted(partitions)))


def enumerate_partitions_label_filter(g: Graph, n: int, window: PopWindow) -> PartitionCatalog:
    """Independent enumeration strategy: filter all canonical label vectors."""
    if n ** g.num_nodes > 2 * 10 ** 7:
        raise SizeGuardError("label-filter enumeration is limited to tiny graphs")
    pops = g.pops
    keep = []
    for labels in itertools.product(range(n), repeat=g.num_nodes):
        if canonical_labels(labels) != labels:
            continue
        part_pop = [0] * n
        members = [[] for _ in range(n)]
        for v, lab in enumerate(labels):
            part_pop[lab] += pops[v]
            members[lab].append(v)
        if any(not m for m in members):
            continue
        if not all(window.contains(p) for p in part_pop):
            continue
        if all(_connected_set(g, m) for m in members):
            keep.append(labels)
    return PartitionCatalog(n=n, window=window, partitions=tuple(sorted(keep)))


def exact_distribution(cat: PartitionCatalog, g: Graph, params: MeasureParams) -> np.ndarray:
    """Exact partition probabilities: weight exp(-beta J) * count^(1-gamma).

    The spanning-forest multiplicity of each partition enters with exponent
    (1 - gamma); at gamma = 1 the distribution depends on the score alone.
    """
    logs = []
    for labels in cat.partitions:
        a = Assignment(g, labels, cat.n)
        s = score(g, a, params)
        if s.total == math.inf:
            logs.append(-math.inf)
            continue
        lw = -params.beta * s.total
        if params.gamma != 1:
            lw += (1.0 - params.gamma) * log_forest_count(g, a)
        logs.append(lw)
    logs = np.asarray(logs)
    if np.all(np.isneginf(logs)):
        raise ValueError("every partition in the catalog has zero weight")
    shift = np.max(logs)
    w = np.exp(logs - shift)
    probs = w / np.sum(w)
    cat.log_weights = tuple(float(x) for x in logs)
    return probs


def all_spanning_trees(sub: Subgraph) -> list:
    """Every spanning tree of the subgraph, as frozensets of edge ids."""
    n = len(sub.nodes)
    m = len(sub.edges)
    if m > 24:
        raise SizeGuardError(f"spanning-tree enumeration capped at 24 edges, got {m}")
    if n == 1:
        return [frozenset()]
    index = sub.index
    ends = {eid: (index[sub.graph.edges[eid].u], index[sub.graph.edges[eid].v])
            for eid in sub.edges}
    trees = []
    for combo in itertools.combinations(sub.edges, n - 1):
        parent = list(range(n))
        ok = True
        for eid in combo:
            a, b = ends[eid]
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            while parent[b] != b:
                parent[b] = parent[parent[b]]
                b = parent[b]
            if a == b:
                ok = False
                break
            parent[a] = b
        if ok:
            trees.append(frozenset(combo))
    return trees


def _tree_components(tree_edges, vertices, g: Graph, removed: int):
    """Vertex sets of the two components left after removing one tree edge."""
    adj = defaultdict(list)
    for eid in tree_edges:
        if eid == removed:
            continue
        er = g.edges[eid]
        adj[er.u].append(er.v)
        adj[er.v].append(er.u)
    er = g.edges[removed]
    side = {er.u}
    stack = [er.u]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in side:
                side.add(v)
                stack.append(v)
    return frozenset(side), frozenset(vertices) - side


def brute_cut_edges(tree_edges, vertices, g: Graph, window: PopWindow):
    """Balanced cuts of an explicit tree, by splitting at every edge in turn."""
    out = []
    for eid in tree_edges:
        a, b = _tree_components(tree_edges, vertices, g, eid)
        pa = sum(g.pops[v] for v in a)
        pb = sum(g.pops[v] for v in b)
        if window.contains(pa) and window.contains(pb):
            out.append(eid)
    return out


def forest_key(forest: SpanningForest):
    """Label-free identity of a forest: canonical labels + union of tree edges."""
    all_edges = frozenset(e for t in forest.trees for e in t.edges)
    return canonical_labels(forest.assignment.labels), all_edges


def _piece_key(labels, tree_edges_by_part):
    return canonical_labels(labels), frozenset(e for es in tree_edges_by_part for e in es)


def _splice_key(forest: SpanningForest, i, j, piece_low, edges_low, piece_high, edges_high):
    labels = list(forest.assignment.labels)
    for v in piece_low:
        labels[v] = i
    for v in piece_high:
        labels[v] = j
    kept = [t.edges for k, t in enumerate(forest.trees) if k not in (i, j)]
    return _piece_key(labels, kept + [edges_low, edges_high]), tuple(labels)


def exact_proposal_distribution(forest: SpanningForest, method: PairMethod,
                                window: PopWindow, g: Graph) -> dict:
    """The full proposal distribution Q(state, .) over canonical forest keys.

    Enumerates every adjacent pair, every spanning tree of the merged
    subgraph, and every balanced cut; mass from attempts with no balanced
    cut stays on the current state.  Values sum to 1.
    """
    a = forest.assignment
    row = defaultdict(float)
    self_key = forest_key(forest)
    for (i, j) in sorted(partition_adjacency(g, a)):
        p_pair = pair_probability(method, g, a, i, j)
        sub = merged_subgraph(g, a, i, j)
        trees = all_spanning_trees(sub)
        for te in trees:
            cuts = brute_cut_edges(te, sub.nodes, g, window)
            if not cuts:
                row[self_key] += p_pair / len(trees)
                continue
            share = p_pair / len(trees) / len(cuts)
            for cut in cuts:
                va, vb = _tree_components(te, sub.nodes, g, cut)
                if min(va) > min(vb):
                    va, vb = vb, va
                ea = frozenset(e for e in te if e != cut
                               and g.edges[e].u in va and g.edges[e].v in va)
                eb = (te - {cut}) - ea
                key, _ = _splice_key(forest, i, j, va, ea, vb, eb)
                row[key] += share
    return dict(row)


def _brute_boundary_sum(piece_a, edges_a, piece_b, edges_b, g: Graph, window: PopWindow):
    """Sum over connecting edges of the brute-force cut probability of that edge."""
    total = 0.0
    vertices = piece_a | piece_b
    for e in g.edges:
        if (e.u in piece_a and e.v in piece_b) or (e.v in piece_a and e.u in piece_b):
            joined = edges_a | edges_b | {e.id}
            cuts = brute_cut_edges(joined, vertices, g, window)
            if e.id in cuts:
                total += 1.0 / len(cuts)
    return total


def _brute_tau_pair(piece_a, piece_b, g: Graph) -> float:
    return (brute_count_trees(induced_subgraph(g, piece_a))
            * brute_count_trees(induced_subgraph(g, piece_b)))


def exact_transition(forest: SpanningForest, method: PairMethod, window: PopWindow,
                     g: Graph, params: MeasureParams) -> dict:
    """One exact row of the Metropolis-Hastings kernel, over canonical keys.

    Acceptance is evaluated from the raw definition: unnormalized target
    ratio times the ratio of fully enumerated proposal probabilities (the
    merged subgraph's tree count included on both sides, where it cancels
    numerically rather than symbolically).
    """
    a = forest.assignment
    row = defaultdict(float)
    self_key = forest_key(forest)
    s_old = score(g, a, params)
    if s_old.total == math.inf:
        raise ValueError("starting state violates a hard constraint")

    for (i, j) in sorted(partition_adjacency(g, a)):
        p_pair = pair_probability(method, g, a, i, j)
        sub = merged_subgraph(g, a, i, j)
        trees = all_spanning_trees(sub)
        tau_merged = float(len(trees))
        old_a, old_b = forest.trees[i], forest.trees[j]
        tau_old_pair = _brute_tau_pair(old_a.vertices, old_b.vertices, g)
        bwd_boundary = _brute_boundary_sum(old_a.vertices, old_a.edges,
                                           old_b.vertices, old_b.edges, g, window)
        for te in trees:
            cuts = brute_cut_edges(te, sub.nodes, g, window)
            if not cuts:
                row[self_key] += p_pair / tau_merged
                continue
            share = p_pair / tau_merged / len(cuts)
            for cut in cuts:
                va, vb = _tree_components(te, sub.nodes, g, cut)
                if min(va) > min(vb):
                    va, vb = vb, va
                ea = frozenset(e for e in te if e != cut
                               and g.edges[e].u in va and g.edges[e].v in va)
                eb = (te - {cut}) - ea
                key, new_labels = _splice_key(forest, i, j, va, ea, vb, eb)
                if key == self_key:
                    row[self_key] += share  # identity proposal always accepted
                    continue
                new_assignment = Assignment(g, new_labels, a.n)
                s_new = score(g, new_assignment, params)
                if s_new.total == math.inf:
                    accept = 0.0
                else:
                    target_ratio = math.exp(-params.beta * (s_new.total - s_old.total))
                    if params.gamma != 0:
                        tau_new_pair = _brute_tau_pair(va, vb, g)
                        target_ratio *= (tau_old_pair / tau_new_pair) ** params.gamma
                    fwd_boundary = _brute_boundary_sum(va, ea, vb, eb, g, window)
                    p_pair_rev = pair_probability(method, g, new_assignment, i, j)
                    q_fwd = p_pair * fwd_boundary / tau_merged
                    q_rev = p_pair_rev * bwd_boundary / tau_merged
                    accept = min(1.0, target_ratio * q_rev / q_fwd)
                row[key] += share * accept
                row[self_key] += share * (1.0 - accept)
    return dict(row)


def forest_space(g: Graph, cat: PartitionCatalog) -> list:
    """Every canonical forest compatible with the catalog's partitions."""
    forests = []
    for labels in cat.partitions:
        parts = [[] for _ in range(cat.n)]
        for v, lab in enumerate(labels):
            parts[lab].append(v)
        per_part = [all_spanning_trees(induced_subgraph(g, p)) for p in parts]
        for combo in itertools.product(*per_part):
            trees = [root_tree(parts[k], combo[k], g, min(parts[k])) for k in range(cat.n)]
            forests.append(SpanningForest.from_trees(g, trees))
    return forests


def exact_forest_distribution(g: Graph, cat: PartitionCatalog, params: MeasureParams,
                              forests=None) -> dict:
    """Exact stationary distribution over canonical forests.

    Every forest of a partition carries the same weight (the measure depends
    on the induced partition alone), so this is the partition weight spread
    uniformly over that partition's forests.
    """
    forests = forests if forests is not None else forest_space(g, cat)
    logs = []
    keys = []
    for f in forests:
        keys.append(forest_key(f))
        s = score(g, f.assignment, params)
        if s.total == math.inf:
            logs.append(-math.inf)
            continue
        lw = -params.beta * s.total
        if params.gamma != 0:
            tau = 1.0
            for k in range(f.assignment.n):
                tau *= brute_count_trees(induced_subgraph(g, f.assignment.part_nodes(k)))
            lw -= params.gamma * math.log(tau)
        logs.append(lw)
    arr = np.asarray(logs)
    if np.all(np.isneginf(arr)):
        raise ValueError("every forest has zero probability")
    w = np.exp(arr - np.max(arr))
    w /= np.sum(w)
    return {k: float(p) for k, p in zip(keys, w)}
