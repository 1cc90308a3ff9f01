"""Uniform spanning trees via loop-erased random walks."""

from __future__ import annotations

from .graph import Subgraph
from .rng import RngStream


def loop_erased_walk(sub: Subgraph, start: int, targets, rng: RngStream) -> list:
    """Simple path from start to the first target hit, loops erased in arrival order.

    Whenever the walk revisits a vertex already on the path, everything after
    its first appearance is erased and the walk continues from there.
    """
    if start in targets:
        raise ValueError("start must not be a target")
    if not targets:
        raise ValueError("need at least one target")
    for t in targets:
        if t not in sub.index:
            raise ValueError(f"target {t} is not in the subgraph")

    path = [start]
    pos = {start: 0}
    while path[-1] not in targets:
        u = path[-1]
        nbrs = sub.adj[u]
        v = nbrs[rng.randint(len(nbrs))][0]
        if v in pos:
            k = pos[v]
            for w in path[k + 1:]:
                del pos[w]
            del path[k + 1:]
        else:
            pos[v] = len(path)
            path.append(v)
    return path


def wilson_ust(sub: Subgraph, rng: RngStream) -> set:
    """Uniformly random spanning tree of a connected subgraph (edge-id set).

    The first anchored vertex and the first walk start are drawn uniformly;
    remaining walks start from unreached vertices in id order (the output
    distribution is uniform regardless of these choices).
    """
    n = len(sub.nodes)
    if n == 0:
        raise ValueError("empty subgraph")
    if not sub.is_connected():
        raise ValueError("subgraph is disconnected; a spanning tree does not exist")
    if n == 1:
        return set()

    root = sub.nodes[rng.randint(n)]
    rest = [v for v in sub.nodes if v != root]
    k = rng.randint(len(rest))
    starts = [rest[k]] + rest[:k] + rest[k + 1:]

    in_tree = {root}
    tree_edges = set()
    for s in starts:
        if s in in_tree:
            continue
        path = loop_erased_walk(sub, s, in_tree, rng)
        for a, b in zip(path, path[1:]):
            tree_edges.add(sub.edge_between(a, b))
        in_tree.update(path)
    return tree_edges
