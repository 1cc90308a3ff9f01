"""Spanning-tree counting: log-determinant of a Laplacian minor, plus a
brute-force subset enumerator used as the ground-truth oracle.

All counts live in natural-log space end to end.  Raw counts overflow on
realistic inputs, so they are never materialized outside the brute-force
oracle (which is capped to tiny graphs).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import SizeGuardError
from .graph import Assignment, Graph, Subgraph, induced_subgraph

_PIVOT_TOL = 1e-12
_BRUTE_EDGE_LIMIT = 24


def log_tree_count(sub: Subgraph, minor_index: int = 0) -> float:
    """ln(number of spanning trees) via a Cholesky factor of a Laplacian minor.

    Any minor gives the same value; ``minor_index`` picks the deleted
    row/column (exposed so the independence can be tested).  A single vertex
    counts one (empty) tree.
    """
    n = len(sub.nodes)
    if n == 0:
        raise ValueError("empty subgraph")
    if not sub.is_connected():
        raise ValueError("subgraph is disconnected; spanning-tree count is zero")
    if n == 1:
        return 0.0
    if not 0 <= minor_index < n:
        raise ValueError("minor_index out of range")

    lap = np.zeros((n, n))
    for eid in sub.edges:
        er = sub.graph.edges[eid]
        u, v = sub.index[er.u], sub.index[er.v]
        lap[u, u] += 1.0
        lap[v, v] += 1.0
        lap[u, v] -= 1.0
        lap[v, u] -= 1.0
    keep = [k for k in range(n) if k != minor_index]
    minor = lap[np.ix_(keep, keep)]
    try:
        chol = np.linalg.cholesky(minor)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Laplacian minor is singular (disconnected input?)") from exc
    diag = np.diagonal(chol)
    if np.any(diag * diag < _PIVOT_TOL):
        raise ValueError("factorization pivot below tolerance; treating as singular")
    return float(2.0 * np.sum(np.log(diag)))


def log_forest_count(g: Graph, a: Assignment) -> float:
    """Sum of per-partition log tree counts (log of the forest multiplicity)."""
    total = 0.0
    for i in range(a.n):
        try:
            total += log_tree_count(induced_subgraph(g, a.part_nodes(i)))
        except ValueError as exc:
            raise ValueError(f"partition {i}: {exc}") from exc
    return total


def brute_count_trees(sub: Subgraph) -> int:
    """Exact spanning-tree count by enumerating all (|V|-1)-edge subsets."""
    n = len(sub.nodes)
    m = len(sub.edges)
    if m > _BRUTE_EDGE_LIMIT:
        raise SizeGuardError(f"brute enumeration capped at {_BRUTE_EDGE_LIMIT} edges, got {m}")
    if n == 0:
        raise ValueError("empty subgraph")
    if n == 1:
        return 1
    index = sub.index
    pairs = []
    for eid in sub.edges:
        er = sub.graph.edges[eid]
        pairs.append((index[er.u], index[er.v]))

    count = 0
    for combo in itertools.combinations(pairs, n - 1):
        parent = list(range(n))
        ok = True
        for a, b in combo:
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
            count += 1
    return count


def brute_log_forest_count(g: Graph, labels, n: int) -> float:
    """Oracle-side forest multiplicity from brute per-partition counts."""
    total = 0.0
    for i in range(n):
        members = [v for v, lab in enumerate(labels) if lab == i]
        total += math.log(brute_count_trees(induced_subgraph(g, members)))
    return total
