"""Synthetic graph builders used by tests, validation suites, and demos.

Grid graphs carry unit-square geometry: every cell has area 1, every internal
edge has border length 1, and cells on the outer boundary carry the exposed
side lengths as external perimeter.  That makes compactness scores of grid
districts exact hand-computable numbers.
"""

from __future__ import annotations

from .graph import EdgeRecord, Graph, NodeRecord, graph_to_json
from .rng import RngStream


def _build(pops, pairs, areas=None, ext=None, votes=None):
    nodes = []
    for k, pop in enumerate(pops):
        nodes.append(
            NodeRecord(
                id=k,
                pop=pop,
                area=areas[k] if areas else 0.0,
                external_perimeter=ext[k] if ext else 0.0,
                votes={e: tuple(t[k]) for e, t in votes.items()} if votes else {},
            )
        )
    edges = [EdgeRecord(id=k, u=u, v=v) for k, (u, v) in enumerate(pairs)]
    return Graph(nodes, edges)


def path_graph(n: int, pops=None) -> Graph:
    pops = pops if pops is not None else [1] * n
    return _build(pops, [(k, k + 1) for k in range(n - 1)])


def cycle_graph(n: int, pops=None) -> Graph:
    pops = pops if pops is not None else [1] * n
    return _build(pops, [(k, (k + 1) % n) for k in range(n)])


def complete_graph(n: int, pops=None) -> Graph:
    pops = pops if pops is not None else [1] * n
    return _build(pops, [(u, v) for u in range(n) for v in range(u + 1, n)])


def grid_graph(rows: int, cols: int, pops=None, votes=None) -> Graph:
    """rows x cols grid of unit squares, node ids row-major."""
    n = rows * cols
    pops = pops if pops is not None else [1] * n
    pairs = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                pairs.append((v, v + 1))
            if r + 1 < rows:
                pairs.append((v, v + cols))
    ext = []
    for r in range(rows):
        for c in range(cols):
            sides = 0
            sides += r == 0
            sides += r == rows - 1
            sides += c == 0
            sides += c == cols - 1
            ext.append(float(sides))
    return _build(pops, pairs, areas=[1.0] * n, ext=ext, votes=votes)


def random_connected_graph(max_nodes: int, rng: RngStream, min_nodes: int = 2) -> Graph:
    """Random connected graph: a random spanning tree plus random extra edges."""
    n = min_nodes + rng.randint(max_nodes - min_nodes + 1)
    pairs = set()
    order = list(range(n))
    for k in range(1, n):
        pairs.add((order[rng.randint(k)], order[k]))
    extra = rng.randint(n * (n - 1) // 2 - (n - 1) + 1)
    candidates = [
        (u, v) for u in range(n) for v in range(u + 1, n)
        if (u, v) not in pairs and (v, u) not in pairs
    ]
    for _ in range(extra):
        if not candidates:
            break
        k = rng.randint(len(candidates))
        pairs.add(candidates.pop(k))
    norm = sorted((min(u, v), max(u, v)) for u, v in pairs)
    pops = [1 + rng.randint(5) for _ in range(n)]
    return _build(pops, norm)


def with_unit_geometry(g: Graph) -> Graph:
    """Copy of g with unit area and unit external perimeter on every node.

    Lets compactness terms be exercised on fixtures that have no natural
    geometry (paths, cycles, complete graphs).
    """
    nodes = [
        NodeRecord(id=n.id, pop=n.pop, area=1.0, external_perimeter=1.0, votes=n.votes)
        for n in g.nodes
    ]
    return Graph(nodes, g.edges, source_ids=g.source_ids)


def write_json(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(graph_to_json(g))
        fh.write("\n")
