"""Immutable weighted graph, assignments, and partition-aware subgraph views.

Node ids are densified to 0..|V|-1 at load time and every internal structure
is index-based.  A Graph is never mutated after construction and is safe to
share across concurrently running chains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import GraphFormatError


@dataclass(frozen=True)
class NodeRecord:
    id: int
    pop: int
    area: float = 0.0
    external_perimeter: float = 0.0
    votes: dict = field(default_factory=dict)  # election id -> (party A, party B)


@dataclass(frozen=True)
class EdgeRecord:
    id: int
    u: int
    v: int
    border_length: float = 1.0


class Graph:
    """Connected undirected graph with dense integer ids.

    ``adjacency[v]`` is a tuple of ``(neighbor, edge_id)`` pairs; every edge
    id appears in exactly two adjacency lists.
    """

    __slots__ = ("nodes", "edges", "adjacency", "pops", "total_pop", "source_ids")

    def __init__(self, nodes, edges, source_ids=None):
        self.nodes = tuple(nodes)
        self.edges = tuple(edges)
        self.source_ids = tuple(source_ids) if source_ids is not None else tuple(
            n.id for n in self.nodes
        )
        adjacency = [[] for _ in self.nodes]
        seen_pairs = set()
        for e in self.edges:
            if e.u == e.v:
                raise GraphFormatError(f"self-loop at node {self.source_ids[e.u]!r}")
            pair = (min(e.u, e.v), max(e.u, e.v))
            if pair in seen_pairs:
                raise GraphFormatError(
                    f"duplicate edge between {self.source_ids[e.u]!r} and {self.source_ids[e.v]!r}"
                )
            seen_pairs.add(pair)
            adjacency[e.u].append((e.v, e.id))
            adjacency[e.v].append((e.u, e.id))
        self.adjacency = tuple(tuple(a) for a in adjacency)
        self.pops = tuple(n.pop for n in self.nodes)
        self.total_pop = sum(self.pops)
        if self.num_nodes and not self._connected():
            raise GraphFormatError("graph is disconnected")

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def _connected(self) -> bool:
        seen = [False] * self.num_nodes
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            u = stack.pop()
            for v, _ in self.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == self.num_nodes


def load_graph(source) -> Graph:
    """Parse graph-JSON from bytes, a string, or a readable file object.

    Schema: ``{"nodes": [{"id", "pop", "area"?, "external_perimeter"?,
    "votes"?}], "edges": [{"u", "v", "border_length"?}]}``.  Ids may be
    strings or integers; they are remapped to dense indices preserving input
    order.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise GraphFormatError("top level must be an object with 'nodes' and 'edges'")

    index = {}
    nodes = []
    source_ids = []
    for k, raw in enumerate(doc["nodes"]):
        if not isinstance(raw, dict) or "id" not in raw or "pop" not in raw:
            raise GraphFormatError(f"node #{k} must carry 'id' and 'pop'")
        nid = raw["id"]
        if nid in index:
            raise GraphFormatError(f"duplicate node id {nid!r}")
        pop = raw["pop"]
        if not isinstance(pop, int) or pop < 0:
            raise GraphFormatError(f"node {nid!r}: pop must be a nonnegative integer")
        area = float(raw.get("area", 0.0))
        ext = float(raw.get("external_perimeter", 0.0))
        if area < 0 or ext < 0:
            raise GraphFormatError(f"node {nid!r}: negative area or perimeter")
        votes = {}
        for election, tally in (raw.get("votes") or {}).items():
            if len(tally) != 2:
                raise GraphFormatError(f"node {nid!r}: votes for {election!r} must be a pair")
            votes[election] = (int(tally[0]), int(tally[1]))
        index[nid] = k
        source_ids.append(nid)
        nodes.append(NodeRecord(id=k, pop=pop, area=area, external_perimeter=ext, votes=votes))

    edges = []
    for k, raw in enumerate(doc["edges"]):
        if not isinstance(raw, dict) or "u" not in raw or "v" not in raw:
            raise GraphFormatError(f"edge #{k} must carry 'u' and 'v'")
        try:
            u, v = index[raw["u"]], index[raw["v"]]
        except KeyError as exc:
            raise GraphFormatError(f"edge #{k} references unknown node {exc.args[0]!r}") from exc
        if u == v:
            raise GraphFormatError(f"self-loop at node {raw['u']!r}")
        border = float(raw.get("border_length", 1.0))
        if border < 0:
            raise GraphFormatError(f"edge #{k}: negative border_length")
        edges.append(EdgeRecord(id=k, u=u, v=v, border_length=border))

    return Graph(nodes, edges, source_ids=source_ids)


def graph_to_json(g: Graph) -> str:
    """Serialize back to the graph-JSON schema (round-trips with load_graph)."""
    doc = {
        "nodes": [
            {
                "id": g.source_ids[n.id],
                "pop": n.pop,
                "area": n.area,
                "external_perimeter": n.external_perimeter,
                **({"votes": {k: list(v) for k, v in n.votes.items()}} if n.votes else {}),
            }
            for n in g.nodes
        ],
        "edges": [
            {"u": g.source_ids[e.u], "v": g.source_ids[e.v], "border_length": e.border_length}
            for e in g.edges
        ],
    }
    return json.dumps(doc, sort_keys=True)


class Assignment:
    """Node -> partition labeling with every partition nonempty and connected.

    Connectivity is enforced here, at construction, and nowhere else; a
    violation signals a bug upstream (the proposal only ever produces
    connected pieces).
    """

    __slots__ = ("labels", "n")

    def __init__(self, g: Graph, labels, n: int):
        labels = tuple(labels)
        if len(labels) != g.num_nodes:
            raise ValueError("labels must cover every node")
        if n < 1:
            raise ValueError("need at least one partition")
        counts = [0] * n
        for v, lab in enumerate(labels):
            if not 0 <= lab < n:
                raise ValueError(f"node {v}: label {lab} out of range 0..{n - 1}")
            counts[lab] += 1
        for i, c in enumerate(counts):
            if c == 0:
                raise ValueError(f"partition {i} is empty")
        self.labels = labels
        self.n = n
        for i in range(n):
            if not self._part_connected(g, i):
                raise ValueError(f"partition {i} is disconnected")

    def _part_connected(self, g: Graph, i: int) -> bool:
        members = [v for v in range(g.num_nodes) if self.labels[v] == i]
        seen = {members[0]}
        stack = [members[0]]
        while stack:
            u = stack.pop()
            for v, _ in g.adjacency[u]:
                if self.labels[v] == i and v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(members)

    def part_nodes(self, i: int):
        if not 0 <= i < self.n:
            raise ValueError(f"partition {i} out of range")
        return [v for v, lab in enumerate(self.labels) if lab == i]


def canonical_labels(labels) -> tuple:
    """Relabel partitions by smallest contained node id, ascending.

    Permuting partition labels never changes the canonical form, so this is
    the quotient map onto label-free partitions.
    """
    remap = {}
    out = []
    for lab in labels:
        if lab not in remap:
            remap[lab] = len(remap)
        out.append(remap[lab])
    return tuple(out)


def partition_weight(g: Graph, a: Assignment, i: int) -> int:
    """Total population of partition i."""
    if not 0 <= i < a.n:
        raise ValueError(f"partition {i} out of range 0..{a.n - 1}")
    return sum(g.pops[v] for v in range(g.num_nodes) if a.labels[v] == i)


def partition_weights(g: Graph, labels, n: int):
    out = [0] * n
    for v, lab in enumerate(labels):
        out[lab] += g.pops[v]
    return out


def partition_adjacency(g: Graph, a: Assignment) -> dict:
    """Crossing-edge counts keyed by unordered label pair (i, j), i < j."""
    counts = {}
    labels = a.labels
    for e in g.edges:
        li, lj = labels[e.u], labels[e.v]
        if li != lj:
            key = (li, lj) if li < lj else (lj, li)
            counts[key] = counts.get(key, 0) + 1
    return counts


class Subgraph:
    """Induced subgraph view with a stable local <-> global id mapping.

    All node and edge ids remain global; ``index`` maps global node id to the
    local position used for matrix work.
    """

    __slots__ = ("graph", "nodes", "index", "adj", "edges", "total_pop", "_pair")

    def __init__(self, g: Graph, node_ids):
        self.graph = g
        self.nodes = tuple(sorted(node_ids))
        self.index = {v: k for k, v in enumerate(self.nodes)}
        member = self.index
        adj = {v: [] for v in self.nodes}
        edges = []
        pair = {}
        for v in self.nodes:
            for w, eid in g.adjacency[v]:
                if w in member:
                    adj[v].append((w, eid))
                    if v < w:
                        edges.append(eid)
                        pair[(v, w)] = eid
        self.adj = {v: tuple(lst) for v, lst in adj.items()}
        self.edges = tuple(sorted(edges))
        self.total_pop = sum(g.pops[v] for v in self.nodes)
        self._pair = pair

    def __len__(self):
        return len(self.nodes)

    def pop(self, v: int) -> int:
        return self.graph.pops[v]

    def edge_between(self, u: int, v: int) -> int:
        return self._pair[(u, v) if u < v else (v, u)]

    def is_connected(self) -> bool:
        if not self.nodes:
            return False
        seen = {self.nodes[0]}
        stack = [self.nodes[0]]
        while stack:
            u = stack.pop()
            for v, _ in self.adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(self.nodes)


def induced_subgraph(g: Graph, node_ids) -> Subgraph:
    return Subgraph(g, node_ids)


def merged_subgraph(g: Graph, a: Assignment, i: int, j: int) -> Subgraph:
    """Induced subgraph on partitions i and j; requires the pair adjacent."""
    if i == j:
        raise ValueError("need two distinct partitions")
    key = (min(i, j), max(i, j))
    if key not in partition_adjacency(g, a):
        raise ValueError(f"partitions {i} and {j} are not adjacent")
    members = [v for v, lab in enumerate(a.labels) if lab == i or lab == j]
    return Subgraph(g, members)
