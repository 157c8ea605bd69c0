"""Network graphs with deterministic port assignments for walker control.

A network is a symmetric graph whose nodes are quantum hosts. Every node
carries an implicit self-loop at port 0; ports 1..d(v) address its proper
neighbors in ascending label order, so coin values are reproducible across
runs. Data qubits attached to nodes form the data plane.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field


class NetworkError(ValueError):
    """Malformed network description or invalid graph reference."""


@dataclass(frozen=True)
class NetworkGraph:
    """Symmetric graph with self-loops and port-numbered edges.

    `ports[v][c]` is the node reached from v with coin value c;
    `ports[v][0] == v` always. Vertex ids are positions in the sorted
    label list. Instances are immutable and safe to share.
    """

    nodes: tuple[str, ...]
    adjacency: dict[str, tuple[str, ...]]
    ports: dict[str, tuple[str, ...]]
    data_qubits: dict[str, tuple[str, ...]]
    _ids: dict[str, int] = field(repr=False, compare=False, default_factory=dict)
    _port_index: dict[str, dict[str, int]] = field(
        repr=False, compare=False, default_factory=dict
    )

    def __post_init__(self):
        self._ids.update({v: i for i, v in enumerate(self.nodes)})
        for v, targets in self.ports.items():
            self._port_index[v] = {u: c for c, u in enumerate(targets)}

    # -- lookups ---------------------------------------------------------

    def vertex_id(self, label: str) -> int:
        try:
            return self._ids[label]
        except KeyError:
            raise NetworkError(f"unknown node {label!r}") from None

    def label_of(self, vid: int) -> str:
        if not 0 <= vid < len(self.nodes):
            raise NetworkError(f"vertex id {vid} out of range")
        return self.nodes[vid]

    def neighbors(self, v: str) -> tuple[str, ...]:
        self.vertex_id(v)
        return self.adjacency[v]

    def degree(self, v: str) -> int:
        return len(self.neighbors(v))

    def port_count(self, v: str) -> int:
        """Valid coin values at v: self-loop plus one per neighbor."""
        return self.degree(v) + 1

    def neighbor_of_port(self, v: str, c: int) -> str:
        targets = self.ports[self._require(v)]
        if not 0 <= c < len(targets):
            raise NetworkError(f"node {v!r} has no port {c}")
        return targets[c]

    def port_of(self, v: str, u: str) -> int:
        index = self._port_index[self._require(v)]
        if u not in index:
            raise NetworkError(f"no edge from {v!r} to {u!r}")
        return index[u]

    def has_edge(self, u: str, v: str) -> bool:
        """True for proper edges and self-loops."""
        self._require(u)
        return v in self._port_index[u]

    def qubits_at(self, v: str) -> tuple[str, ...]:
        self._require(v)
        return self.data_qubits.get(v, ())

    def _require(self, v: str) -> str:
        self.vertex_id(v)
        return v

    # -- metrics ---------------------------------------------------------

    def hop_distance(self, u: str, v: str) -> int | None:
        """BFS shortest-path length; None if v is unreachable from u."""
        self._require(u)
        self._require(v)
        if u == v:
            return 0
        seen = {u: 0}
        queue = deque([u])
        while queue:
            w = queue.popleft()
            for x in self.adjacency[w]:
                if x not in seen:
                    seen[x] = seen[w] + 1
                    if x == v:
                        return seen[x]
                    queue.append(x)
        return None

    def shortest_path(self, u: str, v: str) -> list[str] | None:
        """One BFS witness path from u to v, or None if unreachable."""
        self._require(u)
        self._require(v)
        if u == v:
            return [u]
        prev = {u: None}
        queue = deque([u])
        while queue:
            w = queue.popleft()
            for x in self.adjacency[w]:
                if x not in prev:
                    prev[x] = w
                    if x == v:
                        path = [v]
                        while prev[path[-1]] is not None:
                            path.append(prev[path[-1]])
                        return path[::-1]
                    queue.append(x)
        return None

    def vertex_bits(self) -> int:
        return max(1, math.ceil(math.log2(len(self.nodes))))

    def coin_bits(self) -> int:
        widest = max(self.port_count(v) for v in self.nodes)
        return max(1, math.ceil(math.log2(widest)))


def control_plane_budget(graph: NetworkGraph, k: int) -> int:
    """Qubits needed to host k walker registers in the control plane."""
    if k < 1:
        raise NetworkError("walker count must be >= 1")
    return k * (graph.vertex_bits() + graph.coin_bits())


def load_network(text: str) -> NetworkGraph:
    """Build a validated NetworkGraph from a JSON network description.

    The file lists proper edges only (both directions must be present);
    self-loops are added automatically at port 0.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"network file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise NetworkError("network file must be a JSON object")

    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise NetworkError('network file needs a nonempty "nodes" list')
    labels = []
    for item in raw_nodes:
        if not isinstance(item, str) or not item:
            raise NetworkError(f"node labels must be nonempty strings, got {item!r}")
        if item in labels:
            raise NetworkError(f"duplicate node label {item!r}")
        labels.append(item)
    nodes = tuple(sorted(labels))
    node_set = set(nodes)

    edges = set()
    for pair in doc.get("edges", []):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise NetworkError(f"edge entries must be [u, v] pairs, got {pair!r}")
        u, v = pair
        if u not in node_set or v not in node_set:
            raise NetworkError(f"edge ({u!r}, {v!r}) references an unknown node")
        if u == v:
            raise NetworkError(f"explicit self-loop on {u!r}; self-loops are implicit")
        if (u, v) in edges:
            raise NetworkError(f"duplicate edge ({u!r}, {v!r})")
        edges.add((u, v))
    for u, v in edges:
        if (v, u) not in edges:
            raise NetworkError(f"asymmetric edge list: ({u!r}, {v!r}) has no reverse")

    adjacency = {
        v: tuple(sorted(u for (w, u) in edges if w == v)) for v in nodes
    }
    ports = {v: (v,) + adjacency[v] for v in nodes}

    data_qubits: dict[str, tuple[str, ...]] = {}
    for v, names in (doc.get("data_qubits") or {}).items():
        if v not in node_set:
            raise NetworkError(f"data_qubits references unknown node {v!r}")
        if not isinstance(names, list):
            raise NetworkError(f"data_qubits[{v!r}] must be a list of names")
        if len(set(names)) != len(names):
            raise NetworkError(f"duplicate data qubit name at node {v!r}")
        for name in names:
            if not isinstance(name, str) or not name:
                raise NetworkError(f"bad qubit name {name!r} at node {v!r}")
        data_qubits[v] = tuple(names)

    return NetworkGraph(nodes, adjacency, ports, data_qubits)


@dataclass(frozen=True)
class PathSpec:
    """A simple path given as an ordered node list."""

    nodes: tuple[str, ...]

    @classmethod
    def in_graph(cls, graph: NetworkGraph, nodes) -> "PathSpec":
        nodes = tuple(nodes)
        if not nodes:
            raise NetworkError("a path needs at least one node")
        if len(set(nodes)) != len(nodes):
            raise NetworkError("path repeats a node")
        for u, v in zip(nodes, nodes[1:]):
            if v not in graph.neighbors(u):
                raise NetworkError(f"path hop ({u!r}, {v!r}) is not a network edge")
        return cls(nodes)

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1

    @property
    def start(self) -> str:
        return self.nodes[0]

    @property
    def end(self) -> str:
        return self.nodes[-1]


@dataclass(frozen=True)
class TreeSpec:
    """Directed rooted tree inside the network, as (parent, child) edges."""

    root: str
    edges: tuple[tuple[str, str], ...]

    @classmethod
    def in_graph(cls, graph: NetworkGraph, root: str, edges) -> "TreeSpec":
        graph.vertex_id(root)
        edges = tuple((str(p), str(c)) for p, c in edges)
        parent: dict[str, str] = {}
        for p, c in edges:
            if c not in graph.neighbors(p):
                raise NetworkError(f"tree edge ({p!r}, {c!r}) is not a network edge")
            if c == root:
                raise NetworkError("tree root cannot have a predecessor")
            if c in parent:
                raise NetworkError(f"node {c!r} has two predecessors in tree")
            parent[c] = p
        # every non-root node must hang off the root through tree edges
        members = {root} | set(parent)
        for c in parent:
            seen = set()
            v = c
            while v != root:
                if v in seen or v not in members:
                    raise NetworkError(f"tree edge chain from {c!r} does not reach root")
                seen.add(v)
                if v not in parent:
                    raise NetworkError(f"node {v!r} is disconnected from tree root")
                v = parent[v]
        for p, _ in edges:
            if p not in members:
                raise NetworkError(f"tree parent {p!r} is not reachable from root")
        return cls(root, edges)

    @property
    def tree_nodes(self) -> tuple[str, ...]:
        seen = [self.root]
        for p, c in self.edges:
            if c not in seen:
                seen.append(c)
        return tuple(seen)

    def parent(self, v: str) -> str:
        for p, c in self.edges:
            if c == v:
                return p
        raise NetworkError(f"{v!r} has no parent in tree")

    def successors(self, v: str) -> tuple[str, ...]:
        return tuple(c for p, c in self.edges if p == v)

    def depth(self, v: str) -> int:
        d = 0
        while v != self.root:
            v = self.parent(v)
            d += 1
        return d
