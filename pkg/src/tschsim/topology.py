"""Network graph, protocol-model collision graph and independent-set catalog."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .validation import as_generator, check_positive


class TopologyError(ValueError):
    """Raised for malformed or unusable network topologies."""


class CatalogOverflow(RuntimeError):
    """The collision graph has more independent sets than the catalog cap."""

    def __init__(self, cap, n_vertices):
        self.cap = cap
        self.n_vertices = n_vertices
        super().__init__(
            f"more than {cap} independent sets in a collision graph with "
            f"{n_vertices} links; lower the node count or raise catalog_cap"
        )


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    comm_range: float
    interference_range: float


@dataclass
class NetworkTopology:
    """Nodes with radio ranges plus the directed links between them."""

    nodes: list[Node]
    links: list[tuple[int, int]]

    def __post_init__(self):
        self.links = [(int(i), int(j)) for i, j in self.links]
        self.validate()

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_links(self):
        return len(self.links)

    @property
    def positions(self):
        return np.array([[n.x, n.y] for n in self.nodes], dtype=float).reshape(-1, 2)

    def distances(self):
        p = self.positions
        return np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(axis=-1))

    def validate(self):
        ids = [n.id for n in self.nodes]
        if sorted(ids) != list(range(len(ids))):
            raise TopologyError("node ids must be unique and dense in [0, N)")
        if ids != sorted(ids):
            raise TopologyError("nodes must be listed in id order")
        if len(set(self.links)) != len(self.links):
            raise TopologyError("duplicate links")
        d = self.distances()
        n = len(self.nodes)
        for i, j in self.links:
            if not (0 <= i < n and 0 <= j < n):
                raise TopologyError(f"link ({i}, {j}) references an unknown node")
            if i == j:
                raise TopologyError(f"self-link on node {i}")
            if d[i, j] > self.nodes[i].comm_range:
                raise TopologyError(
                    f"link ({i}, {j}) spans {d[i, j]:.3f} m, beyond the sender's "
                    f"communication range {self.nodes[i].comm_range}"
                )


def links_within_range(nodes):
    """All ordered pairs (i, j), i != j, with d_ij <= R_i."""
    p = np.array([[n.x, n.y] for n in nodes], dtype=float).reshape(-1, 2)
    d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(axis=-1))
    links = []
    for i, src in enumerate(nodes):
        for j in range(len(nodes)):
            if i != j and d[i, j] <= src.comm_range:
                links.append((i, j))
    return links


def generate_topology(n_nodes, area=(100.0, 100.0), comm_range=20.0,
                      interference_range=100.0, seed=None):
    """Drop ``n_nodes`` uniformly at random in ``area`` and derive the links.

    Every node gets the same communication and interference range.
    Raises ``TopologyError`` if no pair of nodes is in range.
    """
    check_positive(n_nodes, "n_nodes", integer=True)
    if n_nodes < 2:
        raise TopologyError("need at least 2 nodes")
    check_positive(comm_range, "comm_range")
    check_positive(interference_range, "interference_range")
    width, height = area
    check_positive(width, "area width")
    check_positive(height, "area height")
    rng = as_generator(seed)
    xy = rng.uniform(0.0, 1.0, size=(n_nodes, 2)) * [width, height]
    nodes = [Node(i, float(x), float(y), float(comm_range), float(interference_range))
             for i, (x, y) in enumerate(xy)]
    links = links_within_range(nodes)
    if not links:
        raise TopologyError(
            f"no links: {n_nodes} nodes in a {width}x{height} m area are all "
            f"farther apart than comm_range={comm_range} m"
        )
    return NetworkTopology(nodes, links)


def load_topology(path):
    """Read ``id x y R Rhat`` node lines, optionally followed by ``i j`` links.

    Blank lines and ``#`` comments are ignored. Without link lines the links
    are derived from the communication ranges.
    """
    nodes, links = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if len(parts) == 5:
                if links:
                    raise TopologyError(f"{path}:{lineno}: node line after link section")
                nid, x, y, r, rhat = parts
                nodes.append(Node(int(nid), float(x), float(y), float(r), float(rhat)))
            elif len(parts) == 2:
                links.append((int(parts[0]), int(parts[1])))
            else:
                raise TopologyError(f"{path}:{lineno}: expected 5 (node) or 2 (link) fields")
        except ValueError as exc:
            if isinstance(exc, TopologyError):
                raise
            raise TopologyError(f"{path}:{lineno}: {exc}") from None
    if len(nodes) < 2:
        raise TopologyError(f"{path}: need at least 2 nodes")
    for n in nodes:
        if n.comm_range <= 0 or n.interference_range <= 0:
            raise TopologyError(f"{path}: node {n.id} has a non-positive range")
    if not links:
        links = links_within_range(nodes)
    if not links:
        raise TopologyError(f"{path}: topology has no links")
    return NetworkTopology(nodes, links)


def save_topology(topo, path, *, include_links=True):
    lines = [f"{n.id} {n.x!r} {n.y!r} {n.comm_range!r} {n.interference_range!r}"
             for n in topo.nodes]
    if include_links:
        lines += [f"{i} {j}" for i, j in topo.links]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class CollisionGraph:
    """Conflict graph whose vertices are link ids."""

    n_links: int
    conflict_edges: frozenset[tuple[int, int]]
    _masks: list[int] = field(init=False, repr=False)

    def __post_init__(self):
        masks = [0] * self.n_links
        for a, b in self.conflict_edges:
            if a == b:
                raise ValueError(f"self-loop on vertex {a}")
            if not (0 <= a < self.n_links and 0 <= b < self.n_links):
                raise ValueError(f"edge ({a}, {b}) outside [0, {self.n_links})")
            masks[a] |= 1 << b
            masks[b] |= 1 << a
        self._masks = masks

    @classmethod
    def from_edges(cls, n_links, edges):
        return cls(n_links, frozenset((min(a, b), max(a, b)) for a, b in edges))

    @property
    def vertices(self):
        return range(self.n_links)

    def conflicts(self, a, b):
        return bool(self._masks[a] >> b & 1)

    def neighbor_mask(self, a):
        return self._masks[a]

    def adjacency(self):
        adj = np.zeros((self.n_links, self.n_links), dtype=bool)
        for a, b in self.conflict_edges:
            adj[a, b] = adj[b, a] = True
        return adj

    def is_independent(self, links):
        acc = 0
        for v in links:
            if acc >> v & 1:
                return False
            acc |= self._masks[v]
        return True


def build_collision_graph(topo):
    """Protocol-model conflicts between the links of ``topo``.

    Links (i, j) and (k, l) conflict when they share a node, or when either
    receiver lies within the other sender's interference range.
    """
    d = topo.distances()
    rhat = np.array([n.interference_range for n in topo.nodes])
    links = np.array(topo.links, dtype=int).reshape(-1, 2)
    snd, rcv = links[:, 0], links[:, 1]
    share = ((snd[:, None] == snd[None, :]) | (snd[:, None] == rcv[None, :])
             | (rcv[:, None] == snd[None, :]) | (rcv[:, None] == rcv[None, :]))
    # hit[a, b]: receiver of a is inside the interference range of b's sender
    hit = d[snd[None, :], rcv[:, None]] <= rhat[snd][None, :]
    conflict = share | hit | hit.T
    np.fill_diagonal(conflict, False)
    a, b = np.nonzero(np.triu(conflict, 1))
    return CollisionGraph(len(topo.links), frozenset(zip(a.tolist(), b.tolist())))


@dataclass
class IndependentSetCatalog:
    """Non-empty independent sets of a collision graph, in lexicographic order."""

    sets: list[tuple[int, ...]]
    cap: int
    n_links: int

    def __len__(self):
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def __getitem__(self, idx):
        return self.sets[idx]

    @property
    def max_size(self):
        return max((len(s) for s in self.sets), default=0)

    def membership(self):
        """Boolean matrix ``M[s, e]``: link ``e`` belongs to set ``s``."""
        m = np.zeros((len(self.sets), self.n_links), dtype=bool)
        for s, members in enumerate(self.sets):
            m[s, list(members)] = True
        return m


def enumerate_independent_sets(q, cap=8192):
    """List every non-empty independent set of ``q``.

    Sets are tuples of ascending link ids, emitted in lexicographic order.
    Raises ``CatalogOverflow`` as soon as more than ``cap`` sets exist.
    """
    check_positive(cap, "cap", integer=True)
    n = q.n_links
    if cap < n:
        raise ValueError(f"cap={cap} is smaller than the number of links ({n})")
    out = []
    masks = [q.neighbor_mask(v) for v in range(n)]

    # candidates only hold ids above the last chosen one; a preorder walk
    # that expands the lowest candidate first is lexicographic
    stack = [((), (1 << n) - 1)]
    while stack:
        prefix, cand = stack.pop()
        if prefix:
            out.append(prefix)
            if len(out) > cap:
                raise CatalogOverflow(cap, n)
        children = []
        while cand:
            low = cand & -cand
            v = low.bit_length() - 1
            cand ^= low
            children.append((prefix + (v,), cand & ~masks[v]))
        stack.extend(reversed(children))
    return IndependentSetCatalog(out, cap, n)
