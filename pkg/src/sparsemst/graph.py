"""Weighted undirected graphs with canonical edge names and unique weights.

Node IDs live in [1, n^c] and fit in b = c*ceil(log2 n) bits.  An edge
{x, y} with x < y is named by the integer x * 2^b + y, which both
endpoints can compute from local knowledge.  Edge weights are made
strictly totally ordered by appending the endpoint IDs as a tiebreak,
so every graph has a unique minimum spanning forest.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

__all__ = [
    "Graph",
    "GraphConfigError",
    "edge_name",
    "split_edge_name",
    "id_bits",
    "weight_key",
    "pack_weight_key",
    "unpack_weight_key",
    "degree_threshold",
    "is_low_degree",
    "star_probability",
    "select_stars",
    "generate",
    "oracle_msf",
    "brute_force_msf",
    "write_graph",
    "read_graph",
]


class GraphConfigError(ValueError):
    """Raised for inconsistent generator or graph parameters."""


def id_bits(n: int, c: int) -> int:
    """Bit width b reserved for one node ID: c * ceil(log2 n)."""
    if n < 2:
        return c
    return c * math.ceil(math.log2(n))


def edge_name(u: int, v: int, b: int) -> int:
    """Canonical order-independent name of edge {u, v} in 2b bits."""
    if u == v:
        raise ValueError(f"self-loop has no edge name: {u}")
    lo, hi = (u, v) if u < v else (v, u)
    return (lo << b) | hi


def split_edge_name(name: int, b: int) -> tuple[int, int]:
    """Inverse of edge_name; returns (lo, hi)."""
    return name >> b, name & ((1 << b) - 1)


def weight_key(base: int, u: int, v: int) -> tuple[int, int, int]:
    """Strictly total weight: base weight, then low/high endpoint ID."""
    lo, hi = (u, v) if u < v else (v, u)
    return (base, lo, hi)


def pack_weight_key(key: tuple[int, int, int], b: int) -> int:
    """Weight key as a single integer preserving the total order."""
    base, lo, hi = key
    return (base << (2 * b)) | (lo << b) | hi


def unpack_weight_key(packed: int, b: int) -> tuple[int, int, int]:
    mask = (1 << b) - 1
    return packed >> (2 * b), (packed >> b) & mask, packed & mask


def degree_threshold(n: int) -> float:
    """Degree below this is low-degree: sqrt(n) * (log2 n)^1.5."""
    if n < 2:
        return 1.0
    return math.sqrt(n) * math.log2(n) ** 1.5


def is_low_degree(degree: int, n: int) -> bool:
    return degree < degree_threshold(n)


def star_probability(n: int) -> float:
    """Self-selection probability 1 / sqrt(n * log2 n)."""
    if n < 2:
        return 1.0
    return 1.0 / math.sqrt(n * math.log2(n))


def select_stars(g: "Graph", seed: int) -> set[int]:
    """Each node independently becomes a star with star_probability(n)."""
    rng = random.Random(seed)
    p = star_probability(g.n)
    return {v for v in g.nodes if rng.random() < p}


@dataclass
class Graph:
    """Immutable weighted undirected graph.

    adjacency maps node ID -> list of (neighbor ID, weight base).
    Derived weight keys and edge names are computed on demand; nothing
    here is mutated after construction.
    """

    n: int
    c: int
    nodes: list[int]
    adjacency: dict[int, list[tuple[int, int]]]
    _edges: dict[int, tuple[int, int, int]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.b = id_bits(self.n, self.c)
        seen: dict[tuple[int, int], int] = {}
        self._nbrs = {u: set() for u in self.adjacency}
        for u, nbrs in self.adjacency.items():
            for v, w in nbrs:
                if u == v:
                    raise GraphConfigError(f"self-loop at {u}")
                self._nbrs[u].add(v)
                key = (min(u, v), max(u, v))
                if key in seen:
                    if seen[key] != w:
                        raise GraphConfigError(f"asymmetric weight on {key}")
                else:
                    seen[key] = w
        if len(self.nodes) != len(set(self.nodes)):
            raise GraphConfigError("duplicate node IDs")
        for (u, v), w in seen.items():
            self._edges[edge_name(u, v, self.b)] = (u, v, w)
        # symmetry: every listed edge must appear from both endpoints
        for (u, v) in seen:
            if v not in self._nbrs.get(u, ()) or u not in self._nbrs.get(v, ()):
                raise GraphConfigError(f"one-sided adjacency on {(u, v)}")

    @property
    def m(self) -> int:
        return len(self._edges)

    def edges(self) -> dict[int, tuple[int, int, int]]:
        """Map edge name -> (lo, hi, base weight)."""
        return self._edges

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def neighbors(self, v: int) -> list[int]:
        return [u for u, _ in self.adjacency[v]]

    def has_edge(self, u: int, v: int) -> bool:
        return u != v and edge_name(u, v, self.b) in self._edges

    def adjacent(self, u: int, v: int) -> bool:
        """O(1) neighbor test."""
        return v in self._nbrs[u]

    def weight(self, u: int, v: int) -> tuple[int, int, int]:
        base = self._edges[edge_name(u, v, self.b)][2]
        return weight_key(base, u, v)

    def edge_weight_key(self, name: int) -> tuple[int, int, int]:
        u, v, base = self._edges[name]
        return weight_key(base, u, v)

    def incident_names(self, v: int) -> list[int]:
        return [edge_name(v, u, self.b) for u, _ in self.adjacency[v]]

    def induced_subgraph(self, nodes) -> "Graph":
        """Subgraph on `nodes` keeping (n, c), IDs, names, and weights.

        The size parameters are deliberately inherited: ID widths,
        edge names, and message budgets stay those of the full graph,
        so per-component runs compose with full-graph runs.
        """
        keep = set(nodes)
        adj = {v: [(u, w) for u, w in self.adjacency[v] if u in keep]
               for v in keep}
        return Graph(n=self.n, c=self.c, nodes=sorted(keep), adjacency=adj)

    def components(self) -> list[set[int]]:
        seen: set[int] = set()
        out = []
        for v in self.nodes:
            if v in seen:
                continue
            comp = {v}
            stack = [v]
            while stack:
                x = stack.pop()
                for y in self.neighbors(x):
                    if y not in comp:
                        comp.add(y)
                        stack.append(y)
            seen |= comp
            out.append(comp)
        return out


def _assign_ids(n: int, c: int, rng: random.Random) -> list[int]:
    """Random injection of n IDs into [1, min(n^c, 2^b - 1)]."""
    b = id_bits(n, c)
    hi = min(n**c, (1 << b) - 1)
    if hi < n:
        raise GraphConfigError(f"ID space [1,{hi}] too small for {n} nodes")
    if hi <= 4 * n:
        pool = rng.sample(range(1, hi + 1), n)
        return pool
    ids: set[int] = set()
    while len(ids) < n:
        ids.add(rng.randint(1, hi))
    out = sorted(ids)
    rng.shuffle(out)
    return out


def _weights_for(pairs: list[tuple[int, int]], n: int, c: int, rng: random.Random):
    hi = max(n**c, 1)
    return [(u, v, rng.randint(1, hi)) for u, v in pairs]


def _build(n, c, ids, pairs, rng) -> Graph:
    adjacency: dict[int, list[tuple[int, int]]] = {v: [] for v in ids}
    for u, v, w in _weights_for(pairs, n, c, rng):
        adjacency[u].append((v, w))
        adjacency[v].append((u, w))
    return Graph(n=n, c=c, nodes=list(ids), adjacency=adjacency)


def generate(family: str, n: int, c: int = 2, seed: int = 0, **params) -> Graph:
    """Build a named graph family with seeded IDs and weights.

    Families: complete, gnp(p), path, disconnected(sizes, p), lollipop,
    low_id_chain.
    """
    if n < 1:
        raise GraphConfigError("n must be >= 1")
    rng = random.Random(seed)
    ids = _assign_ids(n, c, rng)

    if family == "complete":
        pairs = [(ids[i], ids[j]) for i in range(n) for j in range(i + 1, n)]
    elif family == "path":
        pairs = [(ids[i], ids[i + 1]) for i in range(n - 1)]
    elif family == "gnp":
        p = params.get("p")
        if p is None or not 0 <= p <= 1:
            raise GraphConfigError("gnp needs p in [0,1]")
        pairs = [
            (ids[i], ids[j])
            for i in range(n)
            for j in range(i + 1, n)
            if rng.random() < p
        ]
    elif family == "disconnected":
        sizes = params.get("sizes")
        if not sizes or sum(sizes) != n:
            raise GraphConfigError(f"component sizes {sizes} must sum to n={n}")
        p = params.get("p", 0.5)
        pairs = []
        at = 0
        for s in sizes:
            block = ids[at : at + s]
            # random spanning tree keeps each component connected
            for i in range(1, s):
                pairs.append((block[rng.randrange(i)], block[i]))
            for i in range(s):
                for j in range(i + 1, s):
                    if rng.random() < p and (block[i], block[j]) not in pairs:
                        pairs.append((block[i], block[j]))
            at += s
    elif family == "lollipop":
        # K_{n/2} with a path P_{n/4} hanging off each of two clique nodes
        if n < 8 or n % 4:
            raise GraphConfigError("lollipop needs n >= 8 divisible by 4")
        half, quarter = n // 2, n // 4
        clique = ids[:half]
        left = ids[half : half + quarter]
        right = ids[half + quarter :]
        pairs = [
            (clique[i], clique[j]) for i in range(half) for j in range(i + 1, half)
        ]
        pairs += [(left[i], left[i + 1]) for i in range(quarter - 1)]
        pairs += [(right[i], right[i + 1]) for i in range(quarter - 1)]
        pairs.append((clique[0], left[0]))
        pairs.append((clique[1], right[0]))
    elif family == "low_id_chain":
        # descending-ID path feeding a sqrt(n)-regular cluster on n/2 nodes
        if n < 8 or n % 2:
            raise GraphConfigError("low_id_chain needs even n >= 8")
        ordered = sorted(ids, reverse=True)
        half = n // 2
        path, cluster = ordered[:half], ordered[half:]
        pairs = [(path[i], path[i + 1]) for i in range(half - 1)]
        pairs.append((path[-1], cluster[0]))
        d = min(max(2, round(math.sqrt(n))), half - 1)
        pairs += _regular_pairs(cluster, d, rng)
        ids = ordered
    else:
        raise GraphConfigError(f"unknown family: {family}")

    return _build(n, c, ids, pairs, rng)


def _regular_pairs(nodes: list[int], d: int, rng: random.Random):
    """Near-d-regular simple pairing by repeated stub matching."""
    for _ in range(50):
        stubs = [v for v in nodes for _ in range(d)]
        rng.shuffle(stubs)
        pairs = set()
        ok = True
        for i in range(0, len(stubs) - 1, 2):
            a, b = stubs[i], stubs[i + 1]
            if a == b or (min(a, b), max(a, b)) in pairs:
                ok = False
                break
            pairs.add((min(a, b), max(a, b)))
        if ok:
            return sorted(pairs)
    # fall back to a circulant construction, always simple
    k = len(nodes)
    pairs = set()
    for off in range(1, d // 2 + 1):
        for i in range(k):
            a, b = nodes[i], nodes[(i + off) % k]
            if a != b:
                pairs.add((min(a, b), max(a, b)))
    return sorted(pairs)


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def oracle_msf(g: Graph) -> set[int]:
    """Kruskal over the strict total weight order; unique result."""
    uf = _UnionFind(g.nodes)
    out = set()
    ranked = sorted(g.edges().items(), key=lambda kv: weight_key(kv[1][2], kv[1][0], kv[1][1]))
    for name, (u, v, _) in ranked:
        if uf.union(u, v):
            out.add(name)
    return out


def brute_force_msf(g: Graph) -> set[int]:
    """Exhaustive minimum spanning forest for tiny graphs (test oracle).

    Enumerates all maximal acyclic edge subsets and picks the one of
    minimum total weight under the strict order.  Exponential; n <= 10.
    """
    import itertools

    names = sorted(g.edges())
    comp_count = len(g.components())
    need = g.n - comp_count
    best = None
    best_total = None
    for subset in itertools.combinations(names, need):
        uf = _UnionFind(g.nodes)
        if all(uf.union(*g.edges()[e][:2]) for e in subset):
            total = sorted(g.edge_weight_key(e) for e in subset)
            if best_total is None or total < best_total:
                best_total = total
                best = set(subset)
    return best if best is not None else set()


def write_graph(g: Graph, path: str) -> None:
    """Line format: header "n c", then "u v w" per edge."""
    with open(path, "w") as f:
        f.write(f"{g.n} {g.c}\n")
        for u, v, w in sorted(g.edges().values()):
            f.write(f"{u} {v} {w}\n")


def read_graph(path: str) -> Graph:
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 2:
            raise GraphConfigError("bad header, expected 'n c'")
        n, c = int(header[0]), int(header[1])
        adjacency: dict[int, list[tuple[int, int]]] = {}
        for line in f:
            if not line.strip():
                continue
            u, v, w = (int(x) for x in line.split())
            adjacency.setdefault(u, []).append((v, w))
            adjacency.setdefault(v, []).append((u, w))
    nodes = sorted(adjacency)
    if len(nodes) != n:
        # isolated nodes are not representable in the edge list; trust header
        # only when it matches, otherwise fail loudly
        raise GraphConfigError(f"header n={n} but {len(nodes)} node IDs seen")
    return Graph(n=n, c=c, nodes=nodes, adjacency=adjacency)
