"""Undirected weighted graphs, k-core peeling, and subgraph features."""

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


class GraphParseError(ValueError):
    """Malformed edge-list input."""


class Graph:
    """Undirected weighted simple graph over dense node ids 0..n-1.

    Edges are stored once as (i, j) rows with i < j, sorted lexicographically.
    ``orig_ids[v]`` maps a dense id back to the id it carried in the source
    data so all reports can speak the caller's vocabulary.  Instances are
    immutable after construction and safe to share across threads.
    """

    def __init__(self, n, edges, weights=None, orig_ids=None):
        n = int(n)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if weights is None:
            weights = np.ones(len(edges))
        weights = np.asarray(weights, dtype=np.float64)
        if len(weights) != len(edges):
            raise ValueError("weights and edges length mismatch")
        if len(edges):
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint outside 0..n-1")
            if (edges[:, 0] == edges[:, 1]).any():
                raise ValueError("self-loops are not allowed")
            if (weights < 0).any():
                raise ValueError("negative edge weight")
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            order = np.lexsort((hi, lo))
            edges = np.column_stack([lo[order], hi[order]])
            weights = weights[order]
            dup = (np.diff(edges[:, 0]) == 0) & (np.diff(edges[:, 1]) == 0)
            if dup.any():
                raise ValueError("duplicate edges are not allowed")
        else:
            edges = edges.reshape(0, 2)
        if orig_ids is None:
            orig_ids = np.arange(n, dtype=np.int64)
        orig_ids = np.asarray(orig_ids, dtype=np.int64)
        if len(orig_ids) != n:
            raise ValueError("orig_ids length mismatch")

        self.n = n
        self.edges = edges
        self.weights = weights
        self.orig_ids = orig_ids
        self._adj = None
        self._degrees = None

    @property
    def m(self):
        return len(self.edges)

    @property
    def degrees(self):
        if self._degrees is None:
            d = np.zeros(self.n, dtype=np.int64)
            if self.m:
                d += np.bincount(self.edges[:, 0], minlength=self.n)
                d += np.bincount(self.edges[:, 1], minlength=self.n)
            self._degrees = d
        return self._degrees

    @property
    def weighted_degrees(self):
        d = np.zeros(self.n)
        if self.m:
            np.add.at(d, self.edges[:, 0], self.weights)
            np.add.at(d, self.edges[:, 1], self.weights)
        return d

    def adjacency(self):
        """CSR-style (indptr, neighbors, edge_weights); neighbor lists sorted."""
        if self._adj is None:
            src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
            dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
            w = np.concatenate([self.weights, self.weights])
            order = np.lexsort((dst, src))
            src, dst, w = src[order], dst[order], w[order]
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(np.bincount(src, minlength=self.n), out=indptr[1:])
            self._adj = (indptr, dst, w)
        return self._adj

    def neighbors(self, v):
        indptr, nbrs, _ = self.adjacency()
        return nbrs[indptr[v]:indptr[v + 1]]

    def component_count(self):
        seen = np.zeros(self.n, dtype=bool)
        indptr, nbrs, _ = self.adjacency()
        count = 0
        for start in range(self.n):
            if seen[start]:
                continue
            count += 1
            stack = [start]
            seen[start] = True
            while stack:
                v = stack.pop()
                for u in nbrs[indptr[v]:indptr[v + 1]]:
                    if not seen[u]:
                        seen[u] = True
                        stack.append(u)
        return count

    def induced_subgraph(self, nodes):
        """Subgraph on ``nodes`` (sorted dense ids), relabelled to 0..len-1."""
        nodes = np.asarray(sorted(set(int(v) for v in np.asarray(nodes).ravel())),
                           dtype=np.int64)
        keep = np.zeros(self.n, dtype=bool)
        keep[nodes] = True
        if self.m:
            mask = keep[self.edges[:, 0]] & keep[self.edges[:, 1]]
            sub_edges = np.searchsorted(nodes, self.edges[mask])
            sub_w = self.weights[mask]
        else:
            sub_edges = np.zeros((0, 2), dtype=np.int64)
            sub_w = np.zeros(0)
        return Graph(len(nodes), sub_edges, sub_w, self.orig_ids[nodes])

    def edge_key_set(self):
        return {(int(i), int(j)) for i, j in self.edges}


def complete_graph(n):
    i, j = np.triu_indices(n, 1)
    return Graph(n, np.column_stack([i, j]))


@dataclass(frozen=True)
class CorenessMap:
    """Per-node coreness plus the graph degeneracy and its degenerate core."""
    coreness: np.ndarray
    k_max: int
    degenerate_core: np.ndarray  # sorted dense ids with coreness == k_max


@dataclass(frozen=True)
class SubgraphFeatures:
    size: int
    edge_density: float
    avg_clustering_coefficient: float
    transitivity: float

    def as_dict(self):
        return {
            "size": self.size,
            "edge_density": self.edge_density,
            "avg_clustering_coefficient": self.avg_clustering_coefficient,
            "transitivity": self.transitivity,
        }


def load_edge_list(path):
    """Parse a whitespace-separated edge list into a Graph.

    Lines are ``u v`` or ``u v w`` with nonnegative integer ids; ``#`` starts
    a comment line.  Ids are remapped to dense 0..n-1 (original ids kept on
    the Graph).  Duplicate edges collapse keeping the last weight; self-loops
    are dropped with a logged count.
    """
    edges = {}
    nodes = set()
    self_loops = 0
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) not in (2, 3):
                raise GraphParseError(
                    f"{path}:{ln}: expected 'u v' or 'u v w', got {s!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphParseError(f"{path}:{ln}: non-integer node id in {s!r}")
            if u < 0 or v < 0:
                raise GraphParseError(f"{path}:{ln}: negative node id in {s!r}")
            w = 1.0
            if len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise GraphParseError(f"{path}:{ln}: bad weight in {s!r}")
                if not np.isfinite(w):
                    raise GraphParseError(f"{path}:{ln}: non-finite weight in {s!r}")
                if w < 0:
                    raise GraphParseError(f"{path}:{ln}: negative weight {w}")
            nodes.add(u)
            nodes.add(v)
            if u == v:
                self_loops += 1
                continue
            edges[(min(u, v), max(u, v))] = w
    if self_loops:
        log.warning("%s: dropped %d self-loop(s)", path, self_loops)
    orig = np.array(sorted(nodes), dtype=np.int64)
    remap = {int(o): i for i, o in enumerate(orig)}
    if edges:
        e = np.array([[remap[a], remap[b]] for a, b in edges], dtype=np.int64)
        w = np.array(list(edges.values()))
    else:
        e = np.zeros((0, 2), dtype=np.int64)
        w = np.zeros(0)
    return Graph(len(orig), e, w, orig)


def core_decomposition(g):
    """Coreness of every node by iterative min-degree peeling (O(n + m)).

    The output is independent of tie-breaking; ``degenerate_core`` is the
    node set of the maximal k_max-core.
    """
    n = g.n
    if n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return CorenessMap(empty, 0, empty)
    deg = g.degrees.astype(np.int64).copy()
    max_deg = int(deg.max())
    vert = np.argsort(deg, kind="stable").astype(np.int64)
    pos = np.empty(n, dtype=np.int64)
    pos[vert] = np.arange(n)
    bins = np.zeros(max_deg + 2, dtype=np.int64)
    np.cumsum(np.bincount(deg, minlength=max_deg + 1), out=bins[1:])
    bins = bins[:max_deg + 1].copy()
    indptr, nbrs, _ = g.adjacency()
    for i in range(n):
        v = vert[i]
        dv = deg[v]
        for u in nbrs[indptr[v]:indptr[v + 1]]:
            if deg[u] > dv:
                du = deg[u]
                pu = pos[u]
                pw = bins[du]
                w = vert[pw]
                if u != w:
                    vert[pu] = w
                    vert[pw] = u
                    pos[u] = pw
                    pos[w] = pu
                bins[du] += 1
                deg[u] -= 1
    k_max = int(deg.max())
    core_nodes = np.flatnonzero(deg == k_max).astype(np.int64)
    return CorenessMap(deg, k_max, core_nodes)


def k_core_subgraph(g, cm, k):
    """Induced subgraph on nodes with coreness >= k (k = 0 is the full graph)."""
    k = int(k)
    if k < 0 or k > cm.k_max:
        raise ValueError(f"k={k} outside [0, {cm.k_max}]")
    return g.induced_subgraph(np.flatnonzero(cm.coreness >= k))


def subgraph_features(g):
    """Size, edge density, mean local clustering, and transitivity.

    Nodes of degree < 2 contribute clustering 0; transitivity is 0 when the
    graph has no connected triples.
    """
    n, m = g.n, g.m
    density = 2.0 * m / (n * (n - 1)) if n >= 2 else 0.0
    if n == 0 or m == 0:
        return SubgraphFeatures(n, density, 0.0, 0.0)
    indptr, nbrs, _ = g.adjacency()
    nbr_sets = [set(nbrs[indptr[v]:indptr[v + 1]].tolist()) for v in range(n)]
    tri_edge = np.zeros(m, dtype=np.int64)
    for e in range(m):
        a, b = int(g.edges[e, 0]), int(g.edges[e, 1])
        sa, sb = nbr_sets[a], nbr_sets[b]
        if len(sa) > len(sb):
            sa, sb = sb, sa
        tri_edge[e] = sum(1 for x in sa if x in sb)
    # triangles incident to a node = half the sum of its edges' triangle counts
    tri_node2 = np.zeros(n, dtype=np.int64)
    np.add.at(tri_node2, g.edges[:, 0], tri_edge)
    np.add.at(tri_node2, g.edges[:, 1], tri_edge)
    deg = g.degrees
    with np.errstate(divide="ignore", invalid="ignore"):
        local = np.where(deg >= 2, tri_node2 / (deg * (deg - 1.0)), 0.0)
    triples = float(np.sum(deg * (deg - 1) // 2))
    transitivity = float(tri_edge.sum() / triples) if triples > 0 else 0.0
    return SubgraphFeatures(n, float(density), float(local.mean()), transitivity)


def core_completeness(g, cm):
    """Fraction of present edges among all degenerate-core node pairs."""
    core = cm.degenerate_core
    if len(core) < 2:
        raise ValueError("degenerate core has fewer than 2 nodes")
    keep = np.zeros(g.n, dtype=bool)
    keep[core] = True
    inside = int((keep[g.edges[:, 0]] & keep[g.edges[:, 1]]).sum()) if g.m else 0
    pairs = len(core) * (len(core) - 1) // 2
    return inside / pairs
