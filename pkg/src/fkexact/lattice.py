"""Torus graphs, coarse-grained tori, boxes, configurations and cluster counting.

Conventions fixed here and relied on everywhere else:

* Vertices of the d-dimensional side-N torus are indexed lexicographically over
  {0..N-1}^d.
* Edge e = (tail, axis) has index ``tail_index * d + axis`` and joins ``tail``
  to ``tail + u_axis (mod N)``.  This indexing is deterministic, so enumeration
  fixtures are byte-stable.
* A percolation configuration is a plain Python int used as a bit vector: bit e
  set means edge e is open.
* The coarse torus with scale L has sites at coordinates in (2L)Z^d; the box of
  a site s is the half-open tile s + [-L, L)^d, and an edge belongs to the box
  containing its tail.  The boxes partition the edge set exactly.
"""

from __future__ import annotations

import itertools
import json
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, GeometryError

DEFAULT_EDGE_BUDGET = 1_000_000
ANIMAL_SIZE_CAPS = {2: 8, 3: 6}

Config = int  # bit vector over edge indices


@dataclass(frozen=True)
class TorusGraph:
    """Nearest-neighbour torus (Z/NZ)^d as an indexed simple graph."""

    d: int
    N: int
    n_vertices: int
    n_edges: int
    edges_u: np.ndarray  # tail vertex per edge
    edges_v: np.ndarray  # head vertex per edge
    edge_axis: np.ndarray

    def vertex_index(self, coords) -> int:
        idx = 0
        for c in coords:
            idx = idx * self.N + (c % self.N)
        return idx

    def vertex_coords(self, idx: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.d):
            out.append(idx % self.N)
            idx //= self.N
        return tuple(reversed(out))

    def edge_index(self, tail_coords, axis: int) -> int:
        return self.vertex_index(tail_coords) * self.d + axis

    def edge_endpoints(self, e: int) -> tuple[int, int]:
        return int(self.edges_u[e]), int(self.edges_v[e])

    def translate_vertex(self, idx: int, shift) -> int:
        coords = self.vertex_coords(idx)
        return self.vertex_index(tuple(c + s for c, s in zip(coords, shift)))

    def translate_config(self, bits: Config, shift) -> Config:
        """Image of a configuration under a torus translation."""
        out = 0
        for e in range(self.n_edges):
            if (bits >> e) & 1:
                tail = self.translate_vertex(int(self.edges_u[e]), shift)
                out |= 1 << (tail * self.d + int(self.edge_axis[e]))
        return out

    def to_json(self) -> str:
        payload = {
            "d": self.d,
            "N": self.N,
            "edges": [
                [int(self.edges_u[e]), int(self.edges_v[e]), int(self.edge_axis[e])]
                for e in range(self.n_edges)
            ],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def graph_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def build_torus(d: int, N: int, max_edges: int = DEFAULT_EDGE_BUDGET) -> TorusGraph:
    """Construct the side-N torus in dimension d.

    N >= 3 is required: N = 2 would create parallel wraparound edges and the
    model is kept a simple graph.
    """
    if d < 2:
        raise GeometryError(f"dimension must be >= 2, got {d}")
    if N < 3:
        raise GeometryError(f"side length must be >= 3 (parallel edges at N=2), got {N}")
    n_vertices = N**d
    n_edges = d * n_vertices
    if n_edges > max_edges:
        raise BudgetExceededError(f"{n_edges} edges exceeds budget {max_edges}")
    edges_u = np.empty(n_edges, np.int32)
    edges_v = np.empty(n_edges, np.int32)
    edge_axis = np.empty(n_edges, np.int8)
    for vidx, coords in enumerate(itertools.product(range(N), repeat=d)):
        for axis in range(d):
            head = list(coords)
            head[axis] = (head[axis] + 1) % N
            e = vidx * d + axis
            edges_u[e] = vidx
            edges_v[e] = _vertex_index(head, N)
            edge_axis[e] = axis
    return TorusGraph(d, N, n_vertices, n_edges, edges_u, edges_v, edge_axis)


def _vertex_index(coords, N: int) -> int:
    idx = 0
    for c in coords:
        idx = idx * N + (c % N)
    return idx


@dataclass(frozen=True)
class SimpleGraph:
    """Bare edge-indexed graph for fixtures that are not tori (triangle...)."""

    n_vertices: int
    n_edges: int
    edges_u: np.ndarray
    edges_v: np.ndarray

    def to_json(self) -> str:
        payload = {
            "n_vertices": self.n_vertices,
            "edges": [[int(self.edges_u[e]), int(self.edges_v[e])] for e in range(self.n_edges)],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def graph_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def simple_graph(n_vertices: int, edge_list) -> SimpleGraph:
    eu = np.array([u for u, _ in edge_list], np.int32)
    ev = np.array([v for _, v in edge_list], np.int32)
    return SimpleGraph(n_vertices, len(edge_list), eu, ev)


def cycle_graph(n: int) -> SimpleGraph:
    """n-cycle; the triangle (n=3) is the standard tiny sampler fixture."""
    return simple_graph(n, [(i, (i + 1) % n) for i in range(n)])


@dataclass(frozen=True)
class BoxRegion:
    """A set of vertices with its internal edges inside a parent torus.

    ``edge_ids`` are the parent edges with both endpoints in the region;
    ``boundary_vertices`` are region vertices adjacent (in the parent) to the
    outside.
    """

    center: tuple[int, ...]
    vertices: tuple[int, ...]
    edge_ids: tuple[int, ...]
    boundary_vertices: tuple[int, ...]

    @property
    def edge_mask(self) -> int:
        mask = 0
        for e in self.edge_ids:
            mask |= 1 << e
        return mask


def build_box(graph: TorusGraph, center, radius: int) -> BoxRegion:
    """Closed box center + [-radius, radius]^d with its internal edges."""
    side = 2 * radius + 1
    if side > graph.N - 1:
        raise GeometryError(
            f"box of side {side} does not fit in torus of side {graph.N} with a complement"
        )
    vset = set()
    for offs in itertools.product(range(-radius, radius + 1), repeat=graph.d):
        vset.add(graph.vertex_index(tuple(c + o for c, o in zip(center, offs))))
    edge_ids = [
        e
        for e in range(graph.n_edges)
        if int(graph.edges_u[e]) in vset and int(graph.edges_v[e]) in vset
    ]
    boundary = []
    for v in sorted(vset):
        coords = graph.vertex_coords(v)
        for axis in range(graph.d):
            for sgn in (1, -1):
                nb = list(coords)
                nb[axis] += sgn
                if graph.vertex_index(nb) not in vset:
                    boundary.append(v)
                    break
            else:
                continue
            break
    return BoxRegion(tuple(center), tuple(sorted(vset)), tuple(edge_ids), tuple(boundary))


@dataclass(frozen=True)
class CoarseTorus:
    """Sites ((2L)Z)^d inside a parent torus, with two adjacency notions.

    Nearest-neighbour adjacency joins sites at offset 2L along one axis; star
    adjacency joins sites at L-infinity distance exactly 2L.  Self-adjacency
    from wraparound is suppressed, so the degenerate one-site coarse torus has
    no neighbours.
    """

    parent: TorusGraph
    L: int
    M: int  # sites per axis
    n_sites: int
    site_coords: tuple[tuple[int, ...], ...]
    nn_adj: tuple[frozenset, ...]
    star_adj: tuple[frozenset, ...]
    box_vertices: tuple[tuple[int, ...], ...]
    box_edge_ids: tuple[tuple[int, ...], ...]
    edge_to_site: np.ndarray = field(repr=False)

    def site_index(self, coords) -> int:
        idx = 0
        for c in coords:
            idx = idx * self.M + ((c % self.parent.N) // (2 * self.L))
        return idx

    def box_edge_mask(self, site: int) -> int:
        mask = 0
        for e in self.box_edge_ids[site]:
            mask |= 1 << e
        return mask

    def boxes(self) -> list[BoxRegion]:
        out = []
        for s in range(self.n_sites):
            verts = self.box_vertices[s]
            out.append(BoxRegion(self.site_coords[s], verts, self.box_edge_ids[s], ()))
        return out


def build_coarse(parent: TorusGraph, L: int) -> CoarseTorus:
    if L < 1:
        raise GeometryError(f"coarse scale must be >= 1, got {L}")
    if parent.N % (2 * L) != 0:
        raise GeometryError(f"2L={2*L} must divide N={parent.N}")
    d, N = parent.d, parent.N
    M = N // (2 * L)
    coords_list = [tuple(2 * L * c for c in cs) for cs in itertools.product(range(M), repeat=d)]
    n_sites = len(coords_list)
    site_of = {c: i for i, c in enumerate(coords_list)}

    nn_adj, star_adj = [], []
    for c in coords_list:
        nn = set()
        for axis in range(d):
            for sgn in (1, -1):
                nb = list(c)
                nb[axis] = (nb[axis] + sgn * 2 * L) % N
                j = site_of[tuple(nb)]
                if tuple(nb) != c:
                    nn.add(j)
        star = set()
        for offs in itertools.product((-2 * L, 0, 2 * L), repeat=d):
            if all(o == 0 for o in offs):
                continue
            nb = tuple((ci + o) % N for ci, o in zip(c, offs))
            if nb != c:
                star.add(site_of[nb])
        nn_adj.append(frozenset(nn))
        star_adj.append(frozenset(star))

    # half-open tiles s + [-L, L)^d; an edge lives in the tile of its tail
    box_vertices, box_edge_ids = [], []
    edge_to_site = np.empty(parent.n_edges, np.int32)
    vertex_site = {}
    for s, c in enumerate(coords_list):
        verts = []
        for offs in itertools.product(range(-L, L), repeat=d):
            v = parent.vertex_index(tuple(ci + o for ci, o in zip(c, offs)))
            verts.append(v)
            vertex_site[v] = s
        box_vertices.append(tuple(sorted(verts)))
    for s in range(n_sites):
        eids = []
        for v in box_vertices[s]:
            for axis in range(d):
                eids.append(v * d + axis)
        eids.sort()
        box_edge_ids.append(tuple(eids))
        for e in eids:
            edge_to_site[e] = s

    return CoarseTorus(
        parent=parent,
        L=L,
        M=M,
        n_sites=n_sites,
        site_coords=tuple(coords_list),
        nn_adj=tuple(nn_adj),
        star_adj=tuple(star_adj),
        box_vertices=tuple(box_vertices),
        box_edge_ids=tuple(box_edge_ids),
        edge_to_site=edge_to_site,
    )


# ---------------------------------------------------------------------------
# cluster counting


def _uf_find(parent: list, a: int) -> int:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def cluster_count(graph, bits: Config) -> int:
    """Number of connected components of the open subgraph on all vertices."""
    parent = list(range(graph.n_vertices))
    k = graph.n_vertices
    for e in range(graph.n_edges):
        if (bits >> e) & 1:
            ra = _uf_find(parent, int(graph.edges_u[e]))
            rb = _uf_find(parent, int(graph.edges_v[e]))
            if ra != rb:
                parent[ra] = rb
                k -= 1
    return k


def cluster_labels(graph, bits: Config) -> list:
    """Root label per vertex under the open subgraph."""
    parent = list(range(graph.n_vertices))
    for e in range(graph.n_edges):
        if (bits >> e) & 1:
            ra = _uf_find(parent, int(graph.edges_u[e]))
            rb = _uf_find(parent, int(graph.edges_v[e]))
            if ra != rb:
                parent[ra] = rb
    return [_uf_find(parent, v) for v in range(graph.n_vertices)]


def cluster_count_bc(graph: TorusGraph, region: BoxRegion, bits: Config, xi) -> int:
    """Cluster count in a region under a boundary condition.

    ``xi`` is "free", "wired", or a configuration on the parent graph whose
    bits are read on the complement of the region's edges.  Counts the
    components of (omega on region edges) glued through xi that intersect the
    region's vertices.
    """
    if xi == "free":
        idx = {v: i for i, v in enumerate(region.vertices)}
        parent = list(range(len(region.vertices)))
        k = len(region.vertices)
        for e in region.edge_ids:
            if (bits >> e) & 1:
                ra = _uf_find(parent, idx[int(graph.edges_u[e])])
                rb = _uf_find(parent, idx[int(graph.edges_v[e])])
                if ra != rb:
                    parent[ra] = rb
                    k -= 1
        return k
    if xi == "wired":
        xi_bits: Config = (1 << graph.n_edges) - 1
    else:
        xi_bits = int(xi)
    region_mask = region.edge_mask
    full = (bits & region_mask) | (xi_bits & ~region_mask)
    labels = cluster_labels(graph, full)
    return len({labels[v] for v in region.vertices})


def spanning_forest_size(graph, bits: Config) -> int:
    """Number of edges in a spanning forest of the open subgraph (DFS route)."""
    adj: list[list[int]] = [[] for _ in range(graph.n_vertices)]
    for e in range(graph.n_edges):
        if (bits >> e) & 1:
            adj[int(graph.edges_u[e])].append(int(graph.edges_v[e]))
            adj[int(graph.edges_v[e])].append(int(graph.edges_u[e]))
    seen = [False] * graph.n_vertices
    tree_edges = 0
    for start in range(graph.n_vertices):
        if seen[start]:
            continue
        seen[start] = True
        stack = [start]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    tree_edges += 1
                    stack.append(w)
    return tree_edges


# ---------------------------------------------------------------------------
# lattice animals


def enumerate_site_animals(d: int, max_n: int, anchored: bool = True, cap: int | None = None):
    """Connected subsets of Z^d up to size max_n, grouped by size.

    Anchored animals contain the origin; unanchored ones are translation
    representatives normalised so the minimum coordinate on every axis is 0.
    Returns a list ``animals[n]`` (1-based sizes, index 0 empty) of sorted
    tuples of coordinate tuples.
    """
    limit = cap if cap is not None else ANIMAL_SIZE_CAPS.get(d, 5)
    if max_n > limit:
        raise BudgetExceededError(f"animal size {max_n} exceeds cap {limit} for d={d}")
    origin = (0,) * d

    def neighbours(site):
        for axis in range(d):
            for sgn in (1, -1):
                yield tuple(c + sgn * (axis == a) for a, c in enumerate(site))

    levels: list[set[frozenset]] = [set(), {frozenset([origin])}]
    for n in range(1, max_n):
        nxt: set[frozenset] = set()
        for animal in levels[n]:
            for site in animal:
                for nb in neighbours(site):
                    if nb not in animal:
                        nxt.add(animal | {nb})
        levels.append(nxt)

    out: list[list[tuple]] = [[]]
    for n in range(1, max_n + 1):
        group = levels[n]
        if not anchored:
            normed = set()
            for animal in group:
                mins = [min(s[a] for s in animal) for a in range(d)]
                normed.add(frozenset(tuple(c - m for c, m in zip(s, mins)) for s in animal))
            group = normed
        out.append(sorted(tuple(sorted(a)) for a in group))
    return out


def animal_growth_rate(d: int, max_n: int, cap: int | None = None):
    """Counts of anchored animals by size and the fitted growth constant.

    The fitted constant is the smallest c with count(n) <= exp(c*n) over the
    tested sizes, i.e. max_n log(count)/n.
    """
    animals = enumerate_site_animals(d, max_n, anchored=True, cap=cap)
    counts = [len(animals[n]) for n in range(1, max_n + 1)]
    c_hat = max(np.log(c) / n for n, c in enumerate(counts, start=1))
    return counts, float(c_hat)
