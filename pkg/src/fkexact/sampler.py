"""Heat-bath Glauber dynamics and coupling from the past for FK-percolation.

One update picks a uniform edge and redraws it from its conditional law: open
with probability p when the endpoints are connected off the edge, otherwise
with probability p/(p + q(1-p)).  For q >= 1 the coupled update (same edge,
same uniform) is monotone, so sandwich chains started from all-open and
all-closed at time -T squeeze every trajectory; when they coalesce by time 0
the common state is an exact sample.  Randomness is counter-based (Philox)
keyed by (seed, sample index), with the step at time -(j+1) always consuming
draw j, so doubling the horizon reuses the past draws unchanged.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CoalescenceCapError, GeometryError
from .exactfk import make_system
from .lattice import BoxRegion, build_box

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f

        return wrap


DEFAULT_MAX_DOUBLINGS = 24


@dataclass(frozen=True)
class SamplerSystem:
    """Flattened system with CSR adjacency for the kernels."""

    n_vertices: int
    edges_u: np.ndarray
    edges_v: np.ndarray
    edge_ids: tuple[int, ...]
    adj_idx: np.ndarray
    adj_vtx: np.ndarray
    adj_eid: np.ndarray
    boundary: str


def make_sampler_system(graph, boundary="periodic", region: BoxRegion | None = None) -> SamplerSystem:
    es = make_system(graph, boundary, region)
    nv = es.n_vertices
    eu = np.asarray(es.edges_u, np.int32)
    ev = np.asarray(es.edges_v, np.int32)
    deg = np.zeros(nv + 1, np.int64)
    for u, v in zip(eu, ev):
        deg[u + 1] += 1
        deg[v + 1] += 1
    idx = np.cumsum(deg)
    vtx = np.zeros(idx[-1], np.int32)
    eid = np.zeros(idx[-1], np.int32)
    fill = idx[:-1].copy()
    for e, (u, v) in enumerate(zip(eu, ev)):
        vtx[fill[u]] = v
        eid[fill[u]] = e
        fill[u] += 1
        vtx[fill[v]] = u
        eid[fill[v]] = e
        fill[v] += 1
    return SamplerSystem(nv, eu, ev, es.edge_ids, idx, vtx, eid, es.boundary)


@dataclass
class ChainState:
    """A heat-bath chain: configuration bits plus its system and parameters."""

    system: SamplerSystem
    p: float
    q: float
    bits: int
    seed: int = 0
    stream: int = 0
    steps_done: int = 0


def open_probability(system: SamplerSystem, bits: int, e: int, p: float, q: float) -> float:
    """Conditional probability that edge e is open given the rest."""
    if q == 1.0:
        return p
    u, v = int(system.edges_u[e]), int(system.edges_v[e])
    if u == v or _connected_off(system, bits, e, u, v):
        return p
    return p / (p + q * (1 - p))


def _connected_off(system: SamplerSystem, bits: int, e: int, u: int, v: int) -> bool:
    seen = {u}
    stack = [u]
    while stack:
        w = stack.pop()
        for j in range(system.adj_idx[w], system.adj_idx[w + 1]):
            eid = int(system.adj_eid[j])
            if eid == e or not ((bits >> eid) & 1):
                continue
            nb = int(system.adj_vtx[j])
            if nb == v:
                return True
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return False


def heat_bath_step(system: SamplerSystem, bits: int, e: int, u01: float,
                   p: float, q: float) -> int:
    thr = open_probability(system, bits, e, p, q)
    if u01 < thr:
        return bits | (1 << e)
    return bits & ~(1 << e)


def heat_bath_push(system: SamplerSystem, probs: np.ndarray, p: float, q: float) -> np.ndarray:
    """Exact push-forward of a distribution over configurations by one update.

    One update = uniform random edge, then the conditional redraw.  Feasible
    for systems with at most ~12 edges; used to certify stationarity.
    """
    E = len(system.edge_ids)
    out = np.zeros_like(probs)
    for cfg in range(1 << E):
        w = probs[cfg]
        if w == 0:
            continue
        for e in range(E):
            thr = open_probability(system, cfg, e, p, q)
            out[cfg | (1 << e)] += w * thr / E
            out[cfg & ~(1 << e)] += w * (1 - thr) / E
    return out


# ---------------------------------------------------------------------------
# CFTP


@njit(cache=True)
def _sandwich_kernel(adj_idx, adj_vtx, adj_eid, edges_u, edges_v, nv, E,
                     edge_seq, coins, p, q, hi, lo, stack, stamp, stamp_ctr):
    """Run both sandwich chains from time -T to 0; returns (coalesced, stamp_ctr)."""
    disc = p / (p + q * (1 - p))
    T = edge_seq.shape[0]
    equal = False
    for t in range(T - 1, -1, -1):
        e = edge_seq[t]
        coin = coins[t]
        u = edges_u[e]
        v = edges_v[e]
        for chain in range(2):
            if equal and chain == 1:
                break
            st = hi if chain == 0 else lo
            if q == 1.0:
                thr = p
            else:
                # BFS u -> v avoiding e on open edges
                stamp_ctr += 1
                top = 0
                stack[top] = u
                top += 1
                stamp[u] = stamp_ctr
                found = False
                while top > 0 and not found:
                    w = stack[top - 1]
                    top -= 1
                    for j in range(adj_idx[w], adj_idx[w + 1]):
                        eid = adj_eid[j]
                        if eid == e or st[eid] == 0:
                            continue
                        nb = adj_vtx[j]
                        if nb == v:
                            found = True
                            break
                        if stamp[nb] != stamp_ctr:
                            stamp[nb] = stamp_ctr
                            stack[top] = nb
                            top += 1
                thr = p if found else disc
            st[e] = 1 if coin < thr else 0
            if equal:
                lo[e] = st[e]
        if not equal:
            same = True
            for i in range(E):
                if hi[i] != lo[i]:
                    same = False
                    break
            equal = same
    return equal, stamp_ctr


def _sandwich_python(system, edge_seq, coins, p, q):
    E = len(system.edge_ids)
    hi = (1 << E) - 1
    lo = 0
    for t in range(len(edge_seq) - 1, -1, -1):
        e = int(edge_seq[t])
        c = float(coins[t])
        hi = heat_bath_step(system, hi, e, c, p, q)
        lo = heat_bath_step(system, lo, e, c, p, q)
    return hi == lo, hi


def _rng_for_sample(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, stream]))


def cftp_sample(graph, p: float, q: float, boundary: str = "periodic",
                seed: int = 0, stream: int = 0, region: BoxRegion | None = None,
                max_doublings: int = DEFAULT_MAX_DOUBLINGS,
                system: SamplerSystem | None = None):
    """One exact sample from the FK measure via monotone coupling from the past.

    Returns (bits, n_steps_of_final_run).  Raises CoalescenceCapError if the
    horizon cap is hit; a biased sample is never returned.
    """
    if q < 1:
        raise ValueError("monotone regime requires q >= 1")
    if system is None:
        system = make_sampler_system(graph, boundary, region)
    E = len(system.edge_ids)
    rng = _rng_for_sample(seed, stream)
    edge_seq = np.empty(0, np.int64)
    coins = np.empty(0, np.float64)
    T = max(2, E)
    use_numba = HAVE_NUMBA
    if use_numba:
        hi = np.empty(E, np.uint8)
        lo = np.empty(E, np.uint8)
        stack = np.empty(system.n_vertices, np.int32)
        stamp = np.zeros(system.n_vertices, np.int64)
        stamp_ctr = 0
    for _ in range(max_doublings):
        need = T - len(edge_seq)
        if need > 0:
            edge_seq = np.concatenate([edge_seq, rng.integers(0, E, size=need)])
            coins = np.concatenate([coins, rng.random(need)])
        if use_numba:
            hi.fill(1)
            lo.fill(0)
            ok, stamp_ctr = _sandwich_kernel(
                system.adj_idx, system.adj_vtx, system.adj_eid,
                system.edges_u, system.edges_v, system.n_vertices, E,
                edge_seq, coins, float(p), float(q), hi, lo, stack, stamp, stamp_ctr,
            )
            if ok:
                bits = 0
                for e in range(E):
                    if hi[e]:
                        bits |= 1 << e
                return bits, T
        else:
            ok, bits = _sandwich_python(system, edge_seq, coins, p, q)
            if ok:
                return bits, T
        T *= 2
    raise CoalescenceCapError(
        f"no coalescence within horizon 2^{max_doublings} doublings (T={T})"
    )


# ---------------------------------------------------------------------------
# cluster geometry on samples


def open_adjacency(system: SamplerSystem, bits: int):
    adj: list[list[int]] = [[] for _ in range(system.n_vertices)]
    for pos, _eid in enumerate(system.edge_ids):
        if (bits >> pos) & 1:
            u, v = int(system.edges_u[pos]), int(system.edges_v[pos])
            adj[u].append(v)
            adj[v].append(u)
    return adj


def clusters_of(system: SamplerSystem, bits: int) -> list:
    adj = open_adjacency(system, bits)
    seen = [False] * system.n_vertices
    out = []
    for start in range(system.n_vertices):
        if seen[start]:
            continue
        seen[start] = True
        comp = [start]
        stack = [start]
        while stack:
            w = stack.pop()
            for nb in adj[w]:
                if not seen[nb]:
                    seen[nb] = True
                    comp.append(nb)
                    stack.append(nb)
        out.append(sorted(comp))
    return out


def torus_linf_diameter(graph, vertices) -> int:
    """L-infinity diameter of a vertex set with circular per-axis distances."""
    coords = [graph.vertex_coords(v) for v in vertices]
    N = graph.N
    best = 0
    for a, b in itertools.combinations(coords, 2):
        dist = max(min(abs(x - y), N - abs(x - y)) for x, y in zip(a, b))
        best = max(best, dist)
    return best


def box_linf_diameter(graph, vertices) -> int:
    coords = [graph.vertex_coords(v) for v in vertices]
    return max(
        (max(c[a] for c in coords) - min(c[a] for c in coords))
        for a in range(graph.d)
    ) if coords else 0


# ---------------------------------------------------------------------------
# events


def box_subgraph_clusters(graph, vertices):
    """Clusters within a vertex box using only edges internal to it.

    Returns a callable bits -> list of clusters (vertex lists, parent ids).
    """
    vset = set(vertices)
    internal = [
        e
        for v in vertices
        for e in (v * graph.d + a for a in range(graph.d))
        if int(graph.edges_v[e]) in vset and int(graph.edges_u[e]) in vset
    ]

    def run(bits):
        adj = {v: [] for v in vertices}
        for e in internal:
            if (bits >> e) & 1:
                u, v = int(graph.edges_u[e]), int(graph.edges_v[e])
                adj[u].append(v)
                adj[v].append(u)
        seen = set()
        comps = []
        for start in vertices:
            if start in seen:
                continue
            seen.add(start)
            comp = [start]
            stack = [start]
            while stack:
                w = stack.pop()
                for nb in adj[w]:
                    if nb not in seen:
                        seen.add(nb)
                        comp.append(nb)
                        stack.append(nb)
            comps.append(comp)
        return comps

    return run


def _unwrap_box_coords(graph, vertices, corner, side):
    """Coordinates of box vertices relative to the box corner (no wrap inside)."""
    out = {}
    for v in vertices:
        c = graph.vertex_coords(v)
        out[v] = tuple((ci - ki) % graph.N for ci, ki in zip(c, corner))
    return out


def local_uniqueness_event(graph, vertices, corner, side, bits, small_diam: int) -> bool:
    """Crossing cluster present and every other cluster of diameter < small_diam.

    A crossing cluster touches all 2d faces of the box.  Diameters are
    L-infinity in box-relative coordinates.
    """
    comps = box_subgraph_clusters(graph, vertices)(bits)
    rel = _unwrap_box_coords(graph, vertices, corner, side)
    crossing = None
    for comp in comps:
        coords = [rel[v] for v in comp]
        touches = all(
            any(c[a] == 0 for c in coords) and any(c[a] == side - 1 for c in coords)
            for a in range(graph.d)
        )
        if touches:
            crossing = set(comp)
            break
    if crossing is None:
        return False
    for comp in comps:
        if set(comp) == crossing:
            continue
        coords = [rel[v] for v in comp]
        diam = max(
            (max(c[a] for c in coords) - min(c[a] for c in coords))
            for a in range(graph.d)
        )
        if diam >= small_diam:
            return False
    return True


@dataclass(frozen=True)
class EventEstimate:
    event: str
    estimate: float
    stderr: float
    n_samples: int
    seed: int
    p: float
    q: float
    n: int
    wilson_low: float
    wilson_high: float

    def to_dict(self):
        return {
            "event": self.event,
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "wilson": [self.wilson_low, self.wilson_high],
        }


def wilson_interval(successes: int, n: int, zcrit: float = 1.96):
    if n == 0:
        return 0.0, 1.0
    phat = successes / n
    z2 = zcrit * zcrit
    mid = (phat + z2 / (2 * n)) / (1 + z2 / n)
    half = zcrit * math.sqrt(phat * (1 - phat) / n + z2 / (4 * n * n)) / (1 + z2 / n)
    return max(0.0, mid - half), min(1.0, mid + half)


def _binary_estimate(name, hits, n_samples, seed, p, q, geom) -> EventEstimate:
    est = hits / n_samples
    stderr = math.sqrt(max(est * (1 - est), 0.0) / n_samples)
    lo, hi = wilson_interval(hits, n_samples)
    return EventEstimate(name, est, stderr, n_samples, seed, p, q, geom, lo, hi)


def estimate_event(graph, p: float, q: float, event: str, n_samples: int,
                   seed: int, boundary: str = "periodic",
                   region_radius: int | None = None, threshold: int | None = None,
                   max_doublings: int = DEFAULT_MAX_DOUBLINGS) -> EventEstimate:
    """Monte Carlo probability of a named event from exact CFTP samples.

    Events: ``Un`` (crossing cluster in the box, all others small), ``An``
    (some cluster of diameter > threshold in the box), ``DN`` (cluster of the
    origin has torus diameter < threshold, default floor(N/5)), ``theta``
    (origin connected to the wired boundary of the box).  Box events take the
    box Lambda_radius around the origin; thresholds are explicit because the
    asymptotic constants (1/100, 1/5) are degenerate at desk scale.
    """
    if event in ("Un", "An", "theta"):
        if region_radius is None:
            raise GeometryError(f"event {event} needs region_radius")
        region = build_box(graph, (0,) * graph.d, region_radius)
    else:
        region = None

    if event == "theta":
        system = make_sampler_system(graph, "wired", region)
    else:
        system = make_sampler_system(graph, boundary, None)

    hits = 0
    for i in range(n_samples):
        bits, _ = cftp_sample(graph, p, q, seed=seed, stream=i,
                              max_doublings=max_doublings, system=system)
        hits += _event_indicator(graph, system, region, region_radius, event,
                                 bits, threshold)
    geom = region_radius if region_radius is not None else graph.N
    return _binary_estimate(event, hits, n_samples, seed, p, q, geom)


def _event_indicator(graph, system, region, radius, event, bits, threshold) -> int:
    if event == "theta":
        # wired system: effective vertex 0 is the glued boundary
        origin = graph.vertex_index((0,) * graph.d)
        o = _wired_index(region)[origin]
        if o == 0:
            return 1
        for comp in clusters_of(system, bits):
            if o in comp:
                return int(0 in comp)
        return 0
    if event in ("Un", "An"):
        side = 2 * radius + 1
        corner = tuple(-radius for _ in range(graph.d))
        thr = threshold if threshold is not None else max(1, side // 100)
        if event == "Un":
            return int(local_uniqueness_event(graph, region.vertices, corner, side, bits, thr))
        comps = box_subgraph_clusters(graph, region.vertices)(bits)
        rel = _unwrap_box_coords(graph, region.vertices, corner, side)
        for comp in comps:
            coords = [rel[v] for v in comp]
            diam = max(
                (max(c[a] for c in coords) - min(c[a] for c in coords))
                for a in range(graph.d)
            )
            if diam > thr:
                return 1
        return 0
    if event == "DN":
        thr = threshold if threshold is not None else graph.N // 5
        full_bits = _expand_bits(system, bits, graph.n_edges)
        comp = _component_of_origin(graph, full_bits)
        return int(torus_linf_diameter(graph, comp) < thr)
    raise GeometryError(f"unknown event {event!r}")


def _wired_index(region: BoxRegion):
    remap = {}
    nxt = 1
    bset = set(region.boundary_vertices)
    for v in region.vertices:
        if v in bset:
            remap[v] = 0
        else:
            remap[v] = nxt
            nxt += 1
    return remap


def _expand_bits(system: SamplerSystem, bits: int, n_parent_edges: int) -> int:
    out = 0
    for pos, eid in enumerate(system.edge_ids):
        if (bits >> pos) & 1:
            out |= 1 << eid
    return out


def _component_of_origin(graph, bits: int):
    from .lattice import cluster_labels

    labels = cluster_labels(graph, bits)
    root = labels[0]
    return [v for v in range(graph.n_vertices) if labels[v] == root]


def estimate_c0_histogram(graph, p: float, q: float, n_samples: int, seed: int,
                          max_doublings: int = DEFAULT_MAX_DOUBLINGS) -> dict:
    """Histogram of |C_0| over exact samples on the torus."""
    system = make_sampler_system(graph, "periodic", None)
    hist: dict = {}
    for i in range(n_samples):
        bits, _ = cftp_sample(graph, p, q, seed=seed, stream=i,
                              max_doublings=max_doublings, system=system)
        size = len(_component_of_origin(graph, bits))
        hist[size] = hist.get(size, 0) + 1
    return dict(sorted(hist.items()))


# ---------------------------------------------------------------------------
# good/bad boxes


def bad_box_field(graph, ct, bits: int, small_diam: int | None = None):
    """Per-box local-uniqueness labels and star-connected bad components.

    A box is good when the local-uniqueness event (crossing cluster inside the
    box, all other clusters of L-infinity diameter < small_diam) holds on the
    box's own vertex tile with its internal edges.  Bad boxes are grouped by
    star adjacency of their coarse sites; the size multiset is returned.
    """
    side = 2 * ct.L
    thr = small_diam if small_diam is not None else max(1, side // 100)
    labels = {}
    for s in range(ct.n_sites):
        verts = ct.box_vertices[s]
        corner = tuple(c - ct.L for c in ct.site_coords[s])
        labels[s] = local_uniqueness_event(graph, verts, corner, side, bits, thr)
    bad = [s for s in range(ct.n_sites) if not labels[s]]
    badset = set(bad)
    seen = set()
    sizes = []
    for s in bad:
        if s in seen:
            continue
        seen.add(s)
        comp = 1
        stack = [s]
        while stack:
            w = stack.pop()
            for nb in ct.star_adj[w]:
                if nb in badset and nb not in seen:
                    seen.add(nb)
                    comp += 1
                    stack.append(nb)
        sizes.append(comp)
    return labels, sorted(sizes, reverse=True)


def estimate_bad_component_sizes(graph, ct, p: float, q: float, n_samples: int,
                                 seed: int, small_diam: int | None = None) -> dict:
    """Frequency of star-connected bad-box component sizes over exact samples."""
    system = make_sampler_system(graph, "periodic", None)
    freq: dict = {}
    for i in range(n_samples):
        bits, _ = cftp_sample(graph, p, q, seed=seed, stream=i, system=system)
        _, sizes = bad_box_field(graph, ct, bits, small_diam)
        for s in sizes:
            freq[s] = freq.get(s, 0) + 1
    return dict(sorted(freq.items()))
