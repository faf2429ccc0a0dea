"""Exhaustive configuration enumeration producing exact joint count tables.

The workhorse walks all 2^E configurations of an edge set and tallies exact
integer counts refined by

* m_b: open-edge count per box (boxes = any partition of the edges; a single
  box recovers the total |omega|),
* k: number of clusters,
* sigma: the restriction of omega to a small tracked edge set,
* optionally the size of the cluster of a marked vertex.

Counts are merged associatively from disjoint configuration ranges, so the
numba kernel parallelises over chunks; a pure-Python walker with the same
output layout serves as an independent oracle on small instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError

DEFAULT_ENUM_BUDGET = 26
HARD_EDGE_CAP = 40  # bitmask layout bound; beyond this enumeration is hopeless anyway

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f

        return wrap

    prange = range


@dataclass(frozen=True)
class CountTable:
    """Dense exact counts indexed by (box-count vector, k, sigma[, c0]).

    ``radices`` holds the per-box edge counts; the flat index of a cell is
    mixed-radix over box counts, then k in 0..nv, then sigma, then (optionally)
    c0 in 0..nv.
    """

    counts: np.ndarray  # int64, flat
    box_edge_counts: tuple[int, ...]
    n_vertices: int
    n_edges: int
    delta_edges: tuple[int, ...]
    track_c0: bool

    @property
    def k_dim(self) -> int:
        return self.n_vertices + 1

    @property
    def sig_dim(self) -> int:
        return 1 << len(self.delta_edges)

    @property
    def c0_dim(self) -> int:
        return self.n_vertices + 1 if self.track_c0 else 1

    def cell(self, box_counts, k, sig, c0=0) -> int:
        idx = 0
        for cnt, rad in zip(box_counts, self.box_edge_counts):
            idx = idx * (rad + 1) + cnt
        idx = ((idx * self.k_dim + k) * self.sig_dim + sig) * self.c0_dim + c0
        return int(self.counts[idx])

    def iter_nonzero(self):
        """Yield (box_counts tuple, k, sig, c0, count) over populated cells."""
        nz = np.nonzero(self.counts)[0]
        radii = self.box_edge_counts
        for flat in nz:
            rem, c0 = divmod(int(flat), self.c0_dim)
            rem, sig = divmod(rem, self.sig_dim)
            rem, k = divmod(rem, self.k_dim)
            boxes = []
            for rad in reversed(radii):
                rem, cnt = divmod(rem, rad + 1)
                boxes.append(cnt)
            yield tuple(reversed(boxes)), k, sig, c0, int(self.counts[flat])

    def total(self) -> int:
        return int(self.counts.sum())

    def mks_array(self):
        """Aggregate to arrays (m, k, sigma) -> count with m = total open edges."""
        out = np.zeros((self.n_edges + 1, self.k_dim, self.sig_dim), np.int64)
        for boxes, k, sig, _c0, cnt in self.iter_nonzero():
            out[sum(boxes), k, sig] += cnt
        return out


@dataclass(frozen=True)
class SparseBoxTable:
    """Nonzero cells of a per-box refined count table, columnar.

    ``boxes[i]`` is the open-edge count per box of cell i; sigma bits follow
    the tracked edge order.  Counts are exact (int64 is ample for any budget
    this package accepts).
    """

    boxes: np.ndarray  # (nnz, n_boxes) int16
    ks: np.ndarray  # (nnz,) int16
    sigs: np.ndarray  # (nnz,) int32
    counts: np.ndarray  # (nnz,) int64
    box_edge_counts: tuple[int, ...]
    n_vertices: int
    n_edges: int
    delta_edges: tuple[int, ...]

    @classmethod
    def from_count_table(cls, table: "CountTable") -> "SparseBoxTable":
        rows = list(table.iter_nonzero())
        boxes = np.array([r[0] for r in rows], np.int16)
        ks = np.array([r[1] for r in rows], np.int16)
        sigs = np.array([r[2] for r in rows], np.int32)
        counts = np.array([r[4] for r in rows], np.int64)
        return cls(boxes, ks, sigs, counts, table.box_edge_counts,
                   table.n_vertices, table.n_edges, table.delta_edges)

    def total(self) -> int:
        return int(self.counts.sum())

    def mks_array(self) -> np.ndarray:
        out = np.zeros((self.n_edges + 1, self.n_vertices + 1, 1 << len(self.delta_edges)),
                       np.int64)
        ms = self.boxes.sum(axis=1)
        np.add.at(out, (ms, self.ks, self.sigs), self.counts)
        return out

    def save(self, path):
        np.savez_compressed(
            path,
            boxes=self.boxes, ks=self.ks, sigs=self.sigs, counts=self.counts,
            box_edge_counts=np.array(self.box_edge_counts, np.int64),
            meta=np.array([self.n_vertices, self.n_edges], np.int64),
            delta_edges=np.array(self.delta_edges, np.int64),
        )

    @classmethod
    def load(cls, path) -> "SparseBoxTable":
        data = np.load(path)
        nv, ne = (int(x) for x in data["meta"])
        return cls(data["boxes"], data["ks"], data["sigs"], data["counts"],
                   tuple(int(x) for x in data["box_edge_counts"]), nv, ne,
                   tuple(int(x) for x in data["delta_edges"]))


@njit(cache=True)
def _find32(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit(parallel=True, cache=True)
def _count_kernel(edges_u, edges_v, nv, n_low, box_of_edge, n_boxes,
                  lo_box_tab, hi_box_tab, delta_edges, track_c0, out):
    E = edges_u.shape[0]
    n_hi = E - n_low
    total_hi = 1 << n_hi
    ndelta = delta_edges.shape[0]
    per_box = np.zeros(n_boxes, np.int64)
    for e in range(E):
        per_box[box_of_edge[e]] += 1
    box_strides = np.empty(n_boxes, np.int64)
    s = 1
    for b in range(n_boxes - 1, -1, -1):
        box_strides[b] = s
        s *= per_box[b] + 1
    k_dim = nv + 1
    sig_dim = 1 << ndelta
    c0_dim = nv + 1 if track_c0 else 1
    n_chunks = out.shape[0]
    for chunk in prange(n_chunks):
        lo_hb = total_hi * chunk // n_chunks
        hi_hb = total_hi * (chunk + 1) // n_chunks
        parent0 = np.empty(nv, np.int32)
        parent = np.empty(nv, np.int32)
        local = out[chunk]
        for hb in range(lo_hb, hi_hb):
            for i in range(nv):
                parent0[i] = i
            merges0 = 0
            for j in range(n_hi):
                if (hb >> j) & 1:
                    e = n_low + j
                    ra = _find32(parent0, edges_u[e])
                    rb = _find32(parent0, edges_v[e])
                    if ra != rb:
                        parent0[ra] = rb
                        merges0 += 1
            boxhi = 0
            for b in range(n_boxes):
                boxhi += hi_box_tab[hb, b] * box_strides[b]
            for lb in range(1 << n_low):
                for i in range(nv):
                    parent[i] = parent0[i]
                merges = merges0
                for j in range(n_low):
                    if (lb >> j) & 1:
                        ra = _find32(parent, edges_u[j])
                        rb = _find32(parent, edges_v[j])
                        if ra != rb:
                            parent[ra] = rb
                            merges += 1
                k = nv - merges
                boxidx = boxhi
                for b in range(n_boxes):
                    boxidx += lo_box_tab[lb, b] * box_strides[b]
                sig = 0
                for j in range(ndelta):
                    e = delta_edges[j]
                    if e < n_low:
                        bit = (lb >> e) & 1
                    else:
                        bit = (hb >> (e - n_low)) & 1
                    sig |= bit << j
                c0 = 0
                if track_c0:
                    r0 = _find32(parent, 0)
                    for i in range(nv):
                        if _find32(parent, i) == r0:
                            c0 += 1
                local[((boxidx * k_dim + k) * sig_dim + sig) * c0_dim + c0] += 1


def _box_count_tables(E, n_low, box_of_edge, n_boxes):
    lo = np.zeros((1 << n_low, n_boxes), np.int8)
    hi = np.zeros((1 << (E - n_low), n_boxes), np.int8)
    for j in range(n_low):
        lo[:, box_of_edge[j]] += ((np.arange(1 << n_low) >> j) & 1).astype(np.int8)
    for j in range(E - n_low):
        hi[:, box_of_edge[n_low + j]] += ((np.arange(1 << (E - n_low)) >> j) & 1).astype(np.int8)
    return lo, hi


def enumerate_counts(edges_u, edges_v, n_vertices, *, delta_edges=(),
                     box_of_edge=None, track_c0=False, budget=DEFAULT_ENUM_BUDGET,
                     n_chunks=None, use_numba=True) -> CountTable:
    """Walk all 2^E configurations of the given edge list and tally counts.

    ``box_of_edge`` maps edge position -> box id (default: one box).  Budget
    refers to the number of edges; 2^budget configurations are visited.
    """
    edges_u = np.asarray(edges_u, np.int32)
    edges_v = np.asarray(edges_v, np.int32)
    E = len(edges_u)
    if E > min(budget, HARD_EDGE_CAP):
        raise BudgetExceededError(
            f"enumeration over {E} edges exceeds budget {min(budget, HARD_EDGE_CAP)}"
        )
    if box_of_edge is None:
        box_of_edge = np.zeros(E, np.int8)
    else:
        box_of_edge = np.asarray(box_of_edge, np.int8)
    n_boxes = int(box_of_edge.max()) + 1 if E else 1
    per_box = [int((box_of_edge == b).sum()) for b in range(n_boxes)]
    delta_edges = tuple(int(e) for e in delta_edges)

    if use_numba and HAVE_NUMBA:
        n_low = min(E, 16)
        lo_tab, hi_tab = _box_count_tables(E, n_low, box_of_edge, n_boxes)
        dim = 1
        for pb in per_box:
            dim *= pb + 1
        dim *= (n_vertices + 1) * (1 << len(delta_edges))
        dim *= (n_vertices + 1) if track_c0 else 1
        if n_chunks is None:
            n_chunks = 1 if E <= 18 else max(2, min(64, 1 << max(0, E - n_low)))
        out = np.zeros((n_chunks, dim), np.int64)
        _count_kernel(edges_u, edges_v, n_vertices, n_low, box_of_edge, n_boxes,
                      lo_tab, hi_tab, np.asarray(delta_edges, np.int32),
                      track_c0, out)
        counts = out.sum(axis=0)
    else:
        counts = _enumerate_python(edges_u, edges_v, n_vertices, delta_edges,
                                   box_of_edge, n_boxes, per_box, track_c0)
    return CountTable(counts, tuple(per_box), n_vertices, E, delta_edges, track_c0)


def _enumerate_python(edges_u, edges_v, nv, delta_edges, box_of_edge, n_boxes,
                      per_box, track_c0):
    """Reference walker; independent of the numba path."""
    E = len(edges_u)
    k_dim = nv + 1
    sig_dim = 1 << len(delta_edges)
    c0_dim = nv + 1 if track_c0 else 1
    dim = 1
    for pb in per_box:
        dim *= pb + 1
    counts = np.zeros(dim * k_dim * sig_dim * c0_dim, np.int64)
    strides = [0] * n_boxes
    s = 1
    for b in range(n_boxes - 1, -1, -1):
        strides[b] = s
        s *= per_box[b] + 1
    for cfg in range(1 << E):
        parent = list(range(nv))
        k = nv
        boxcnt = [0] * n_boxes
        for e in range(E):
            if (cfg >> e) & 1:
                boxcnt[box_of_edge[e]] += 1
                ra, rb = _pyfind(parent, int(edges_u[e])), _pyfind(parent, int(edges_v[e]))
                if ra != rb:
                    parent[ra] = rb
                    k -= 1
        sig = 0
        for j, e in enumerate(delta_edges):
            sig |= ((cfg >> e) & 1) << j
        c0 = 0
        if track_c0:
            r0 = _pyfind(parent, 0)
            c0 = sum(1 for i in range(nv) if _pyfind(parent, i) == r0)
        boxidx = sum(c * st for c, st in zip(boxcnt, strides))
        counts[((boxidx * k_dim + k) * sig_dim + sig) * c0_dim + c0] += 1
    return counts


def _pyfind(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a
