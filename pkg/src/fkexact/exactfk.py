"""Exact FK-percolation on small graphs.

Partition tables are exact integer counts N(m, k) of configurations with m
open edges and k clusters; every measure-level quantity is then a finite sum.
Complex parameter shifts are evaluated two ways and cross-checked:

* direct substitution of the odds ratio x = (p+z)/(1-p-z), and
* the alpha tilt: reweighting the measure at p by alpha_z^{|omega|} with
  alpha_z = (1 + z/p) / (1 - z/(1-p)).

The two routes agree term by term algebraically; their floating-point
agreement is enforced at a strict relative tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .enumeration import DEFAULT_ENUM_BUDGET, enumerate_counts
from .errors import (
    PoleProximityError,
    TiltMismatchError,
    ZeroDenominatorError,
)
from .lattice import BoxRegion

TILT_RTOL = 1e-10
ZERO_DEN_TOL = 1e-12
POLE_TOL = 1e-9


@dataclass(frozen=True)
class FKParams:
    """Edge density p, cluster weight q, complex shift z (|z| < 1-p where tilted)."""

    p: float
    q: float
    z: complex = 0j


def alpha(p: float, z: complex) -> complex:
    """Tilt factor alpha_z = (1 + z/p) / (1 - z/(1-p))."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0,1), got {p}")
    den = 1 - z / (1 - p)
    if abs(den) < 1e-14:
        raise PoleProximityError(f"alpha pole: z={z} too close to 1-p={1-p}")
    return (1 + z / p) / den


@dataclass(frozen=True)
class LocalFunction:
    """Observable depending only on the edges in ``support``.

    ``values[sig]`` is the value on the restriction where bit j of sig gives
    the state of ``support[j]``.
    """

    support: tuple[int, ...]
    values: tuple[float, ...]
    nonneg: bool = field(default=False)

    def __post_init__(self):
        if tuple(sorted(self.support)) != self.support:
            raise ValueError("support must be sorted ascending")
        if len(self.values) != 1 << len(self.support):
            raise ValueError("values table must have length 2^|support|")

    @property
    def sup_norm(self) -> float:
        return max(abs(v) for v in self.values)

    def sig_of(self, bits: int) -> int:
        sig = 0
        for j, e in enumerate(self.support):
            sig |= ((bits >> e) & 1) << j
        return sig

    def __call__(self, bits: int) -> float:
        return self.values[self.sig_of(bits)]

    @classmethod
    def from_callable(cls, support, fn, nonneg=False) -> "LocalFunction":
        support = tuple(sorted(support))
        vals = []
        for sig in range(1 << len(support)):
            bits = 0
            for j, e in enumerate(support):
                bits |= ((sig >> j) & 1) << e
            vals.append(fn(bits))
        return cls(support, tuple(vals), nonneg)

    @classmethod
    def edge_open(cls, e: int) -> "LocalFunction":
        return cls((e,), (0.0, 1.0), nonneg=True)

    @classmethod
    def cylinder(cls, assignment: dict) -> "LocalFunction":
        """Indicator that each edge of the assignment has the given state."""
        support = tuple(sorted(assignment))
        vals = []
        for sig in range(1 << len(support)):
            ok = all(((sig >> j) & 1) == assignment[e] for j, e in enumerate(support))
            vals.append(1.0 if ok else 0.0)
        return cls(support, tuple(vals), nonneg=True)

    @classmethod
    def constant(cls, c: float) -> "LocalFunction":
        return cls((), (c,), nonneg=c >= 0)


def bernoulli_expectation(F: LocalFunction, p: complex) -> complex:
    """E[F] under independent edges open with (possibly complex) probability p."""
    total = 0j
    n = len(F.support)
    for sig in range(1 << n):
        w = 1.0 + 0j
        for j in range(n):
            w *= p if (sig >> j) & 1 else 1 - p
        total += F.values[sig] * w
    return total


# ---------------------------------------------------------------------------
# systems: graph + boundary condition, flattened for enumeration


@dataclass(frozen=True)
class EnumSystem:
    """Edge list over an effective vertex set, with parent edge ids retained.

    Wired boundary conditions contract all boundary vertices of the region to
    a single vertex before counting clusters, which realises the glued
    exterior cluster exactly once.
    """

    n_vertices: int
    edges_u: tuple[int, ...]
    edges_v: tuple[int, ...]
    edge_ids: tuple[int, ...]
    boundary: str
    graph_hash: str

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    def table_positions(self, parent_edges) -> tuple[int, ...]:
        pos = {e: i for i, e in enumerate(self.edge_ids)}
        return tuple(pos[e] for e in parent_edges)


def make_system(graph, boundary: str = "periodic", region: BoxRegion | None = None) -> EnumSystem:
    ghash = graph.graph_hash() if hasattr(graph, "graph_hash") else "adhoc"
    if region is None:
        if boundary == "wired":
            raise ValueError("wired boundary requires a region")
        return EnumSystem(
            graph.n_vertices,
            tuple(int(u) for u in graph.edges_u),
            tuple(int(v) for v in graph.edges_v),
            tuple(range(graph.n_edges)),
            boundary,
            ghash,
        )
    if boundary == "free":
        remap = {v: i for i, v in enumerate(region.vertices)}
        nv = len(region.vertices)
    elif boundary == "wired":
        remap = {}
        nxt = 1
        bset = set(region.boundary_vertices)
        for v in region.vertices:
            if v in bset:
                remap[v] = 0
            else:
                remap[v] = nxt
                nxt += 1
        nv = nxt
    else:
        raise ValueError(f"unsupported boundary {boundary!r} for a region")
    eu = tuple(remap[int(graph.edges_u[e])] for e in region.edge_ids)
    ev = tuple(remap[int(graph.edges_v[e])] for e in region.edge_ids)
    return EnumSystem(nv, eu, ev, tuple(region.edge_ids), boundary, ghash)


# ---------------------------------------------------------------------------
# partition tables


@dataclass(frozen=True)
class PartitionTable:
    """Exact joint counts N(m, k), the whole FK measure in one integer table."""

    counts: dict
    n_edges: int
    n_vertices: int
    boundary: str
    graph_hash: str

    def total(self) -> int:
        return sum(self.counts.values())

    def to_json(self) -> str:
        rows = [[m, k, str(c)] for (m, k), c in sorted(self.counts.items())]
        return json.dumps(
            {"graph_hash": self.graph_hash, "boundary": self.boundary, "counts": rows},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str, n_edges=None, n_vertices=None) -> "PartitionTable":
        data = json.loads(text)
        counts = {(int(m), int(k)): int(c) for m, k, c in data["counts"]}
        ne = n_edges if n_edges is not None else max(m for m, _ in counts)
        nv = n_vertices if n_vertices is not None else max(k for _, k in counts)
        return cls(counts, ne, nv, data["boundary"], data["graph_hash"])


@dataclass(frozen=True)
class RefinedTable:
    """Counts N(m, k, sigma) refined by the configuration on a tracked edge set."""

    array: np.ndarray  # shape (E+1, nv+1, 2^|support|)
    support: tuple[int, ...]  # parent edge ids
    n_edges: int
    n_vertices: int
    boundary: str
    graph_hash: str

    def total(self) -> int:
        return int(self.array.sum())

    def marginal(self) -> PartitionTable:
        counts = {}
        mk = self.array.sum(axis=2)
        for m, k in zip(*np.nonzero(mk)):
            counts[(int(m), int(k))] = int(mk[m, k])
        return PartitionTable(counts, self.n_edges, self.n_vertices, self.boundary, self.graph_hash)

    def sig_values(self, F: LocalFunction) -> np.ndarray:
        """F evaluated on each tracked-sigma class (F.support must be tracked)."""
        missing = set(F.support) - set(self.support)
        if missing:
            raise ValueError(f"function support {missing} not tracked by this table")
        pos = {e: j for j, e in enumerate(self.support)}
        out = np.empty(self.array.shape[2], complex)
        for sig in range(self.array.shape[2]):
            fsig = 0
            for j, e in enumerate(F.support):
                fsig |= ((sig >> pos[e]) & 1) << j
            out[sig] = F.values[fsig]
        return out


def build_partition_table(graph, boundary="periodic", region=None,
                          budget=DEFAULT_ENUM_BUDGET, use_numba=True) -> PartitionTable:
    refined = build_refined_table(graph, (), boundary=boundary, region=region,
                                  budget=budget, use_numba=use_numba)
    return refined.marginal()


def build_refined_table(graph, support, boundary="periodic", region=None,
                        budget=DEFAULT_ENUM_BUDGET, use_numba=True) -> RefinedTable:
    """Enumerate the system exactly, tracking the configuration on ``support``."""
    system = make_system(graph, boundary, region)
    delta_pos = system.table_positions(tuple(sorted(support)))
    table = enumerate_counts(
        system.edges_u, system.edges_v, system.n_vertices,
        delta_edges=delta_pos, budget=budget, use_numba=use_numba,
    )
    arr = table.mks_array()
    return RefinedTable(arr, tuple(sorted(support)), system.n_edges,
                        system.n_vertices, boundary, system.graph_hash)


# ---------------------------------------------------------------------------
# evaluation


def evaluate_Z(table: PartitionTable, p: float, q: float, z: complex = 0j,
               pole_tol: float = POLE_TOL) -> complex:
    """Partition function at odds x = (p+z)/(1-(p+z)): sum N(m,k) x^m q^k."""
    den = 1 - p - z
    if abs(den) < pole_tol:
        raise PoleProximityError(f"p+z={p+z} within {pole_tol} of the pole at 1")
    x = (p + z) / den
    total = 0j
    for (m, k), c in table.counts.items():
        total += c * x**m * q**k
    return total


def _power_array(base: complex, n: int) -> np.ndarray:
    out = np.empty(n + 1, complex)
    out[0] = 1
    for i in range(1, n + 1):
        out[i] = out[i - 1] * base
    return out


def phi_alpha_moment(table, p: float, q: float, z: complex) -> complex:
    """phi_p[alpha_z^{|omega|}], the tilted normalisation.

    Zeros of this quantity are the complex partition-function zeros of p+z.
    """
    if isinstance(table, RefinedTable):
        mk = table.array.sum(axis=2)
        E, nv = table.n_edges, table.n_vertices
    else:
        E, nv = table.n_edges, table.n_vertices
        mk = np.zeros((E + 1, nv + 1))
        for (m, k), c in table.counts.items():
            mk[m, k] = c
    a = alpha(p, z)
    xp = p / (1 - p)
    A = _power_array(a * xp, E)
    XP = _power_array(xp, E)
    Q = _power_array(q, nv)
    num = (mk * A[:, None] * Q[None, :]).sum()
    den = (mk * XP[:, None] * Q[None, :]).sum()
    return num / den


def expectation_exact(refined: RefinedTable, F: LocalFunction, params: FKParams,
                      rtol: float = TILT_RTOL, zero_tol: float = ZERO_DEN_TOL,
                      pole_tol: float = POLE_TOL) -> complex:
    """phi_{p+z}[F] via the alpha tilt, cross-checked against direct substitution.

    Raises ZeroDenominatorError when phi_p[alpha_z^{|omega|}] vanishes within
    tolerance (a partition-function zero at p+z) and TiltMismatchError when
    the two evaluation routes disagree beyond ``rtol``.
    """
    p, q, z = params.p, params.q, params.z
    if abs(1 - p - z) < pole_tol:
        raise PoleProximityError(f"p+z={p+z} within {pole_tol} of the pole at 1")
    E, nv = refined.n_edges, refined.n_vertices
    mk_sig = refined.array
    fvals = refined.sig_values(F)

    a = alpha(p, z)
    xp = p / (1 - p)
    xz = (p + z) / (1 - p - z)
    A = _power_array(a, E)
    XP = _power_array(xp, E)
    XZ = _power_array(xz, E)
    Q = _power_array(q, nv)

    wt_tilt = (A * XP)[:, None] * Q[None, :]
    wt_dir = XZ[:, None] * Q[None, :]
    mk_f = mk_sig @ fvals
    mk_tot = mk_sig.sum(axis=2)

    den_tilt = (mk_tot * wt_tilt).sum()
    den_p = (mk_tot * (XP[:, None] * Q[None, :])).sum()
    if abs(den_tilt / den_p) < zero_tol:
        raise ZeroDenominatorError(
            f"phi_p[alpha_z^|w|] = {den_tilt / den_p} below tolerance at z={z}"
        )
    val_tilt = (mk_f * wt_tilt).sum() / den_tilt
    val_dir = (mk_f * wt_dir).sum() / (mk_tot * wt_dir).sum()
    if abs(val_tilt - val_dir) > rtol * (1 + abs(val_tilt)):
        raise TiltMismatchError(
            f"tilted {val_tilt} vs direct {val_dir} differ beyond rtol={rtol}"
        )
    return val_tilt


# ---------------------------------------------------------------------------
# scans and fits


@dataclass(frozen=True)
class ScanReport:
    radius: float
    min_abs: float
    argmin: complex
    delta_hat: float
    rows: tuple  # (re z, im z, re val, im val, abs val)


def zero_free_scan(table, p: float, q: float, radius: float,
                   n_radii: int = 8, n_angles: int = 32, tol: float = 1e-12) -> ScanReport:
    """Scan |phi_p[alpha_z^{|omega|}]| on a polar grid of the disk |z| <= radius.

    delta_hat is the largest tested radius such that the minimum over all
    grid points with |z| <= that radius stays above tolerance: an empirical
    lower estimate of a zero-free disk, never a claim about the true one.
    """
    if not radius < 1 - p:
        raise ValueError(f"radius {radius} must be < 1-p = {1-p}")
    rows = []
    min_abs, argmin = np.inf, 0j
    radii = [radius * (i + 1) / n_radii for i in range(n_radii)]
    per_radius_min = []
    for r in radii:
        rmin = np.inf
        for j in range(n_angles):
            theta = 2 * np.pi * j / n_angles
            z = r * np.exp(1j * theta)
            val = phi_alpha_moment(table, p, q, z)
            rows.append((z.real, z.imag, val.real, val.imag, abs(val)))
            rmin = min(rmin, abs(val))
            if abs(val) < min_abs:
                min_abs, argmin = abs(val), z
        per_radius_min.append(rmin)
    delta_hat = 0.0
    running = np.inf
    for r, rmin in zip(radii, per_radius_min):
        running = min(running, rmin)
        if running > tol:
            delta_hat = r
        else:
            break
    return ScanReport(radius, float(min_abs), argmin, delta_hat, tuple(rows))


@dataclass(frozen=True)
class RatioFitReport:
    support_size: int
    rows: tuple  # (eps, c_hat, max_abs_ratio)
    monotone: bool

    def c_hat(self, eps: float) -> float:
        for e, c, _ in self.rows:
            if e == eps:
                return c
        raise KeyError(eps)


def ratio_bound_fit(refined: RefinedTable, F: LocalFunction, p: float, q: float,
                    eps_grid, n_angles: int = 16) -> RatioFitReport:
    """Fit the growth constant of |phi_{p+z}[F] / phi_p[F]| on circles |z| = eps.

    c_hat(eps) = max over sampled z of (1/|Delta|) * max(0, log(|ratio| / 2)),
    so max |ratio| <= 2 exp(c_hat |Delta|) holds by construction.
    """
    if not F.nonneg:
        raise ValueError("ratio bound fit requires a non-negative local function")
    base = expectation_exact(refined, F, FKParams(p, q, 0j))
    if abs(base) == 0:
        raise ValueError("F is identically zero on the support distribution")
    ndelta = max(1, len(F.support))
    rows = []
    for eps in sorted(eps_grid):
        max_ratio = 0.0
        for j in range(n_angles):
            z = eps * np.exp(2j * np.pi * j / n_angles)
            val = expectation_exact(refined, F, FKParams(p, q, z))
            max_ratio = max(max_ratio, abs(val / base))
        c_hat = max(0.0, np.log(max_ratio / 2)) / ndelta
        rows.append((eps, float(c_hat), float(max_ratio)))
    cs = [c for _, c, _ in rows]
    monotone = all(cs[i] <= cs[i + 1] + 1e-15 for i in range(len(cs) - 1))
    return RatioFitReport(len(F.support), tuple(rows), monotone)


def finite_energy_min_prob(p: float, q: float) -> float:
    """Worst-case single-edge conditional probability of a prescribed state.

    For q >= 1 the edge-open probability given everything else lies in
    [p/(p+q(1-p)), p], so any cylinder on Delta has probability at least
    min(p/(p+q(1-p)), 1-p)^{|Delta|}.
    """
    return min(p / (p + q * (1 - p)), 1 - p)
