"""The plus/minus-one expansion of the tilted measure over coarse boxes.

Writing alpha_z^{|omega|} as a product over coarse boxes of (1 + f_x) with

    f_x(omega) = prod over the box's edges of alpha_z^{omega(e)}  -  1,

the tilted expectation of a local function F expands into a weighted sum of
polymer partition functions:

    phi_{p+z}[F] = sum over independent families {g} intersecting the coarse
                   support of F of  G_z({g}) * Xi(w^{{g}}) / Xi(w),

where the activities w and weights G are expectations against a dependency
encoding: a coupling of omega with per-site clusters C_x such that
observables on disjoint cluster unions factorise exactly.  A reference
encoding with independent edges and C_x = {x} makes every identity here
exactly checkable; for it all expectations have closed product forms.

Conventions pinned down here because the identities force them:

* C over the empty site set is the empty set, so the A-empty term of an
  activity never produces a nonempty cluster.
* The excluded-trace activity w^{{g}} zeroes polymers intersecting OR
  adjacent to the trace (independent-mode compatibility); with intersection
  alone the expansion double counts adjacent-but-disjoint splits and the
  identity fails.
* The support of F is mapped to coarse sites via the canonical box tiling.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .enumeration import SparseBoxTable
from .errors import ZeroXiError
from .exactfk import LocalFunction, alpha, bernoulli_expectation
from .expansion import Activity, exact_Xi, restricted_activity
from .polymer import enumerate_families, enumerate_polymers, family_trace

XI_ZERO_TOL = 1e-12


def coarse_support(ct, edges) -> frozenset:
    """Coarse sites whose canonical box contains any of the given edges."""
    return frozenset(int(ct.edge_to_site[e]) for e in edges)


def f_value(ct, site: int, bits: int, p: float, z: complex) -> complex:
    """Box factor f_x(omega) = alpha_z^{#open edges in the box of x} - 1."""
    m = (bits & ct.box_edge_mask(site)).bit_count()
    return alpha(p, z) ** m - 1


def pm1_product(ct, bits: int, p: float, z: complex) -> complex:
    """prod over sites of (1 + f_x): equals alpha_z^{|omega|} identically."""
    out = 1 + 0j
    for s in range(ct.n_sites):
        out *= 1 + f_value(ct, s, bits, p, z)
    return out


# ---------------------------------------------------------------------------
# dependency encodings


class DependencyEncoding:
    """Interface consumed by the resummation: exact mixed expectations.

    ``expectation(F, A, B, target, z)`` must return
        P[ F(omega) * prod_{x in A} f_{z,x}(omega) * 1{C_B = target} ],
    with F possibly None (constant one).  ``tilt_all_open=True`` replaces each
    f factor by its value on the all-open configuration (a constant), which
    the summability comparisons need.
    """

    graph = None
    ct = None
    p = None
    q = None

    def expectation(self, F, A, B, target, z, tilt_all_open=False) -> complex:
        raise NotImplementedError

    def sample(self, rng):
        raise NotImplementedError


class BernoulliEncoding(DependencyEncoding):
    """Independent edges at density p with deterministic singleton clusters.

    The decoupling contract holds exactly: the omega-marginal is the q=1 FK
    measure, C_x = {x} contains x, factorisation over disjoint site sets is
    immediate from edge independence, and |C_x| has a zero tail beyond size 1.
    """

    def __init__(self, graph, ct, p: float):
        self.graph = graph
        self.ct = ct
        self.p = float(p)
        self.q = 1.0
        self._box_sizes = [len(ct.box_edge_ids[s]) for s in range(ct.n_sites)]

    def cluster_of(self, x: int) -> frozenset:
        return frozenset([x])

    def cluster_union(self, B) -> frozenset:
        return frozenset(B)

    def expectation(self, F, A, B, target, z, tilt_all_open=False) -> complex:
        A = frozenset(A)
        B = frozenset(B)
        target = frozenset(target)
        if self.cluster_union(B) != target:
            return 0j
        p = self.p
        a = alpha(p, z)
        mu = (1 - p) / (1 - p - z)  # E[alpha^{omega(e)}] for a single edge

        if F is None:
            F = LocalFunction.constant(1.0)
        ct = self.ct
        delta = F.support
        delta_by_site: dict = {}
        for j, e in enumerate(delta):
            delta_by_site.setdefault(int(ct.edge_to_site[e]), []).append(j)

        total = 0j
        for sig in range(1 << len(delta)):
            prob = 1.0
            for j in range(len(delta)):
                prob *= p if (sig >> j) & 1 else 1 - p
            fv = F.values[sig]
            if fv == 0 or prob == 0:
                continue
            w = fv * prob
            for x in A:
                bx = self._box_sizes[x]
                if tilt_all_open:
                    w *= a**bx - 1
                    continue
                in_box = delta_by_site.get(x, [])
                open_in_box = sum((sig >> j) & 1 for j in in_box)
                w *= a**open_in_box * mu ** (bx - len(in_box)) - 1
            total += w
        return total

    def sample(self, rng):
        bits = 0
        draws = rng.random(self.graph.n_edges)
        for e in range(self.graph.n_edges):
            if draws[e] < self.p:
                bits |= 1 << e
        cmap = {x: frozenset([x]) for x in range(self.ct.n_sites)}
        return bits, cmap


class TableEncoding(DependencyEncoding):
    """Explicit finite-support encoding for contract tests on toy systems.

    ``rows`` is a list of (bits, probability, cluster_map) triples with
    cluster_map a dict site -> frozenset of sites.
    """

    def __init__(self, graph, ct, p, q, rows):
        self.graph = graph
        self.ct = ct
        self.p = p
        self.q = q
        self.rows = list(rows)

    def enumerate_support(self):
        return iter(self.rows)

    def expectation(self, F, A, B, target, z, tilt_all_open=False) -> complex:
        A = frozenset(A)
        B = frozenset(B)
        target = frozenset(target)
        ct = self.ct
        a = alpha(self.p, z)
        total = 0j
        for bits, prob, cmap in self.rows:
            cb: frozenset = frozenset()
            for x in B:
                cb |= cmap[x]
            if cb != target:
                continue
            w = prob * (F(bits) if F is not None else 1.0)
            for x in A:
                if tilt_all_open:
                    w *= a ** len(ct.box_edge_ids[x]) - 1
                else:
                    w *= f_value(ct, x, bits, self.p, z)
            total += w
        return total


# ---------------------------------------------------------------------------
# activities and weights


def activity_w(enc: DependencyEncoding, gamma, z: complex) -> complex:
    """w_z(gamma) = sum over A subset gamma of P[prod_{x in A} f * 1{C_A = gamma}]."""
    gamma = frozenset(gamma)
    total = 0j
    sites = sorted(gamma)
    for r in range(len(sites) + 1):
        for combo in itertools.combinations(sites, r):
            A = frozenset(combo)
            total += enc.expectation(None, A, A, gamma, z)
    return total


def build_activity(enc: DependencyEncoding, polymers, z: complex) -> Activity:
    return Activity({g: activity_w(enc, g, z) for g in polymers}, tag="w_z")


def weight_G(enc: DependencyEncoding, trace, F: LocalFunction, z: complex,
             tilt_all_open=False) -> complex:
    """G_z({g}) = sum over A subset trace of P[F prod f * 1{C_{A u Delta} = trace}].

    Depends on the family only through its trace.  Zero whenever the coarse
    support of F is not contained in the trace.
    """
    trace = frozenset(trace)
    delta_c = coarse_support(enc.ct, F.support)
    total = 0j
    sites = sorted(trace)
    for r in range(len(sites) + 1):
        for combo in itertools.combinations(sites, r):
            A = frozenset(combo)
            total += enc.expectation(F, A, A | delta_c, trace, z, tilt_all_open)
    return total


# ---------------------------------------------------------------------------
# identity verification


@dataclass(frozen=True)
class ResummationReport:
    lhs: complex
    rhs: complex
    abs_residual: float
    rel_residual: float
    n_families: int
    zero_xi: bool

    def to_dict(self):
        return {
            "lhs": {"re": self.lhs.real, "im": self.lhs.imag},
            "rhs": {"re": self.rhs.real, "im": self.rhs.imag},
            "abs_residual": self.abs_residual,
            "rel_residual": self.rel_residual,
            "n_families": self.n_families,
            "zero_xi": self.zero_xi,
        }


def verify_resummation_identity(enc: DependencyEncoding, F: LocalFunction,
                                z: complex, lhs: complex | None = None) -> ResummationReport:
    """Residual of the weighted polymer identity for phi_{p+z}[F].

    The left side defaults to the closed-form product-measure value (valid
    for encodings with q=1); pass ``lhs`` explicitly to check against another
    exact route.
    """
    ct = enc.ct
    polymers = enumerate_polymers(ct, max_size=ct.n_sites)
    activity = build_activity(enc, polymers, z)
    xi = exact_Xi(ct, polymers, activity, "independent")
    if abs(xi) < XI_ZERO_TOL:
        raise ZeroXiError(f"Xi(w_z) = {xi} below tolerance")

    delta_c = coarse_support(ct, F.support)
    fams = enumerate_families(ct, polymers, mode="independent", must_intersect=delta_c)
    rhs = 0j
    n_used = 0
    for fam in fams.families:
        trace = family_trace(fam)
        if not delta_c <= trace:
            continue  # G vanishes there
        g = weight_G(enc, trace, F, z)
        if g == 0:
            continue
        restricted = restricted_activity(ct, activity, trace, "independent")
        rhs += g * exact_Xi(ct, polymers, restricted, "independent") / xi
        n_used += 1
    if lhs is None:
        lhs = bernoulli_expectation(F, enc.p + z)
    resid = abs(lhs - rhs)
    return ResummationReport(lhs, rhs, resid, resid / (1 + abs(lhs)),
                             len(fams.families), False)


def intermediate_identity_residual(table: SparseBoxTable, F: LocalFunction,
                                   support_positions, p: float, q: float,
                                   z: complex) -> tuple:
    """Residual of phi_p[F alpha_z^{|omega|}] = phi_p[F sum_A prod_{x in A} f_x].

    Pure algebra valid for every q; both sides are evaluated from a per-box
    refined count table whose boxes are indexed by coarse site.
    ``support_positions`` gives, per support edge of F, its tracked-sigma bit.

    Left route groups by the total open-edge count; right route literally sums
    over subsets A of coarse sites with the per-box factors (alpha^{m_x} - 1).
    """
    boxes = table.boxes.astype(np.int64)
    ks = table.ks.astype(np.int64)
    sigs = table.sigs.astype(np.int64)
    cnts = table.counts.astype(np.float64)
    ms = boxes.sum(axis=1)

    fvals = np.asarray(F.values, complex)
    fsig = np.zeros(len(cnts), np.int64)
    for j, pos in enumerate(support_positions):
        fsig |= ((sigs >> pos) & 1) << j
    fv = fvals[fsig]

    a = alpha(p, z)
    xp = p / (1 - p)
    base = cnts * (xp ** ms)
    qk = np.power(float(q), ks)
    den = (base * qk).sum()

    lhs = (base * qk * fv * np.power(a, ms)).sum() / den

    n_sites = boxes.shape[1]
    site_cols = [np.power(a, boxes[:, x]) - 1 for x in range(n_sites)]
    rhs = 0j
    for r in range(n_sites + 1):
        for combo in itertools.combinations(range(n_sites), r):
            term = base * qk * fv
            for x in combo:
                term = term * site_cols[x]
            rhs += term.sum()
    rhs /= den
    return lhs, rhs, abs(lhs - rhs)


# ---------------------------------------------------------------------------
# decay and summability diagnostics


@dataclass(frozen=True)
class WeightDecayReport:
    rows: tuple  # (eps, C_eps, per-size max |w| e^{|g|(2+c_hat)})
    monotone: bool


def verify_weight_decay(enc: DependencyEncoding, eps_grid, max_size: int,
                        c_hat: float, n_angles: int = 8) -> WeightDecayReport:
    """Envelope C_eps = max over |z|=eps, gamma of |w_z(gamma)| e^{|gamma|(2+c_hat)}."""
    ct = enc.ct
    polymers = enumerate_polymers(ct, max_size=max_size)
    rows = []
    for eps in sorted(eps_grid):
        by_size: dict = {}
        for j in range(n_angles):
            z = eps * np.exp(2j * np.pi * j / n_angles)
            for g in polymers:
                v = abs(activity_w(enc, g, z)) * np.exp(len(g) * (2 + c_hat))
                by_size[len(g)] = max(by_size.get(len(g), 0.0), v)
        rows.append((eps, max(by_size.values()), tuple(sorted(by_size.items()))))
    cs = [c for _, c, _ in rows]
    monotone = all(cs[i] <= cs[i + 1] + 1e-15 for i in range(len(cs) - 1))
    return WeightDecayReport(tuple(rows), monotone)


@dataclass(frozen=True)
class GSummabilityReport:
    lhs: float
    phi_F: float
    ok: bool
    domination_ok: bool
    n_families: int


def verify_G_summability(enc: DependencyEncoding, F: LocalFunction, eps: float,
                         c_hat_eps: float, z: complex | None = None,
                         phi_F: float | None = None) -> GSummabilityReport:
    """sum over Delta-intersecting families of |G_z| e^{-c_hat |trace|} vs phi_p[F],
    plus the pointwise domination |G_z| <= G at the all-open tilt of p+eps."""
    if z is None:
        z = eps / 2  # the domination route is stated for |z| <= eps/2
    ct = enc.ct
    polymers = enumerate_polymers(ct, max_size=ct.n_sites)
    delta_c = coarse_support(ct, F.support)
    fams = enumerate_families(ct, polymers, mode="independent", must_intersect=delta_c)
    lhs = 0.0
    dom_ok = True
    for fam in fams.families:
        trace = family_trace(fam)
        if not delta_c <= trace:
            continue
        gz = weight_G(enc, trace, F, z)
        g_one = weight_G(enc, trace, F, eps, tilt_all_open=True)
        if abs(gz) > g_one.real + 1e-12:
            dom_ok = False
        lhs += abs(gz) * np.exp(-c_hat_eps * len(trace))
    if phi_F is None:
        phi_F = bernoulli_expectation(F, enc.p).real
    return GSummabilityReport(float(lhs), float(phi_F), lhs <= phi_F + 1e-12,
                              dom_ok, len(fams.families))
