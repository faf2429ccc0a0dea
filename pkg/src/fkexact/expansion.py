"""Ursell functions, polymer partition functions and cluster-expansion bounds.

The n-th Ursell coefficient of an ordered polymer tuple is

    phi_n = (1/n!) * sum over connected spanning subgraphs G of K_n
            of prod_{ij in G} ( -1{gamma_i and gamma_j intersect} ),

computed in exact rational arithmetic by enumerating subgraphs of the tuple's
intersection graph.  Exponentiating the truncated series sum_n sum_tuples
phi_n prod w recovers the DISJOINT-mode partition function Xi (intersection is
the hard-core constraint the Ursell indicators encode); the stricter
independent-mode Xi is what the resummation identities use.  Reports therefore
carry both values whenever they can differ.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BudgetExceededError
from .polymer import (
    enumerate_families,
    excludes_trace,
    family_trace,
    polymer_key,
)

URSELL_CAP = 5
URSELL_HARD_CAP = 6  # 2^15 subgraphs per tuple behind the flag


@dataclass(frozen=True)
class Activity:
    """Complex weight per polymer, with a tag describing its provenance."""

    weights: dict
    tag: str = "synthetic"

    def __call__(self, gamma) -> complex:
        return self.weights.get(gamma, 0j)

    def abs_max_scaled(self, rate: float) -> float:
        """max over polymers of |w(gamma)| * exp(|gamma| * rate)."""
        if not self.weights:
            return 0.0
        return max(abs(w) * math.exp(len(g) * rate) for g, w in self.weights.items())


def synthetic_activity(polymers, base: complex, tag: str = "synthetic") -> Activity:
    return Activity({g: base ** len(g) for g in polymers}, tag)


def tilted_activity(activity: Activity) -> Activity:
    """Size-tilted weights (1+|gamma|) w(gamma), used by the averaged bound."""
    return Activity({g: (1 + len(g)) * w for g, w in activity.weights.items()},
                    tag=f"tilted({activity.tag})")


def restricted_activity(ct, activity: Activity, trace, mode: str) -> Activity:
    """Zero the weights of polymers incompatible with an excluded trace.

    In independent mode this removes polymers intersecting OR adjacent to the
    trace (exactly the polymers that could not coexist with a family of that
    trace); in disjoint mode only intersecting polymers are removed.
    """
    trace = frozenset(trace)
    weights = {
        g: (0j if excludes_trace(ct, g, trace, mode) else w)
        for g, w in activity.weights.items()
    }
    return Activity(weights, tag=f"{activity.tag}^excl")


# ---------------------------------------------------------------------------
# Ursell functions

_URSELL_CACHE: dict = {}


def _intersection_mask(polymers) -> int:
    """Bitmask over pairs i<j of whether the polymers intersect."""
    n = len(polymers)
    mask = 0
    bit = 0
    for i in range(n):
        for j in range(i + 1, n):
            if polymers[i] & polymers[j]:
                mask |= 1 << bit
            bit += 1
    return mask


def ursell(polymers, cap: int = URSELL_CAP, allow_six: bool = False) -> Fraction:
    """Exact Ursell coefficient of an ordered tuple (repetition allowed)."""
    n = len(polymers)
    limit = URSELL_HARD_CAP if allow_six else min(cap, URSELL_HARD_CAP)
    if n > limit:
        raise BudgetExceededError(f"Ursell order {n} exceeds cap {limit}")
    mask = _intersection_mask(polymers)
    key = (n, mask)
    cached = _URSELL_CACHE.get(key)
    if cached is not None:
        return cached
    val = _ursell_from_mask(n, mask)
    _URSELL_CACHE[key] = val
    return val


def _ursell_from_mask(n: int, mask: int) -> Fraction:
    if n == 1:
        return Fraction(1)
    pairs = []
    bit = 0
    for i in range(n):
        for j in range(i + 1, n):
            if (mask >> bit) & 1:
                pairs.append((i, j))
            bit += 1
    # only subgraphs supported on intersecting pairs contribute
    total = 0
    for r in range(len(pairs) + 1):
        for sub in itertools.combinations(pairs, r):
            if _spanning_connected(n, sub):
                total += (-1) ** r
    return Fraction(total, math.factorial(n))


def _spanning_connected(n: int, edges) -> bool:
    if n == 1:
        return True
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    comps = n
    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            comps -= 1
    return comps == 1


# ---------------------------------------------------------------------------
# partition functions and truncated expansions


def exact_Xi(ct, polymers, activity: Activity, mode: str) -> complex:
    """Sum over mode-compatible families of the product of activities."""
    fams = enumerate_families(ct, polymers, mode=mode)
    total = 0j
    for fam in fams.families:
        prod = 1 + 0j
        for g in fam:
            prod *= activity(g)
        total += prod
    return total


@dataclass(frozen=True)
class TruncatedExpansion:
    value: complex
    per_order: tuple  # (order, complex partial, absolute sum)

    def abs_tail_estimate(self) -> float:
        return self.per_order[-1][2] if self.per_order else 0.0


def truncated_log_Xi(polymers, activity: Activity, n_max: int,
                     cap: int = URSELL_CAP, allow_six: bool = False,
                     restrict_to_meeting=None) -> TruncatedExpansion:
    """Partial sums of the cluster expansion of log Xi (disjoint-mode Xi).

    Ordered tuples with repetition; the 1/n! inside the Ursell coefficient
    compensates the ordering.  ``restrict_to_meeting=T`` keeps only tuples
    whose union of polymers meets T.  Reports per-order absolute sums
    sum |phi_n| prod |w| for empirical tail control.
    """
    pool = [g for g in polymers if abs(activity(g)) != 0]
    pool.sort(key=polymer_key)
    weights = [activity(g) for g in pool]
    target = frozenset(restrict_to_meeting) if restrict_to_meeting is not None else None
    npool = len(pool)
    inter = [[bool(pool[i] & pool[j]) for j in range(npool)] for i in range(npool)]
    meets = [bool(g & target) for g in pool] if target is not None else None

    total = 0j
    per_order = []
    for n in range(1, n_max + 1):
        order_sum = 0j
        order_abs = 0.0
        for tup in itertools.product(range(npool), repeat=n):
            if meets is not None and not any(meets[i] for i in tup):
                continue
            mask = 0
            bit = 0
            for a in range(n):
                for b in range(a + 1, n):
                    if inter[tup[a]][tup[b]]:
                        mask |= 1 << bit
                    bit += 1
            if n > 1 and mask == 0:
                continue
            key = (n, mask)
            phi = _URSELL_CACHE.get(key)
            if phi is None:
                if n > (URSELL_HARD_CAP if allow_six else min(cap, URSELL_HARD_CAP)):
                    raise BudgetExceededError(f"Ursell order {n} beyond cap")
                phi = _ursell_from_mask(n, mask)
                _URSELL_CACHE[key] = phi
            if phi == 0:
                continue
            w = 1 + 0j
            for i in tup:
                w *= weights[i]
            phi_f = float(phi)
            order_sum += phi_f * w
            order_abs += abs(phi_f) * abs(w)
        total += order_sum
        per_order.append((n, order_sum, order_abs))
    return TruncatedExpansion(total, tuple(per_order))


def truncated_abs_sum(polymers, activity: Activity, n_max: int,
                      restrict_to_meeting=None, **kw) -> tuple:
    """Per-order sums sum |phi_n| prod |w| (optionally union-meeting a set)."""
    exp = truncated_log_Xi(polymers, activity, n_max,
                           restrict_to_meeting=restrict_to_meeting, **kw)
    return tuple((n, a) for n, _s, a in exp.per_order)


# ---------------------------------------------------------------------------
# criteria and bounds


@dataclass(frozen=True)
class KPReport:
    ok: bool
    worst_margin: float
    rows: tuple  # (polymer key, sum, allowance)

    def to_dict(self):
        return {
            "criterion": "kotecky-preiss a(g)=|g|/2",
            "pass": self.ok,
            "worst_margin": self.worst_margin,
        }


def kp_criterion_check(polymers, activity: Activity) -> KPReport:
    """Convergence criterion: for every gamma',
    sum over gamma intersecting gamma' of |w(gamma)| e^{|gamma|/2} <= |gamma'|/2."""
    rows = []
    worst = np.inf
    ok = True
    for gp in polymers:
        s = sum(abs(activity(g)) * math.exp(len(g) / 2)
                for g in polymers if g & gp)
        allowance = len(gp) / 2
        margin = allowance - s
        worst = min(worst, margin)
        if margin < 0:
            ok = False
        rows.append((polymer_key(gp), s, allowance))
    if not polymers:
        worst = 0.0
    return KPReport(ok, float(worst), tuple(rows))


@dataclass(frozen=True)
class VolumeBoundReport:
    ok: bool
    lhs: float
    rhs: float
    big_c: float
    per_order: tuple

    def to_dict(self):
        return {
            "criterion": "per-volume absolute cluster sum",
            "pass": self.ok,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "per_order": [list(r) for r in self.per_order],
        }


def volume_bound_check(ct, polymers, activity: Activity, n_max: int,
                       c_hat: float) -> VolumeBoundReport:
    """Truncated absolute cluster sum against C |sites| / (1 - e^{-1/2}),
    C = max |w| e^{|gamma|(1 + c_hat)}."""
    per_order = truncated_abs_sum(polymers, activity, n_max)
    lhs = sum(a for _, a in per_order)
    big_c = activity.abs_max_scaled(1 + c_hat)
    rhs = big_c * ct.n_sites / (1 - math.exp(-0.5))
    return VolumeBoundReport(lhs <= rhs, float(lhs), float(rhs), big_c, per_order)


@dataclass(frozen=True)
class IntersectingBoundReport:
    ok: bool
    hypothesis_ok: bool
    lhs: float
    rhs: float
    decay_const: float
    per_order: tuple

    def to_dict(self):
        return {
            "criterion": "A-intersecting absolute cluster sum",
            "pass": self.ok,
            "hypothesis_ok": self.hypothesis_ok,
            "lhs": self.lhs,
            "rhs": self.rhs,
        }


def intersecting_bound_check(ct, polymers, activity: Activity, A, n_max: int,
                             c_hat: float) -> IntersectingBoundReport:
    """Absolute cluster sum over tuples whose union meets A, against c |A|.

    c is the per-site constant of the volume bound applied to the size-tilted
    activity (1+|gamma|) w(gamma) (the averaging argument).  The stronger
    decay hypothesis |w| <= C e^{-|gamma|(2+c_hat)} is checked via the
    smallness condition C_tilde (1-e^{-1/2})^{-1} <= 1/2 for the tilted
    weights; a failure is flagged but the sums are still computed.
    """
    A = frozenset(A)
    decay_const = activity.abs_max_scaled(2 + c_hat)
    tilted = tilted_activity(activity)
    c_tilde = tilted.abs_max_scaled(1 + c_hat)
    hypothesis_ok = c_tilde / (1 - math.exp(-0.5)) <= 0.5
    if A:
        per_order = truncated_abs_sum(polymers, activity, n_max, restrict_to_meeting=A)
    else:
        per_order = tuple((n, 0.0) for n in range(1, n_max + 1))
    lhs = sum(a for _, a in per_order)
    c_per_site = c_tilde / (1 - math.exp(-0.5))
    rhs = c_per_site * len(A)
    return IntersectingBoundReport(lhs <= rhs, hypothesis_ok, float(lhs),
                                   float(rhs), float(decay_const), per_order)


def log_ratio_Xi(polymers, activity: Activity, excluded_trace, n_max: int) -> complex:
    """Cluster-expansion form of log(Xi(w^T) / Xi(w)) for an excluded trace T:
    minus the sum over tuples whose union meets T (disjoint-mode expansion)."""
    T = frozenset(excluded_trace)
    if not T:
        return 0j
    exp = truncated_log_Xi(polymers, activity, n_max, restrict_to_meeting=T)
    return -exp.value


def xi_both_modes(ct, polymers, activity: Activity) -> dict:
    """Both partition-function conventions side by side."""
    return {
        "independent": exact_Xi(ct, polymers, activity, "independent"),
        "disjoint": exact_Xi(ct, polymers, activity, "disjoint"),
    }
