"""Polymers on the coarse torus and their compatible families.

A polymer is a nonempty connected set of coarse sites (nearest-neighbour
connectivity).  Two compatibility notions appear side by side and are never
silently conflated:

* ``independent``: gamma and gamma' are compatible when their union is not
  connected, i.e. they are disjoint AND not adjacent (the stricter notion);
* ``disjoint``: site-disjointness only (the "non-intersecting" notion used by
  the cluster-expansion machinery).

Every independent family is also a disjoint family.  Independent families are
in bijection with subsets of the site set: a family is exactly the set of
connected components of its trace.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import BudgetExceededError
from .lattice import CoarseTorus

Polymer = frozenset  # of site indices

MODES = ("independent", "disjoint")
DEFAULT_FAMILY_CAP = 1_000_000


def polymer_key(gamma: Polymer) -> tuple:
    return tuple(sorted(gamma))


def sites_adjacent(ct, a: Polymer, b: Polymer) -> bool:
    """True when some site of a is a nearest neighbour of some site of b."""
    for s in a:
        if ct.nn_adj[s] & b:
            return True
    return False


def compatible(ct, a: Polymer, b: Polymer, mode: str) -> bool:
    if a & b:
        return False
    if mode == "independent":
        return not sites_adjacent(ct, a, b)
    if mode == "disjoint":
        return True
    raise ValueError(f"unknown mode {mode!r}")


def excludes_trace(ct, gamma: Polymer, trace: frozenset, mode: str) -> bool:
    """Whether gamma is incompatible with an excluded trace, per mode.

    In independent mode a polymer touching OR adjacent to the trace is
    excluded; in disjoint mode only intersection excludes.
    """
    if gamma & trace:
        return True
    if mode == "independent":
        return sites_adjacent(ct, gamma, trace)
    return False


def is_connected(ct, sites: frozenset) -> bool:
    if not sites:
        return False
    seen = {next(iter(sites))}
    stack = list(seen)
    while stack:
        s = stack.pop()
        for nb in ct.nn_adj[s]:
            if nb in sites and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen == sites


def enumerate_polymers(ct: CoarseTorus, max_size: int, cap: int = 200_000) -> list:
    """All polymers of size up to max_size, deduplicated, in deterministic order."""
    if max_size > ct.n_sites:
        raise ValueError(f"max_size {max_size} exceeds site count {ct.n_sites}")
    levels: list[set] = [set(), {frozenset([s]) for s in range(ct.n_sites)}]
    total = ct.n_sites
    for n in range(1, max_size):
        nxt: set = set()
        for poly in levels[n]:
            for s in poly:
                for nb in ct.nn_adj[s]:
                    if nb not in poly:
                        nxt.add(poly | {nb})
        total += len(nxt)
        if total > cap:
            raise BudgetExceededError(f"more than {cap} polymers up to size {n+1}")
        levels.append(nxt)
    out = []
    for n in range(1, max_size + 1):
        out.extend(sorted(levels[n], key=polymer_key))
    return out


def _polymers_by_filter(ct: CoarseTorus, max_size: int) -> list:
    """Oracle enumeration: test every subset for connectivity (tiny instances)."""
    import itertools

    out = []
    for n in range(1, max_size + 1):
        for combo in itertools.combinations(range(ct.n_sites), n):
            s = frozenset(combo)
            if is_connected(ct, s):
                out.append(s)
    return sorted(out, key=lambda g: (len(g), polymer_key(g)))


@dataclass(frozen=True)
class FamilyEnumeration:
    families: tuple  # tuples of polymers, each family sorted by polymer_key
    mode: str

    def __len__(self):
        return len(self.families)


def enumerate_families(ct, polymers, mode: str = "independent",
                       must_intersect=None, trace_size: int | None = None,
                       cap: int = DEFAULT_FAMILY_CAP) -> FamilyEnumeration:
    """All families of pairwise-compatible polymers satisfying the constraint.

    ``must_intersect=A`` keeps families whose every member meets A; with A
    empty only the empty family survives (no polymer can meet the empty set).
    ``trace_size=n`` keeps families with |trace| exactly n.  The empty family
    is included whenever the constraints admit it.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    pool = list(polymers)
    if must_intersect is not None:
        target = frozenset(must_intersect)
        pool = [g for g in pool if g & target]
    pool.sort(key=polymer_key)
    npool = len(pool)
    compat = [[compatible(ct, pool[i], pool[j], mode) for j in range(npool)] for i in range(npool)]

    out = []

    def emit(current, tr):
        if trace_size is None or len(tr) == trace_size:
            out.append(tuple(current))
            if len(out) > cap:
                raise BudgetExceededError(f"more than {cap} families")

    def rec(start, current, current_idx, tr):
        emit(current, tr)
        for i in range(start, npool):
            if trace_size is not None and len(tr) + len(pool[i]) > trace_size:
                continue
            if all(compat[i][j] for j in current_idx):
                current.append(pool[i])
                current_idx.append(i)
                rec(i + 1, current, current_idx, tr | pool[i])
                current.pop()
                current_idx.pop()

    rec(0, [], [], frozenset())
    return FamilyEnumeration(tuple(sorted(out)), mode)


def family_trace(family) -> frozenset:
    tr: frozenset = frozenset()
    for g in family:
        tr |= g
    return tr


@dataclass(frozen=True)
class CountBoundReport:
    n: int
    delta_size: int
    count: int
    bound: float
    ok: bool
    c_hat: float


def count_bound_check(ct, delta_sites, n: int, c_hat: float,
                      cap: int = DEFAULT_FAMILY_CAP) -> CountBoundReport:
    """Exact count of independent Delta-intersecting families with |trace| = n,
    compared against 4^n exp(c_hat n)."""
    delta = frozenset(delta_sites)
    if n < len(delta):
        return CountBoundReport(n, len(delta), 0, 0.0, True, c_hat)
    polymers = enumerate_polymers(ct, max_size=n)
    fams = enumerate_families(ct, polymers, mode="independent",
                              must_intersect=delta, trace_size=n, cap=cap)
    nonempty = [f for f in fams.families if f]
    bound = 4.0**n * math.exp(c_hat * n)
    return CountBoundReport(n, len(delta), len(nonempty), bound,
                            len(nonempty) <= bound, c_hat)


def polymers_to_json(ct, polymers) -> str:
    data = [[list(ct.site_coords[s]) for s in polymer_key(g)] for g in polymers]
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def polymers_from_json(ct, text: str) -> list:
    data = json.loads(text)
    return [frozenset(ct.site_index(tuple(c)) for c in sites) for sites in data]
