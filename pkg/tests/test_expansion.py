import cmath
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from fkexact import expansion, lattice, polymer
from fkexact.errors import BudgetExceededError
from fkexact.expansion import Activity, synthetic_activity


def fs(*xs):
    return frozenset(xs)


def test_ursell_basics():
    assert expansion.ursell((fs(0),)) == 1
    assert expansion.ursell((fs(0), fs(1))) == 0
    assert expansion.ursell((fs(0), fs(0, 1))) == Fraction(-1, 2)


def test_ursell_order3():
    # chain a-b-c: only the full path subgraph is connected and spanning
    a, b, c = fs(0, 1), fs(1, 2), fs(2, 3)
    assert expansion.ursell((a, b, c)) == Fraction(1, 6)
    # pairwise-intersecting triple: 3 two-edge paths minus the triangle
    a, b, c = fs(0, 1), fs(1, 2), fs(0, 2)
    assert expansion.ursell((a, b, c)) == Fraction(1, 3)


def test_ursell_repeated_polymer():
    g = fs(0)
    for n in range(1, 6):
        assert expansion.ursell((g,) * n) == Fraction((-1) ** (n - 1), n)


def test_ursell_disconnected_tuples_vanish():
    a, b, c = fs(0), fs(1), fs(0, 2)
    assert expansion.ursell((a, b, c)) == 0
    assert expansion.ursell((a, c, b)) == 0


def test_ursell_permutation_invariance_sampled():
    pool = [fs(0), fs(0, 1), fs(1, 2), fs(2), fs(0, 2), fs(3)]
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = int(rng.integers(2, 5))
        tup = tuple(pool[i] for i in rng.integers(0, len(pool), n))
        base = expansion.ursell(tup)
        for perm in itertools.permutations(tup):
            assert expansion.ursell(perm) == base


def test_ursell_cap():
    with pytest.raises(BudgetExceededError):
        expansion.ursell((fs(0),) * 6)
    # order 6 allowed behind the flag
    assert expansion.ursell((fs(0),) * 6, allow_six=True) == Fraction(-1, 6)


def test_exact_xi_trivial(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    zero = Activity({g: 0j for g in polys})
    assert expansion.exact_Xi(ct22, polys, zero, "independent") == 1
    single = fs(0)
    w = 0.3 + 0.1j
    assert expansion.exact_Xi(ct22, [single], Activity({single: w}), "independent") == pytest.approx(1 + w)


def test_exact_xi_two_polymers(ct22):
    # diagonal, non-adjacent pair: compatible in both modes
    a = fs(ct22.site_index((0, 0)))
    b = fs(ct22.site_index((2, 2)))
    wa, wb = 0.2, 0.3 - 0.1j
    act = Activity({a: wa, b: wb})
    for mode in ("independent", "disjoint"):
        assert expansion.exact_Xi(ct22, [a, b], act, mode) == pytest.approx(1 + wa + wb + wa * wb)
    # adjacent pair: disjoint-mode keeps the product term, independent drops it
    c = fs(ct22.site_index((2, 0)))
    act2 = Activity({a: wa, c: wb})
    assert expansion.exact_Xi(ct22, [a, c], act2, "independent") == pytest.approx(1 + wa + wb)
    assert expansion.exact_Xi(ct22, [a, c], act2, "disjoint") == pytest.approx(1 + wa + wb + wa * wb)


def test_truncated_log_single_polymer():
    g = fs(0)
    for w in (0.1, -0.08, 0.05 + 0.04j):
        act = Activity({g: w})
        exp = expansion.truncated_log_Xi([g], act, 5)
        want = sum((-1) ** (n - 1) * w**n / n for n in range(1, 6))
        assert abs(exp.value - want) < 1e-15
        assert len(exp.per_order) == 5


def test_truncated_converges_to_disjoint_xi(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    act = synthetic_activity(polys, 0.01)
    xi = expansion.exact_Xi(ct22, polys, act, "disjoint")
    errs = []
    for n_max in range(1, 5):
        val = expansion.truncated_log_Xi(polys, act, n_max).value
        errs.append(abs(cmath.exp(val) - xi))
    assert all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
    assert errs[-1] < 1e-5 * abs(xi)


def test_kp_criterion():
    g = fs(0)
    # zero activities pass with margin |g|/2
    rep = expansion.kp_criterion_check([g], Activity({g: 0j}))
    assert rep.ok and rep.worst_margin == pytest.approx(0.5)
    # single polymer with |w| e^{1/2} > 1/2 fails
    rep = expansion.kp_criterion_check([g], Activity({g: 0.4}))
    assert not rep.ok
    # comfortably small synthetic weights pass
    rep = expansion.kp_criterion_check([g, fs(0, 1)], synthetic_activity([g, fs(0, 1)], 0.01))
    assert rep.ok


def test_volume_bound(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    zero = Activity({g: 0j for g in polys})
    rep = expansion.volume_bound_check(ct22, polys, zero, 3, c_hat=1.0)
    assert rep.ok and rep.lhs == 0
    # single polymer: truncated absolute sum is sum w^n / n, below the
    # -log(1 - w e^{1/2}) hand bound
    g = fs(0)
    w = 0.05
    rep = expansion.volume_bound_check(ct22, [g], Activity({g: w}), 5, c_hat=1.0)
    hand = sum(w**n / n for n in range(1, 6))
    assert rep.lhs == pytest.approx(hand, rel=1e-12)
    assert rep.lhs <= -math.log(1 - w * math.exp(0.5))
    assert rep.ok
    # synthetic decaying weights on the full polymer set
    act = synthetic_activity(polys, 0.01)
    rep = expansion.volume_bound_check(ct22, polys, act, 4, c_hat=1.25)
    assert rep.ok


def test_intersecting_bound(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    act = synthetic_activity(polys, 0.01)
    c_hat = 1.25
    empty = expansion.intersecting_bound_check(ct22, polys, act, (), 4, c_hat)
    assert empty.lhs == 0 and empty.ok
    allsites = expansion.intersecting_bound_check(ct22, polys, act, range(4), 4, c_hat)
    unrestricted = expansion.volume_bound_check(ct22, polys, act, 4, c_hat)
    assert allsites.lhs == pytest.approx(unrestricted.lhs, rel=1e-12)
    single = expansion.intersecting_bound_check(ct22, polys, act, [0], 4, c_hat)
    assert single.lhs <= unrestricted.lhs + 1e-15
    assert single.ok and single.hypothesis_ok


def test_intersecting_bound_flags_bad_decay(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    act = synthetic_activity(polys, 0.5)  # far too large
    rep = expansion.intersecting_bound_check(ct22, polys, act, [0], 2, 1.25)
    assert not rep.hypothesis_ok
    assert rep.lhs > 0  # sums still computed


def test_log_ratio_xi(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    act = synthetic_activity(polys, 0.01)
    assert expansion.log_ratio_Xi(polys, act, (), 4) == 0
    # single polymer with the excluded trace covering it: log(1/(1+w)) partials
    g = fs(0)
    w = 0.07
    got = expansion.log_ratio_Xi([g], Activity({g: w}), g, 5)
    want = -sum((-1) ** (n - 1) * w**n / n for n in range(1, 6))
    assert abs(got - want) < 1e-15
    # synthetic case against the exact log-ratio (disjoint-mode exclusion)
    trace = fs(0)
    restricted = expansion.restricted_activity(ct22, act, trace, "disjoint")
    exact = cmath.log(expansion.exact_Xi(ct22, polys, restricted, "disjoint")) - cmath.log(
        expansion.exact_Xi(ct22, polys, act, "disjoint")
    )
    got = expansion.log_ratio_Xi(polys, act, trace, 4)
    tail = expansion.truncated_abs_sum(polys, act, 4)[-1][1]
    assert abs(got - exact) < 10 * tail + 1e-10


def test_xi_multiplicative_over_disconnected_groups():
    g = lattice.build_torus(2, 8)
    ct = lattice.build_coarse(g, 1)  # 4x4 coarse torus
    # two single-site groups far apart: no adjacency between their polymers
    s1 = ct.site_index((0, 0))
    s2 = ct.site_index((4, 4))
    a, b = fs(s1), fs(s2)
    act = Activity({a: 0.2 + 0.05j, b: -0.1})
    for mode in ("independent", "disjoint"):
        xi_both = expansion.exact_Xi(ct, [a, b], act, mode)
        xi_a = expansion.exact_Xi(ct, [a], act, mode)
        xi_b = expansion.exact_Xi(ct, [b], act, mode)
        assert xi_both == pytest.approx(xi_a * xi_b)


def test_xi_both_modes_report(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    act = synthetic_activity(polys, 0.01)
    both = expansion.xi_both_modes(ct22, polys, act)
    assert both["independent"] != both["disjoint"]
