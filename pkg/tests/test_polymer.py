import pytest

from fkexact import lattice, polymer
from fkexact.errors import BudgetExceededError


def test_polymer_counts_2x2(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    by_size = {}
    for g in polys:
        by_size[len(g)] = by_size.get(len(g), 0) + 1
    assert by_size == {1: 4, 2: 4, 3: 4, 4: 1}
    assert polys[-1] == frozenset(range(4))  # the full-site polymer, once


def test_polymer_enumeration_matches_filter_oracle(ct22):
    assert polymer.enumerate_polymers(ct22, 4) == polymer._polymers_by_filter(ct22, 4)
    g = lattice.build_torus(2, 12)
    ct = lattice.build_coarse(g, 2)  # 3x3 coarse torus
    assert polymer.enumerate_polymers(ct, 3) == polymer._polymers_by_filter(ct, 3)


def test_polymer_size1(ct22):
    polys = polymer.enumerate_polymers(ct22, 1)
    assert len(polys) == 4


def test_adjacent_pairs_2x2(ct22):
    polys = [g for g in polymer.enumerate_polymers(ct22, 2) if len(g) == 2]
    # 4 distinct adjacent unordered pairs once wraparound multi-edges collapse
    assert len(polys) == 4
    # the two diagonals are NOT polymers
    assert frozenset([ct22.site_index((0, 0)), ct22.site_index((2, 2))]) not in polys


def test_families_single_polymer(ct22):
    x = frozenset([0])
    fams = polymer.enumerate_families(ct22, [x], mode="independent")
    assert sorted(fams.families) == [(), (x,)]


def test_families_empty_intersection_constraint(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    fams = polymer.enumerate_families(ct22, polys, mode="independent", must_intersect=())
    assert fams.families == ((),)


def test_families_2x2_both_modes(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    ind = polymer.enumerate_families(ct22, polys, mode="independent")
    dis = polymer.enumerate_families(ct22, polys, mode="disjoint")
    # derived by brute force: the two diagonal singleton pairs are the only
    # multi-polymer independent families on the 2x2 coarse torus
    assert len(ind) == 16
    multi = [f for f in ind.families if len(f) >= 2]
    assert len(multi) == 2
    for fam in multi:
        a, b = fam
        assert len(a) == len(b) == 1
        assert not polymer.sites_adjacent(ct22, a, b)
    assert len(dis) == 43
    # independent families are a subset of disjoint families
    assert set(ind.families) <= set(dis.families)


def test_disjoint_trace_additivity(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    for fam in polymer.enumerate_families(ct22, polys, mode="disjoint").families:
        assert len(polymer.family_trace(fam)) == sum(len(g) for g in fam)


def test_independent_families_are_component_decompositions(ct22):
    # in independent mode a family is exactly the connected components of its
    # trace, so families biject with site subsets
    polys = polymer.enumerate_polymers(ct22, 4)
    fams = polymer.enumerate_families(ct22, polys, mode="independent")
    traces = [polymer.family_trace(f) for f in fams.families]
    assert len(set(traces)) == len(traces) == 2 ** ct22.n_sites


def test_trace_size_constraint(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    fams = polymer.enumerate_families(ct22, polys, mode="independent", trace_size=2)
    assert all(len(polymer.family_trace(f)) == 2 for f in fams.families)
    # 4 adjacent pairs as single polymers + 2 diagonal singleton pairs
    assert len(fams) == 6


def test_family_budget(ct22):
    polys = polymer.enumerate_polymers(ct22, 4)
    with pytest.raises(BudgetExceededError):
        polymer.enumerate_families(ct22, polys, cap=3)


def test_count_bound_trivial(ct22):
    rep = polymer.count_bound_check(ct22, [0, 1], 1, c_hat=1.0)
    assert rep.count == 0 and rep.ok
    rep = polymer.count_bound_check(ct22, [0], 1, c_hat=1.0)
    assert rep.count == 1 and rep.ok


def test_count_bound_8x8():
    g = lattice.build_torus(2, 16)
    ct = lattice.build_coarse(g, 1)  # 8x8 coarse grid
    assert ct.n_sites == 64
    _counts, c_hat = lattice.animal_growth_rate(2, 8)
    expected = {1: 1, 2: 4, 3: 18, 4: 76}  # anchored animals, no wraparound at n<=4
    for n in (1, 2, 3, 4):
        rep = polymer.count_bound_check(ct, [0], n, c_hat=c_hat)
        assert rep.count == expected[n]
        assert rep.ok


def test_polymers_json_roundtrip(ct22):
    polys = polymer.enumerate_polymers(ct22, 3)
    text = polymer.polymers_to_json(ct22, polys)
    back = polymer.polymers_from_json(ct22, text)
    assert back == polys
