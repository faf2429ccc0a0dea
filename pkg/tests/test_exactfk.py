import numpy as np
import pytest

from fkexact import exactfk, lattice
from fkexact.errors import PoleProximityError, ZeroDenominatorError
from fkexact.exactfk import FKParams, LocalFunction


def test_partition_table_examples():
    one = lattice.simple_graph(2, [(0, 1)])
    t = exactfk.build_partition_table(one, boundary="free", use_numba=False)
    assert t.counts == {(0, 2): 1, (1, 1): 1}
    tri = lattice.cycle_graph(3)
    tt = exactfk.build_partition_table(tri, boundary="free", use_numba=False)
    assert tt.counts == {(0, 3): 1, (1, 2): 3, (2, 1): 3, (3, 1): 1}


def test_partition_table_t3_total(t3):
    table = exactfk.build_partition_table(t3)
    assert table.total() == 2**18
    assert table.counts[(0, 9)] == 1
    assert table.counts[(18, 1)] == 1


def test_numba_and_python_enumerations_agree(t3):
    a = exactfk.build_refined_table(t3, (0, 5), use_numba=True)
    b = exactfk.build_refined_table(t3, (0, 5), use_numba=False)
    assert np.array_equal(a.array, b.array)


def test_evaluate_Z():
    one = lattice.simple_graph(2, [(0, 1)])
    t = exactfk.build_partition_table(one, boundary="free", use_numba=False)
    assert exactfk.evaluate_Z(t, 0.5, 2.0) == pytest.approx(6.0)
    tri = lattice.cycle_graph(3)
    tt = exactfk.build_partition_table(tri, boundary="free", use_numba=False)
    assert exactfk.evaluate_Z(tt, 0.5, 1.0) == pytest.approx(8.0)
    # q=1 collapses to the binomial identity (1+x)^E
    for p, z in [(0.3, 0.1 + 0.2j), (0.6, -0.05j)]:
        x = (p + z) / (1 - p - z)
        assert exactfk.evaluate_Z(tt, p, 1.0, z) == pytest.approx((1 + x) ** 3)


def test_evaluate_Z_pole():
    one = lattice.simple_graph(2, [(0, 1)])
    t = exactfk.build_partition_table(one, boundary="free", use_numba=False)
    with pytest.raises(PoleProximityError):
        exactfk.evaluate_Z(t, 0.5, 2.0, 0.5)


def test_alpha_values():
    assert exactfk.alpha(0.3, 0) == 1
    assert exactfk.alpha(0.5, 0.25) == pytest.approx(3.0)
    assert exactfk.alpha(0.5, 0.25j) == pytest.approx((1 + 0.5j) / (1 - 0.5j))
    with pytest.raises(ValueError):
        exactfk.alpha(1.5, 0)


def test_local_function_basics():
    F = LocalFunction.edge_open(4)
    assert F(1 << 4) == 1.0 and F(0) == 0.0 and F.sup_norm == 1.0
    G = LocalFunction.cylinder({2: 1, 3: 0})
    assert G(0b0100) == 1.0 and G(0b1100) == 0.0
    H = LocalFunction.from_callable((0, 1), lambda bits: float((bits & 3).bit_count()))
    assert H(0b11) == 2.0


def test_expectation_constant_is_one(t3_refined):
    F = LocalFunction.constant(1.0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        z = complex(*(0.1 * rng.standard_normal(2)))
        v = exactfk.expectation_exact(t3_refined, F, FKParams(0.5, 2.0, z))
        assert v == pytest.approx(1.0, abs=1e-12)


def test_expectation_vs_independent_full_enumeration(t3):
    # brute force: walk all 2^18 configurations in plain python, evaluate F per
    # configuration, and weight by x^m q^k
    p, q = 0.4, 2.0
    F = LocalFunction.edge_open(0)
    x = p / (1 - p)
    num = den = 0.0
    for cfg in range(1 << 18):
        w = x ** cfg.bit_count() * q ** lattice.cluster_count(t3, cfg)
        num += w * (cfg & 1)
        den += w
    refined = exactfk.build_refined_table(t3, (0,))
    got = exactfk.expectation_exact(refined, F, FKParams(p, q, 0j))
    assert got.real == pytest.approx(num / den, rel=1e-12)
    assert got.imag == 0


def test_expectation_q1_bernoulli_oracle(t3_refined):
    rng = np.random.default_rng(5)
    funcs = [
        LocalFunction.edge_open(0),
        LocalFunction.cylinder({1: 1, 2: 0}),
        LocalFunction.from_callable((0, 3), lambda b: 0.5 * ((b >> 0) & 1) + 2.0 * ((b >> 3) & 1)),
    ]
    for p in (0.25, 0.55):
        for _ in range(6):
            z = complex(*(0.15 * rng.standard_normal(2)))
            for F in funcs:
                got = exactfk.expectation_exact(t3_refined, F, FKParams(p, 1.0, z))
                want = exactfk.bernoulli_expectation(F, p + z)
                assert abs(got - want) < 1e-12


def test_tilt_identity_grid(t3_refined):
    # the two evaluation routes must agree to 1e-10 relative; the call itself
    # raises TiltMismatchError on violation
    rng = np.random.default_rng(11)
    F = LocalFunction.cylinder({0: 1, 1: 1})
    for q in (1.0, 1.5, 2.0):
        for p in (0.2, 0.5, 0.8):
            for _ in range(10):
                r = 0.3 * (1 - p) * np.sqrt(rng.random())
                th = 2 * np.pi * rng.random()
                z = r * np.exp(1j * th)
                exactfk.expectation_exact(t3_refined, F, FKParams(p, q, z))


def test_zero_denominator_tolerance_knob(t3_refined):
    F = LocalFunction.edge_open(0)
    with pytest.raises(ZeroDenominatorError):
        exactfk.expectation_exact(t3_refined, F, FKParams(0.5, 2.0, 0.1j), zero_tol=10.0)


def test_zero_free_scan_q1_closed_form(t3):
    table = exactfk.build_partition_table(t3)
    p, radius = 0.4, 0.3
    rep = exactfk.zero_free_scan(table, p, 1.0, radius, n_radii=6, n_angles=16)
    # q=1: phi_p[alpha_z^{|w|}] = ((1-p)/(1-p-z))^E, minimised at z = -radius
    want = ((1 - p) / (1 - p + radius)) ** 18
    assert rep.min_abs == pytest.approx(want, rel=1e-10)
    assert rep.min_abs > 0
    assert rep.delta_hat == pytest.approx(radius)


def test_zero_free_scan_small_radius(t3):
    table = exactfk.build_partition_table(t3)
    rep = exactfk.zero_free_scan(table, 0.4, 2.0, 1e-9, n_radii=2, n_angles=8)
    assert rep.min_abs == pytest.approx(1.0, abs=1e-6)


def test_zero_free_scan_conjugation_symmetry(t3):
    table = exactfk.build_partition_table(t3)
    rep = exactfk.zero_free_scan(table, 0.35, 1.7, 0.2, n_radii=3, n_angles=8)
    vals = {}
    for re_z, im_z, re_v, im_v, _ in rep.rows:
        vals[(round(re_z, 12), round(im_z, 12))] = complex(re_v, im_v)
    for (re_z, im_z), v in vals.items():
        w = vals.get((re_z, -im_z))
        assert w is not None
        assert abs(w - v.conjugate()) < 1e-12


def test_ratio_bound_fit_q1_closed_form(t3):
    # q=1, F = single-edge indicator: the ratio is (p+z)/p, maximised on the
    # circle |z|=eps at z=+eps
    p = 0.3
    F = LocalFunction.edge_open(0)
    refined = exactfk.build_refined_table(t3, (0,))
    rep = exactfk.ratio_bound_fit(refined, F, p, 1.0, [0.05, 0.1], n_angles=8)
    for eps, _c, max_ratio in rep.rows:
        assert max_ratio == pytest.approx((p + eps) / p, rel=1e-10)


def test_ratio_bound_fit_monotone_q2(t3_refined):
    F = LocalFunction.edge_open(0)
    rep = exactfk.ratio_bound_fit(t3_refined, F, 0.3, 2.0, [0.02, 0.05, 0.1])
    assert rep.monotone
    assert all(np.isfinite(c) for _, c, _ in rep.rows)
    for _, c, r in rep.rows:
        assert r <= 2 * np.exp(c * rep.support_size) + 1e-12


def test_finite_energy_exhaustive(t3_refined):
    # every cylinder on the tracked edges has probability at least m^{|Delta|}
    for p, q in [(0.3, 2.0), (0.7, 1.5)]:
        m = exactfk.finite_energy_min_prob(p, q)
        for sig in range(8):
            F = LocalFunction.cylinder({e: (sig >> j) & 1 for j, e in enumerate((0, 1, 2))})
            val = exactfk.expectation_exact(t3_refined, F, FKParams(p, q, 0j)).real
            assert val >= m ** 3 - 1e-12


def test_mean_value_property(t3_refined):
    # analyticity witness: circle average equals centre value
    F = LocalFunction.edge_open(0)
    z0 = 0.05 + 0.02j
    centre = exactfk.expectation_exact(t3_refined, F, FKParams(0.4, 2.0, z0))
    acc = 0j
    for j in range(64):
        z = z0 + 0.03 * np.exp(2j * np.pi * j / 64)
        acc += exactfk.expectation_exact(t3_refined, F, FKParams(0.4, 2.0, z))
    assert abs(acc / 64 - centre) < 1e-8


def test_partition_table_json_roundtrip(t3):
    table = exactfk.build_partition_table(t3)
    text = table.to_json()
    assert text == exactfk.build_partition_table(t3).to_json()
    back = exactfk.PartitionTable.from_json(text, n_edges=18, n_vertices=9)
    assert back.counts == table.counts
    assert back.boundary == table.boundary


def test_refined_marginal_consistency(t3_refined):
    assert t3_refined.total() == 2**18
    assert t3_refined.marginal().total() == 2**18
