import numpy as np
import pytest

from fkexact import lattice
from fkexact.errors import BudgetExceededError, GeometryError


def test_torus_sizes():
    for d, N, nv, ne in [(2, 3, 9, 18), (2, 4, 16, 32), (3, 3, 27, 81)]:
        g = lattice.build_torus(d, N)
        assert (g.n_vertices, g.n_edges) == (nv, ne)


def test_torus_rejects_bad_geometry():
    with pytest.raises(GeometryError):
        lattice.build_torus(2, 2)
    with pytest.raises(GeometryError):
        lattice.build_torus(1, 5)
    with pytest.raises(BudgetExceededError):
        lattice.build_torus(2, 100, max_edges=1000)


def test_torus_degrees_and_simplicity(t3):
    deg = np.zeros(t3.n_vertices, int)
    seen = set()
    for e in range(t3.n_edges):
        u, v = t3.edge_endpoints(e)
        assert u != v
        assert (min(u, v), max(u, v), int(t3.edge_axis[e])) not in seen
        seen.add((min(u, v), max(u, v), int(t3.edge_axis[e])))
        deg[u] += 1
        deg[v] += 1
    assert (deg == 2 * t3.d).all()


def test_vertex_indexing_roundtrip(t3):
    for idx in range(t3.n_vertices):
        assert t3.vertex_index(t3.vertex_coords(idx)) == idx


def test_coarse_examples(t4):
    ct = lattice.build_coarse(t4, 1)
    assert ct.n_sites == 4
    ct1 = lattice.build_coarse(t4, 2)
    assert ct1.n_sites == 1
    assert ct1.nn_adj[0] == frozenset()  # self-adjacency suppressed
    g8 = lattice.build_torus(2, 8)
    assert lattice.build_coarse(g8, 2).n_sites == 4
    with pytest.raises(GeometryError):
        lattice.build_coarse(lattice.build_torus(2, 6), 2)  # 4 does not divide 6


def test_coarse_degrees_nondegenerate():
    # M >= 3 per axis: the generic degree counts hold
    g = lattice.build_torus(2, 12)
    ct = lattice.build_coarse(g, 2)
    assert ct.n_sites == 9
    assert all(len(a) == 2 * g.d for a in ct.nn_adj)
    assert all(len(a) == 3**g.d - 1 for a in ct.star_adj)


@pytest.mark.parametrize("d,N,L", [(2, 4, 1), (2, 8, 2), (3, 6, 1)])
def test_box_tiling_partitions_edges(d, N, L):
    g = lattice.build_torus(d, N)
    ct = lattice.build_coarse(g, L)
    all_edges = [e for s in range(ct.n_sites) for e in ct.box_edge_ids[s]]
    assert sorted(all_edges) == list(range(g.n_edges))
    assert all(len(ct.box_edge_ids[s]) == d * (2 * L) ** d for s in range(ct.n_sites))


def test_cluster_count_trivial(t3):
    assert lattice.cluster_count(t3, 0) == 9
    assert lattice.cluster_count(t3, (1 << 18) - 1) == 1
    assert lattice.cluster_count(t3, 1) == 8


def test_cluster_count_bc():
    g = lattice.build_torus(2, 5)
    box = lattice.build_box(g, (0, 0), 1)
    assert len(box.vertices) == 9
    # free boundary, all closed: every box vertex its own cluster
    assert lattice.cluster_count_bc(g, box, 0, "free") == 9
    # wired, all closed: glued boundary cluster + isolated interior vertex
    assert lattice.cluster_count_bc(g, box, 0, "wired") == 2
    # all open: one cluster whatever the boundary condition
    full = (1 << g.n_edges) - 1
    rng = np.random.default_rng(1)
    xi_random = int.from_bytes(rng.bytes(13), "little") & (full)
    for xi in ("free", "wired", xi_random):
        assert lattice.cluster_count_bc(g, box, full, xi) == 1
    # free boundary reduces to the plain component count inside the region
    bits = 0
    for e in box.edge_ids[:4]:
        bits |= 1 << e
    sub = lattice.simple_graph(
        len(box.vertices),
        [
            (box.vertices.index(int(g.edges_u[e])), box.vertices.index(int(g.edges_v[e])))
            for e in box.edge_ids
            if (bits >> e) & 1
        ],
    )
    assert lattice.cluster_count_bc(g, box, bits, "free") == lattice.cluster_count(
        sub, (1 << sub.n_edges) - 1
    )


def test_euler_relation_exhaustive():
    # k = nv - (spanning forest size), forest built by an independent DFS route
    tri = lattice.cycle_graph(3)
    for bits in range(8):
        assert lattice.cluster_count(tri, bits) == 3 - lattice.spanning_forest_size(tri, bits)
    c4 = lattice.cycle_graph(4)
    for bits in range(16):
        assert lattice.cluster_count(c4, bits) == 4 - lattice.spanning_forest_size(c4, bits)


def test_euler_relation_torus_samples(t3):
    rng = np.random.default_rng(7)
    for _ in range(50):
        bits = int(rng.integers(0, 1 << 18))
        assert lattice.cluster_count(t3, bits) == 9 - lattice.spanning_forest_size(t3, bits)


def test_cluster_count_translation_invariant(t3):
    rng = np.random.default_rng(3)
    for _ in range(10):
        bits = int(rng.integers(0, 1 << 18))
        k = lattice.cluster_count(t3, bits)
        for sx in range(3):
            for sy in range(3):
                shifted = t3.translate_config(bits, (sx, sy))
                assert lattice.cluster_count(t3, shifted) == k


def test_animal_counts_d2():
    animals = lattice.enumerate_site_animals(2, 4, anchored=True)
    assert [len(animals[n]) for n in (1, 2, 3, 4)] == [1, 4, 18, 76]
    fixed = lattice.enumerate_site_animals(2, 4, anchored=False)
    assert [len(fixed[n]) for n in (1, 2, 3, 4)] == [1, 2, 6, 19]


def test_animal_counts_d3():
    animals = lattice.enumerate_site_animals(3, 3, anchored=True)
    # n * (fixed polycubes): 1, 2*3, 3*15
    assert [len(animals[n]) for n in (1, 2, 3)] == [1, 6, 45]


def test_animal_growth_rate():
    counts, c_hat = lattice.animal_growth_rate(2, 8)
    assert counts == [1, 4, 18, 76, 315, 1296, 5320, 21800]
    assert c_hat == pytest.approx(np.log(21800) / 8)
    assert np.isfinite(c_hat)
    for n, c in enumerate(counts, start=1):
        assert c <= np.exp(c_hat * n) + 1e-9


def test_animal_cap():
    with pytest.raises(BudgetExceededError):
        lattice.enumerate_site_animals(2, 9)


def test_graph_json_deterministic(t3):
    assert t3.to_json() == lattice.build_torus(2, 3).to_json()
    assert t3.graph_hash() == lattice.build_torus(2, 3).graph_hash()
