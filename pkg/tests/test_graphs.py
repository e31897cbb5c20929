import json
from itertools import product

import pytest
from hypothesis import given, strategies as st

from seqcluster.graphs import (
    DEFAULT_OFFSET, Graph, LatticeSpec, Plane, Sublattice, build_bcc, build_cubic, build_graph,
    classify_parities, classify_site, coords_label, label_coords, load_graph,
)


def test_cubic_small_edges_and_count():
    g = build_cubic(3, 2, 2)
    assert g.n_vertices == 12
    assert g.has_edge(1, 2) and g.has_edge(1, 4) and g.has_edge(1, 7)
    assert len(g.edges) == 11 + 9 + 6


def test_cubic_single_site():
    g = build_cubic(1, 1, 1)
    assert g.n_vertices == 1 and not g.edges


def test_cubic_rejects_zero():
    with pytest.raises(ValueError):
        build_cubic(0, 2, 2)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))
def test_cubic_edge_families(L, M, N):
    g = build_cubic(L, M, N)
    n = L * M * N
    want = {(i, i + s) for s in (1, L, L * M) for i in range(1, n - s + 1)}
    assert g.edges == want
    # Hamiltonian path 1-2-...-n
    assert all(g.has_edge(i, i + 1) for i in range(1, n))


def test_label_coords_examples():
    spec = LatticeSpec(5, 5, 5)
    assert coords_label(spec, 0, 0, 0) == 1
    assert coords_label(spec, 0, 1, 0) == 6
    assert coords_label(spec, 0, 0, 1) == 26
    with pytest.raises(ValueError):
        coords_label(spec, 5, 0, 0)
    with pytest.raises(ValueError):
        label_coords(spec, 0)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.data())
def test_label_roundtrip(L, M, N, data):
    spec = LatticeSpec(L, M, N)
    k = data.draw(st.integers(1, L * M * N))
    assert coords_label(spec, *label_coords(spec, k)) == k


def test_classify_examples():
    assert classify_parities((1, 1, 0)) == classify_parities((1, 1, 0))
    c = classify_parities((1, 1, 0))
    assert c.plane is Plane.XY and c.sublattice is Sublattice.PRIMAL
    c = classify_parities((1, 0, 0))
    assert c.plane is Plane.YZ and c.sublattice is Sublattice.DUAL
    assert classify_parities((1, 1, 1)).plane is Plane.ABSENT
    assert classify_parities((0, 0, 0)).plane is Plane.ABSENT


@pytest.mark.parametrize("offset", [o for o in product((0, 1), repeat=3)])
def test_bcc_neighbourhoods_match_plane_rule(offset):
    spec = LatticeSpec(5, 5, 5, offset)
    g = build_bcc(spec)
    L, LM = spec.L, spec.L * spec.M
    steps = {Plane.XY: (1, L), Plane.YZ: (L, LM), Plane.ZX: (LM, 1)}
    gc = build_cubic(5, 5, 5)
    for v in g.labels:
        cls = classify_site(spec, v)
        assert cls.plane is not Plane.ABSENT
        x, y, z = spec.coords(v)
        expected = set()
        for s in steps[cls.plane]:
            for sign in (1, -1):
                u = v + sign * s
                # grid neighbour, not a row wrap
                if 1 <= u <= spec.n_sites and sum(abs(a - b) for a, b in zip(spec.coords(u), (x, y, z))) == 1:
                    if u in g:
                        expected.add(u)
        assert g.neighbours(v) == expected
        bulk = all(0 < c < 4 for c in (x, y, z))
        if bulk:
            assert len(g.neighbours(v)) == 4
    # induced subgraph of the cubic lattice on present sites (without row wraps)
    for i, j in g.edges:
        assert gc.has_edge(i, j)


def test_bcc_rejects_empty():
    # 1x1x1 with offset (0,0,0): one site with zero odd coordinates
    with pytest.raises(ValueError):
        build_bcc(LatticeSpec(1, 1, 1, (0, 0, 0)))


def test_default_offset_first_iterations():
    # ten present labels up to 12, with 12 present, as in the ten-iteration example
    spec = LatticeSpec(5, 5, 5)
    assert spec.parity_offset == DEFAULT_OFFSET
    g = build_bcc(spec)
    assert [v for v in g.labels if v <= 12] == [1, 2, 3, 4, 5, 6, 8, 10, 11, 12]


def test_graph_validation_and_json(tmp_path):
    with pytest.raises(ValueError):
        build_graph(3, [(1, 1)])
    with pytest.raises(ValueError):
        build_graph(3, [(1, 4)])
    g = build_graph(4, [(2, 1), (1, 2), (3, 4)])
    assert g.edges == {(1, 2), (3, 4)}
    p = tmp_path / "g.json"
    p.write_text(g.to_json())
    h = load_graph(p)
    assert h.edges == g.edges and h.labels == g.labels
    with pytest.raises(ValueError):
        g.relabel_order([1, 2, 3])


def test_distance_requires_odd_cube():
    assert LatticeSpec(5, 5, 5).distance == 3
    with pytest.raises(ValueError):
        LatticeSpec(4, 4, 4).distance
    with pytest.raises(ValueError):
        LatticeSpec(3, 3, 3, (0, 2, 0))
