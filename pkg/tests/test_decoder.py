import itertools

import numpy as np
import pytest

from seqcluster.decoder import (
    BOUNDARY, BatchDecoder, MatchingProblem, Syndrome, build_matching, boundary_convention, crossing_parity,
    decode, dump_matching, extract_syndrome, lattice_geometry, mwpm, residual_chain,
)
from seqcluster.errors import ErrorModel
from seqcluster.graphs import LatticeSpec, Sublattice
from seqcluster.montecarlo import RunConfig, StopRule, _pipeline, _sample_trial

from oracles import brute_force_weight, random_problems


def spec(L):
    return LatticeSpec(L, L, L)


def shortest_logical(g):
    """Fewest qubits in a chain from the logical face to the opposite face."""
    inc = g.incidence()
    inf = 1 << 30
    dist = [inf] * g.n_cells
    frontier = []
    for q in np.flatnonzero(g.logical):
        c = g.ends[q][0]
        dist[c] = 1
        frontier.append(c)
    while frontier:
        nxt = []
        for c in frontier:
            for nb, _ in inc[c]:
                if nb != BOUNDARY and dist[nb] > dist[c] + 1:
                    dist[nb] = dist[c] + 1
                    nxt.append(nb)
        frontier = nxt
    return min(dist[g.ends[q][0]] + 1 for q in np.flatnonzero(g.cut))


def logical_chain(g):
    """Qubit labels of one straight chain of the sublattice's logical."""
    inc = g.incidence()
    q0 = int(np.flatnonzero(g.logical)[0])
    chain = [q0]
    cell = g.ends[q0][0]
    while True:
        step = [q for nb, q in inc[cell] if q not in chain and nb != BOUNDARY and
                g.cells[nb][g.logical_axis] > g.cells[cell][g.logical_axis]]
        end = [q for nb, q in inc[cell] if nb == BOUNDARY and g.cut[q]]
        if end:
            chain.append(end[0])
            break
        q = step[0]
        chain.append(q)
        a, b = g.ends[q]
        cell = b if a == cell else a
    return [int(g.qubits[q]) for q in chain]


@pytest.mark.parametrize("L", [3, 5, 7])
def test_both_distances_are_half_L(L):
    geo = lattice_geometry(spec(L))
    for g in (geo.primal, geo.dual):
        assert shortest_logical(g) == (L + 1) // 2


def test_default_boundary_axes():
    conv = boundary_convention(spec(5))
    assert conv[Sublattice.PRIMAL] == {"logical_axis": 2, "closed_axis": None}
    assert conv[Sublattice.DUAL] == {"logical_axis": 0, "closed_axis": 1}
    with pytest.raises(ValueError):
        boundary_convention(LatticeSpec(4, 5, 5))
    with pytest.raises(ValueError):
        boundary_convention(LatticeSpec(5, 5, 5, (1, 1, 1)))


def test_empty_flips_no_defects():
    syn = extract_syndrome(set(), spec(5))
    assert not syn.primal_defects and not syn.dual_defects
    assert decode(set(), spec(5)) == decode(set(), spec(5), ())
    assert not decode(set(), spec(5)).failed


def test_flip_on_absent_site_rejected():
    s = spec(5)
    absent = next(s.label(x, y, z) for x, y, z in itertools.product(range(5), repeat=3)
                  if not s.is_present(x, y, z))
    with pytest.raises(ValueError):
        extract_syndrome({absent}, s)


def test_single_bulk_flip_two_defects():
    s = spec(5)
    g = lattice_geometry(s).primal
    q = next(k for k in range(g.n_qubits) if g.ends[k][1] != BOUNDARY)
    syn = extract_syndrome({int(g.qubits[q])}, s)
    assert syn.primal_defects == {g.cells[g.ends[q][0]], g.cells[g.ends[q][1]]}
    assert not syn.dual_defects


def test_all_faces_of_a_cell():
    s = spec(7)
    g = lattice_geometry(s).primal
    centre = next(c for c in g.cells if all(2 <= v <= 4 for v in c))
    faces = [s.label(*[centre[k] + (d if k == a else 0) for k in range(3)])
             for a in range(3) for d in (-1, 1)]
    syn = extract_syndrome(set(faces), s)
    assert centre not in syn.primal_defects
    assert len(syn.primal_defects) == 6


def test_weights_are_taxicab_without_losses():
    s = spec(7)
    g = lattice_geometry(s).primal
    cells = [c for c in g.cells if all(1 <= v <= 5 for v in c)][:6]
    for a, b in itertools.combinations(cells, 2):
        syn = Syndrome(frozenset({a, b}), frozenset())
        prob, _ = build_matching(syn, s)
        assert prob.weights[0, 1] == sum(abs(u - v) for u, v in zip(a, b)) // 2


def test_lost_shared_qubit_merges_cells():
    s = spec(5)
    g = lattice_geometry(s).primal
    q = next(k for k in range(g.n_qubits) if g.ends[k][1] != BOUNDARY)
    label = int(g.qubits[q])
    prob, _ = build_matching(extract_syndrome(set(), s, [label]), s)
    assert prob.n_nodes == 0
    # a flip on the lost qubit is invisible
    prob, _ = build_matching(extract_syndrome({label}, s, [label]), s)
    assert prob.n_nodes == 0


def test_mwpm_small_examples():
    near = MatchingProblem(Sublattice.PRIMAL, (frozenset({0}), frozenset({1})),
                           np.array([[0, 3], [3, 0]]), np.array([5, 5]), np.zeros(0, dtype=bool))
    p = mwpm(near)
    assert p.pairs == ((0, 1),) and p.weight == 3
    far = MatchingProblem(Sublattice.PRIMAL, (frozenset({0}), frozenset({1})),
                          np.array([[0, 4], [4, 0]]), np.array([1, 1]), np.zeros(0, dtype=bool))
    p = mwpm(far)
    assert p.pairs == ((0, None), (1, None)) and p.weight == 2


def test_mwpm_matches_brute_force():
    for prob in random_problems(spec(7), 150, seed=8):
        assert mwpm(prob).weight == brute_force_weight(prob)


@pytest.mark.parametrize("which", ["primal", "dual"])
def test_logical_chain_is_undetected_failure(which):
    s = spec(5)
    geo = lattice_geometry(s)
    g = getattr(geo, which)
    chain = logical_chain(g)
    assert len(chain) == 3
    syn = extract_syndrome(set(chain), s)
    assert not syn.primal_defects and not syn.dual_defects
    out = decode(set(chain), s)
    assert (out.primal_fail, out.dual_fail) == ((True, False) if which == "primal" else (False, True))
    flips = np.zeros((1, len(geo.labels)), dtype=np.uint8)
    flips[0, [geo.column[v] for v in chain]] = 1
    assert BatchDecoder(s).decode_batch(flips)[0].tolist() == [which == "primal", which == "dual"]


def test_all_lost_is_a_coin_flip():
    s = spec(5)
    geo = lattice_geometry(s)
    rng = np.random.default_rng(3)
    fails = np.zeros(2)
    n = 400
    for _ in range(n):
        flips = set(int(v) for v in geo.labels[rng.random(len(geo.labels)) < 0.5])
        out = decode(flips, s, geo.labels.tolist())
        fails += (out.primal_fail, out.dual_fail)
    sigma = np.sqrt(0.25 / n)
    assert np.all(np.abs(fails / n - 0.5) < 3 * sigma)


def test_independent_crossing_checker_agrees():
    """Crossing parity on the far face equals the logical face for every residual."""
    s = spec(5)
    geo = lattice_geometry(s)
    cfg = RunConfig("B", s, ErrorModel.em1(1e-3), 4, StopRule.fixed(10_000))
    sampler, fast = _pipeline(cfg.protocol, cfg.spec, cfg.model)
    labels = sampler.labels
    rng_fails = 0
    for k in range(10_000):
        flips, erased = _sample_trial(sampler, cfg.master_seed, k)
        if not flips.any():
            continue
        fl = set(labels[flips == 1].tolist())
        syn = extract_syndrome(fl, s)
        pairings = [mwpm(p) for p in build_matching(syn, s)]
        for p in pairings:
            g = geo.sub(p.problem.sublattice)
            res = residual_chain(fl, (), p, s)
            assert crossing_parity(res, g.logical) == crossing_parity(res, g.cut)
            rng_fails += crossing_parity(res, g.logical)
    assert rng_fails > 0


def test_fast_path_matches_reference_weight_with_losses():
    """PyMatching and the reference matcher may break ties differently, so
    compare matching weights rather than decisions."""
    import pymatching
    s = spec(5)
    cfg = RunConfig("B", s, ErrorModel.em2(4e-3, 0.05), 6, StopRule.fixed(200))
    sampler, fast = _pipeline(cfg.protocol, cfg.spec, cfg.model)
    labels = sampler.labels
    for k in range(200):
        flips, erased = _sample_trial(sampler, cfg.master_seed, k)
        fl = set(labels[flips == 1].tolist())
        syn = extract_syndrome(fl, s, labels[erased].tolist())
        for prob, (g, cols, H, obs, _, _) in zip(build_matching(syn, s), fast.parts):
            weights = np.where(erased[cols], 0.0, 1.0)
            m = pymatching.Matching.from_check_matrix(H, weights=weights, faults_matrix=obs)
            sy = (H @ flips[cols].astype(np.int64)) % 2
            _, w = m.decode(sy, return_weight=True)
            assert w == mwpm(prob).weight


def test_in_place_edits_are_restored():
    s = spec(5)
    cfg = RunConfig("B", s, ErrorModel.em2(4e-3, 0.1), 2, StopRule.fixed(50))
    sampler, fast = _pipeline(cfg.protocol, cfg.spec, cfg.model)
    shots = [_sample_trial(sampler, cfg.master_seed, k) for k in range(50)]
    flips = np.array([f for f, _ in shots])
    erased = np.array([e for _, e in shots])
    fast.decode_batch(flips, erased)
    assert np.array_equal(fast.decode_batch(flips), BatchDecoder(s).decode_batch(flips))


def test_dump_matching_is_json():
    import json
    s = spec(5)
    g = lattice_geometry(s).primal
    q = next(k for k in range(g.n_qubits) if g.ends[k][1] != BOUNDARY)
    syn = extract_syndrome({int(g.qubits[q])}, s)
    doc = json.loads(dump_matching(syn, [mwpm(p) for p in build_matching(syn, s)], s))
    assert doc["primal"]["weight"] == 1 and doc["primal"]["pairs"] == [[0, 1]]
