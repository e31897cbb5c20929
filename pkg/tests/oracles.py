"""Brute-force references shared by the decoder and acceptance tests."""

import numpy as np

from seqcluster.decoder import MatchingProblem, Syndrome, build_matching, lattice_geometry


def brute_force_weight(problem: MatchingProblem) -> int:
    """Every node pairs with another node or with the boundary."""
    W, B = problem.weights, problem.boundary

    def best(nodes):
        if not nodes:
            return 0
        a, rest = nodes[0], nodes[1:]
        out = B[a] + best(rest)
        for k, b in enumerate(rest):
            out = min(out, W[a, b] + best(rest[:k] + rest[k + 1:]))
        return out

    return int(best(tuple(range(problem.n_nodes))))


def random_problems(spec, n, max_nodes=10, seed=0):
    """Matching problems from random defects and random losses on ``spec``."""
    geo = lattice_geometry(spec)
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        primal = rng.random() < 0.5
        g = geo.primal if primal else geo.dual
        n_def = int(rng.integers(1, max_nodes + 1))
        defects = frozenset(g.cells[int(k)] for k in rng.choice(g.n_cells, n_def, replace=False))
        lost = frozenset(int(v) for v in g.qubits[rng.random(g.n_qubits) < rng.uniform(0, 0.15)])
        syn = Syndrome(defects, frozenset(), lost) if primal else Syndrome(frozenset(), defects, lost)
        prob = build_matching(syn, spec)[0 if primal else 1]
        if 0 < prob.n_nodes <= max_nodes:
            out.append(prob)
    return out
