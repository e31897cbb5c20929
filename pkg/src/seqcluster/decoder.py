"""Syndrome extraction, loss-aware matching and logical-failure decisions on the bcc lattice.

Primal cells sit at sites whose offset-adjusted parities are all odd, dual
cells at all-even sites.  A primal (face) qubit joins the two primal cells
one step away along its even axis; a dual (edge) qubit joins the two dual
cells along its odd axis.  A qubit whose second cell falls off the grid is a
boundary edge.

Boundary convention.  An axis whose adjusted parity at coordinate 0 is even
is rough for the primal sublattice, otherwise rough for the dual sublattice.
The sublattice that is rough on two axes has its higher such axis closed by
treating the qubits dangling there as ideal (never faulty, never decoded).
Closing the higher axis balances the two sublattices: with the other choice
the correlated two-qubit errors of the sequential preparation line up with
the dual logical and its crossing point drops well below the primal one.
Each sublattice then has one pair of rough faces and its logical runs
between them with distance (L+1)/2.

Two decoders share this geometry: a reference path (superchecks, exact
blossom matching, explicit correction chains) and a batched fast path built
on PyMatching.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
import pymatching
import scipy.sparse as sp

from .blossom import min_weight_perfect_matching
from .graphs import LatticeSpec, Sublattice

BOUNDARY = -1


def boundary_convention(spec: LatticeSpec) -> dict:
    """Logical axis and closed axis of each sublattice for a memory lattice."""
    if not all(side % 2 == 1 for side in (spec.L, spec.M, spec.N)):
        raise ValueError("memory lattices need odd L, M, N")
    off = spec.parity_offset
    rough = {Sublattice.PRIMAL: [a for a in range(3) if off[a] == 0],
             Sublattice.DUAL: [a for a in range(3) if off[a] == 1]}
    if not rough[Sublattice.PRIMAL] or not rough[Sublattice.DUAL]:
        raise ValueError(f"offset {off} gives one sublattice no rough boundary")
    out = {}
    for sub, axes in rough.items():
        if len(axes) == 2:
            out[sub] = {"logical_axis": axes[0], "closed_axis": axes[1]}
        else:
            out[sub] = {"logical_axis": axes[0], "closed_axis": None}
    return out


@dataclass(frozen=True, eq=False)
class SublatticeGeometry:
    """Decoding graph of one sublattice: cells are nodes, qubits are edges."""

    sublattice: Sublattice
    cells: tuple                  # cell coordinates, index = node id
    cell_index: dict
    qubits: np.ndarray            # labels of decoded qubits, index = edge id
    ends: np.ndarray              # (n_qubits, 2) cell ids, second may be BOUNDARY
    logical: np.ndarray           # bool mask: test surface at the low rough face
    cut: np.ndarray               # bool mask: parallel surface at the high rough face
    ideal: frozenset              # labels treated as noise-free
    logical_axis: int

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def check_matrix(self) -> sp.csr_matrix:
        rows, cols = [], []
        for q, (a, b) in enumerate(self.ends):
            rows.append(a)
            cols.append(q)
            if b != BOUNDARY:
                rows.append(b)
                cols.append(q)
        data = np.ones(len(rows), dtype=np.uint8)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_cells, self.n_qubits))

    def incidence(self) -> list[list[tuple[int, int]]]:
        """Per cell: (neighbour cell or BOUNDARY, qubit id), sorted by qubit id."""
        inc = [[] for _ in range(self.n_cells)]
        for q, (a, b) in enumerate(self.ends):
            inc[a].append((b, q))
            if b != BOUNDARY:
                inc[b].append((a, q))
        return inc


@dataclass(frozen=True, eq=False)
class Geometry:
    spec: LatticeSpec
    labels: np.ndarray            # all present labels, sorted; index = bcc column
    column: dict                  # label -> column
    primal: SublatticeGeometry
    dual: SublatticeGeometry

    def sub(self, which: Sublattice) -> SublatticeGeometry:
        return self.primal if which is Sublattice.PRIMAL else self.dual


def _build_sublattice(spec: LatticeSpec, sub: Sublattice, conv: dict) -> SublatticeGeometry:
    dims = (spec.L, spec.M, spec.N)
    want_odd = 2 if sub is Sublattice.PRIMAL else 1
    cell_par = 1 if sub is Sublattice.PRIMAL else 0
    axis, closed = conv["logical_axis"], conv["closed_axis"]

    cells = []
    for z, y, x in product(range(spec.N), range(spec.M), range(spec.L)):
        if all(p == cell_par for p in spec.parities(x, y, z)):
            cells.append((x, y, z))
    cell_index = {c: k for k, c in enumerate(cells)}

    qubits, ends, logical, cut, ideal = [], [], [], [], set()
    for z, y, x in product(range(spec.N), range(spec.M), range(spec.L)):
        par = spec.parities(x, y, z)
        if sum(par) != want_odd:
            continue
        # direction joining the two cells of this qubit
        d = par.index(0) if sub is Sublattice.PRIMAL else par.index(1)
        c = [x, y, z]
        nbrs = []
        for step in (-1, 1):
            cc = list(c)
            cc[d] += step
            nbrs.append(cell_index.get(tuple(cc), BOUNDARY))
        label = spec.label(x, y, z)
        inside = [k for k in nbrs if k != BOUNDARY]
        if not inside:
            raise ValueError(f"qubit {label} touches no cell")
        if len(inside) == 1 and d == closed:
            ideal.add(label)
            continue
        qubits.append(label)
        ends.append((inside[0], inside[1] if len(inside) == 2 else BOUNDARY))
        dangling = len(inside) == 1 and d == axis
        logical.append(dangling and c[d] == 0)
        cut.append(dangling and c[d] == dims[d] - 1)
    return SublatticeGeometry(sub, tuple(cells), cell_index, np.array(qubits, dtype=np.int64),
                              np.array(ends, dtype=np.int64).reshape(-1, 2),
                              np.array(logical, dtype=bool), np.array(cut, dtype=bool),
                              frozenset(ideal), axis)


@lru_cache(maxsize=32)
def lattice_geometry(spec: LatticeSpec) -> Geometry:
    """Shared, read-only decoding geometry for a memory lattice."""
    conv = boundary_convention(spec)
    labels = []
    for z, y, x in product(range(spec.N), range(spec.M), range(spec.L)):
        if spec.is_present(x, y, z):
            labels.append(spec.label(x, y, z))
    labels = np.array(labels, dtype=np.int64)
    return Geometry(spec, labels, {int(v): k for k, v in enumerate(labels)},
                    _build_sublattice(spec, Sublattice.PRIMAL, conv[Sublattice.PRIMAL]),
                    _build_sublattice(spec, Sublattice.DUAL, conv[Sublattice.DUAL]))


def _as_label_set(flips) -> frozenset:
    z = getattr(flips, "z_flips", flips)
    return frozenset(int(v) for v in z)


def _qubit_bits(geo: SublatticeGeometry, labels: frozenset) -> np.ndarray:
    return np.fromiter((int(q) in labels for q in geo.qubits), dtype=np.uint8, count=geo.n_qubits)


# --- reference decoder ----------------------------------------------------------

@dataclass(frozen=True)
class Syndrome:
    primal_defects: frozenset
    dual_defects: frozenset
    loss_mask: frozenset = frozenset()

    def defects(self, which: Sublattice) -> frozenset:
        return self.primal_defects if which is Sublattice.PRIMAL else self.dual_defects


def extract_syndrome(flips, spec: LatticeSpec, losses=()) -> Syndrome:
    """Odd-parity cells of each sublattice, counting only intact qubits."""
    geo = lattice_geometry(spec)
    flipped = _as_label_set(flips)
    lost = frozenset(int(v) for v in losses)
    for v in flipped | lost:
        if v not in geo.column:
            raise ValueError(f"label {v} is not a present bcc site")
    intact = flipped - lost
    out = []
    for g in (geo.primal, geo.dual):
        parity = (g.check_matrix() @ _qubit_bits(g, intact)) % 2
        out.append(frozenset(g.cells[k] for k in np.flatnonzero(parity)))
    return Syndrome(out[0], out[1], lost)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # the smaller root wins, so the boundary (node 0) always represents its class
            self.parent[max(ra, rb)] = min(ra, rb)


def _zero_one_bfs(geo: SublatticeGeometry, inc, lost_q: np.ndarray, sources):
    """Distances from a set of cells; boundary reached through dangling qubits.

    Returns (dist per cell, parent (cell, qubit) per cell, boundary distance,
    boundary parent).  Neighbour order is fixed, so paths are deterministic.
    """
    inf = 1 << 30
    dist = [inf] * geo.n_cells
    parent: list = [None] * geo.n_cells
    bdist, bparent = inf, None
    dq = deque()
    for c in sorted(sources):
        dist[c] = 0
        dq.append(c)
    while dq:
        c = dq.popleft()
        d = dist[c]
        for nb, q in inc[c]:
            w = 0 if lost_q[q] else 1
            if nb == BOUNDARY:
                if d + w < bdist:
                    bdist, bparent = d + w, (c, q)
                continue
            if d + w < dist[nb]:
                dist[nb] = d + w
                parent[nb] = (c, q)
                if w == 0:
                    dq.appendleft(nb)
                else:
                    dq.append(nb)
    return dist, parent, bdist, bparent


@dataclass(frozen=True, eq=False)
class MatchingProblem:
    """Defect superchecks of one sublattice plus a boundary node.

    ``weights[a][b]`` is the loss-aware distance between superchecks a and b,
    ``boundary[a]`` the distance from a to the nearest rough face.
    """

    sublattice: Sublattice
    superchecks: tuple            # frozensets of cell ids, one per defect node
    weights: np.ndarray
    boundary: np.ndarray
    lost: np.ndarray              # per-qubit loss mask for this sublattice

    @property
    def n_nodes(self) -> int:
        return len(self.superchecks)


def _superchecks(geo: SublatticeGeometry, lost_q: np.ndarray):
    # node 0 is the boundary, cells are 1..n
    uf = _UnionFind(geo.n_cells + 1)
    for q in np.flatnonzero(lost_q):
        a, b = geo.ends[q]
        uf.union(a + 1, 0 if b == BOUNDARY else b + 1)
    groups: dict[int, list[int]] = {}
    for c in range(geo.n_cells):
        groups.setdefault(uf.find(c + 1), []).append(c)
    return groups


def _build_one(geo: SublatticeGeometry, defects: frozenset, lost: frozenset) -> MatchingProblem:
    lost_q = np.fromiter((int(q) in lost for q in geo.qubits), dtype=bool, count=geo.n_qubits)
    defect_ids = {geo.cell_index[c] for c in defects}
    nodes = []
    for root, members in sorted(_superchecks(geo, lost_q).items(), key=lambda kv: kv[1][0]):
        if root == 0:
            continue          # parity absorbed by the boundary
        if sum(c in defect_ids for c in members) % 2:
            nodes.append(frozenset(members))
    inc = geo.incidence()
    k = len(nodes)
    owner = {}
    for a, members in enumerate(nodes):
        for c in members:
            owner[c] = a
    weights = np.zeros((k, k), dtype=np.int64)
    bound = np.zeros(k, dtype=np.int64)
    for a, members in enumerate(nodes):
        dist, _, bdist, _ = _zero_one_bfs(geo, inc, lost_q, members)
        bound[a] = bdist
        for b in range(k):
            if b != a:
                weights[a, b] = min(dist[c] for c in nodes[b])
    return MatchingProblem(geo.sublattice, tuple(nodes), weights, bound, lost_q)


def build_matching(syndrome: Syndrome, spec: LatticeSpec) -> tuple[MatchingProblem, MatchingProblem]:
    """Primal and dual matching problems with lost qubits contracted into superchecks."""
    geo = lattice_geometry(spec)
    return (_build_one(geo.primal, syndrome.primal_defects, syndrome.loss_mask),
            _build_one(geo.dual, syndrome.dual_defects, syndrome.loss_mask))


@dataclass(frozen=True)
class Pairing:
    problem: MatchingProblem
    pairs: tuple                  # (a, b) with b = None for a boundary match
    weight: int


def mwpm(problem: MatchingProblem) -> Pairing:
    """Exact minimum-weight perfect matching; each node pairs with another node or the boundary.

    Every node gets a private boundary copy; copies pair freely at zero cost,
    so any subset of nodes may go to the boundary.
    """
    k = problem.n_nodes
    if k == 0:
        return Pairing(problem, (), 0)
    edges = []
    for a in range(k):
        for b in range(a + 1, k):
            # pairs costlier than both boundary routes are never optimal
            if problem.weights[a, b] <= problem.boundary[a] + problem.boundary[b]:
                edges.append((a, b, int(problem.weights[a, b])))
        edges.append((a, k + a, int(problem.boundary[a])))
        for b in range(a + 1, k):
            edges.append((k + a, k + b, 0))
    mate = min_weight_perfect_matching(2 * k, edges)
    pairs, weight = [], 0
    for a in range(k):
        m = mate[a]
        if m == k + a:
            pairs.append((a, None))
            weight += int(problem.boundary[a])
        elif m < k and a < m:
            pairs.append((a, m))
            weight += int(problem.weights[a, m])
    return Pairing(problem, tuple(pairs), weight)


def _trace(parent, end_cell, qubits: list):
    c = end_cell
    while parent[c] is not None:
        prev, q = parent[c]
        qubits.append(q)
        c = prev


def correction_chain(geo: SublatticeGeometry, pairing: Pairing) -> np.ndarray:
    """Union (mod 2) of one shortest path per matched pair."""
    prob = pairing.problem
    inc = geo.incidence()
    chain = np.zeros(geo.n_qubits, dtype=np.uint8)
    for a, b in pairing.pairs:
        dist, parent, bdist, bparent = _zero_one_bfs(geo, inc, prob.lost, prob.superchecks[a])
        path: list[int] = []
        if b is None:
            cell, q = bparent
            path.append(q)
            _trace(parent, cell, path)
        else:
            end = min(prob.superchecks[b], key=lambda c: (dist[c], c))
            _trace(parent, end, path)
        for q in path:
            chain[q] ^= 1
    return chain


def _close_over_losses(geo: SublatticeGeometry, residual: np.ndarray, lost_q: np.ndarray) -> np.ndarray:
    """Flip lost qubits so that every cell has even parity.

    Works on a spanning forest of the lost-qubit graph, rooted at the
    boundary where a tree touches it, peeling odd leaves toward the root.
    """
    residual = residual.copy()
    parity = (geo.check_matrix() @ residual) % 2
    adj: dict[int, list[tuple[int, int]]] = {}
    for q in np.flatnonzero(lost_q):
        a, b = (int(v) for v in geo.ends[q])
        adj.setdefault(a, []).append((b, q))
        adj.setdefault(b, []).append((a, q))
    seen = set()
    roots = ([BOUNDARY] if BOUNDARY in adj else []) + sorted(v for v in adj if v != BOUNDARY)
    for root in roots:
        if root in seen:
            continue
        order, up = [root], {root: None}
        seen.add(root)
        i = 0
        while i < len(order):
            v = order[i]
            i += 1
            for nb, q in adj.get(v, ()):
                if nb not in seen:
                    seen.add(nb)
                    up[nb] = (v, q)
                    order.append(nb)
        for v in reversed(order[1:]):
            if v != BOUNDARY and parity[v]:
                p, q = up[v]
                residual[q] ^= 1
                parity[v] ^= 1
                if p != BOUNDARY:
                    parity[p] ^= 1
    return residual


@dataclass(frozen=True)
class DecodeOutcome:
    primal_fail: bool
    dual_fail: bool

    @property
    def failed(self) -> bool:
        """Union convention: the trial fails if either sublattice fails."""
        return self.primal_fail or self.dual_fail


def residual_chain(flips, losses, pairing: Pairing, spec: LatticeSpec) -> np.ndarray:
    """Flips plus correction on one sublattice, closed over lost qubits.

    Lost qubits carry whatever value ``flips`` assigns them (callers give
    them a random bit); the result has even parity at every cell.
    """
    geo = lattice_geometry(spec).sub(pairing.problem.sublattice)
    residual = _qubit_bits(geo, _as_label_set(flips)) ^ correction_chain(geo, pairing)
    residual = _close_over_losses(geo, residual, pairing.problem.lost)
    if ((geo.check_matrix() @ residual) % 2).any():
        raise RuntimeError("correction left a nonzero syndrome")
    return residual


def crossing_parity(residual: np.ndarray, surface: np.ndarray) -> bool:
    return bool(int(residual[surface].sum()) % 2)


def logical_failure(flips, losses, pairings, spec: LatticeSpec) -> DecodeOutcome:
    """Does the residual chain cross each sublattice's logical test surface oddly?"""
    geo = lattice_geometry(spec)
    fails = []
    for pairing in pairings:
        g = geo.sub(pairing.problem.sublattice)
        fails.append(crossing_parity(residual_chain(flips, losses, pairing, spec), g.logical))
    return DecodeOutcome(*fails)


def decode(flips, spec: LatticeSpec, losses=()) -> DecodeOutcome:
    """Reference pipeline: syndrome, superchecks, exact matching, residual parity."""
    syn = extract_syndrome(flips, spec, losses)
    problems = build_matching(syn, spec)
    return logical_failure(flips, losses, [mwpm(p) for p in problems], spec)


def dump_matching(syndrome: Syndrome, pairings, spec: LatticeSpec) -> str:
    """JSON snapshot of defects and matched pairs, for inspection tools."""
    geo = lattice_geometry(spec)
    doc = {"lattice": [spec.L, spec.M, spec.N, list(spec.parity_offset)],
           "lost": sorted(syndrome.loss_mask)}
    for p in pairings:
        g = geo.sub(p.problem.sublattice)
        nodes = [sorted(g.cells[c] for c in sc) for sc in p.problem.superchecks]
        doc[p.problem.sublattice.value.lower()] = {
            "defects": sorted(syndrome.defects(p.problem.sublattice)),
            "superchecks": nodes,
            "pairs": [list(pr) for pr in p.pairs],
            "weight": p.weight,
        }
    return json.dumps(doc, default=list)


# --- fast path ----------------------------------------------------------------------

class BatchDecoder:
    """PyMatching on both sublattices, fed with flips indexed by bcc column.

    Lost qubits become zero-weight edges for the shots that lose them, which
    is the same contraction the superchecks perform.
    """

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        self.geo = lattice_geometry(spec)
        self.parts = []
        for g in (self.geo.primal, self.geo.dual):
            cols = np.array([self.geo.column[int(q)] for q in g.qubits], dtype=np.int64)
            H = g.check_matrix()
            obs = sp.csr_matrix(g.logical.astype(np.uint8)[None, :])
            matching = pymatching.Matching.from_check_matrix(H, faults_matrix=obs)
            Hc = H.tocsc()
            ends = [tuple(int(c) for c in Hc.indices[Hc.indptr[q]:Hc.indptr[q + 1]])
                    for q in range(H.shape[1])]
            # parallel edges get merged by pymatching, so editing one in place is unsafe
            editable = len(set(ends)) == len(ends)
            self.parts.append((g, cols, H, obs, matching, ends if editable else None))

    def decode_batch(self, flips: np.ndarray, lost: np.ndarray | None = None) -> np.ndarray:
        """Per-shot (primal_fail, dual_fail) for a (shots, n_columns) 0/1 array."""
        flips = np.asarray(flips, dtype=np.uint8)
        out = np.zeros((flips.shape[0], 2), dtype=bool)
        for s, (g, cols, H, obs, matching, ends) in enumerate(self.parts):
            bits = flips[:, cols]
            syn = np.asarray((H @ bits.T.astype(np.int32)) % 2, dtype=np.uint8).T
            actual = bits[:, g.logical].sum(axis=1) % 2
            if lost is None or not lost[:, cols].any():
                pred = matching.decode_batch(syn)[:, 0]
            else:
                pred = np.empty(flips.shape[0], dtype=np.uint8)
                lost_cols = lost[:, cols]
                for k in range(flips.shape[0]):
                    lost_q = np.flatnonzero(lost_cols[k])
                    if ends is None:
                        pred[k] = self._decode_with_losses(g, H, obs, matching, syn[k], lost_q)
                    else:
                        pred[k] = self._decode_in_place(g, matching, ends, syn[k], lost_q)
            out[:, s] = pred != actual
        return out

    @staticmethod
    def _decode_in_place(g: SublatticeGeometry, matching, ends, syn, lost_q) -> int:
        """Zero the lost edges, decode, then restore unit weights."""
        def set_weight(q, w):
            e = ends[q]
            faults = {0} if g.logical[q] else set()
            if len(e) == 2:
                matching.add_edge(e[0], e[1], fault_ids=faults, weight=w, merge_strategy="replace")
            else:
                matching.add_boundary_edge(e[0], fault_ids=faults, weight=w, merge_strategy="replace")

        for q in lost_q:
            set_weight(q, 0.0)
        try:
            return int(matching.decode(syn)[0])
        finally:
            for q in lost_q:
                set_weight(q, 1.0)

    @staticmethod
    def _decode_with_losses(g: SublatticeGeometry, H, obs, matching, syn, lost_q) -> int:
        if len(lost_q) == 0:
            return int(matching.decode(syn)[0])
        weights = np.ones(g.n_qubits)
        weights[lost_q] = 0.0
        m = pymatching.Matching.from_check_matrix(H, weights=weights, faults_matrix=obs)
        return int(m.decode(syn)[0])
