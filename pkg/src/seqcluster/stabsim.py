"""Stabilizer-tableau oracle for schedules.

Two routes are provided.  :func:`run_schedule` evolves a full
destabilizer/stabilizer tableau (signs included) and is the exact reference.
:func:`propagate_faults` pushes many single-fault Pauli frames through a
schedule at once; combined with stabilizer-group membership against the
fault-free output it certifies effective errors at lattice scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .circuits import OpKind, Q, Schedule, FaultLocation
from .graphs import Graph

MAX_CANONICAL_QUBITS = 20


@dataclass(frozen=True)
class PauliProduct:
    """Hermitian Pauli product; a qubit in both supports carries Y."""

    xs: frozenset = frozenset()
    zs: frozenset = frozenset()
    sign: int = 1

    @classmethod
    def single(cls, kind: str, q: int) -> "PauliProduct":
        kind = kind.upper()
        if kind not in ("X", "Y", "Z"):
            raise ValueError(f"unknown Pauli {kind!r}")
        return cls(frozenset([q]) if kind in "XY" else frozenset(),
                   frozenset([q]) if kind in "YZ" else frozenset())

    @classmethod
    def from_sets(cls, xs=(), zs=(), sign: int = 1) -> "PauliProduct":
        return cls(frozenset(xs), frozenset(zs), sign)

    @property
    def support(self) -> frozenset:
        return self.xs | self.zs

    @property
    def weight(self) -> int:
        return len(self.support)

    def is_identity(self) -> bool:
        return not self.xs and not self.zs

    def times(self, other: "PauliProduct") -> "PauliProduct":
        """Product up to sign."""
        return PauliProduct(self.xs ^ other.xs, self.zs ^ other.zs)

    def __str__(self) -> str:
        if self.is_identity():
            return "I"
        parts = []
        for q in sorted(self.support):
            parts.append(("Y" if q in self.zs else "X") if q in self.xs else "Z")
            parts[-1] += str(q)
        return ("-" if self.sign < 0 else "") + "".join(parts)


def _g(x1, z1, x2, z2):
    """Phase exponent (mod 4) picked up when multiplying single-qubit Paulis."""
    x1, z1, x2, z2 = (np.asarray(v, dtype=np.int8) for v in (x1, z1, x2, z2))
    y_case = x1 * z1 * (z2 - x2)
    x_case = x1 * (1 - z1) * z2 * (2 * x2 - 1)
    z_case = (1 - x1) * z1 * x2 * (1 - 2 * z2)
    return y_case + x_case + z_case


class Tableau:
    """Aaronson-Gottesman tableau: rows 0..n-1 destabilizers, n..2n-1 stabilizers."""

    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=bool)
        self.z = np.zeros((2 * n, n), dtype=bool)
        self.r = np.zeros(2 * n, dtype=bool)
        idx = np.arange(n)
        self.x[idx, idx] = True
        self.z[n + idx, idx] = True

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n, t.x, t.z, t.r = self.n, self.x.copy(), self.z.copy(), self.r.copy()
        return t

    # gates
    def h(self, a: int):
        self.r ^= self.x[:, a] & self.z[:, a]
        self.x[:, a], self.z[:, a] = self.z[:, a].copy(), self.x[:, a].copy()

    def s(self, a: int):
        self.r ^= self.x[:, a] & self.z[:, a]
        self.z[:, a] ^= self.x[:, a]

    def cx(self, c: int, t: int):
        self.r ^= self.x[:, c] & self.z[:, t] & ~(self.x[:, t] ^ self.z[:, c])
        self.x[:, t] ^= self.x[:, c]
        self.z[:, c] ^= self.z[:, t]

    def cz(self, a: int, b: int):
        self.h(b)
        self.cx(a, b)
        self.h(b)

    def swap(self, a: int, b: int):
        self.cx(a, b)
        self.cx(b, a)
        self.cx(a, b)

    def pauli(self, xs: Iterable[int], zs: Iterable[int]):
        """Apply a Pauli product (global phase ignored)."""
        for a in xs:
            self.r ^= self.z[:, a]
        for a in zs:
            self.r ^= self.x[:, a]

    def _rowsum(self, targets: np.ndarray, src: int):
        """Left-multiply rows ``targets`` by row ``src`` (phases tracked)."""
        if len(targets) == 0:
            return
        gsum = _g(self.x[src], self.z[src], self.x[targets], self.z[targets]).sum(axis=1)
        total = 2 * self.r[targets].astype(np.int64) + 2 * int(self.r[src]) + gsum
        self.r[targets] = (total % 4) == 2
        self.x[targets] ^= self.x[src]
        self.z[targets] ^= self.z[src]

    def measure_z(self, a: int, forced: int | None = None, rng: np.random.Generator | None = None) -> int:
        n = self.n
        stab_hits = np.nonzero(self.x[n:, a])[0]
        if len(stab_hits):
            p = n + int(stab_hits[0])
            others = np.nonzero(self.x[:, a])[0]
            others = others[others != p]
            self._rowsum(others, p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            if forced is None:
                forced = int(rng.integers(2)) if rng is not None else 0
            self.x[p] = False
            self.z[p] = False
            self.z[p, a] = True
            self.r[p] = bool(forced)
            return int(forced)
        sign = self._sign_of_product(np.nonzero(self.x[:n, a])[0] + n)
        if forced is not None and forced != sign:
            raise ValueError(f"forced outcome {forced} has probability zero on qubit {a}")
        return sign

    def _product(self, rows: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
        """Sign bit and bit vectors of the ordered product of the given rows."""
        sx = np.zeros(self.n, dtype=bool)
        sz = np.zeros(self.n, dtype=bool)
        r = 0
        for k in rows:
            g = int(_g(self.x[k], self.z[k], sx, sz).sum())
            r = (2 * r + 2 * int(self.r[k]) + g) % 4 // 2
            sx ^= self.x[k]
            sz ^= self.z[k]
        return r, sx, sz

    def _sign_of_product(self, rows: np.ndarray) -> int:
        return self._product(rows)[0]

    def reset_zero(self, a: int, rng=None):
        if self.measure_z(a, rng=rng):
            self.pauli([a], [])

    def reset_plus(self, a: int, rng=None):
        self.reset_zero(a, rng)
        self.h(a)

    def peek(self, px: np.ndarray, pz: np.ndarray) -> int:
        """Expectation (+1, -1 or 0) of the Hermitian Pauli with bit vectors ``px, pz``."""
        n = self.n
        anti = (self.x[n:] & pz).sum(axis=1) + (self.z[n:] & px).sum(axis=1)
        if np.any(anti % 2):
            return 0
        dest = ((self.x[:n] & pz).sum(axis=1) + (self.z[:n] & px).sum(axis=1)) % 2
        r, sx, sz = self._product(np.nonzero(dest)[0] + n)
        if not (np.array_equal(sx, px) and np.array_equal(sz, pz)):
            return 0
        return -1 if r else 1

    def stabilizer_strings(self) -> list[str]:
        """Generators as "+XZ.Y" strings, one per stabilizer row."""
        table = np.array([".", "X", "Z", "Y"])
        out = []
        for k in range(self.n, 2 * self.n):
            codes = self.x[k].astype(int) + 2 * self.z[k].astype(int)
            out.append(("-" if self.r[k] else "+") + "".join(table[codes]))
        return out


def graph_generators(g: Graph, index: dict[int, int], n: int) -> tuple[np.ndarray, np.ndarray]:
    """Bit matrices of S_i = X_i prod_{j in N(i)} Z_j, one row per vertex in label order."""
    gx = np.zeros((g.n_vertices, n), dtype=bool)
    gz = np.zeros((g.n_vertices, n), dtype=bool)
    for r, v in enumerate(g.labels):
        gx[r, index[v]] = True
        for w in g.neighbours(v):
            gz[r, index[w]] = True
    return gx, gz


def reference_cluster(g: Graph) -> Tableau:
    """Tableau of |psi_G> on qubits indexed by sorted label, generators S_i with + signs."""
    n = g.n_vertices
    index = {v: k for k, v in enumerate(g.labels)}
    t = Tableau(n)
    t.x[:] = False
    t.z[:] = False
    t.r[:] = False
    gx, gz = graph_generators(g, index, n)
    t.x[n:] = gx
    t.z[n:] = gz
    t.z[np.arange(n), np.arange(n)] = True
    return t


@dataclass
class RunResult:
    tableau: Tableau
    outcomes: dict[int, int]
    index: dict[int, int]
    data_signs: dict[int, int] = field(default_factory=dict)


def qubit_index(s: Schedule) -> dict[int, int]:
    index = {Q: 0}
    index.update({v: k + 1 for k, v in enumerate(s.ordering)})
    return index


def _as_pauli(p) -> PauliProduct:
    return p if isinstance(p, PauliProduct) else PauliProduct.single(p[0], p[1])


def run_schedule(s: Schedule, faults: Sequence = (), forced_outcomes=None, rng=None,
                 final_measurements: bool = False, stop: int | None = None) -> RunResult:
    """Execute a schedule exactly.

    ``faults`` is a list of ``(FaultLocation, PauliProduct)``; a bare
    ``(FaultLocation, "X")`` applies that Pauli to the location's qubit.
    Measurements are forced to 0 unless ``forced_outcomes`` is a dict of
    op index -> bit or the string ``"random"`` (then ``rng`` is used).
    ``stop`` halts before that op index.
    """
    index = qubit_index(s)
    t = Tableau(len(index))
    by_pos: dict[int, list[PauliProduct]] = {}
    for loc, p in faults:
        pp = PauliProduct.single(p, loc.qubit) if isinstance(p, str) else p
        by_pos.setdefault(loc.position, []).append(pp)
    outcomes: dict[int, int] = {}

    def forced(k):
        if forced_outcomes is None:
            return 0
        if forced_outcomes == "random":
            return None
        return forced_outcomes.get(k, 0)

    end = len(s.ops) if stop is None else stop
    for k in range(end + 1):
        for pp in by_pos.get(k, ()):
            t.pauli([index[a] for a in pp.xs], [index[a] for a in pp.zs])
        if k == end:
            break
        op = s.ops[k]
        kind = op.kind
        if kind is OpKind.INIT_Q or kind is OpKind.RESET_Q:
            t.reset_plus(0, rng)
        elif kind is OpKind.INIT_DATA:
            t.reset_zero(index[op.qubit], rng)
        elif kind is OpKind.CX:
            t.cx(0, index[op.qubit])
        elif kind is OpKind.CZ:
            t.cz(0, index[op.qubit])
        elif kind is OpKind.H:
            t.h(0)
        elif kind is OpKind.MEAS_Q:
            outcomes[k] = t.measure_z(0, forced(k), rng)
        elif kind is OpKind.CORR_Z:
            if outcomes[op.cond]:
                t.pauli([], [index[op.qubit]])
        elif kind is OpKind.MEAS_DATA:
            a = index[op.qubit]
            if op.basis == "Z":
                outcomes[k] = t.measure_z(a, forced(k), rng)
            elif final_measurements:
                t.h(a)
                outcomes[k] = t.measure_z(a, forced(k), rng)
    return RunResult(t, outcomes, index)


def target_signs(res: RunResult, target: Graph) -> np.ndarray:
    """Expectation of every S_i of ``target`` in the run's final state."""
    gx, gz = graph_generators(target, res.index, res.tableau.n)
    return np.array([res.tableau.peek(gx[r], gz[r]) for r in range(len(gx))])


def prepares_target(s: Schedule, **kw) -> bool:
    """True iff the fault-free run ends with every target generator at +1."""
    return bool(np.all(target_signs(run_schedule(s, **kw), s.target) == 1))


# Pauli-frame route ---------------------------------------------------------

def propagate_faults(s: Schedule, faults: Sequence) -> tuple[np.ndarray, np.ndarray, dict[int, int]]:
    """Propagate many independent faults to the end of the schedule (before final X readout).

    Returns bool arrays ``(X, Z)`` of shape (n_faults, n_qubits) describing
    each fault's Pauli frame on the final state, and the qubit index.
    Measurement flips are turned into the Z corrections they trigger.
    """
    index = qubit_index(s)
    nf, nq = len(faults), len(index)
    X = np.zeros((nq, nf), dtype=bool)
    Z = np.zeros((nq, nf), dtype=bool)
    by_pos: dict[int, list[tuple[int, PauliProduct]]] = {}
    for f, (loc, p) in enumerate(faults):
        pp = PauliProduct.single(p, loc.qubit) if isinstance(p, str) else p
        by_pos.setdefault(loc.position, []).append((f, pp))
    flags: dict[int, np.ndarray] = {}

    for k in range(len(s.ops) + 1):
        for f, pp in by_pos.get(k, ()):
            for a in pp.xs:
                X[index[a], f] ^= True
            for a in pp.zs:
                Z[index[a], f] ^= True
        if k == len(s.ops):
            break
        op = s.ops[k]
        kind = op.kind
        if kind is OpKind.INIT_Q or kind is OpKind.RESET_Q:
            X[0] = False
            Z[0] = False
        elif kind is OpKind.INIT_DATA:
            a = index[op.qubit]
            X[a] = False
            Z[a] = False
        elif kind is OpKind.CX:
            a = index[op.qubit]
            X[a] ^= X[0]
            Z[0] ^= Z[a]
        elif kind is OpKind.CZ:
            a = index[op.qubit]
            Z[0] ^= X[a]
            Z[a] ^= X[0]
        elif kind is OpKind.H:
            X[0], Z[0] = Z[0].copy(), X[0].copy()
        elif kind is OpKind.MEAS_Q:
            flags[k] = X[0].copy()
            X[0] = False
            Z[0] = False
        elif kind is OpKind.CORR_Z:
            Z[index[op.qubit]] ^= flags[op.cond]
        elif kind is OpKind.MEAS_DATA and op.basis == "Z":
            a = index[op.qubit]
            flags[k] = X[a].copy()
            X[a] = False
            Z[a] = False
    return X.T.copy(), Z.T.copy(), index


def _commutes_with_target(s: Schedule, X: np.ndarray, Z: np.ndarray, index) -> np.ndarray:
    """Row-wise test that a data-supported Pauli lies in +-Stab(|psi_target>)."""
    gx, gz = graph_generators(s.target, index, len(index))
    anti = (X.astype(np.uint8) @ gz.T.astype(np.uint8) + Z.astype(np.uint8) @ gx.T.astype(np.uint8)) % 2
    return ~anti.any(axis=1)


def _target_mask(s: Schedule, index) -> np.ndarray:
    mask = np.zeros(len(index), dtype=bool)
    for v in s.target.labels:
        mask[index[v]] = True
    return mask


def _pauli_bits(pp: PauliProduct, index) -> tuple[np.ndarray, np.ndarray]:
    x = np.zeros(len(index), dtype=bool)
    z = np.zeros(len(index), dtype=bool)
    for a in pp.xs:
        x[index[a]] = True
    for a in pp.zs:
        z[index[a]] = True
    return x, z


def verify_effective_errors(s: Schedule, faults: Sequence, claims: Sequence[PauliProduct]) -> np.ndarray:
    """Batch check, via Pauli frames, that each claim matches its fault's effect up to sign."""
    if len(faults) != len(claims):
        raise ValueError("one claim per fault required")
    if not faults:
        return np.zeros(0, dtype=bool)
    X, Z, index = propagate_faults(s, faults)
    mask = _target_mask(s, index)
    for f, c in enumerate(claims):
        if not c.support <= set(s.target.labels):
            raise ValueError(f"claim {c} not supported on final-state qubits")
        cx, cz = _pauli_bits(c, index)
        X[f] ^= cx
        Z[f] ^= cz
    X &= mask
    Z &= mask
    return _commutes_with_target(s, X, Z, index)


def verify_effective_error(s: Schedule, fault, claimed: PauliProduct, method: str = "tableau") -> bool:
    """Does ``claimed`` reproduce the effect of ``fault`` on the final state?

    ``method="tableau"`` runs the faulty circuit exactly and compares the sign
    of every target generator after undoing ``claimed``; ``"frame"`` uses
    Pauli-frame propagation and group membership.
    """
    loc, p = fault
    if not claimed.support <= set(s.target.labels):
        raise ValueError(f"claim {claimed} not supported on final-state qubits")
    if method == "frame":
        return bool(verify_effective_errors(s, [fault], [claimed])[0])
    ref = run_schedule(s)
    bad = run_schedule(s, [fault])
    bad.tableau.pauli([bad.index[a] for a in claimed.xs], [bad.index[a] for a in claimed.zs])
    want = target_signs(ref, s.target)
    got = target_signs(bad, s.target)
    return bool(np.all(want != 0) and np.array_equal(want, got))


def effective_frames(s: Schedule, faults: Sequence) -> list[PauliProduct]:
    """Propagated fault on the surviving data qubits, as Pauli products (sign dropped)."""
    X, Z, index = propagate_faults(s, faults)
    labels = {k: v for v, k in index.items()}
    mask = _target_mask(s, index)
    out = []
    for f in range(len(faults)):
        xs = frozenset(labels[k] for k in np.nonzero(X[f] & mask)[0])
        zs = frozenset(labels[k] for k in np.nonzero(Z[f] & mask)[0])
        out.append(PauliProduct(xs, zs))
    return out


def zform(s: Schedule, pp: PauliProduct) -> PauliProduct:
    """The unique pure-Z Pauli equivalent to ``pp`` on |psi_target> (X_i -> Z_{N(i)})."""
    zs = set(pp.zs)
    for i in pp.xs:
        zs ^= set(s.target.neighbours(i))
    return PauliProduct(frozenset(), frozenset(zs))


def zform_effective_errors(s: Schedule, faults: Sequence) -> list[PauliProduct]:
    return [zform(s, pp) for pp in effective_frames(s, faults)]


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.uint64)
    a = a - ((a >> np.uint64(1)) & np.uint64(0x5555555555555555))
    a = (a & np.uint64(0x3333333333333333)) + ((a >> np.uint64(2)) & np.uint64(0x3333333333333333))
    a = (a + (a >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return ((a * np.uint64(0x0101010101010101)) >> np.uint64(56)).astype(np.int64)


def _coset(g: Graph, pp: PauliProduct):
    """Every element of pp * Stab(|psi_g>) as (x bitmask, z bitmask) arrays."""
    n = g.n_vertices
    if n > MAX_CANONICAL_QUBITS:
        raise ValueError(f"exhaustive search limited to {MAX_CANONICAL_QUBITS} qubits, got {n}")
    labels = g.labels
    bit = {v: k for k, v in enumerate(labels)}
    xe = sum(1 << bit[v] for v in pp.xs)
    ze = sum(1 << bit[v] for v in pp.zs)
    # Gamma a for all a, built by doubling; a_k multiplies in S_{labels[k]}
    gamma = np.zeros(1 << n, dtype=np.int64)
    for k, v in enumerate(labels):
        col = sum(1 << bit[w] for w in g.neighbours(v))
        gamma[1 << k: 1 << (k + 1)] = gamma[: 1 << k] ^ col
    a = np.arange(1 << n, dtype=np.int64)
    return a ^ xe, gamma ^ ze, bit


def _pick(g: Graph, xs, zs, candidates) -> PauliProduct:
    labels = g.labels
    n = len(labels)

    def key(idx):
        sup = xs[idx] | zs[idx]
        return (tuple(labels[k] for k in range(n) if sup >> k & 1), int(xs[idx]))

    idx = min(candidates, key=key)
    return PauliProduct(frozenset(labels[k] for k in range(n) if xs[idx] >> k & 1),
                        frozenset(labels[k] for k in range(n) if zs[idx] >> k & 1))


def minimum_weight_equivalent(g: Graph, pp: PauliProduct) -> PauliProduct:
    """Min-weight Pauli in pp * Stab(|psi_g>), ties broken by lexicographic support."""
    xs, zs, _ = _coset(g, pp)
    w = _popcount(xs | zs)
    return _pick(g, xs, zs, np.nonzero(w == w.min())[0])


def minimum_weight_within(g: Graph, pp: PauliProduct, regions) -> PauliProduct | None:
    """Min-weight Pauli in pp * Stab(|psi_g>) supported inside one of ``regions``,
    or None when no region holds a representative."""
    xs, zs, bit = _coset(g, pp)
    sup = xs | zs
    inside = np.zeros(len(sup), dtype=bool)
    for region in regions:
        mask = sum(1 << bit[v] for v in region if v in bit)
        inside |= (sup & ~mask) == 0
    if not inside.any():
        return None
    w = np.where(inside, _popcount(sup), np.iinfo(np.int64).max)
    return _pick(g, xs, zs, np.nonzero(w == w.min())[0])


def canonical_effective_error(s: Schedule, fault) -> PauliProduct:
    """Minimal-weight representative of the fault's effect on the final state."""
    if s.target.n_vertices > MAX_CANONICAL_QUBITS:
        raise ValueError(f"canonical search limited to {MAX_CANONICAL_QUBITS} final-state qubits")
    frame = effective_frames(s, [fault])[0]
    return minimum_weight_equivalent(s.target, frame)


def random_stabilizer_state(n: int, rng: np.random.Generator, depth: int | None = None) -> Tableau:
    """Random stabilizer state from a seeded random Clifford circuit."""
    t = Tableau(n)
    for _ in range(depth or 4 * n * n + 4):
        r = rng.integers(3)
        a = int(rng.integers(n))
        if r == 0:
            t.h(a)
        elif r == 1:
            t.s(a)
        elif n > 1:
            b = int(rng.integers(n - 1))
            t.cx(a, b + (b >= a))
    return t


def same_state(t1: Tableau, t2: Tableau) -> bool:
    """True iff two tableaus describe the same stabilizer state (signs included)."""
    n = t1.n
    return all(t2.peek(t1.x[k], t1.z[k]) == (-1 if t1.r[k] else 1) for k in range(n, 2 * n))
