"""Error models, fault sampling, and closed-form translation of faults into outcome flips.

Single-qubit X/Z faults are mapped to effective errors on the final state by
the propagation tables (general algorithm rules, the cubic-lattice table for
Protocol A and the bcc table for Protocol B).  A FlipSet keeps only what the
final X-basis readout sees: which outcomes flip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .circuits import FaultLocation, OpKind, Q, Schedule, delay_exposures
from .graphs import Plane, LatticeSpec, classify_site
from .stabsim import PauliProduct


@dataclass(frozen=True)
class FlipSet:
    """Sign-free effective error: flipped X outcomes plus inert X residues."""

    z_flips: frozenset = frozenset()
    x_residues: frozenset = frozenset()

    @classmethod
    def of(cls, z=(), x=()) -> "FlipSet":
        return cls(frozenset(z), frozenset(x))

    def as_pauli(self) -> PauliProduct:
        return PauliProduct(self.x_residues, self.z_flips)

    def is_empty(self) -> bool:
        return not self.z_flips and not self.x_residues


def compose(a: FlipSet, b: FlipSet) -> FlipSet:
    """Joint effect of two faults (signs dropped)."""
    return FlipSet(a.z_flips ^ b.z_flips, a.x_residues ^ b.x_residues)


EMPTY = FlipSet()


# --- general rules (any Algorithm 1 / Algorithm 2 schedule) -----------------

def _base_before_block(s: Schedule, k: int) -> set:
    """Effect of X_Q at the start of block k: Z on the previous block unless Q was reset."""
    start = s.blocks[k][0]
    prev = s.prev_q_op(start)
    op = s.ops[prev]
    return {op.block} if op.kind is OpKind.H else set()


def _next_block_after(s: Schedule, t: int) -> int | None:
    """Block entered by the ancilla after op t, or None if it is measured or idle first."""
    nxt = s.next_q_op(t + 1)
    if nxt is None:
        return None
    op = s.ops[nxt]
    if op.kind in (OpKind.CZ, OpKind.CX) and op.block is not None:
        return op.block
    return None


def _q_effect(s: Schedule, position: int, pauli: str) -> set:
    prev = s.prev_q_op(position)
    if prev is None:
        raise ValueError(f"no ancilla location at position {position}")
    op = s.ops[prev]
    kind = op.kind
    if kind is OpKind.MEAS_Q:
        raise ValueError(f"position {position} follows a terminal ancilla measurement")
    if kind in (OpKind.INIT_Q, OpKind.RESET_Q):
        if pauli == "X":
            return set()
        nxt = _next_block_after(s, prev)
        return {nxt} if nxt is not None else set()
    if kind is OpKind.H:
        if pauli == "X":
            return {op.block}
        nxt = _next_block_after(s, prev)
        return {nxt} if nxt is not None else set()
    k = op.block
    if k is None:
        # after the closing CZ of Algorithm 2: the ancilla is disentangled
        return set()
    if pauli == "Z":
        return {k}
    if kind is OpKind.CZ:
        start = s.blocks[k][0]
        J = {s.ops[t].qubit for t in range(start, prev + 1) if s.ops[t].kind is OpKind.CZ}
        return _base_before_block(s, k) ^ J
    # between X_{Q,k} and H_Q
    h = s.next_q_op(prev + 1)
    nxt = _next_block_after(s, h)
    return {nxt} if nxt is not None else set()


def _data_effect(s: Schedule, position: int, i: int, pauli: str) -> PauliProduct:
    if position <= s.init_index[i]:
        raise ValueError(f"qubit {i} does not exist before position {position}")
    if i in s.measure_index and position > s.measure_index[i]:
        raise ValueError(f"qubit {i} already measured at position {position}")
    if pauli == "Z":
        return PauliProduct(frozenset(), frozenset([i]) if position > s.cx_index[i] else frozenset())
    # the closing CZ of Algorithm 2 only kicks Z back onto the idle ancilla
    zs = {k for t, k in s.cz_by_qubit[i] if t >= position and k is not None}
    return PauliProduct(frozenset([i]), frozenset(zs))


def effective_error_general(fault, s: Schedule) -> PauliProduct:
    """Effective error on the state the algorithm prepares (Table III / Table IV rules)."""
    loc, p = fault
    p = p.upper()
    if p == "Y":
        return effective_error_general((loc, "X"), s).times(effective_error_general((loc, "Z"), s))
    if loc.qubit == Q:
        return PauliProduct(frozenset(), frozenset(_q_effect(s, loc.position, p)))
    return _data_effect(s, loc.position, loc.qubit, p)


def _measure_out(s: Schedule, pp: PauliProduct) -> FlipSet:
    """Apply Protocol A's Z measure-out: X on a removed qubit flips its outcome,
    which wrongly applies Z to its surviving neighbours."""
    surv = s.survivor_map
    zs = {q for q in pp.zs if q in surv}
    xs = set()
    for q in pp.xs:
        if q in surv:
            xs.add(q)
        else:
            zs ^= {j for j in s.graph.neighbours(q) if j in surv}
    return FlipSet(frozenset(zs), frozenset(xs))


def flips_from_fault_general(fault, s: Schedule) -> FlipSet:
    pp = effective_error_general(fault, s)
    if s.protocol == "A":
        return _measure_out(s, pp)
    return FlipSet(pp.zs, pp.xs)


# --- cubic lattice table (Protocol A preparation) ---------------------------

def _slot_after(s: Schedule, loc: FaultLocation) -> int:
    """Op index the location immediately follows."""
    return loc.position - 1


def effective_error_table_cubic(fault, s: Schedule) -> PauliProduct:
    """Table I: effect of an X/Z fault during the cubic-lattice preparation on |psi_{G_c}>."""
    loc, p = fault
    p = p.upper()
    if p == "Y":
        return effective_error_table_cubic((loc, "X"), s).times(effective_error_table_cubic((loc, "Z"), s))
    spec = s.graph.lattice
    n = s.graph.n_vertices
    L, LM = spec.L, spec.L * spec.M

    def zset(*labels):
        return frozenset(j for j in labels if 1 <= j <= n)

    t = _slot_after(s, loc)
    op = s.ops[t]
    if loc.qubit == Q:
        if op.kind is OpKind.INIT_Q:
            return PauliProduct(zs=frozenset() if p == "X" else zset(1))
        if op.kind is OpKind.MEAS_Q:
            raise ValueError("no location after the final ancilla measurement")
        k = op.block
        if p == "Z":
            if op.kind is OpKind.H:
                return PauliProduct(zs=zset(k + 1) if k < n else frozenset())
            return PauliProduct(zs=zset(k))
        if op.kind is OpKind.CZ:
            if op.qubit == k - LM:
                return PauliProduct(zs=zset(k - LM, k - 1))
            return PauliProduct(zs=zset(k - LM, k - L, k - 1))
        if op.kind is OpKind.CX:
            return PauliProduct(zs=zset(k + 1))
        return PauliProduct(zs=zset(k))
    i = loc.qubit
    if op.kind is OpKind.MEAS_DATA:
        raise ValueError("no location after a data measurement")
    if p == "Z":
        return PauliProduct(zs=frozenset([i]) if t >= s.cx_index[i] else frozenset())
    # the grid clock puts block A_j at step j
    step = op.time_step
    if step < i + L:
        return PauliProduct(frozenset([i]), zset(i + L, i + LM))
    if step < i + LM:
        return PauliProduct(frozenset([i]), zset(i + LM))
    return PauliProduct(frozenset([i]), frozenset())


def flips_from_fault_protA(fault, s: Schedule) -> FlipSet:
    """Table I entries followed by the Z measure-out of V_c minus V_bcc."""
    if s.protocol != "A":
        raise ValueError("not a Protocol A schedule")
    return _measure_out(s, effective_error_table_cubic(fault, s))


# --- bcc table (Protocol B) ---------------------------------------------------

def _grid_neighbour(spec: LatticeSpec, k: int, axis: int, step: int) -> int | None:
    c = list(spec.coords(k))
    c[axis] += step
    if not (0 <= c[0] < spec.L and 0 <= c[1] < spec.M and 0 <= c[2] < spec.N):
        return None
    if not spec.is_present(*c):
        return None
    return spec.label(*c)


def effective_error_table_bcc(fault, s: Schedule) -> PauliProduct:
    """Table II: effect of an X/Z fault during Protocol B on |psi_{G_bcc}>.

    Indices k-1, k+1, k-L, ... name grid neighbours; those absent or off the
    grid count as out of range.
    """
    loc, p = fault
    p = p.upper()
    if p == "Y":
        return effective_error_table_bcc((loc, "X"), s).times(effective_error_table_bcc((loc, "Z"), s))
    spec = s.lattice

    def nb(k, axis, step):
        return _grid_neighbour(spec, k, axis, step)

    def zset(*labels):
        return frozenset(j for j in labels if j is not None)

    t = _slot_after(s, loc)
    op = s.ops[t]
    if loc.qubit == Q:
        kind = op.kind
        if kind is OpKind.MEAS_Q:
            raise ValueError("no location between a measurement and its reset")
        if kind in (OpKind.INIT_Q, OpKind.RESET_Q):
            # before B_1 or after a reset
            if p == "X":
                return PauliProduct()
            nxt = s.next_q_op(t + 1)
            return PauliProduct(zs=zset(s.ops[nxt].block))
        k = op.block
        plane = classify_site(spec, k).plane
        if kind is OpKind.H:
            if p == "X":
                return PauliProduct(zs=zset(k))
            after = s.next_q_op(t + 1)
            if after is None or s.ops[after].kind is OpKind.MEAS_Q:
                return PauliProduct()
            return PauliProduct(zs=zset(s.ops[after].block))
        if p == "Z":
            return PauliProduct(zs=zset(k))
        if kind is OpKind.CX:
            if plane is Plane.YZ:
                return PauliProduct()
            # boundary sites with (k, k+1) not an edge: Q is measured after B_k
            return PauliProduct(zs=zset(nb(k, 0, +1)))
        if op.qubit == nb(k, 2, -1):
            # immediately after Z_{Q,k-LM}
            if plane is Plane.YZ:
                return PauliProduct(zs=zset(nb(k, 2, -1)))
            if plane is Plane.ZX:
                return PauliProduct(zs=zset(nb(k, 2, -1), nb(k, 0, -1)))
        elif op.qubit == nb(k, 1, -1):
            # immediately after Z_{Q,k-L}
            if plane is Plane.XY:
                return PauliProduct(zs=zset(nb(k, 1, -1), nb(k, 0, -1)))
            if plane is Plane.YZ:
                return PauliProduct(zs=zset(nb(k, 2, -1), nb(k, 1, -1)))
        raise ValueError(f"location {loc} not in the bcc table")
    i = loc.qubit
    if op.kind is OpKind.MEAS_DATA:
        raise ValueError("no location after a data measurement")
    if p == "Z":
        return PauliProduct(zs=frozenset([i]) if t >= s.cx_index[i] else frozenset())
    plane = classify_site(spec, i).plane
    L, LM = spec.L, spec.L * spec.M
    step = op.time_step
    up_y, up_z = nb(i, 1, +1), nb(i, 2, +1)
    if step < i + L:
        row = {Plane.XY: (up_y,), Plane.YZ: (up_y, up_z), Plane.ZX: (up_z,)}[plane]
    elif step < i + LM:
        row = {Plane.XY: (), Plane.YZ: (up_z,), Plane.ZX: (up_z,)}[plane]
    else:
        row = ()
    return PauliProduct(frozenset([i]), zset(*row))


def flips_from_fault_protB(fault, s: Schedule) -> FlipSet:
    if s.protocol != "B":
        raise ValueError("not a Protocol B schedule")
    pp = effective_error_table_bcc(fault, s)
    return FlipSet(pp.zs, pp.xs)


def flips_from_fault(fault, s: Schedule) -> FlipSet:
    """Dispatch to the table that fits the schedule."""
    if s.protocol == "B":
        return flips_from_fault_protB(fault, s)
    if s.protocol == "A":
        return flips_from_fault_protA(fault, s)
    return flips_from_fault_general(fault, s)


# --- error models -----------------------------------------------------------------

EM3_P = 1e-3
MODEL_KINDS = ("EM1", "EM2", "EM3a", "EM3b")


@dataclass(frozen=True)
class ErrorModel:
    """Circuit noise p plus, depending on the variant, losses or delay-line noise.

    EM1: depolarising noise only.  EM2: EM1 plus loss of each data qubit with
    probability p_loss.  EM3a: p = 1e-3 plus dephasing eta_z per time step in
    the delay line.  EM3b: p = 1e-3 plus loss rate eta_loss per time step.
    """

    kind: str
    p: float
    p_loss: float = 0.0
    eta_z: float = 0.0
    eta_loss: float = 0.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown error model {self.kind!r}")
        for name in ("p", "p_loss", "eta_z", "eta_loss"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} = {v} outside [0, 1]")
        if self.kind.startswith("EM3") and self.p != EM3_P:
            raise ValueError(f"{self.kind} fixes p = {EM3_P}")
        unused = {"EM1": ("p_loss", "eta_z", "eta_loss"), "EM2": ("eta_z", "eta_loss"),
                  "EM3a": ("p_loss", "eta_loss"), "EM3b": ("p_loss", "eta_z")}[self.kind]
        for name in unused:
            if getattr(self, name):
                raise ValueError(f"{self.kind} takes no {name}")

    @classmethod
    def em1(cls, p: float) -> "ErrorModel":
        return cls("EM1", p)

    @classmethod
    def em2(cls, p: float, p_loss: float) -> "ErrorModel":
        return cls("EM2", p, p_loss=p_loss)

    @classmethod
    def em3a(cls, eta_z: float) -> "ErrorModel":
        return cls("EM3a", EM3_P, eta_z=eta_z)

    @classmethod
    def em3b(cls, eta_loss: float) -> "ErrorModel":
        return cls("EM3b", EM3_P, eta_loss=eta_loss)

    @property
    def eta(self) -> float:
        return self.eta_z if self.kind == "EM3a" else self.eta_loss

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p, "p_loss": self.p_loss,
                "eta_z": self.eta_z, "eta_loss": self.eta_loss}

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorModel":
        extra = set(d) - {"kind", "p", "p_loss", "eta_z", "eta_loss"}
        if extra:
            raise ValueError(f"unknown error model keys {sorted(extra)}")
        kind = d["kind"]
        p = d.get("p", EM3_P if kind.startswith("EM3") else None)
        if p is None:
            raise ValueError(f"{kind} needs p")
        return cls(kind, float(p), float(d.get("p_loss", 0.0)), float(d.get("eta_z", 0.0)),
                   float(d.get("eta_loss", 0.0)))


# --- noise channels -----------------------------------------------------------------

PAULIS_1Q = ("X", "Y", "Z")
# the 15 non-identity two-qubit Paulis, first factor on the ancilla
PAULIS_2Q = tuple((a, b) for a in "IXYZ" for b in "IXYZ" if (a, b) != ("I", "I"))


@dataclass(frozen=True)
class Channel:
    """One noise site.  ``kind`` is "1q" (3 Paulis), "2q" (15 Paulis) or "flip"
    (a fixed Pauli standing in for the 2/3 of depolarising that flips a readout)."""

    kind: str
    position: int
    qubits: tuple
    prob: float
    step: int
    pauli: str | None = None

    @property
    def data(self) -> int | None:
        """Data qubit of a gate channel, if any."""
        d = [q for q in self.qubits if q != Q]
        return d[0] if d else None

    def paulis(self) -> tuple:
        if self.kind == "1q":
            return tuple(((self.qubits[0], a),) for a in PAULIS_1Q)
        if self.kind == "2q":
            q, j = self.qubits
            return tuple(tuple((x, a) for x, a in ((q, a), (j, b)) if a != "I") for a, b in PAULIS_2Q)
        return (((self.qubits[0], self.pauli),),)


def noise_channels(s: Schedule, m: ErrorModel) -> list[Channel]:
    """Depolarising channels after inits, resets, H and two-qubit gates, and
    readout flips before every measurement, in schedule order."""
    p = m.p
    chans: list[Channel] = []
    last_on: dict[int, int] = {}
    skip_init = m.kind.startswith("EM3")
    for t, op in enumerate(s.ops):
        k = op.kind
        if k is OpKind.MEAS_Q:
            chans.append(Channel("flip", last_on[Q] + 1, (Q,), 2 * p / 3, op.time_step, "X"))
        elif k is OpKind.MEAS_DATA:
            # X flips a Z readout, Z flips an X readout
            pauli = "X" if op.basis == "Z" else "Z"
            chans.append(Channel("flip", last_on[op.qubit] + 1, (op.qubit,), 2 * p / 3, op.time_step, pauli))
        elif k in (OpKind.INIT_Q, OpKind.RESET_Q, OpKind.H):
            chans.append(Channel("1q", t + 1, (Q,), p, op.time_step))
        elif k is OpKind.INIT_DATA:
            if not skip_init:
                chans.append(Channel("1q", t + 1, (op.qubit,), p, op.time_step))
        elif k in (OpKind.CX, OpKind.CZ):
            chans.append(Channel("2q", t + 1, (Q, op.qubit), p, op.time_step))
        if op.touches(Q):
            last_on[Q] = t
        if op.qubit is not None and op.touches(op.qubit):
            last_on[op.qubit] = t
    return [c for c in chans if c.prob > 0]


@dataclass(frozen=True)
class FaultEvent:
    position: int
    paulis: tuple                 # ((qubit, "X"|"Y"|"Z"), ...) on one or two qubits


@dataclass(frozen=True)
class FaultSet:
    """Everything sampled for one trial.

    ``loss_steps`` gives, for qubits lost inside their delay line, the first
    time step at which they are gone; ``kicked`` lists those whose loss also
    dephases the ancilla's later gates (the random half of the cases).
    """

    pauli_events: tuple = ()
    lost_qubits: frozenset = frozenset()
    loss_steps: tuple = ()        # sorted (qubit, step) pairs
    kicked: frozenset = frozenset()
    dephased: frozenset = frozenset()

    def is_empty(self) -> bool:
        return not (self.pauli_events or self.lost_qubits or self.dephased)


def _make_rng(seed) -> np.random.Generator:
    if seed is None:
        raise ValueError("a seed is required; unseeded sampling is not reproducible")
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def dephasing_flip_prob(eta_z: float, ell) -> np.ndarray:
    """Parity of ell independent Bernoulli(eta_z) Z events."""
    return (1.0 - (1.0 - 2.0 * eta_z) ** np.asarray(ell, dtype=float)) / 2.0


def loss_prob(eta_loss: float, ell) -> np.ndarray:
    return 1.0 - np.exp(-eta_loss * np.asarray(ell, dtype=float))


def sample_delay_flips(s: Schedule, eta_z: float, seed) -> FlipSet:
    """Aggregate delay-line dephasing: qubit i flips with the exact parity probability."""
    if s.protocol != "B":
        raise ValueError("delay-line dephasing is defined for Protocol B schedules")
    rng = _make_rng(seed)
    ell = delay_exposures(s)
    qubits = list(s.ordering)
    hit = rng.random(len(qubits)) < dephasing_flip_prob(eta_z, [ell[i] for i in qubits])
    return FlipSet.of(z=[q for q, h in zip(qubits, hit) if h])


class NoiseSampler:
    """Precomputed channel table for one (schedule, model) pair.

    Every channel's outcomes are stored as flip vectors over the decoded
    lattice's columns, so one trial reduces to choosing which mechanisms
    fire and XOR-ing their rows.  The same draws also feed ``fault_set``,
    which rebuilds the trial at the level of individual Pauli events.
    """

    def __init__(self, s: Schedule, m: ErrorModel, trace_out: bool = False):
        if s.protocol not in ("A", "B"):
            raise ValueError("noise sampling needs a Protocol A or B schedule")
        if m.kind.startswith("EM3") and s.protocol != "B":
            raise ValueError(f"{m.kind} is defined for Protocol B")
        self.s, self.m = s, m
        # trace_out: a qubit lost mid-delay leaves its earlier partners dephased
        # (a coin-flip X at the loss point) and its later gates still disturb Q
        self.trace_out = trace_out
        self.channels = noise_channels(s, m)
        self.probs = np.array([c.prob for c in self.channels])
        self.counts = np.array([len(c.paulis()) for c in self.channels], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.counts)])
        self.labels = np.array(sorted(set(s.survivor_map.values())), dtype=np.int64)
        self.column = {int(v): k for k, v in enumerate(self.labels)}
        self.data = tuple(s.ordering)
        self._single: dict = {}
        self._kick_rows: dict = {}

    @property
    def n_columns(self) -> int:
        return len(self.labels)

    # single-fault flips as sorted column arrays
    def _flip_cols(self, position: int, qubit: int, pauli: str) -> np.ndarray:
        key = (position, qubit, pauli)
        if key not in self._single:
            if pauli == "Y":
                cols = np.setxor1d(self._flip_cols(position, qubit, "X"),
                                   self._flip_cols(position, qubit, "Z"))
            else:
                fs = flips_from_fault((FaultLocation(position, qubit), pauli), self.s)
                cols = np.array(sorted(self.column[self.s.survivor_map[v]] for v in fs.z_flips),
                                dtype=np.int64)
            self._single[key] = cols
        return self._single[key]

    def _event_cols(self, position: int, paulis) -> np.ndarray:
        cols = np.zeros(0, dtype=np.int64)
        for q, a in paulis:
            cols = np.setxor1d(cols, self._flip_cols(position, q, a))
        return cols

    def _rows(self, ancilla_only: bool) -> sp.csr_matrix:
        indptr, indices = [0], []
        for c in self.channels:
            for ev in c.paulis():
                if ancilla_only:
                    ev = tuple((q, a) for q, a in ev if q == Q)
                cols = self._event_cols(c.position, ev)
                indices.extend(cols.tolist())
                indptr.append(len(indices))
        data = np.ones(len(indices), dtype=np.int32)
        return sp.csr_matrix((data, indices, indptr), shape=(int(self.offsets[-1]), self.n_columns))

    @cached_property
    def mechanisms(self) -> sp.csr_matrix:
        """Row per (channel, Pauli): the columns it flips."""
        return self._rows(False)

    @cached_property
    def ancilla_part(self) -> sp.csr_matrix:
        """Same rows with the data factor dropped, for gates on already-lost qubits
        when ``trace_out`` is set."""
        return self._rows(True)

    @cached_property
    def exposures(self) -> np.ndarray:
        ell = delay_exposures(self.s)
        return np.array([ell[i] for i in self.data], dtype=np.int64)

    @cached_property
    def _gate_channels(self) -> dict:
        """Per data qubit: indices and steps of its two-qubit gate channels."""
        out: dict[int, list] = {}
        for k, c in enumerate(self.channels):
            if c.kind == "2q":
                out.setdefault(c.data, []).append((k, c.step))
        return {q: (np.array([k for k, _ in v]), np.array([t for _, t in v])) for q, v in out.items()}

    def _kick_position(self, q: int, step: int) -> int:
        """Slot of qubit q just before the first time step at which it is gone."""
        last = None
        for t in self.s.touching(q):
            if self.s.ops[t].time_step < step:
                last = t
        return last + 1

    # --- drawing -----------------------------------------------------------------
    def _draw(self, rng: np.random.Generator) -> dict:
        """All random choices of one trial, in a fixed order."""
        n = len(self.channels)
        pmax = float(self.probs.max()) if n else 0.0
        if pmax > 0:
            cand = np.sort(rng.choice(n, rng.binomial(n, pmax), replace=False))
            fired = cand[rng.random(len(cand)) * pmax < self.probs[cand]]
        else:
            fired = np.zeros(0, dtype=np.int64)
        which = rng.integers(0, self.counts[fired]) if len(fired) else np.zeros(0, dtype=np.int64)
        out = {"fired": fired, "which": which, "lost": np.zeros(0, dtype=np.int64),
               "loss_steps": np.zeros(0, dtype=np.int64), "kicked": np.zeros(0, dtype=bool),
               "dephased": np.zeros(0, dtype=np.int64)}
        m = self.m
        nq = len(self.data)
        if m.kind == "EM2" and m.p_loss > 0:
            out["lost"] = np.flatnonzero(rng.random(nq) < m.p_loss)
        elif m.kind == "EM3a" and m.eta_z > 0:
            out["dephased"] = np.flatnonzero(rng.random(nq) < dephasing_flip_prob(m.eta_z, self.exposures))
        elif m.kind == "EM3b" and m.eta_loss > 0:
            ell = self.exposures
            lost = np.flatnonzero(rng.random(nq) < loss_prob(m.eta_loss, ell))
            # loss step within the delay line: geometric, truncated to 1..ell
            q = -math.expm1(-m.eta_loss)
            u = rng.random(len(lost))
            cdf_end = -np.expm1(ell[lost] * math.log1p(-q)) if q < 1 else np.ones(len(lost))
            tau = 1 + np.floor(np.log1p(-u * cdf_end) / math.log1p(-q)) if q < 1 else np.ones(len(lost))
            tau = np.clip(tau.astype(np.int64), 1, ell[lost])
            out["lost"] = lost
            out["loss_steps"] = tau
            out["kicked"] = rng.random(len(lost)) < 0.5
        return out

    def _lost_labels(self, lost_idx) -> list[int]:
        return [self.data[k] for k in lost_idx]

    def _loss_start(self, draw) -> dict:
        """Qubit -> first time step without it, for in-delay losses."""
        out = {}
        for k, tau in zip(draw["lost"], draw["loss_steps"]):
            i = self.data[k]
            out[i] = self.s.ops[self.s.cx_index[i]].time_step + int(tau)
        return out

    def _erased_columns(self, lost_labels) -> set:
        """Columns erased by the lost data qubits (Protocol A spreads measure-out losses)."""
        surv = self.s.survivor_map
        cols = set()
        for i in lost_labels:
            if i in surv:
                cols.add(self.column[surv[i]])
            else:
                cols.update(self.column[surv[j]] for j in self.s.graph.neighbours(i) if j in surv)
        return cols

    def sample(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """One trial as (flip vector, erased mask) over the lattice columns."""
        draw = self._draw(rng)
        rows = self.offsets[draw["fired"]] + draw["which"]
        flips = np.zeros(self.n_columns, dtype=np.int64)
        start = self._loss_start(draw) if len(draw["loss_steps"]) else {}
        if start:
            use_q = np.zeros(len(rows), dtype=bool)
            for k, ch in enumerate(draw["fired"]):
                c = self.channels[ch]
                if c.kind == "2q" and c.data in start and c.step >= start[c.data]:
                    use_q[k] = True
            M = self.mechanisms
            for r in rows[~use_q]:
                flips[M.indices[M.indptr[r]:M.indptr[r + 1]]] ^= 1
            if self.trace_out:
                A = self.ancilla_part
                for r in rows[use_q]:
                    flips[A.indices[A.indptr[r]:A.indptr[r + 1]]] ^= 1
                for i, kicked in zip(self._lost_labels(draw["lost"]), draw["kicked"]):
                    if kicked:
                        flips[self._flip_cols(self._kick_position(i, start[i]), i, "X")] ^= 1
        else:
            M = self.mechanisms
            for r in rows:
                flips[M.indices[M.indptr[r]:M.indptr[r + 1]]] ^= 1
        for k in draw["dephased"]:
            flips[self.column[self.s.survivor_map[self.data[k]]]] ^= 1
        erased = np.zeros(self.n_columns, dtype=bool)
        if len(draw["lost"]):
            erased[list(self._erased_columns(self._lost_labels(draw["lost"])))] = True
        return flips.astype(np.uint8), erased

    def fault_set(self, rng: np.random.Generator) -> FaultSet:
        """The same draw as ``sample``, expressed as individual fault events."""
        draw = self._draw(rng)
        start = self._loss_start(draw)
        events = []
        for ch, w in zip(draw["fired"], draw["which"]):
            c = self.channels[ch]
            ev = c.paulis()[w]
            if c.kind == "2q" and c.data in start and c.step >= start[c.data]:
                # the gate never happens; what is left acts on the lost qubit only
                ev = tuple((q, a) for q, a in ev if q == Q) if self.trace_out else ()
            if ev:
                events.append(FaultEvent(c.position, ev))
        lost = self._lost_labels(draw["lost"])
        return FaultSet(tuple(events), frozenset(lost), tuple(sorted(start.items())),
                        frozenset(i for i, k in zip(lost, draw["kicked"]) if k and self.trace_out),
                        frozenset(self.data[k] for k in draw["dephased"]))


def sample_faults(s: Schedule, m: ErrorModel, seed) -> FaultSet:
    """Sample one trial's faults, losses and delay-line noise."""
    return NoiseSampler(s, m).fault_set(_make_rng(seed))


def flips_from_faults(s: Schedule, fs: FaultSet) -> tuple[FlipSet, frozenset]:
    """Compose the table entries of every event; returns (flips, erased lattice labels).

    Flips and erasures are reported in the decoded lattice's labels.
    """
    total = EMPTY
    for ev in fs.pauli_events:
        for q, a in ev.paulis:
            total = compose(total, flips_from_fault((FaultLocation(ev.position, q), a), s))
    starts = dict(fs.loss_steps)
    for i in sorted(fs.kicked):
        sampler_pos = None
        for t in s.touching(i):
            if s.ops[t].time_step < starts[i]:
                sampler_pos = t + 1
        total = compose(total, flips_from_fault((FaultLocation(sampler_pos, i), "X"), s))
    total = compose(total, FlipSet.of(z=fs.dephased))
    surv = s.survivor_map
    erased = set()
    for i in fs.lost_qubits:
        if i in surv:
            erased.add(surv[i])
        else:
            erased.update(surv[j] for j in s.graph.neighbours(i) if j in surv)
    return FlipSet.of(z=(surv[v] for v in total.z_flips)), frozenset(erased)
