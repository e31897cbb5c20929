"""Operation schedules for the sequential preparation algorithms and protocols.

The ancilla is qubit ``Q = 0``; data qubits keep their graph labels (>= 1).
A fault position ``p`` means "immediately before op ``p``", so the slot
after op ``t`` is position ``t + 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .graphs import Graph, LatticeSpec, build_bcc, build_cubic, DEFAULT_OFFSET

Q = 0


class OpKind(str, Enum):
    INIT_Q = "InitQPlus"
    INIT_DATA = "InitDataZero"
    CX = "CX_Q"
    CZ = "CZ_Q"
    H = "H_Q"
    MEAS_Q = "MeasureQ_Z"
    RESET_Q = "ResetQPlus"
    CORR_Z = "CorrectionZ"
    MEAS_DATA = "MeasureData"


# ops that act physically on the ancilla
Q_KINDS = frozenset({OpKind.INIT_Q, OpKind.CX, OpKind.CZ, OpKind.H, OpKind.MEAS_Q, OpKind.RESET_Q})
# ops that act physically on their data qubit (corrections are classical)
DATA_KINDS = frozenset({OpKind.INIT_DATA, OpKind.CX, OpKind.CZ, OpKind.MEAS_DATA})


@dataclass(frozen=True)
class Op:
    kind: OpKind
    qubit: int | None = None
    time_step: int = 0
    basis: str | None = None
    cond: int | None = None
    block: int | None = None

    def touches(self, q: int) -> bool:
        if q == Q:
            return self.kind in Q_KINDS
        return self.kind in DATA_KINDS and self.qubit == q

    def __str__(self) -> str:
        if self.kind is OpKind.MEAS_DATA:
            return f"{self.kind.value}({self.qubit},{self.basis})"
        if self.qubit is None:
            return self.kind.value
        return f"{self.kind.value}({self.qubit})"


class FaultLocation(NamedTuple):
    position: int
    qubit: int


@dataclass(frozen=True, eq=False)
class Schedule:
    """Time-ordered op list plus the bookkeeping the error tables need.

    ``graph`` is the graph the algorithm is applied to; ``target`` is the
    graph on the qubits that survive to the final X-measurement.
    """

    ops: tuple[Op, ...]
    graph: Graph
    ordering: tuple[int, ...]
    blocks: dict[int, tuple[int, int]]
    algorithm: str
    protocol: str | None = None
    target: Graph | None = None
    lattice: LatticeSpec | None = None
    measured_out: frozenset = field(default_factory=frozenset)
    survivor_map: dict[int, int] | None = None

    def __post_init__(self):
        if self.target is None:
            object.__setattr__(self, "target", self.graph)

    @property
    def data_qubits(self) -> tuple[int, ...]:
        return self.ordering

    @property
    def survivors(self) -> tuple[int, ...]:
        return tuple(q for q in self.ordering if q not in self.measured_out)

    @cached_property
    def cx_index(self) -> dict[int, int]:
        return {op.qubit: t for t, op in enumerate(self.ops) if op.kind is OpKind.CX}

    @cached_property
    def cz_by_qubit(self) -> dict[int, list[tuple[int, int]]]:
        """data qubit -> [(op index, block label)] of its CZ gates, in time order."""
        out: dict[int, list[tuple[int, int]]] = {q: [] for q in self.ordering}
        for t, op in enumerate(self.ops):
            if op.kind is OpKind.CZ:
                out[op.qubit].append((t, op.block))
        return out

    @cached_property
    def measure_index(self) -> dict[int, int]:
        return {op.qubit: t for t, op in enumerate(self.ops) if op.kind is OpKind.MEAS_DATA}

    @cached_property
    def init_index(self) -> dict[int, int]:
        return {op.qubit: t for t, op in enumerate(self.ops) if op.kind is OpKind.INIT_DATA}

    @cached_property
    def q_op_indices(self) -> np.ndarray:
        return np.array([t for t, op in enumerate(self.ops) if op.kind in Q_KINDS], dtype=np.int64)

    @cached_property
    def position_of(self) -> dict[int, int]:
        """ordering position (1-based) of each data label."""
        return {v: k + 1 for k, v in enumerate(self.ordering)}

    def prev_q_op(self, position: int) -> int | None:
        """Index of the last ancilla op strictly before ``position``."""
        idx = np.searchsorted(self.q_op_indices, position) - 1
        return int(self.q_op_indices[idx]) if idx >= 0 else None

    def next_q_op(self, position: int) -> int | None:
        idx = np.searchsorted(self.q_op_indices, position)
        return int(self.q_op_indices[idx]) if idx < len(self.q_op_indices) else None

    def touching(self, q: int) -> list[int]:
        return [t for t, op in enumerate(self.ops) if op.touches(q)]

    def to_json(self) -> str:
        doc = {
            "algorithm": self.algorithm,
            "protocol": self.protocol,
            "graph": {"labels": list(self.graph.labels), "edges": sorted(map(list, self.graph.edges))},
            "ordering": list(self.ordering),
            "lattice": None if self.lattice is None else
            [self.lattice.L, self.lattice.M, self.lattice.N, list(self.lattice.parity_offset)],
            "ops": [
                {"kind": op.kind.value, "qubit": op.qubit, "time_step": op.time_step,
                 "basis": op.basis, "cond": op.cond, "block": op.block}
                for op in self.ops
            ],
        }
        return json.dumps(doc, sort_keys=True)


def schedule_from_json(text: str) -> Schedule:
    """Rebuild a schedule from :meth:`Schedule.to_json` output."""
    doc = json.loads(text)
    spec = None
    if doc["lattice"] is not None:
        L, M, N, off = doc["lattice"]
        spec = LatticeSpec(L, M, N, tuple(off))
    if doc["protocol"] == "A":
        s = schedule_protocolA(spec.L, spec.M, spec.N, spec.parity_offset)
    elif doc["protocol"] == "B":
        s = schedule_protocolB(spec.L, spec.M, spec.N, spec.parity_offset)
    else:
        g = Graph(tuple(doc["graph"]["labels"]), frozenset(tuple(e) for e in doc["graph"]["edges"]))
        build = schedule_algorithm1 if doc["algorithm"] == "alg1" else schedule_algorithm2
        s = build(g, doc["ordering"])
    ops = tuple(Op(OpKind(o["kind"]), o["qubit"], o["time_step"], o["basis"], o["cond"], o["block"])
                for o in doc["ops"])
    if ops != s.ops:
        raise ValueError("op list does not match the schedule implied by its metadata")
    return s


def _blocks_from_ops(ops: list[Op]) -> dict[int, tuple[int, int]]:
    blocks: dict[int, list[int]] = {}
    for t, op in enumerate(ops):
        if op.block is not None and op.kind in (OpKind.CZ, OpKind.CX, OpKind.H):
            blocks.setdefault(op.block, []).append(t)
    return {k: (v[0], v[-1] + 1) for k, v in blocks.items()}


def _consecutive_clock(order, measured_after):
    """One step per block, one per measure+reset pair."""
    steps, t = {}, 1
    for j in order:
        steps[j] = t
        t += 2 if j in measured_after else 1
    return steps, {j: steps[j] + 1 for j in measured_after}


def _algorithm1_ops(g: Graph, order: list[int], clock=None) -> list[Op]:
    pos = {v: k for k, v in enumerate(order)}
    n = len(order)
    measured_after = {
        order[k] for k in range(n) if k == n - 1 or not g.has_edge(order[k], order[k + 1])
    }
    block_step, meas_step = (clock or _consecutive_clock)(order, measured_after)
    ops = [Op(OpKind.INIT_Q, None, 0)]
    for k, j in enumerate(order):
        t = block_step[j]
        ops.append(Op(OpKind.INIT_DATA, j, t, block=j))
        # earlier neighbours other than the immediate predecessor, ascending
        earlier = sorted((pos[i], i) for i in g.neighbours(j) if pos[i] < k - 1)
        for _, i in earlier:
            ops.append(Op(OpKind.CZ, i, t, block=j))
        ops.append(Op(OpKind.CX, j, t, block=j))
        ops.append(Op(OpKind.H, None, t, block=j))
        if j in measured_after:
            tm = meas_step[j]
            m = len(ops)
            ops.append(Op(OpKind.MEAS_Q, None, tm, block=j))
            ops.append(Op(OpKind.CORR_Z, j, tm, cond=m, block=j))
            if k < n - 1:
                ops.append(Op(OpKind.RESET_Q, None, tm, block=j))
    return ops


def schedule_algorithm1(g: Graph, ordering=None) -> Schedule:
    """Measurement-based sequential preparation of |psi_G>."""
    order = g.relabel_order(g.labels if ordering is None else ordering)
    ops = _algorithm1_ops(g, order)
    return Schedule(tuple(ops), g, tuple(order), _blocks_from_ops(ops), "alg1")


def schedule_algorithm2(g: Graph, ordering=None) -> Schedule:
    """Measurement-free sequential preparation of |psi_G>."""
    order = g.relabel_order(g.labels if ordering is None else ordering)
    pos = {v: k for k, v in enumerate(order)}
    ops = [Op(OpKind.INIT_Q, None, 0)]
    for k, j in enumerate(order):
        t = k + 1
        ops.append(Op(OpKind.INIT_DATA, j, t, block=j))
        earlier = {i for i in g.neighbours(j) if pos[i] < k}
        if k > 0:
            # Z_{Q,j-1} cancels against the edge (j-1, j) when it is present
            earlier ^= {order[k - 1]}
        for _, i in sorted((pos[i], i) for i in earlier):
            ops.append(Op(OpKind.CZ, i, t, block=j))
        ops.append(Op(OpKind.CX, j, t, block=j))
        ops.append(Op(OpKind.H, None, t, block=j))
    if order:
        ops.append(Op(OpKind.CZ, order[-1], len(order) + 1))
    return Schedule(tuple(ops), g, tuple(order), _blocks_from_ops(ops), "alg2")


def _grid_clock(order, measured_after):
    """Protocol B clock: block B_j runs at step j (its grid label).

    A measure+reset pair takes the slot of the absent label that follows
    it; at a row wrap with no absent label it shares the slot of its block.
    """
    present = set(order)
    block_step = {j: j for j in order}
    meas_step = {}
    last = order[-1]
    for j in measured_after:
        if j == last:
            meas_step[j] = j + 1
        else:
            meas_step[j] = j + 1 if (j + 1) not in present else j
    return block_step, meas_step


def schedule_protocolB(L: int, M: int, N: int, parity_offset=DEFAULT_OFFSET) -> Schedule:
    """Algorithm 1 run directly on the bcc lattice, then X-measurement of every qubit."""
    spec = LatticeSpec(L, M, N, parity_offset)
    g = build_bcc(spec)
    order = list(g.labels)
    ops = _algorithm1_ops(g, order, clock=_grid_clock)
    t_end = ops[-1].time_step + 1
    ops += [Op(OpKind.MEAS_DATA, i, t_end, basis="X") for i in order]
    return Schedule(tuple(ops), g, tuple(order), _blocks_from_ops(ops), "alg1", "B", g, spec,
                    frozenset(), {i: i for i in order})


def schedule_protocolA(L: int, M: int, N: int, parity_offset=DEFAULT_OFFSET) -> Schedule:
    """Algorithm 1 on an (L+2)x(M+2)x(N+2) cubic lattice, Z measure-out to the bcc lattice,
    then X-measurement of the survivors."""
    spec = LatticeSpec(L, M, N, parity_offset)
    gc = build_cubic(L + 2, M + 2, N + 2)
    big = gc.lattice
    order = list(gc.labels)
    ops = _algorithm1_ops(gc, order, clock=lambda o, m: ({j: j for j in o}, {j: j + 1 for j in m}))
    survivor_map = {}
    for v in order:
        x, y, z = big.coords(v)
        if 1 <= x <= L and 1 <= y <= M and 1 <= z <= N and spec.is_present(x - 1, y - 1, z - 1):
            survivor_map[v] = spec.label(x - 1, y - 1, z - 1)
    measured_out = frozenset(v for v in order if v not in survivor_map)
    t_out = ops[-1].time_step + 1
    for i in order:
        if i in measured_out:
            m = len(ops)
            ops.append(Op(OpKind.MEAS_DATA, i, t_out, basis="Z"))
            for j in sorted(gc.neighbours(i)):
                if j in survivor_map:
                    ops.append(Op(OpKind.CORR_Z, j, t_out, cond=m))
    ops += [Op(OpKind.MEAS_DATA, i, t_out + 1, basis="X") for i in order if i in survivor_map]
    surv = tuple(survivor_map)
    target = Graph(surv, frozenset(e for e in gc.edges if e[0] in survivor_map and e[1] in survivor_map))
    return Schedule(tuple(ops), gc, tuple(order), _blocks_from_ops(ops), "alg1", "A", target, spec,
                    measured_out, survivor_map)


def delay_exposure(s: Schedule, i: int) -> int:
    """Time steps qubit ``i`` spends between its creation and its last gate."""
    if i not in s.cx_index:
        raise KeyError(f"unknown data qubit {i}")
    created = s.ops[s.cx_index[i]].time_step
    czs = s.cz_by_qubit[i]
    last = s.ops[czs[-1][0]].time_step if czs else created
    return last - created


def delay_exposures(s: Schedule) -> dict[int, int]:
    return {i: delay_exposure(s, i) for i in s.ordering}


def fault_locations(s: Schedule) -> list[FaultLocation]:
    """Every distinct fault slot: the gap after each op touching a qubit.

    Slots after a terminal measurement, and the gap inside a
    measure+reset pair, are omitted since faults there act on nothing.
    """
    locs = []
    per_qubit: dict[int, list[int]] = {Q: []}
    per_qubit.update({q: [] for q in s.ordering})
    for t, op in enumerate(s.ops):
        if op.kind in Q_KINDS:
            per_qubit[Q].append(t)
        if op.kind in DATA_KINDS:
            per_qubit[op.qubit].append(t)
    for q, idx in per_qubit.items():
        for a, t in enumerate(idx):
            kind = s.ops[t].kind
            nxt = idx[a + 1] if a + 1 < len(idx) else None
            if kind in (OpKind.MEAS_Q, OpKind.MEAS_DATA):
                if nxt is None or s.ops[nxt].kind is OpKind.RESET_Q:
                    continue
            locs.append(FaultLocation(t + 1, q))
    return sorted(locs)
