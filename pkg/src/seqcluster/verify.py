"""Oracle suites: correctness of the preparation algorithms, the fault tables,
and locality of effective errors.

Each suite returns a :class:`Report` whose rows count the faults checked per
table row, so a report shows which rows were exercised and which failed.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .circuits import (
    Q, OpKind, Schedule, fault_locations, schedule_algorithm1, schedule_algorithm2,
    schedule_protocolA, schedule_protocolB,
)
from .errors import (
    effective_error_general, effective_error_table_bcc, effective_error_table_cubic,
    flips_from_fault_protA,
)
from .graphs import Graph, build_graph, classify_site
from .stabsim import (
    MAX_CANONICAL_QUBITS, effective_frames, minimum_weight_equivalent, minimum_weight_within,
    prepares_target, verify_effective_errors, zform_effective_errors,
)

# exact tableau runs get slow well before this
MAX_ORACLE_L = 7
MAX_ORACLE_N = 12


@dataclass
class Report:
    name: str
    checked: Counter = field(default_factory=Counter)
    failed: Counter = field(default_factory=Counter)
    examples: list = field(default_factory=list)

    def add(self, row: str, ok: bool, detail=None):
        self.checked[row] += 1
        if not ok:
            self.failed[row] += 1
            if len(self.examples) < 10:
                self.examples.append((row, detail))

    @property
    def ok(self) -> bool:
        return not self.failed and bool(self.checked)

    @property
    def total(self) -> int:
        return sum(self.checked.values())

    def merge(self, other: "Report"):
        self.checked.update(other.checked)
        self.failed.update(other.failed)
        self.examples.extend(other.examples[: 10 - len(self.examples)])

    def lines(self) -> list[str]:
        out = [f"{self.name}: {self.total} checks, {sum(self.failed.values())} mismatches"]
        for row in sorted(self.checked):
            out.append(f"  {'ok  ' if not self.failed[row] else 'FAIL'} {row}: "
                       f"{self.checked[row]} checked, {self.failed[row]} failed")
        for row, detail in self.examples:
            out.append(f"  mismatch in {row}: {detail}")
        return out


# --- algorithm correctness -----------------------------------------------------

def all_graphs(n: int):
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    for mask in range(1 << len(pairs)):
        yield build_graph(n, [e for k, e in enumerate(pairs) if mask >> k & 1])


def random_graph(rng: np.random.Generator, n: int, density: float | None = None) -> Graph:
    density = rng.uniform(0.15, 0.7) if density is None else density
    pairs = [e for e in itertools.combinations(range(1, n + 1), 2) if rng.random() < density]
    return build_graph(n, pairs)


def check_algorithms(max_n: int = 5, random_pairs: int = 200, max_random_n: int = 10,
                     seed: int = 0) -> Report:
    """Both algorithms, fault-free, on every graph up to ``max_n`` vertices
    with identity ordering and on random (graph, ordering) pairs."""
    if max_n > 6:
        raise ValueError("exhaustive search limited to 6 vertices")
    rep = Report("algorithm correctness")
    for n in range(1, max_n + 1):
        for g in all_graphs(n):
            for name, build in (("Algorithm 1", schedule_algorithm1), ("Algorithm 2", schedule_algorithm2)):
                rep.add(f"{name}, exhaustive n={n}", prepares_target(build(g)), sorted(g.edges))
    rng = np.random.default_rng(seed)
    for _ in range(random_pairs):
        n = int(rng.integers(1, max_random_n + 1))
        g = random_graph(rng, n)
        order = [int(v) for v in rng.permutation(np.arange(1, n + 1))]
        for name, build in (("Algorithm 1", schedule_algorithm1), ("Algorithm 2", schedule_algorithm2)):
            s = build(g, order)
            ok = prepares_target(s)
            if name == "Algorithm 2":
                ok = ok and not any(op.kind is OpKind.MEAS_Q for op in s.ops)
            rep.add(f"{name}, random pairs", ok, (sorted(g.edges), order))
    return rep


# --- table rows -----------------------------------------------------------------

def _q_row(s: Schedule, t: int, pauli: str, detail: str = "") -> str:
    op = s.ops[t]
    kind = op.kind
    if kind is OpKind.INIT_Q:
        where = "before the first block"
    elif kind is OpKind.RESET_Q:
        where = "after a reset"
    elif kind is OpKind.H:
        where = "after a block"
    elif kind is OpKind.CX:
        where = "between CX and H"
    elif op.block is None:
        where = "after the closing CZ"
    else:
        where = f"after CZ{detail}"
    return f"{pauli}_Q {where}"


def _data_row(s: Schedule, t: int, i: int, pauli: str, detail: str = "") -> str:
    if pauli == "Z":
        return f"Z_i {'after' if t >= s.cx_index[i] else 'before'} CX(i)"
    return f"X_i{detail}"


def table_row(s: Schedule, fault, table: str) -> str:
    """Human-readable row of the fault table a single X/Z fault falls in."""
    loc, p = fault
    t = loc.position - 1
    op = s.ops[t]
    if table == "bcc":
        spec = s.lattice
        if loc.qubit == Q:
            detail = ""
            if op.kind is OpKind.CZ:
                k = op.block
                d = k - op.qubit
                detail = "(k-LM)" if d == spec.L * spec.M else "(k-L)" if d == spec.L else f"({d})"
            if op.kind in (OpKind.CZ, OpKind.CX, OpKind.H):
                detail += f", {classify_site(spec, op.block).plane.value}"
            return _q_row(s, t, p, detail)
        i = loc.qubit
        L, LM = spec.L, spec.L * spec.M
        step = op.time_step
        span = "before B_{i+L}" if step < i + L else "before B_{i+LM}" if step < i + LM else "late"
        return _data_row(s, t, i, p, f" {span}, {classify_site(spec, i).plane.value}")
    if table == "cubic":
        spec = s.graph.lattice
        if loc.qubit == Q:
            detail = ""
            if op.kind is OpKind.CZ:
                detail = "(k-LM)" if op.block - op.qubit == spec.L * spec.M else "(k-L)"
            return _q_row(s, t, p, detail)
        i = loc.qubit
        step = op.time_step
        span = ("before A_{i+L}" if step < i + spec.L else
                "before A_{i+LM}" if step < i + spec.L * spec.M else "late")
        return _data_row(s, t, i, p, " " + span)
    if loc.qubit == Q:
        return _q_row(s, t, p)
    return _data_row(s, t, loc.qubit, p)


def _xz_faults(s: Schedule):
    return [(loc, p) for loc in fault_locations(s) for p in "XZ"]


def _check(rep: Report, s: Schedule, faults, claims, table: str, prefix: str = ""):
    ok = verify_effective_errors(s, faults, claims)
    for f, c, good in zip(faults, claims, ok):
        rep.add(prefix + table_row(s, f, table), bool(good), (f, str(c)))


def check_table_bcc(L: int = 5) -> Report:
    """Protocol B fault table on an L^3 bcc schedule, every location, X and Z."""
    _oracle_L(L)
    s = schedule_protocolB(L, L, L)
    rep = Report(f"bcc table, Protocol B, L={L}")
    faults = _xz_faults(s)
    _check(rep, s, faults, [effective_error_table_bcc(f, s) for f in faults], "bcc")
    return rep


def check_table_cubic(L: int = 5) -> Report:
    """Cubic-lattice table on the preparation stage of Protocol A, and the
    table followed by measure-out on the full Protocol A schedule."""
    _oracle_L(L)
    s = schedule_protocolA(L, L, L)
    rep = Report(f"cubic table, Protocol A, L={L}")
    prep = schedule_algorithm1(s.graph)
    faults = _xz_faults(prep)
    _check(rep, prep, faults, [effective_error_table_cubic(f, prep) for f in faults], "cubic",
           "on G_c: ")
    faults = _xz_faults(s)
    _check(rep, s, faults, [flips_from_fault_protA(f, s).as_pauli() for f in faults], "cubic",
           "after measure-out: ")
    return rep


def check_table_general(n_graphs: int = 50, max_n: int = 10, seed: int = 1) -> Report:
    """Algorithm 1 and 2 tables on random graphs with random orderings."""
    rep = Report(f"general tables, {n_graphs} random graphs")
    rng = np.random.default_rng(seed)
    for _ in range(n_graphs):
        n = int(rng.integers(2, max_n + 1))
        g = random_graph(rng, n)
        order = [int(v) for v in rng.permutation(np.arange(1, n + 1))]
        for name, build in (("Alg 1: ", schedule_algorithm1), ("Alg 2: ", schedule_algorithm2)):
            s = build(g, order)
            faults = _xz_faults(s)
            _check(rep, s, faults, [effective_error_general(f, s) for f in faults], "general", name)
    return rep


def _oracle_L(L: int):
    if L % 2 == 0:
        raise ValueError("L must be odd for memory runs")
    if not 1 <= L <= MAX_ORACLE_L:
        raise ValueError(f"oracle runs limited to L <= {MAX_ORACLE_L}")


# --- locality ---------------------------------------------------------------------

def check_locality(s: Schedule) -> Report:
    """Claim 1 ({i} u N(i)) for Algorithm 1 schedules, Claim 2 ({i} u N(i) u {i+-1}) for Algorithm 2.

    On small graphs the minimum-weight class of every single X/Y/Z fault's
    effect must contain a member inside some region; lexicographic tie-breaking
    alone may pick an equally light member elsewhere.  On lattices the unique
    pure-Z representative is checked instead.
    """
    g = s.target
    order = s.ordering
    pos = {v: k for k, v in enumerate(order)}

    def region(i):
        r = {i} | set(g.neighbours(i))
        if s.algorithm == "alg2":
            k = pos[i]
            r |= {order[j] for j in (k - 1, k + 1) if 0 <= j < len(order)}
        return r

    regions = [region(i) for i in g.labels]
    name = "Claim 1" if s.algorithm == "alg1" else "Claim 2"
    rep = Report(f"{name} locality")
    D = max((len(g.neighbours(v)) for v in g.labels), default=0)
    bound = D + 1 if s.algorithm == "alg1" else D + 3
    faults = [(loc, p) for loc in fault_locations(s) for p in "XYZ"]
    small = g.n_vertices <= MAX_CANONICAL_QUBITS
    frames = effective_frames(s, faults) if small else zform_effective_errors(s, faults)
    for f, pp in zip(faults, frames):
        if small:
            canon = minimum_weight_equivalent(g, pp)
            local = minimum_weight_within(g, pp, regions)
            ok = local is not None and local.weight == canon.weight
            detail = (f, str(canon), str(local))
        else:
            ok = any(pp.support <= r for r in regions) if pp.support else True
            local = pp
            detail = (f, str(pp))
        ok = ok and local.weight <= bound
        rep.add(f"{name}: {f[1]} on {'Q' if f[0].qubit == Q else 'data'}", ok, detail)
    return rep


def check_locality_suite(L: int = 5, n_graphs: int = 50, max_n: int = 10, seed: int = 1) -> Report:
    """Locality on the instances of the table suites."""
    rep = Report("locality")
    rep.merge(check_locality(schedule_protocolB(L, L, L)))
    rep.merge(check_locality(schedule_algorithm1(schedule_protocolA(L, L, L).graph)))
    rng = np.random.default_rng(seed)
    for _ in range(n_graphs):
        n = int(rng.integers(2, max_n + 1))
        g = random_graph(rng, n)
        order = [int(v) for v in rng.permutation(np.arange(1, n + 1))]
        for build in (schedule_algorithm1, schedule_algorithm2):
            rep.merge(check_locality(build(g, order)))
    return rep
