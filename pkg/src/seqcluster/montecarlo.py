"""Seeded Monte Carlo trials, logical error rate estimates and resumable sweeps.

Trial ``k`` of a run draws from a Philox stream keyed by the master seed
with ``k`` in the counter, so every trial is reproducible on its own and
aggregate counts do not depend on how trials are spread over workers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .circuits import schedule_protocolA, schedule_protocolB
from .decoder import BatchDecoder, DecodeOutcome, decode
from .errors import ErrorModel, NoiseSampler
from .graphs import DEFAULT_OFFSET, LatticeSpec

CSV_VERSION = 1
CHECKPOINT_SCHEMA = "seqcluster-checkpoint/1"
CSV_COLUMNS = ("protocol", "L", "M", "N", "offset", "model", "p", "p_loss", "eta_z", "eta_loss",
               "seed", "trials", "failures", "primal_failures", "dual_failures",
               "p_bar", "ci_low", "ci_high", "censored")


@dataclass(frozen=True)
class StopRule:
    """Run until both minima are met, or until ``max_trials``.

    The rule is checked only at chunk boundaries, which keeps the final
    counts independent of the number of workers.
    """

    min_trials: int = 10**6
    min_failures: int = 10**4
    max_trials: int = 10**7
    chunk: int = 1000

    def __post_init__(self):
        if self.chunk < 1 or self.min_trials < 0 or self.min_failures < 0:
            raise ValueError("stop rule counts must be nonnegative and chunk positive")
        if self.max_trials < self.min_trials:
            raise ValueError("max_trials must be at least min_trials")

    @classmethod
    def fixed(cls, trials: int, chunk: int = 1000) -> "StopRule":
        """Exactly ``trials`` trials regardless of failures."""
        return cls(trials, 0, trials, min(chunk, max(trials, 1)))

    def to_dict(self) -> dict:
        return {"min_trials": self.min_trials, "min_failures": self.min_failures,
                "max_trials": self.max_trials, "chunk": self.chunk}


@dataclass(frozen=True)
class RunConfig:
    protocol: str
    spec: LatticeSpec
    model: ErrorModel
    master_seed: int
    stop: StopRule = field(default_factory=StopRule)

    def __post_init__(self):
        if self.protocol not in ("A", "B"):
            raise ValueError(f"protocol must be 'A' or 'B', got {self.protocol!r}")
        if self.model.kind.startswith("EM3") and self.protocol != "B":
            raise ValueError(f"{self.model.kind} is defined for Protocol B")
        if int(self.master_seed) != self.master_seed or self.master_seed < 0:
            raise ValueError("master_seed must be a nonnegative integer")
        for side in (self.spec.L, self.spec.M, self.spec.N):
            if side % 2 == 0:
                raise ValueError("memory runs need odd L, M, N")

    def to_dict(self) -> dict:
        s = self.spec
        return {"protocol": self.protocol, "lattice": [s.L, s.M, s.N, list(s.parity_offset)],
                "model": self.model.to_dict(), "seed": int(self.master_seed), "stop": self.stop.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        L, M, N, off = d["lattice"]
        return cls(d["protocol"], LatticeSpec(L, M, N, tuple(off)), ErrorModel.from_dict(d["model"]),
                   int(d["seed"]), StopRule(**d["stop"]))

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Counter-mode stream for one trial."""
    key = np.random.SeedSequence(int(master_seed)).generate_state(2, np.uint64)
    counter = np.array([0, 0, int(trial_index), 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@lru_cache(maxsize=16)
def _pipeline(protocol: str, spec: LatticeSpec, model: ErrorModel):
    build = schedule_protocolA if protocol == "A" else schedule_protocolB
    s = build(spec.L, spec.M, spec.N, spec.parity_offset)
    sampler = NoiseSampler(s, model)
    # force the lazy tables so workers share the cost once
    _ = sampler.mechanisms
    return sampler, BatchDecoder(spec)


def _sample_trial(sampler: NoiseSampler, master_seed: int, index: int):
    rng = trial_rng(master_seed, index)
    flips, erased = sampler.sample(rng)
    if erased.any():
        # an erased outcome is a fair coin
        flips[erased] = rng.integers(0, 2, int(erased.sum()), dtype=np.uint8)
    return flips, erased


def run_trial(cfg: RunConfig, trial_index: int, reference: bool = False) -> DecodeOutcome:
    """Sample, translate and decode one trial.

    ``reference`` swaps the batched PyMatching decoder for the exact
    supercheck decoder; both see the same flips.
    """
    sampler, dec = _pipeline(cfg.protocol, cfg.spec, cfg.model)
    flips, erased = _sample_trial(sampler, cfg.master_seed, trial_index)
    if reference:
        labels = sampler.labels
        return decode(set(labels[flips == 1].tolist()), cfg.spec, labels[erased].tolist())
    res = dec.decode_batch(flips[None, :], erased[None, :] if erased.any() else None)[0]
    return DecodeOutcome(bool(res[0]), bool(res[1]))


def run_chunk(cfg: RunConfig, start: int, count: int) -> tuple[int, int, int]:
    """(union, primal, dual) failure counts for trials start..start+count-1."""
    sampler, dec = _pipeline(cfg.protocol, cfg.spec, cfg.model)
    n = sampler.n_columns
    flips = np.zeros((count, n), dtype=np.uint8)
    erased = np.zeros((count, n), dtype=bool)
    for k in range(count):
        flips[k], erased[k] = _sample_trial(sampler, cfg.master_seed, start + k)
    res = dec.decode_batch(flips, erased if erased.any() else None)
    return int((res[:, 0] | res[:, 1]).sum()), int(res[:, 0].sum()), int(res[:, 1].sum())


def wilson_interval(failures: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ph = failures / trials
    denom = 1 + z * z / trials
    centre = (ph + z * z / (2 * trials)) / denom
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if failures == 0 else max(0.0, centre - half)
    hi = 1.0 if failures == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class Estimate:
    trials: int
    failures: int
    primal_failures: int = 0
    dual_failures: int = 0
    censored: bool = False

    def __post_init__(self):
        if not 0 <= self.failures <= self.trials:
            raise ValueError("failures must lie in [0, trials]")

    @property
    def p_bar(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.failures, self.trials)

    @property
    def sigma(self) -> float:
        """Gaussian-equivalent width of the Wilson interval."""
        lo, hi = self.ci
        return (hi - lo) / (2 * 1.959963984540054)

    def to_dict(self) -> dict:
        lo, hi = self.ci
        return {"trials": self.trials, "failures": self.failures,
                "primal_failures": self.primal_failures, "dual_failures": self.dual_failures,
                "p_bar": self.p_bar, "ci_low": lo, "ci_high": hi, "censored": self.censored}


def _chunk_worker(args):
    cfg_dict, start, count = args
    return run_chunk(RunConfig.from_dict(cfg_dict), start, count)


def estimate_rate(cfg: RunConfig, jobs: int = 1,
                  progress: Callable[[int, int], None] | None = None) -> Estimate:
    """Run chunks of trials until the stop rule is met.

    Chunks are processed in index order; with ``jobs > 1`` a wave of chunks
    runs in parallel and any chunk past the stopping point is discarded.
    """
    stop = cfg.stop
    trials = fails = fp = fd = 0
    next_start = 0

    def done() -> bool:
        return trials >= stop.max_trials or (trials >= stop.min_trials and fails >= stop.min_failures)

    def plan(n):
        nonlocal next_start
        out = []
        for _ in range(n):
            if next_start >= stop.max_trials:
                break
            count = min(stop.chunk, stop.max_trials - next_start)
            out.append((next_start, count))
            next_start += count
        return out

    pool = ProcessPoolExecutor(jobs) if jobs > 1 else None
    try:
        while not done():
            wave = plan(max(jobs, 1))
            if not wave:
                break
            if pool is None:
                results = [run_chunk(cfg, a, c) for a, c in wave]
            else:
                results = list(pool.map(_chunk_worker, [(cfg.to_dict(), a, c) for a, c in wave]))
            for (a, c), (u, p, d) in zip(wave, results):
                if done():
                    break
                trials += c
                fails += u
                fp += p
                fd += d
            if progress:
                progress(trials, fails)
    finally:
        if pool is not None:
            pool.shutdown()
    censored = fails < stop.min_failures
    return Estimate(trials, fails, fp, fd, censored)


# --- sweeps ------------------------------------------------------------------------

class CheckpointMismatch(ValueError):
    pass


def grid_hash(configs: Iterable[RunConfig]) -> str:
    h = hashlib.sha256()
    for c in configs:
        h.update(c.config_hash().encode())
    return h.hexdigest()[:16]


def result_row(cfg: RunConfig, est: Estimate) -> dict:
    s, m = cfg.spec, cfg.model
    row = {"protocol": cfg.protocol, "L": s.L, "M": s.M, "N": s.N,
           "offset": "".join(map(str, s.parity_offset)), "model": m.kind, "p": m.p,
           "p_loss": m.p_loss, "eta_z": m.eta_z, "eta_loss": m.eta_loss, "seed": cfg.master_seed}
    row.update(est.to_dict())
    return row


def _load_checkpoint(path: Path, ghash: str) -> dict:
    if not path.exists():
        return {}
    doc = json.loads(path.read_text())
    if doc.get("schema") != CHECKPOINT_SCHEMA:
        raise CheckpointMismatch(f"{path}: unknown checkpoint schema {doc.get('schema')!r}")
    if doc.get("grid") != ghash:
        raise CheckpointMismatch(f"{path}: checkpoint belongs to a different sweep grid")
    return doc["entries"]


def _save_checkpoint(path: Path, ghash: str, entries: dict):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps({"schema": CHECKPOINT_SCHEMA, "grid": ghash, "entries": entries},
                              sort_keys=True, indent=1))
    os.replace(tmp, path)


class _CheckpointedEstimates:
    """Estimates keyed by config hash, persisted after every new grid point."""

    def __init__(self, configs: list[RunConfig], checkpoint: str | Path | None, jobs: int):
        self.ghash = grid_hash(configs)
        self.path = Path(checkpoint) if checkpoint else None
        self.entries = _load_checkpoint(self.path, self.ghash) if self.path else {}
        self.jobs = jobs

    def __call__(self, cfg: RunConfig) -> Estimate:
        key = cfg.config_hash()
        if key in self.entries:
            e = self.entries[key]
            return Estimate(e["trials"], e["failures"], e["primal_failures"], e["dual_failures"],
                            e["censored"])
        est = estimate_rate(cfg, jobs=self.jobs)
        self.entries[key] = est.to_dict()
        if self.path:
            _save_checkpoint(self.path, self.ghash, self.entries)
        return est


def sweep(configs: list[RunConfig], checkpoint: str | Path | None = None, jobs: int = 1,
          progress: Callable[[int, RunConfig, Estimate], None] | None = None) -> list[dict]:
    """Estimate every grid point, in grid order, resuming from ``checkpoint`` if given."""
    get = _CheckpointedEstimates(configs, checkpoint, jobs)
    rows = []
    for k, cfg in enumerate(configs):
        est = get(cfg)
        if progress:
            progress(k, cfg, est)
        rows.append(result_row(cfg, est))
    return rows


def optimal_L_sweep(groups: list[list[RunConfig]], checkpoint: str | Path | None = None,
                    jobs: int = 1, patience: int = 2,
                    progress: Callable[[int, RunConfig, Estimate], None] | None = None):
    """Optimal-L search for each group of configs differing only in L.

    Returns (rows, results): a CSV row for every L actually run, and one
    ``fitting.OptimalL`` per group.  The checkpoint covers the full grid, so
    an interrupted search resumes where it stopped.
    """
    from .fitting import find_optimal_L

    flat = [c for g in groups for c in g]
    get = _CheckpointedEstimates(flat, checkpoint, jobs)
    rows, results = [], []
    k = 0
    for group in groups:
        by_L = {c.spec.L: c for c in group}

        def estimate(L):
            nonlocal k
            cfg = by_L[L]
            est = get(cfg)
            if progress:
                progress(k, cfg, est)
            k += 1
            rows.append(result_row(cfg, est))
            return est

        results.append(find_optimal_L(estimate, sorted(by_L), patience))
    return rows, results


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict], columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def read_csv(path: str | Path) -> list[dict]:
    """Rows of a results CSV with numeric fields converted."""
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            row = {}
            for k, v in r.items():
                if k in ("protocol", "model", "offset"):
                    row[k] = v
                elif k == "censored":
                    row[k] = v in ("1", "True", "true")
                else:
                    try:
                        row[k] = int(v)
                    except ValueError:
                        row[k] = float(v)
            out.append(row)
    return out


def make_grid(protocol: str, L_values, model_kind: str, p_values=(None,), p_loss_values=(0.0,),
              eta_values=(0.0,), seed: int = 0, stop: StopRule | None = None,
              offset=DEFAULT_OFFSET) -> list[RunConfig]:
    """Cartesian grid in (model parameters, L) order."""
    stop = stop or StopRule()
    grid = []
    for p in p_values:
        for pl in p_loss_values:
            for eta in eta_values:
                if model_kind == "EM1":
                    m = ErrorModel.em1(p)
                elif model_kind == "EM2":
                    m = ErrorModel.em2(p, pl)
                elif model_kind == "EM3a":
                    m = ErrorModel.em3a(eta)
                elif model_kind == "EM3b":
                    m = ErrorModel.em3b(eta)
                else:
                    raise ValueError(f"unknown model {model_kind!r}")
                for L in L_values:
                    grid.append(RunConfig(protocol, LatticeSpec(L, L, L, tuple(offset)), m, seed, stop))
    return grid
