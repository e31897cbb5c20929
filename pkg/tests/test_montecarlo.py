import numpy as np
import pytest

from seqcluster import montecarlo as mc
from seqcluster.errors import ErrorModel
from seqcluster.graphs import LatticeSpec
from seqcluster.montecarlo import (
    CheckpointMismatch, Estimate, RunConfig, StopRule, estimate_rate, grid_hash, make_grid,
    optimal_L_sweep, read_csv, rows_to_csv, run_chunk, run_trial, sweep, trial_rng, wilson_interval,
)


def cfg(L=5, p=3e-3, seed=11, trials=200, protocol="B", model=None):
    return RunConfig(protocol, LatticeSpec(L, L, L), model or ErrorModel.em1(p), seed,
                     StopRule.fixed(trials, 50))


def test_trial_streams_are_independent_of_each_other():
    a = trial_rng(5, 17).random(4)
    assert np.array_equal(a, trial_rng(5, 17).random(4))
    assert not np.array_equal(a, trial_rng(5, 18).random(4))
    assert not np.array_equal(a, trial_rng(6, 17).random(4))


def test_chunk_counts_do_not_depend_on_split():
    c = cfg()
    whole = run_chunk(c, 0, 120)
    parts = np.add(run_chunk(c, 0, 50), run_chunk(c, 50, 70))
    assert whole == tuple(parts)


def test_run_trial_matches_chunk():
    c = cfg(p=6e-3)
    union = sum(run_trial(c, k).failed for k in range(40))
    assert union == run_chunk(c, 0, 40)[0]


def test_zero_noise_never_fails():
    c = cfg(p=0.0, trials=100)
    assert estimate_rate(c).failures == 0
    assert not run_trial(c, 0, reference=True).failed


def test_stop_rule_validation():
    with pytest.raises(ValueError):
        StopRule(10, 0, 5)
    with pytest.raises(ValueError):
        StopRule(chunk=0)
    assert StopRule.fixed(30).chunk == 30


def test_stop_rule_ends_on_a_chunk_boundary():
    c = RunConfig("B", LatticeSpec(3, 3, 3), ErrorModel.em1(0.02), 3, StopRule(0, 10, 10_000, 25))
    est = estimate_rate(c)
    assert est.failures >= 10 and est.trials % 25 == 0 and not est.censored
    # the same stopping point is reached chunk by chunk
    fails = 0
    for start in range(0, est.trials, 25):
        assert fails < 10
        fails += run_chunk(c, start, 25)[0]
    assert fails == est.failures


def test_censored_when_failures_short():
    est = estimate_rate(RunConfig("B", LatticeSpec(3, 3, 3), ErrorModel.em1(1e-4), 1,
                                  StopRule(50, 100, 100, 50)))
    assert est.trials == 100 and est.censored


def test_parallel_matches_serial():
    c = cfg(trials=300)
    assert estimate_rate(c, jobs=2) == estimate_rate(c, jobs=1)


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0 and 0.03 < hi < 0.04
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and abs((lo + hi) / 2 - 0.5) < 1e-12
    assert wilson_interval(0, 0) == (0.0, 1.0)
    e = Estimate(1000, 100)
    assert e.p_bar == 0.1 and abs(e.sigma - np.sqrt(0.09 / 1000)) < 5e-4
    with pytest.raises(ValueError):
        Estimate(10, 11)


def test_failure_rate_falls_with_L_below_threshold():
    rates = [estimate_rate(cfg(L, 2e-3, seed=99, trials=4000)).p_bar for L in (5, 7, 9)]
    assert rates[0] > rates[1] > rates[2]


def test_loss_only_union_rate_grows():
    lo = estimate_rate(cfg(5, model=ErrorModel.em2(0.0, 0.02), trials=300)).p_bar
    hi = estimate_rate(cfg(5, model=ErrorModel.em2(0.0, 0.3), trials=300)).p_bar
    assert lo < hi


def test_sweep_resumes_from_checkpoint(tmp_path, monkeypatch):
    grid = make_grid("B", [3, 5], "EM1", [3e-3, 5e-3], seed=4, stop=StopRule.fixed(100, 50))
    ck = tmp_path / "ck.json"
    first = sweep(grid, checkpoint=ck)

    def boom(*a, **k):
        raise AssertionError("recomputed a checkpointed point")

    monkeypatch.setattr(mc, "estimate_rate", boom)
    assert sweep(grid, checkpoint=ck) == first
    with pytest.raises(CheckpointMismatch):
        sweep(grid[:2], checkpoint=ck)


def test_checkpoint_survives_interruption(tmp_path, monkeypatch):
    grid = make_grid("B", [3], "EM1", [3e-3, 4e-3, 5e-3], seed=4, stop=StopRule.fixed(60, 30))
    ck = tmp_path / "ck.json"
    real = mc.estimate_rate
    calls = []

    def flaky(c, jobs=1, progress=None):
        if len(calls) == 2:
            raise KeyboardInterrupt
        calls.append(c)
        return real(c, jobs)

    monkeypatch.setattr(mc, "estimate_rate", flaky)
    with pytest.raises(KeyboardInterrupt):
        sweep(grid, checkpoint=ck)
    monkeypatch.setattr(mc, "estimate_rate", real)
    assert sweep(grid, checkpoint=ck) == sweep(grid)


def test_csv_is_deterministic_and_round_trips(tmp_path):
    grid = make_grid("A", [3], "EM1", [4e-3], seed=8, stop=StopRule.fixed(80, 40))
    text = rows_to_csv(sweep(grid))
    assert text == rows_to_csv(sweep(grid))
    path = tmp_path / "out.csv"
    path.write_text(text)
    row = read_csv(path)[0]
    assert row["protocol"] == "A" and row["L"] == 3 and row["trials"] == 80
    assert row["p"] == 4e-3 and isinstance(row["censored"], bool)


def test_grid_hash_and_order():
    grid = make_grid("B", [5, 7], "EM2", [1e-3], [0.0, 0.1], seed=1)
    assert [(c.model.p_loss, c.spec.L) for c in grid] == [(0.0, 5), (0.0, 7), (0.1, 5), (0.1, 7)]
    assert grid_hash(grid) != grid_hash(grid[::-1])
    assert RunConfig.from_dict(grid[1].to_dict()) == grid[1]
    with pytest.raises(ValueError):
        make_grid("B", [5], "EM9", [1e-3])
    with pytest.raises(ValueError):
        cfg(L=4)


def test_optimal_L_sweep_stops_early():
    groups = [make_grid("B", [3, 5, 7, 9, 11], "EM1", [0.02], seed=2, stop=StopRule.fixed(100, 50))]
    rows, results = optimal_L_sweep(groups, patience=1)
    # far above threshold the rate rises immediately
    assert results[0].L_star == 3 and len(rows) == 2
