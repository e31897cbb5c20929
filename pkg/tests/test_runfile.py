import json

import pytest

from seqcluster.runfile import SEED_ENV, RunFileError, load_runfile, parse_runfile

BASE = {"protocol": "B", "lattice": {"L": [5, 7]}, "model": {"kind": "EM1", "p": [0.003, 0.004]},
        "stop": {"trials": 1000}, "seed": 3}


def doc(**changes):
    d = json.loads(json.dumps(BASE))
    d.update(changes)
    return d


def test_groups_span_L():
    rf = parse_runfile(doc(), env={})
    groups = rf.groups()
    assert [[c.spec.L for c in g] for g in groups] == [[5, 7], [5, 7]]
    assert [g[0].model.p for g in groups] == [0.003, 0.004]
    assert rf.stop_rule().max_trials == 1000 and rf.seed == 3


@pytest.mark.parametrize("bad", [
    {"protocol": "C"},
    {"lattice": {"L": []}},
    {"model": {"kind": "EM1", "p": [1.5]}},
    {"stop": {"trials": 0}},
    {"seed": -1},
    {"extra": 1},
    {"search": {"kind": "other"}},
])
def test_schema_violations(bad):
    with pytest.raises(RunFileError):
        parse_runfile(doc(**bad), env={})


@pytest.mark.parametrize("bad", [
    {"lattice": {"L": [4, 5]}},
    {"lattice": {"L": [5, 5]}},
    {"model": {"kind": "EM2", "p": [0.001]}},
    {"model": {"kind": "EM3a", "eta": [0.001], "p": [0.001]}},
    {"protocol": "A", "model": {"kind": "EM3b", "eta": [0.001]}},
    {"stop": {"min_trials": 100, "max_trials": 10}},
])
def test_semantic_errors(bad):
    with pytest.raises(RunFileError):
        parse_runfile(doc(**bad), env={})


def test_seed_override_from_environment():
    assert parse_runfile(doc(), env={SEED_ENV: "42"}).seed == 42
    with pytest.raises(RunFileError):
        parse_runfile(doc(), env={SEED_ENV: "x"})


def test_paths_resolve_next_to_the_file(tmp_path):
    d = doc(output={"csv": "out/r.csv"})
    path = tmp_path / "run.json"
    path.write_text(json.dumps(d))
    rf = load_runfile(path, env={})
    assert rf.output("csv") == tmp_path / "out" / "r.csv"
    assert rf.output("json") is None
    path.write_text("{")
    with pytest.raises(RunFileError):
        load_runfile(path)


def test_shipped_recipes_parse():
    from pathlib import Path
    recipes = sorted((Path(__file__).parent.parent / "recipes").glob("*.json"))
    assert recipes
    for r in recipes:
        assert load_runfile(r, env={}).configs()
