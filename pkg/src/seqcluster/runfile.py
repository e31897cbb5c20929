"""JSON run files: schema, validation and expansion into sweep grids.

A run file describes one sweep::

    {
      "protocol": "B",
      "lattice": {"L": [5, 7, 9, 11]},
      "model": {"kind": "EM1", "p": [0.003, 0.0035, 0.004]},
      "stop": {"trials": 200000},
      "seed": 7,
      "output": {"csv": "protB.csv"}
    }

Rates are plain decimals.  Relative output paths resolve against the run
file's directory.  With ``"search": {"kind": "optimal_L"}`` the L list is
scanned per model point until the logical error rate turns upwards.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .errors import MODEL_KINDS
from .graphs import DEFAULT_OFFSET
from .montecarlo import RunConfig, StopRule, make_grid

SEED_ENV = "SEQCLUSTER_SEED"

_rate_list = {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["protocol", "lattice", "model", "stop", "seed"],
    "properties": {
        "description": {"type": "string"},
        "protocol": {"enum": ["A", "B"]},
        "lattice": {
            "type": "object",
            "additionalProperties": False,
            "required": ["L"],
            "properties": {
                "L": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "offset": {"type": "array", "items": {"enum": [0, 1]}, "minItems": 3, "maxItems": 3},
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(MODEL_KINDS)},
                "p": _rate_list,
                "p_loss": _rate_list,
                "eta": _rate_list,
            },
        },
        "stop": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["trials"],
                 "properties": {"trials": {"type": "integer", "minimum": 1},
                                "chunk": {"type": "integer", "minimum": 1}}},
                {"type": "object", "additionalProperties": False,
                 "properties": {"min_trials": {"type": "integer", "minimum": 0},
                                "min_failures": {"type": "integer", "minimum": 0},
                                "max_trials": {"type": "integer", "minimum": 1},
                                "chunk": {"type": "integer", "minimum": 1}}},
            ],
        },
        "seed": {"type": "integer", "minimum": 0},
        "search": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["optimal_L"]},
                "patience": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "csv": {"type": "string"},
                "json": {"type": "string"},
                "checkpoint": {"type": "string"},
            },
        },
    },
}


class RunFileError(ValueError):
    """The run file is malformed or inconsistent."""


@dataclass(frozen=True)
class RunFile:
    doc: dict
    base: Path

    @property
    def protocol(self) -> str:
        return self.doc["protocol"]

    @property
    def seed(self) -> int:
        return int(self.doc["seed"])

    @property
    def search(self) -> dict | None:
        return self.doc.get("search")

    def output(self, key: str) -> Path | None:
        path = self.doc.get("output", {}).get(key)
        return None if path is None else self.base / path

    def stop_rule(self) -> StopRule:
        st = dict(self.doc["stop"])
        if "trials" in st:
            return StopRule.fixed(st["trials"], st.get("chunk", 1000))
        try:
            return StopRule(**st)
        except ValueError as exc:
            raise RunFileError(str(exc)) from None

    def groups(self) -> list[list[RunConfig]]:
        """Configs grouped by model point; each group spans the L list."""
        m = self.doc["model"]
        kind = m["kind"]
        needs = {"EM1": ("p",), "EM2": ("p", "p_loss"), "EM3a": ("eta",), "EM3b": ("eta",)}[kind]
        for key in ("p", "p_loss", "eta"):
            if key in needs and key not in m:
                raise RunFileError(f"model {kind} needs {key!r}")
            if key not in needs and key in m:
                raise RunFileError(f"model {kind} takes no {key!r}")
        Ls = self.doc["lattice"]["L"]
        if any(L % 2 == 0 for L in Ls):
            raise RunFileError("L must be odd for memory runs")
        if len(set(Ls)) != len(Ls):
            raise RunFileError("duplicate L values")
        offset = tuple(self.doc["lattice"].get("offset", DEFAULT_OFFSET))
        try:
            grid = make_grid(self.protocol, Ls, kind, m.get("p", (None,)), m.get("p_loss", (0.0,)),
                             m.get("eta", (0.0,)), self.seed, self.stop_rule(), offset)
        except ValueError as exc:
            raise RunFileError(str(exc)) from None
        n = len(Ls)
        return [grid[k:k + n] for k in range(0, len(grid), n)]

    def configs(self) -> list[RunConfig]:
        return [c for g in self.groups() for c in g]


def parse_runfile(doc: dict, base: str | Path = ".", env: dict | None = None) -> RunFile:
    """Validate ``doc`` and apply the seed override from the environment."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise RunFileError(f"{where}: {exc.message}") from None
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise RunFileError(f"{SEED_ENV} must be an integer") from None
        if seed < 0:
            raise RunFileError(f"{SEED_ENV} must be nonnegative")
        doc = {**doc, "seed": seed}
    rf = RunFile(doc, Path(base))
    rf.groups()  # surface semantic errors now
    return rf


def load_runfile(path: str | Path, env: dict | None = None) -> RunFile:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise RunFileError(f"{path}: not valid JSON ({exc})") from None
    return parse_runfile(doc, path.parent, env)
