import json
import math

import numpy as np
import pytest

from seqcluster.cli import main, optimal_points
from seqcluster.montecarlo import CSV_COLUMNS, read_csv, rows_to_csv


def small_runfile(tmp_path, **extra):
    doc = {"protocol": "B", "lattice": {"L": [3, 5]}, "model": {"kind": "EM1", "p": [0.004, 0.006]},
           "stop": {"trials": 60, "chunk": 30}, "seed": 5,
           "output": {"csv": "out.csv", "json": "out.json", "checkpoint": "out.ckpt.json"}}
    doc.update(extra)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc))
    return path


def test_verify_tables_protB(capsys):
    assert main(["verify", "--tables", "protB", "--L", "3"]) == 0
    out = capsys.readouterr().out
    assert "bcc table" in out and "0 mismatches" in out and "X_Q" in out


def test_verify_algorithms(capsys):
    assert main(["verify", "--algorithms", "--max-n", "3", "--random-pairs", "10"]) == 0
    assert "all checks passed" in capsys.readouterr().out


def test_verify_even_L_rejected(capsys):
    assert main(["verify", "--tables", "protB", "--L", "4"]) == 2
    assert "L must be odd" in capsys.readouterr().err
    assert main(["verify", "--tables", "protB", "--L", "9"]) == 2
    assert main(["verify"]) == 2
    assert main(["verify", "--bogus"]) == 2


def test_schedule_dump(tmp_path, capsys):
    assert main(["schedule", "protB", "--L", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["protocol"] == "B" and doc["lattice"][:3] == [3, 3, 3] and doc["ops"]
    g = tmp_path / "g.json"
    g.write_text(json.dumps({"n": 3, "edges": [[1, 2], [2, 3]]}))
    assert main(["schedule", "alg1", "--graph", str(g), "-o", str(tmp_path / "s.json")]) == 0
    assert json.loads((tmp_path / "s.json").read_text())["algorithm"] == "alg1"
    assert main(["schedule", "alg2"]) == 2


def test_sweep_outputs_and_determinism(tmp_path, capsys):
    rf = small_runfile(tmp_path)
    assert main(["sweep", str(rf), "--jobs", "1"]) == 0
    first = (tmp_path / "out.csv").read_bytes()
    assert first.decode().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert len(read_csv(tmp_path / "out.csv")) == 4
    meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
    assert "started" in meta and meta["seed"] == 5
    assert "[4/4]" in capsys.readouterr().err
    # a fresh run without the checkpoint reproduces the same bytes
    (tmp_path / "out.ckpt.json").unlink()
    assert main(["sweep", str(rf), "--jobs", "1", "--quiet"]) == 0
    assert (tmp_path / "out.csv").read_bytes() == first


def test_sweep_seed_from_environment(tmp_path, monkeypatch):
    rf = small_runfile(tmp_path, output={"csv": "a.csv"})
    monkeypatch.setenv("SEQCLUSTER_SEED", "77")
    assert main(["sweep", str(rf), "--jobs", "1", "--quiet"]) == 0
    assert {r["seed"] for r in read_csv(tmp_path / "a.csv")} == {77}


def test_sweep_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"protocol": "B"}))
    assert main(["sweep", str(bad)]) == 2
    rf = small_runfile(tmp_path)
    (tmp_path / "out.ckpt.json").write_text(json.dumps({"schema": "seqcluster-checkpoint/1",
                                                         "grid": "other", "entries": {}}))
    assert main(["sweep", str(rf), "--quiet"]) == 2
    assert "different sweep grid" in capsys.readouterr().err


def test_sweep_optimal_L(tmp_path, capsys):
    rf = small_runfile(tmp_path, model={"kind": "EM3a", "eta": [0.05]},
                       lattice={"L": [3, 5, 7, 9]}, search={"kind": "optimal_L", "patience": 1})
    assert main(["sweep", str(rf), "--jobs", "1", "--quiet"]) == 0
    doc = json.loads((tmp_path / "out.json").read_text())
    assert doc["optimal_L"][0]["L_star"] in (3, 5, 7, 9)
    assert "L_*" in capsys.readouterr().out


def _threshold_csv(path, p_loss=0.0, p_th=0.004):
    rows = []
    for L in (5, 7, 9, 11):
        d = (L + 1) / 2
        for p in p_th * np.linspace(0.75, 1.25, 5):
            p = float(p)
            pb = 0.1 + 20 * (p - p_th) * d ** (1 / 1.1)
            rows.append({"protocol": "B", "L": L, "M": L, "N": L, "offset": "110", "model": "EM2",
                         "p": p, "p_loss": p_loss, "eta_z": 0.0, "eta_loss": 0.0, "seed": 1,
                         "trials": 10**5, "failures": int(pb * 1e5), "primal_failures": 0,
                         "dual_failures": 0, "p_bar": pb, "ci_low": pb - 0.002, "ci_high": pb + 0.002,
                         "censored": False})
    path.write_text(rows_to_csv(rows))
    return path


def test_fit_threshold(tmp_path, capsys):
    csv = _threshold_csv(tmp_path / "t.csv")
    out = tmp_path / "fit.json"
    assert main(["fit", "--threshold", str(csv), "--json", str(out)]) == 0
    assert abs(json.loads(out.read_text())["threshold"]["p_th"] - 0.004) < 1e-6
    assert "p_th" in capsys.readouterr().out


def test_fit_threshold_empty(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text(",".join(CSV_COLUMNS) + "\n")
    assert main(["fit", "--threshold", str(empty)]) != 0
    assert "insufficient points" in capsys.readouterr().err
    junk = tmp_path / "junk.csv"
    junk.write_text("a,b\n1,2\n")
    assert main(["fit", "--threshold", str(junk)]) == 2


def test_fit_loss_extrapolate(tmp_path, capsys):
    csvs = [str(_threshold_csv(tmp_path / f"l{k}.csv", q, 0.004 * (1 - q / 0.2)))
            for k, q in enumerate((0.0, 0.02, 0.04, 0.06))]
    out = tmp_path / "loss.json"
    assert main(["fit", "--loss-extrapolate", *csvs, "--json", str(out)]) == 0
    doc = json.loads(out.read_text())["loss_threshold"]
    assert abs(doc["p_loss_threshold"] - 0.2) < 1e-3 and doc["monotone"]


def test_fit_delay_and_break_even(tmp_path, capsys):
    rows = []
    c1, c2 = 0.096, 3.37
    for eta in (1e-4, 2e-4, 5e-4, 1e-3):
        star = math.exp(-(c1 * eta ** -0.5 + c2))
        L_star = 2 * round(0.05 * eta ** -0.5) + 1
        for L, pb in ((L_star - 2, 2 * star), (L_star, star), (L_star + 2, 1.5 * star)):
            rows.append({"protocol": "B", "L": L, "M": L, "N": L, "offset": "110", "model": "EM3b",
                         "p": 0.001, "p_loss": 0.0, "eta_z": 0.0, "eta_loss": eta, "seed": 1,
                         "trials": 10**6, "failures": 1, "primal_failures": 0, "dual_failures": 0,
                         "p_bar": pb, "ci_low": pb * 0.95, "ci_high": pb * 1.05, "censored": False})
    csv = tmp_path / "d.csv"
    csv.write_text(rows_to_csv(rows))
    assert optimal_points(read_csv(csv))[0][3] == 2 * round(0.05 * 100) + 1
    out = tmp_path / "d.json"
    assert main(["fit", "--delay", str(csv), "--break-even", "1e-3", "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert abs(doc["delay"]["c_prime"] - c1) < 1e-6
    assert float(f"{doc['break_even']['eta']:.1e}") == 7.4e-4
    assert main(["fit", "--break-even", "1e-3"]) == 2
    assert main(["fit", "--break-even", "0.5", "--coeffs", "0.03", "2.9"]) == 2


def test_report_writes_png_and_csv(tmp_path, capsys):
    csv = _threshold_csv(tmp_path / "t.csv")
    assert main(["report", str(csv), "--out", str(tmp_path / "rep")]) == 0
    files = {p.suffix for p in (tmp_path / "rep").iterdir()}
    assert files == {".png", ".csv"}
    wide = next((tmp_path / "rep").glob("*.csv")).read_text().splitlines()
    assert wide[0].startswith("p,p_bar_L5") and len(wide) == 6
    png = next((tmp_path / "rep").glob("*.png")).read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "seqcluster", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
