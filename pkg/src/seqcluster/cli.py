"""Command-line front end.

Subcommands::

    seqcluster verify   --algorithms | --tables protA|protB|general | --locality
    seqcluster schedule protA|protB|alg1|alg2 ...      dump the op list as JSON
    seqcluster sweep    RUNFILE                         Monte Carlo grid -> CSV/JSON
    seqcluster fit      --threshold CSV | --loss-extrapolate CSV | --delay CSV
    seqcluster report   CSV --out DIR                   plot-ready tables and PNGs

Exit status: 0 success, 1 verification or fit failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import os
import sys
import time
from collections import defaultdict
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _err(msg: str):
    print(f"seqcluster: error: {msg}", file=sys.stderr)


# --- verify -------------------------------------------------------------------------

def cmd_verify(args) -> int:
    from . import verify as V

    if not (args.algorithms or args.tables or args.locality):
        raise UsageError("nothing to verify: pass --algorithms, --tables or --locality")
    if args.L % 2 == 0:
        raise UsageError("L must be odd for memory runs")
    if args.L > V.MAX_ORACLE_L or args.L < 1:
        raise UsageError(f"oracle runs limited to 1 <= L <= {V.MAX_ORACLE_L}")
    if args.max_n > 6 or args.max_n < 1:
        raise UsageError("exhaustive search limited to 1 <= max-n <= 6")
    if args.graphs_max_n > V.MAX_ORACLE_N:
        raise UsageError(f"random graphs limited to {V.MAX_ORACLE_N} vertices")

    reports = []
    if args.algorithms:
        reports.append(V.check_algorithms(args.max_n, args.random_pairs, args.graphs_max_n, args.seed))
    for t in args.tables or ():
        if t == "protB":
            reports.append(V.check_table_bcc(args.L))
        elif t == "protA":
            reports.append(V.check_table_cubic(args.L))
        else:
            reports.append(V.check_table_general(args.n_graphs, args.graphs_max_n, args.seed))
    if args.locality:
        reports.append(V.check_locality_suite(args.L, args.n_graphs, args.graphs_max_n, args.seed))
    for rep in reports:
        print("\n".join(rep.lines()))
    ok = all(r.ok for r in reports)
    print("all checks passed" if ok else "MISMATCHES FOUND")
    return EXIT_OK if ok else EXIT_FAIL


# --- schedule ------------------------------------------------------------------------

def cmd_schedule(args) -> int:
    from .circuits import (schedule_algorithm1, schedule_algorithm2, schedule_protocolA,
                           schedule_protocolB)
    from .graphs import load_graph

    if args.kind in ("protA", "protB"):
        dims = [args.L, args.M or args.L, args.N or args.L]
        if any(d < 1 for d in dims):
            raise UsageError("lattice sides must be positive")
        build = schedule_protocolA if args.kind == "protA" else schedule_protocolB
        s = build(*dims, tuple(args.offset))
    else:
        if not args.graph:
            raise UsageError(f"{args.kind} needs --graph FILE")
        g = load_graph(args.graph)
        build = schedule_algorithm1 if args.kind == "alg1" else schedule_algorithm2
        s = build(g, args.order)
    text = s.to_json()
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


# --- sweep ---------------------------------------------------------------------------

def _describe(cfg) -> str:
    m = cfg.model
    if m.kind == "EM1":
        par = f"p={m.p:g}"
    elif m.kind == "EM2":
        par = f"p={m.p:g} p_loss={m.p_loss:g}"
    else:
        par = f"eta={max(m.eta_z, m.eta_loss):g}"
    return f"{cfg.protocol} L={cfg.spec.L} {m.kind} {par}"


class _Progress:
    def __init__(self, total: int):
        self.total = total
        self.start = time.monotonic()

    def __call__(self, k, cfg, est):
        done = k + 1
        elapsed = time.monotonic() - self.start
        eta = elapsed / done * (self.total - done)
        print(f"[{done}/{self.total}] {_describe(cfg)}: {est.failures}/{est.trials} "
              f"p_bar={est.p_bar:.4g}{' (censored)' if est.censored else ''}  "
              f"elapsed {elapsed:.0f}s  eta <= {eta:.0f}s", file=sys.stderr, flush=True)


def cmd_sweep(args) -> int:
    from .montecarlo import optimal_L_sweep, rows_to_csv, sweep
    from .runfile import load_runfile

    rf = load_runfile(args.runfile)
    csv_path = Path(args.csv) if args.csv else rf.output("csv")
    json_path = Path(args.json) if args.json else rf.output("json")
    ckpt = Path(args.checkpoint) if args.checkpoint else rf.output("checkpoint")
    jobs = args.jobs or os.cpu_count() or 1
    started = dt.datetime.now(dt.timezone.utc)

    groups = rf.groups()
    optimal = None
    if rf.search:
        patience = rf.search.get("patience", 2)
        rows, optimal = optimal_L_sweep(groups, ckpt, jobs, patience,
                                        None if args.quiet else _Progress(sum(map(len, groups))))
    else:
        configs = [c for g in groups for c in g]
        rows = sweep(configs, ckpt, jobs, None if args.quiet else _Progress(len(configs)))

    text = rows_to_csv(rows)
    if csv_path:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(text)
    else:
        sys.stdout.write(text)
    if json_path:
        doc = {"runfile": rf.doc, "rows": rows}
        if optimal is not None:
            doc["optimal_L"] = [dict(_model_key(g[0]), **o.to_dict()) for g, o in zip(groups, optimal)]
        json_path.parent.mkdir(parents=True, exist_ok=True)
        json_path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    if optimal is not None:
        print("eta, L_*, p_bar_*, interior", file=sys.stderr if not csv_path else sys.stdout)
        for g, o in zip(groups, optimal):
            m = g[0].model
            print(f"{max(m.eta_z, m.eta_loss):g}, {o.L_star}, {o.p_star:.4g}, {o.interior}",
                  file=sys.stderr if not csv_path else sys.stdout)
    anchor = csv_path or json_path
    if anchor:
        # timestamps live here so the primary outputs stay byte-identical
        meta = {"version": __version__, "runfile": str(Path(args.runfile).resolve()),
                "seed": rf.seed, "jobs": jobs, "started": started.isoformat(),
                "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
                "argv": sys.argv[1:]}
        Path(str(anchor) + ".meta.json").write_text(json.dumps(meta, indent=1) + "\n")
    return EXIT_OK


def _model_key(cfg) -> dict:
    m = cfg.model
    return {"protocol": cfg.protocol, "model": m.kind, "p": m.p, "p_loss": m.p_loss,
            "eta_z": m.eta_z, "eta_loss": m.eta_loss}


# --- fit -----------------------------------------------------------------------------

_KEY = ("protocol", "model", "p_loss", "eta_z", "eta_loss")


def _load_rows(path) -> list[dict]:
    from .montecarlo import CSV_COLUMNS, read_csv

    try:
        rows = read_csv(path)
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file") from None
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{path}: malformed CSV ({exc})") from None
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise UsageError(f"{path}: malformed CSV, missing columns {missing}")
    return rows


def threshold_points(rows, include_censored: bool = False) -> list[tuple]:
    return [(r["p"], r["L"], r["p_bar"], (r["ci_high"] - r["ci_low"]) / (2 * 1.959963984540054))
            for r in rows if include_censored or not r["censored"]]


def _threshold_by_loss(rows, include_censored):
    from .fitting import fit_threshold

    groups = defaultdict(list)
    for r in rows:
        groups[tuple(r[k] for k in _KEY)].append(r)
    return {key: fit_threshold(threshold_points(g, include_censored)) for key, g in sorted(groups.items())}


def optimal_points(rows) -> list[tuple]:
    """(eta, p_bar_*, sigma, L_*) per delay rate: the lowest p_bar among the L run."""
    best = {}
    for r in rows:
        eta = max(r["eta_z"], r["eta_loss"])
        if eta <= 0:
            continue
        if eta not in best or r["p_bar"] < best[eta]["p_bar"]:
            best[eta] = r
    return [(eta, r["p_bar"], (r["ci_high"] - r["ci_low"]) / (2 * 1.959963984540054), r["L"])
            for eta, r in sorted(best.items())]


def cmd_fit(args) -> int:
    from .fitting import FitError, break_even, extrapolate_loss_threshold, fit_delay, loglog_slope

    out: dict = {}
    text: list[str] = []
    if args.threshold:
        rows = _load_rows(args.threshold)
        if not rows:
            raise FitError("insufficient points: the CSV has no rows")
        fits = _threshold_by_loss(rows, args.include_censored)
        if len(fits) != 1:
            raise UsageError("--threshold expects a single model point per CSV; "
                             "use --loss-extrapolate for p_loss sweeps")
        (key, fit), = fits.items()
        out["threshold"] = dict(zip(_KEY, key), **fit.to_dict())
        text.append(f"{key[0]} {key[1]}: {fit.summary()}")
    if args.loss_extrapolate:
        rows = [r for path in args.loss_extrapolate for r in _load_rows(path)]
        fits = _threshold_by_loss(rows, args.include_censored)
        if len({key[:2] for key in fits}) != 1:
            raise UsageError("--loss-extrapolate expects one protocol and model across its CSVs")
        curve = [(key[2], f.p_th) for key, f in fits.items()]
        root = extrapolate_loss_threshold(curve)
        out["loss_threshold"] = {"curve": [list(c) for c in curve], "p_loss_threshold": root,
                                 "monotone": all(b[1] < a[1] for a, b in zip(curve, curve[1:]))}
        for q, p in curve:
            text.append(f"p_loss = {q:g}: p_th = {p:.5f}")
        text.append(f"loss threshold (p_th -> 0): {root:.4f}")
    delay = None
    if args.delay:
        pts = optimal_points(_load_rows(args.delay))
        delay = fit_delay([p[:3] for p in pts])
        slope = loglog_slope([p[0] for p in pts], [p[3] for p in pts]) if len(pts) > 1 else float("nan")
        out["delay"] = dict(delay.to_dict(), optimal=[list(p) for p in pts], L_star_slope=slope)
        text.append(delay.summary())
        text.append(f"log-log slope of L_* against eta: {slope:.3f}")
    if args.break_even is not None:
        coeffs = delay or (tuple(args.coeffs) if args.coeffs else None)
        if coeffs is None:
            raise UsageError("--break-even needs --delay CSV or --coeffs C1 C2")
        try:
            eta = break_even(coeffs, args.break_even)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        out["break_even"] = {"p_target": args.break_even, "eta": eta}
        text.append(f"break-even at p_target = {args.break_even:g}: eta = {eta:.3g}")
    if not out:
        raise UsageError("pass --threshold, --loss-extrapolate, --delay or --break-even")
    print("\n".join(text))
    if args.json:
        Path(args.json).write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


# --- report --------------------------------------------------------------------------

def cmd_report(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = _load_rows(args.csv)
    if not rows:
        raise UsageError(f"{args.csv}: no rows")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.csv).stem
    written = []

    groups = defaultdict(list)
    for r in rows:
        groups[tuple(r[k] for k in _KEY)].append(r)
    for n, (key, g) in enumerate(sorted(groups.items())):
        if key[1] in ("EM3a", "EM3b"):
            continue
        tag = f"{stem}_{key[0]}_{key[1]}" + (f"_ploss{key[2]:g}" if key[1] == "EM2" else "")
        Ls = sorted({r["L"] for r in g})
        ps = sorted({r["p"] for r in g})
        table = {(r["p"], r["L"]): r for r in g}
        # wide table: one row per p, rate and interval per L
        lines = ["p," + ",".join(f"p_bar_L{L},ci_low_L{L},ci_high_L{L}" for L in Ls)]
        for p in ps:
            cells = []
            for L in Ls:
                r = table.get((p, L))
                cells += [repr(r[c]) if r else "" for c in ("p_bar", "ci_low", "ci_high")]
            lines.append(repr(p) + "," + ",".join(cells))
        path = out / f"{tag}.csv"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)

        fig, ax = plt.subplots(figsize=(5, 4))
        for L in Ls:
            pts = sorted((p, table[p, L]) for p in ps if (p, L) in table)
            x = [p * 100 for p, _ in pts]
            y = [r["p_bar"] for _, r in pts]
            err = [[r["p_bar"] - r["ci_low"] for _, r in pts], [r["ci_high"] - r["p_bar"] for _, r in pts]]
            ax.errorbar(x, y, yerr=err, marker="o", ms=3, capsize=2, label=f"L = {L}")
        ax.set_xlabel("p (%)")
        ax.set_ylabel("logical error rate")
        ax.set_title(f"Protocol {key[0]}, {key[1]}")
        ax.legend()
        fig.tight_layout()
        png = out / f"{tag}.png"
        fig.savefig(png, dpi=120)
        plt.close(fig)
        written.append(png)

    delay_rows = [r for r in rows if r["model"] in ("EM3a", "EM3b")]
    if delay_rows:
        by_kind = defaultdict(list)
        for r in delay_rows:
            by_kind[r["model"]].append(r)
        fig, ax = plt.subplots(figsize=(5, 4))
        for kind, g in sorted(by_kind.items()):
            pts = optimal_points(g)
            path = out / f"{stem}_{kind}_optimal.csv"
            path.write_text("eta,p_bar_star,sigma,L_star\n" +
                            "".join(",".join(map(repr, p)) + "\n" for p in pts))
            written.append(path)
            ax.semilogy([p[0] ** -0.5 for p in pts], [p[1] for p in pts], "o-", label=kind)
        ax.set_xlabel("eta^(-1/2)")
        ax.set_ylabel("optimal logical error rate")
        ax.legend()
        fig.tight_layout()
        png = out / f"{stem}_delay.png"
        fig.savefig(png, dpi=120)
        plt.close(fig)
        written.append(png)
    for p in written:
        print(p)
    return EXIT_OK


# --- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seqcluster", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the stabilizer oracle suites")
    v.add_argument("--algorithms", action="store_true", help="fault-free correctness of both algorithms")
    v.add_argument("--tables", action="append", choices=["protA", "protB", "general"])
    v.add_argument("--locality", action="store_true", help="single-fault locality check")
    v.add_argument("--L", type=int, default=5, help="lattice side for protocol tables (odd)")
    v.add_argument("--max-n", type=int, default=5, help="exhaustive graph size")
    v.add_argument("--random-pairs", type=int, default=200)
    v.add_argument("--n-graphs", type=int, default=50, help="random graphs for the general tables")
    v.add_argument("--graphs-max-n", type=int, default=10)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("schedule", help="dump a schedule as JSON")
    s.add_argument("kind", choices=["protA", "protB", "alg1", "alg2"])
    s.add_argument("--L", type=int, default=3)
    s.add_argument("--M", type=int)
    s.add_argument("--N", type=int)
    s.add_argument("--offset", type=int, nargs=3, default=[1, 1, 0], choices=[0, 1])
    s.add_argument("--graph", help="graph JSON for alg1/alg2")
    s.add_argument("--order", type=int, nargs="+", help="vertex ordering")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_schedule)

    w = sub.add_parser("sweep", help="run a Monte Carlo sweep from a run file")
    w.add_argument("runfile")
    w.add_argument("--checkpoint")
    w.add_argument("--csv")
    w.add_argument("--json")
    w.add_argument("--jobs", type=int, default=0, help="worker processes (default: all cores)")
    w.add_argument("--quiet", action="store_true")
    w.set_defaults(func=cmd_sweep)

    f = sub.add_parser("fit", help="fit thresholds and delay scaling")
    f.add_argument("--threshold", metavar="CSV")
    f.add_argument("--loss-extrapolate", metavar="CSV", nargs="+")
    f.add_argument("--delay", metavar="CSV")
    f.add_argument("--break-even", type=float, metavar="P_TARGET")
    f.add_argument("--coeffs", type=float, nargs=2, metavar=("C1", "C2"))
    f.add_argument("--include-censored", action="store_true")
    f.add_argument("--json", metavar="PATH")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("report", help="plot-ready CSV tables and PNG figures")
    r.add_argument("csv")
    r.add_argument("--out", default="report")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    from .fitting import FitError
    from .montecarlo import CheckpointMismatch
    from .runfile import RunFileError

    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, RunFileError, CheckpointMismatch) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except FitError as exc:
        _err(str(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
