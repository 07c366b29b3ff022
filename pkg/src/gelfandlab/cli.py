"""Command-line entry point: ``gelfandlab <verb> ...``.

Exit status: 0 success (all assertions passed), 2 some assertion failed,
1 error (bad input, solver failure, I/O).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import hamiltonian as hm
from . import harness as hs
from . import report as rp
from . import solver1d as s1
from . import solver2d as s2
from .diagnostics import peak_values
from .green import GreenOracle, export_field_csv
from .grid2d import Domain, Grid2D
from .vexpr import parse

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _point(text: str) -> np.ndarray:
    vals = [float(t) for t in text.replace(",", " ").split()]
    if len(vals) != 2:
        raise ValueError(f"expected a point 'x,y', got {text!r}")
    return np.array(vals)


def _read_points(path: str) -> np.ndarray:
    """CSV of x,y rows; a header line is skipped if not numeric."""
    pts = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                pts.append([float(row[0]), float(row[1])])
            except (ValueError, IndexError):
                if pts:
                    raise ValueError(f"{path}: bad row {row!r}") from None
    if not pts:
        raise ValueError(f"{path}: no points")
    return np.array(pts)


def _schedule(a) -> np.ndarray:
    return np.round(np.arange(a.s_min, a.s_max + 0.5 * a.s_step, a.s_step), 12)


def _oracle(a) -> GreenOracle:
    dom = Domain.parse(a.domain)
    mode = a.mode or ("exact" if dom.kind == "disk" else "numeric")
    return GreenOracle(dom, mode, n=a.green_n)


def _print(obj) -> None:
    print(json.dumps(rp._clean(obj), indent=2, sort_keys=True))


# ---------------------------------------------------------------- verbs
def cmd_green(a) -> int:
    o = _oracle(a)
    x = _point(a.x)
    out = {"domain": str(o.domain), "mode": o.mode, "x": x, "R_x": o.R(x), "grad_R": o.grad_R(x)}
    if a.y is not None:
        y = _point(a.y)
        out.update(y=y, K=o.K(x, y), G=o.G(x, y), grad_x_G=o.grad_G(x, y))
        if a.export_csv:
            if o.mode != "numeric":
                raise ValueError("--export-csv needs a numeric oracle (--mode numeric)")
            export_field_csv(a.export_csv, o.grid, o.solver.solve(y))
    _print(out)
    return EXIT_OK


def cmd_hamiltonian(a) -> int:
    o = _oracle(a)
    V = parse(a.V)
    if a.starts:
        p0 = _read_points(a.starts)
    elif a.start:
        p0 = np.array([_point(c) for c in a.start.split(";") if c.strip()])
    else:
        raise ValueError("give --starts FILE or --start 'x,y; x,y'")
    if len(p0) != a.m:
        raise ValueError(f"--m {a.m} but {len(p0)} start points")
    sys_ = hm.find_critical(p0, o, V, tol=a.tol)
    _print(sys_.to_record())
    return EXIT_OK


def _branch_record(bp, R, es=None) -> dict:
    rec = bp.summary(R)
    if es is not None:
        rec["mu"] = es.mu
        rec["labels"] = es.labels
    return rec


def cmd_branch1d(a) -> int:
    V = parse(a.V)
    hs._check_radial(V)
    branch = s1.continue_branch(V, _schedule(a), N=a.N)
    fields = Path(a.fields_dir) if a.fields_dir else None
    if fields:
        fields.mkdir(parents=True, exist_ok=True)
    out = open(a.out, "w") if a.out else sys.stdout
    try:
        for i, bp in enumerate(branch):
            es = s1.assemble_spectrum(bp, nmax=a.eigs)[1] if a.eigs else None
            out.write(json.dumps(rp._clean(_branch_record(bp, a.R, es)), sort_keys=True) + "\n")
            if fields and es is not None:
                with open(fields / f"eig_{i:03d}.csv", "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["r"] + [f"w{n + 1}" for n in range(len(es))])
                    for k, r in enumerate(bp.grid.r):
                        w.writerow([repr(float(r))] + [repr(float(x)) for x in es.w[:, k]])
    finally:
        if a.out:
            out.close()
    return EXIT_OK


def cmd_branch2d(a) -> int:
    V = parse(a.V)
    o = _oracle(a)
    anchors = _read_points(a.anchors)
    if len(anchors) != a.m:
        raise ValueError(f"--m {a.m} but {len(anchors)} anchors")
    grid = Grid2D(o.domain, a.n)
    br = s2.continue_branch_2d(grid, V, _schedule(a), anchors, oracle=o,
                               depth_factor=a.depth_factor)
    fields = Path(a.fields_dir) if a.fields_dir else None
    if fields:
        fields.mkdir(parents=True, exist_ok=True)
    out = open(a.out, "w") if a.out else sys.stdout
    try:
        for i, bp in enumerate(br.points):
            es = s2.eig2d(bp, a.eigs) if a.eigs else None
            out.write(json.dumps(rp._clean(_branch_record(bp, a.R, es)), sort_keys=True) + "\n")
            if fields:
                export_field_csv(fields / f"v_{i:03d}.csv", grid, bp.v)
        if br.truncated:
            out.write(json.dumps({"truncated": True, "reason": br.reason}) + "\n")
    finally:
        if a.out:
            out.close()
    if br.truncated:
        print(f"branch truncated: {br.reason}", file=sys.stderr)
    return EXIT_OK


def cmd_eigs(a) -> int:
    V = parse(a.V)
    s_values = np.round(np.arange(a.s_min, a.s + 0.5 * a.s_step, a.s_step), 12)
    if s_values[-1] != a.s:
        s_values = np.append(s_values[s_values < a.s], a.s)
    if a.solver == "1d":
        hs._check_radial(V)
        bp = s1.continue_branch(V, s_values, N=a.N)[-1]
        entries, es = s1.assemble_spectrum(bp, nmax=a.K)
    else:
        o = _oracle(a)
        anchors = _read_points(a.anchors) if a.anchors else np.zeros((1, 2))
        br = s2.continue_branch_2d(Grid2D(o.domain, a.n), V, s_values, anchors, oracle=o)
        if br.truncated:
            raise RuntimeError(f"branch stopped before s = {a.s:g}: {br.reason}")
        bp = br.points[-1]
        es = s2.eig2d(bp, a.K)
    _print({"s": bp.s, "lambda": bp.lam, "peaks": bp.peaks, "mu": es.mu,
            "labels": es.labels, "c_hat": peak_values(bp, es)})
    return EXIT_OK


def _print_assertions(assertions) -> None:
    for x in assertions:
        get = x.get if isinstance(x, dict) else lambda k: getattr(x, k)
        value = get("value")
        value = float("nan") if value is None else value
        print(f"{'PASS' if get('passed') else 'FAIL'}  {get('name'):<30} {value:<14.6g} {get('band')}"
              + (f"  [{get('note')}]" if get("note") else ""))


def cmd_verify(a) -> int:
    if a.list:
        print("\n".join(hs.bundled_configs()))
        return EXIT_OK
    if not a.config:
        raise ValueError("verify needs a config file or bundled preset name")
    cfg = hs.load_config(a.config)
    rep = hs.run_study(cfg)
    jsonl = a.jsonl or cfg.jsonl
    csv_ = a.csv or cfg.csv
    if jsonl:
        rp.emit(rep, jsonl, "jsonl")
    if csv_:
        rp.emit(rep, csv_, "csv")
    print(f"study {rep.name}  config {rep.config_hash}  points {len(rep.rows)}"
          + (f"  truncated: {rep.reason}" if rep.truncated else ""))
    _print_assertions(rep.assertions)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_report(a) -> int:
    data = rp.read_jsonl(a.report)
    h = data["header"]
    print(f"study {h['name']}  config {h['config_hash']}  schema {h['schema']}  points {len(data['rows'])}")
    for k, v in sorted(h["fits"].items()):
        print(f"  {k}: {json.dumps(v, sort_keys=True)}")
    _print_assertions(data["assertions"])
    if a.csv:
        rows = data["rows"]
        cols = rp.columns(rows)
        with open(a.csv, "w", newline="") as fh:
            fh.write(f"#{rp.SCHEMA}\n")
            w = csv.writer(fh)
            w.writerow(cols)
            for r in rows:
                flat = r.flat()
                w.writerow([rp._cell(flat.get(c, "")) for c in cols])
    return EXIT_OK if all(x["passed"] for x in data["assertions"]) else EXIT_FAIL


# ---------------------------------------------------------------- parser
def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gelfandlab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def domain_args(q, default="disk"):
        q.add_argument("--domain", default=default, help="'disk' or 'rect a1 b1 a2 b2'")
        q.add_argument("--mode", choices=("exact", "numeric"), help="Green oracle (default: exact on the disk)")
        q.add_argument("--green-n", type=int, default=257, help="grid size of the numeric oracle")

    def schedule_args(q, s_min, s_max):
        q.add_argument("--s-min", type=float, default=s_min)
        q.add_argument("--s-max", type=float, default=s_max)
        q.add_argument("--s-step", type=float, default=0.5)

    q = sub.add_parser("green", help="G, K, R and gradients at points")
    domain_args(q)
    q.add_argument("--x", required=True, help="evaluation point 'x1,x2'")
    q.add_argument("--y", help="source point 'y1,y2'")
    q.add_argument("--export-csv", help="write the regular-part field K(., y) as x,y,value")
    q.set_defaults(func=cmd_green)

    q = sub.add_parser("hamiltonian", help="critical point of H and the derived matrices")
    domain_args(q)
    q.add_argument("--V", default="1")
    q.add_argument("--m", type=int, default=1)
    q.add_argument("--starts", help="CSV of x,y start points")
    q.add_argument("--start", help="start points inline, 'x,y; x,y'")
    q.add_argument("--tol", type=float, default=1e-8)
    q.set_defaults(func=cmd_hamiltonian)

    q = sub.add_parser("branch1d", help="radial branch on the unit disk")
    q.add_argument("--V", default="1")
    schedule_args(q, 1.0, 40.0)
    q.add_argument("--N", type=int, default=s1.DEFAULT_N)
    q.add_argument("--R", type=float, default=0.4)
    q.add_argument("--eigs", type=int, default=4, help="eigenvalues per point (0: none)")
    q.add_argument("--out", help="JSON-lines output (default stdout)")
    q.add_argument("--fields-dir", help="directory for eigenfield CSVs (r, w1, w2, ...)")
    q.set_defaults(func=cmd_branch1d)

    q = sub.add_parser("branch2d", help="planar branch from m anchors")
    domain_args(q)
    q.add_argument("--V", default="1")
    q.add_argument("--m", type=int, default=1)
    q.add_argument("--anchors", required=True, help="CSV of x,y approximate peaks")
    q.add_argument("--n", type=int, default=257)
    q.add_argument("--depth-factor", type=float, default=4.0)
    schedule_args(q, 3.0, 14.0)
    q.add_argument("--R", type=float, default=0.25)
    q.add_argument("--eigs", type=int, default=0)
    q.add_argument("--out", help="JSON-lines output (default stdout)")
    q.add_argument("--fields-dir", help="directory for solution CSV grids")
    q.set_defaults(func=cmd_branch2d)

    q = sub.add_parser("eigs", help="linearized eigenpairs at one branch point")
    domain_args(q)
    q.add_argument("--V", default="1")
    q.add_argument("--solver", choices=hs.SOLVERS, default="1d")
    q.add_argument("--s", type=float, required=True, help="peak height of the branch point")
    q.add_argument("--s-min", type=float, default=1.0)
    q.add_argument("--s-step", type=float, default=0.5)
    q.add_argument("--K", type=int, default=4)
    q.add_argument("--N", type=int, default=s1.DEFAULT_N)
    q.add_argument("--n", type=int, default=257)
    q.add_argument("--anchors", help="CSV of x,y approximate peaks (2d)")
    q.set_defaults(func=cmd_eigs)

    q = sub.add_parser("verify", help="run a study and check its acceptance assertions")
    q.add_argument("config", nargs="?", help="INI file or bundled preset name")
    q.add_argument("--list", action="store_true", help="list bundled presets")
    q.add_argument("--jsonl")
    q.add_argument("--csv")
    q.set_defaults(func=cmd_verify)

    q = sub.add_parser("report", help="summarize a JSON-lines report")
    q.add_argument("report")
    q.add_argument("--csv", help="also write the flat CSV")
    q.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_ERROR
    except Exception as exc:       # clean exit for every failure mode
        print(f"error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
