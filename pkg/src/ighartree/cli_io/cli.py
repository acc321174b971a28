"""Command-line interface.

Exit codes: 0 success, 1 validation error (bad input, failed hypothesis check),
2 non-finite blow-up during a run (artifacts still written), 3 other runtime
failure such as a non-converged ground state.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .. import __version__
from ..diagnostics import classify
from ..errors import (FormatError, HartreeError, NonFinite, ParseError, RangeViolation,
                      ValidationError)
from ..exponents import build_report
from ..functionals import Potential, check_potential_hypotheses
from ..ground_state import SolverOptions, ThresholdConstants, constants, solve
from ..params import derive
from ..spectral import GridSpec
from .pipeline import constants_record, load_run, run_pipeline, write_json_atomic
from .scenario import OUTPUT_ROOT_ENV, load_scenario
from .snapshot import write_snapshot

EXIT_OK, EXIT_INVALID, EXIT_NONFINITE, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("ighartree")


def _output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def cmd_ground_state(args) -> int:
    params = derive(args.gamma, args.b, args.p)
    grid = GridSpec(args.n, args.L)
    opts = SolverOptions(tolerance=args.tol, max_iter=args.max_iter, oversample=args.oversample)
    gs = solve(params, grid, opts)
    out = Path(args.out) if args.out else _output_root() / f"ground_state_g{args.gamma:g}_b{args.b:g}_p{args.p:g}_n{args.n}_L{args.L:g}"
    out.mkdir(parents=True, exist_ok=True)
    write_snapshot(out / "Q.ighf", gs.Q, grid.L, 0.0, params.b, params.gamma, params.p)
    th = constants(gs, params) if gs.converged else None
    rec = constants_record(gs, th, params, grid)
    write_json_atomic(out / "constants.json", rec)
    print(json.dumps(rec, indent=2, sort_keys=True))
    print(f"wrote {out / 'Q.ighf'} and {out / 'constants.json'}", file=sys.stderr)
    if not gs.converged:
        print("ground state did not converge", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_evolve(args) -> int:
    sc = load_scenario(args.scenario)
    m = run_pipeline(sc, args.out)
    print(f"run directory: {m.output_dir}")
    print(f"status: {m.status}; last finite t = {m.last_finite_t}")
    print(f"local-mass trend: {m.evacuation_trend} (slope {m.evacuation_slope:.4g}); blow-up flag: {m.blowup_flag}")
    if m.verdict:
        print(json.dumps(m.verdict, indent=2, sort_keys=True))
    for w in m.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return m.exit_code


def cmd_classify(args) -> int:
    manifest, series = load_run(args.run_dir)
    params = derive(manifest["params"]["gamma"], manifest["params"]["b"], manifest["params"]["p"])
    if args.constants:
        th = ThresholdConstants(**json.loads(Path(args.constants).read_text())["thresholds"])
    elif manifest.get("thresholds"):
        th = ThresholdConstants(**manifest["thresholds"])
    else:
        raise ValidationError("constants", "run has no threshold constants; pass --constants")
    verdict = classify(series, th, params)
    print(verdict.summary())
    terms = [c for c in series.columns if c.startswith("term_")]
    if terms:
        last = series.row(len(series) - 1)
        print(f"virial-Morawetz terms at t = {last['t']:.6g}:")
        for c in terms:
            print(f"  {c[5:]:>6} = {last[c]:.10g}")
    if args.json:
        print(json.dumps(verdict.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_exponents(args) -> int:
    queries = []
    if args.batch:
        for line in Path(args.batch).read_text().splitlines():
            line = line.split("#", 1)[0].split()
            if line:
                queries.append(line)
    if args.p is not None:
        queries.append([args.p, args.b, args.gamma, args.theta, args.epsilon])
    if not queries:
        raise ValidationError("exponents", "give --p/--b/--gamma or --batch")
    for q in queries:
        rep = build_report(*q)
        if not args.json_only:
            print(rep.summary())
        print(json.dumps(rep.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_check_potential(args) -> int:
    grid = GridSpec(args.n, args.L)
    if args.file:
        V = Potential.from_file(grid, args.file)
    else:
        V = Potential.gaussian(grid, args.c, args.width)
    rep = check_potential_hypotheses(V, r=args.r)
    print(rep.summary())
    if args.json:
        print(json.dumps(rep.to_dict(), sort_keys=True))
    return EXIT_OK if rep.passed else EXIT_INVALID


def _sweep_one(path, out_root):
    try:
        sc = load_scenario(path)
        out = Path(out_root) / sc.name if out_root else None
        m = run_pipeline(sc, out)
        return path, m.exit_code, m.output_dir, m.status
    except (ParseError, ValidationError, RangeViolation, FormatError) as e:
        return path, EXIT_INVALID, "", str(e)
    except HartreeError as e:
        return path, EXIT_RUNTIME, "", str(e)


def cmd_sweep(args) -> int:
    names = [Path(p).stem for p in args.scenarios]
    if len(set(names)) != len(names) and args.out:
        raise ValidationError("sweep", "scenario file names must be distinct")
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(_sweep_one, args.scenarios, [args.out] * len(args.scenarios)))
    worst = EXIT_OK
    for path, code, out, msg in results:
        print(f"{code}  {path}  {out}  {msg}")
        worst = max(worst, code)
    return worst


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ighartree", description="Inhomogeneous generalized Hartree laboratory")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("ground-state", help="solve for Q and write Q.ighf + constants.json")
    g.add_argument("--gamma", type=float, default=2.0)
    g.add_argument("--b", type=float, default=0.5)
    g.add_argument("--p", type=float, default=2.5)
    g.add_argument("--n", type=int, default=64)
    g.add_argument("--L", type=float, default=16.0)
    g.add_argument("--tol", type=float, default=1e-10)
    g.add_argument("--max-iter", type=int, default=2000)
    g.add_argument("--oversample", type=float, default=1.5)
    g.add_argument("--out", help=f"output directory (default under ${OUTPUT_ROOT_ENV} or ./runs)")
    g.set_defaults(func=cmd_ground_state)

    e = sub.add_parser("evolve", help="run a scenario file")
    e.add_argument("scenario")
    e.add_argument("--out", help="output directory (overrides output.dir)")
    e.set_defaults(func=cmd_evolve)

    c = sub.add_parser("classify", help="classify a finished run directory")
    c.add_argument("run_dir")
    c.add_argument("--constants", help="constants.json to use instead of the manifest's")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_classify)

    x = sub.add_parser("exponents", help="exact exponent ledger")
    x.add_argument("--p")
    x.add_argument("--b")
    x.add_argument("--gamma")
    x.add_argument("--theta", default="0")
    x.add_argument("--epsilon", default="0")
    x.add_argument("--batch", help="file with one 'p b gamma [theta epsilon]' query per line")
    x.add_argument("--json-only", action="store_true")
    x.set_defaults(func=cmd_exponents)

    k = sub.add_parser("check-potential", help="check the hypotheses on V")
    k.add_argument("--n", type=int, default=64)
    k.add_argument("--L", type=float, default=16.0)
    k.add_argument("--c", type=float, default=1.0, help="amplitude of c exp(-|x|^2/width^2)")
    k.add_argument("--width", type=float, default=1.0)
    k.add_argument("--file", help=".npy array of samples instead of the builtin Gaussian")
    k.add_argument("--r", type=float, default=1.5)
    k.add_argument("--json", action="store_true")
    k.set_defaults(func=cmd_check_potential)

    s = sub.add_parser("sweep", help="run several scenarios concurrently")
    s.add_argument("scenarios", nargs="+")
    s.add_argument("--jobs", type=int, default=None)
    s.add_argument("--out", help="root directory; each scenario writes to <out>/<scenario name>")
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValidationError, RangeViolation, FormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except NonFinite as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NONFINITE
    except (HartreeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID if isinstance(e, ValueError) else EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
