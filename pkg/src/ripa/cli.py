"""``ripa`` command line: run, table1, sweep, spectra, audit."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .audit import TOLERANCES, audit_catalog


def _integrator_overrides(cfg: dict, args) -> dict:
    integ = dict(cfg.get("integrator", {}))
    for key in ("rtol", "atol", "dt"):
        value = getattr(args, key, None)
        if value is not None:
            integ[key] = value
    if integ:
        cfg["integrator"] = integ
    if getattr(args, "iters", None) is not None:
        cfg["max_iters"] = args.iters
    return cfg


def _load(path) -> dict:
    return json.loads(Path(path).read_text())


def cmd_run(args) -> int:
    try:
        cfg = _load(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return bench.EXIT_INVALID
    if isinstance(cfg, dict):
        cfg = _integrator_overrides(cfg, args)
    code, _, msg = bench.run_scenario(cfg, args.out)
    print(msg, file=sys.stderr if code else sys.stdout)
    return code


def cmd_table1(args) -> int:
    kw = {k: getattr(args, k) for k in ("rtol", "atol", "dt") if getattr(args, k) is not None}
    if args.method:
        kw["method"] = args.method
    rows, ok = bench.table1(args.out, **kw)
    sys.stdout.write(bench.format_table1(rows))
    return bench.EXIT_OK if ok else bench.EXIT_BAND


def cmd_sweep(args) -> int:
    try:
        base = _integrator_overrides(_load(args.config), args)
        grid = _load(args.grid) if args.grid else {}
        out = Path(args.out) / "sweep.csv"
        text = bench.sweep(base, grid, out, workers=args.workers)
    except (OSError, json.JSONDecodeError, bench.ScenarioError) as exc:
        print(f"invalid sweep: {exc}", file=sys.stderr)
        return bench.EXIT_INVALID
    print(f"{text.count(chr(10)) - 1} cells written to {out}")
    return bench.EXIT_OK


def cmd_spectra(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = bench.spectra(out / "spectra.csv", args.alpha, args.epsilon, args.p, args.c,
                         args.t0, args.t_end, args.points)
    print(f"wrote {path}")
    return bench.EXIT_OK


def cmd_audit(args) -> int:
    results = audit_catalog(args.samples, args.seed)
    failed = [(op, prop, slack) for op, props in results.items() for prop, slack in props.items()
              if slack > 0]
    for op, props in results.items():
        worst = max(props.values())
        print(f"{op:<16} {'ok' if worst <= 0 else 'FAIL'}  worst slack {worst:.3e}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"seed": args.seed, "samples": args.samples, "tolerances": TOLERANCES, "slack": results}
        (out / "audit.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return bench.EXIT_OK if not failed else bench.EXIT_BAND


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ripa", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def integrator_flags(p):
        p.add_argument("--rtol", type=float)
        p.add_argument("--atol", type=float)
        p.add_argument("--dt", type=float)

    p = sub.add_parser("run", help="run one JSON scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.add_argument("--iters", type=int)
    integrator_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("table1", help="reproduce the five-row rotation benchmark")
    p.add_argument("--out", default=".")
    p.add_argument("--method", choices=("rk45", "rk4"))
    integrator_flags(p)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("sweep", help="grid over alpha, epsilon, p, q")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", help="JSON object mapping alpha/epsilon/p/q to value lists")
    p.add_argument("--out", default=".")
    p.add_argument("--iters", type=int)
    p.add_argument("--workers", type=int, default=1)
    integrator_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectra", help="eigenvalues of the rotation system as CSV")
    p.add_argument("--out", default=".")
    p.add_argument("--alpha", type=float, default=bench.ALPHA)
    p.add_argument("--epsilon", type=float, default=bench.EPSILON)
    p.add_argument("--p", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--t0", type=float, default=1.0)
    p.add_argument("--t-end", dest="t_end", type=float, default=100.0)
    p.add_argument("--points", type=int, default=200)
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("audit", help="randomized operator property audit")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
