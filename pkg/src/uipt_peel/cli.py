"""Command-line interface.

Exit codes: 0 success, 1 a criterion failed, 2 usage or configuration error.
Data go to standard output (or ``--out``); summaries go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from . import __version__, exact_laws as laws
from .experiments import ExperimentConfig, load_config
from .samplers import RngStream

CONFIG_HELP = """\
config file grammar (--config FILE):
  one `key = value` per line; `#` starts a comment; blank lines are ignored.
  Keys are the ExperimentConfig fields, listed by `report --show-config`.
  Integers accept 1e5 notation; tuples are comma separated (`start = 1,1`);
  grids are `base,count[,ratio]` (`grid = 100,9`).  Unknown keys are errors.
  Flags given on the command line override the file.

exit codes: 0 success, 1 a criterion failed, 2 usage or configuration error."""

PMFS = ("step", "step_tail", "kernel", "boltzmann", "lambda", "ladder_height", "ladder_jump", "h")

LADDER_COLUMNS = {
    "quadruples": "replicate,T,U,H,Vb,Vr,L,censored",
    "lambda": "replicate,lambda,T_sum,U_sum,V_sum",
    "joint": "replicate,theta_hat,ladders,checked,flagged,inclusions_ok",
}


class UsageError(Exception):
    pass


def _parse_range(text: str) -> tuple[int, int]:
    try:
        a, b = text.split("..")
        lo, hi = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _parse_pair(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(",")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected r0,b0, got {text!r}") from None


def _int(text: str) -> int:
    try:
        return int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _add_common(p: argparse.ArgumentParser, *, replicates=True):
    p.add_argument("--config", metavar="FILE", help="key = value config file")
    p.add_argument("--out", metavar="PATH", help="output file (peel, ladders, laws) or directory (suites)")
    p.add_argument("--seed", type=_int, help="master seed")
    if replicates:
        p.add_argument("--replicates", type=_int, help="number of replicates")
    p.add_argument("--workers", type=_int, help="worker processes (UIPT_PEEL_WORKERS overrides)")


def _add_peel_flags(p):
    p.add_argument("--step-cap", type=_int, help="steps after which theta is censored")
    p.add_argument("--volume-cap", type=_int, help="volume saturation level")
    p.add_argument("--start", type=_parse_pair, help="initial boundary r0,b0")
    p.add_argument("--root-coloring", choices=("fixed", "random"),
                   help="random: start from (2,0) or (1,1) with probability 1/2 each")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uipt-peel",
        description="Exact laws and Monte Carlo for percolation peeling on random triangulations.",
        epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("laws", help="tabulate an exact law as CSV rows arg,value",
                       description="Tabulate an exact law as CSV rows `arg,value` (values printed with %.17g).")
    p.add_argument("--pmf", choices=PMFS, required=True, metavar="LAW", help="one of: " + ", ".join(PMFS))
    p.add_argument("--range", dest="arg_range", type=_parse_range, required=True, metavar="A..B",
                   help="inclusive argument range")
    p.add_argument("--n", type=_int, help="current boundary size for --pmf kernel")
    p.add_argument("--d", type=_int, help="polygon degree for --pmf boltzmann")
    p.add_argument("--out", metavar="PATH", help="output file")

    p = sub.add_parser("peel", help="simulate peeling runs, one CSV row per replicate",
                       description="Simulate peeling runs.  Columns: "
                                   "replicate,theta,censored,delta,v_theta,v_red_theta_minus1,perim_lower.  "
                                   "`censored` is a bit mask: 1 theta, 2 v_theta, 4 v_red_theta_minus1 are "
                                   "lower bounds, 8 hard step ceiling.")
    _add_common(p)
    _add_peel_flags(p)
    p.add_argument("--extend", action="store_true",
                   help="continue runs past the step cap until the red volume passes volume_stop")

    p = sub.add_parser("tails", help="run a tail suite and print its JSON report",
                       description="Run the theta, volume or perimeter tail suite.")
    p.add_argument("--suite", choices=("theta", "volume", "perimeter"), required=True)
    _add_common(p)
    _add_peel_flags(p)

    p = sub.add_parser("identities", help="run the ladder identity suite",
                       description="Ladder identities: T vs U, symmetry, the law of Lambda, independence tables.")
    _add_common(p)

    p = sub.add_parser("ladders", help="sample ladder quantities as CSV",
                       description="Sample ladder quantities.  Columns by mode: "
                                   + "; ".join(f"{k}: {v}" for k, v in LADDER_COLUMNS.items()) + ".")
    _add_common(p)
    p.add_argument("--mode", choices=tuple(LADDER_COLUMNS), default="quadruples")
    p.add_argument("--time-cap", type=float, help="time cap per leg (quadruples, lambda)")
    p.add_argument("--lambda-cap", type=_int, help="maximum quadruples per lambda run")
    p.add_argument("--max-events", type=_int, default=200_000, help="events per joint path")
    p.add_argument("--eps", type=float, default=0.05, help="last-passage tolerance for joint paths")

    from .suites import SUITES
    p = sub.add_parser("report", help="run suites and write JSON/CSV reports",
                       description="Run one or more suites; reports go to --out (a directory) or stdout.")
    p.add_argument("--suite", action="append", choices=SUITES + ("all",), metavar="SUITE",
                   help="suite to run, repeatable (default all): " + ", ".join(SUITES + ("all",)))
    _add_common(p)
    _add_peel_flags(p)
    p.add_argument("--show-config", action="store_true", help="print the effective config and exit")
    return parser


def _fit_grid(grid, cap):
    while grid.count > 4 and grid.maximum > cap * (1 + 1e-12):
        grid = type(grid)(grid.base, grid.count - 1, grid.ratio)
    if grid.maximum > cap:
        grid = type(grid)(cap / grid.ratio ** (grid.count - 1), grid.count, grid.ratio)
    return grid


def _config_from(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    changes = {}
    mapping = {"seed": "master_seed", "replicates": "replicates", "workers": "workers",
               "step_cap": "step_cap", "volume_cap": "volume_cap", "start": "start",
               "root_coloring": "root_coloring", "time_cap": "time_cap", "lambda_cap": "lambda_cap"}
    for flag, key in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            changes[key] = value
    if args.command == "identities" and args.replicates is not None:
        changes["lambda_runs"] = args.replicates
        changes.pop("replicates")
    if not changes:
        return cfg
    # a smaller cap shrinks the matching default grid with it
    for cap_key, grid_key, range_key in (("step_cap", "grid", "fit_range"),
                                         ("volume_cap", "volume_grid", "volume_fit_range")):
        if cap_key in changes:
            grid = _fit_grid(getattr(cfg, grid_key), changes[cap_key])
            lo, hi = getattr(cfg, range_key)
            changes[grid_key] = grid
            changes[range_key] = (min(lo, grid.count - 2), min(hi, grid.count - 1))
    return cfg.replace(**changes)


def _open_out(path):
    if path:
        return open(path, "w", encoding="utf-8", newline="\n")
    return None


def _emit(text: str, path: str | None):
    fh = _open_out(path)
    if fh is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with fh:
            fh.write(text)


def _cmd_laws(args) -> int:
    lo, hi = args.arg_range
    if args.pmf == "kernel":
        if args.n is None:
            raise UsageError("--pmf kernel needs --n")
        f = lambda m: laws.kernel_pmf(args.n, m)  # noqa: E731
    elif args.pmf == "boltzmann":
        if args.d is None:
            raise UsageError("--pmf boltzmann needs --d")
        f = lambda n: laws.boltzmann_volume_pmf(args.d, n)  # noqa: E731
    else:
        f = {"step": laws.step_pmf, "step_tail": laws.step_tail, "lambda": laws.lambda_pmf,
             "ladder_height": laws.ladder_height_pmf, "ladder_jump": laws.ladder_jump_pmf,
             "h": laws.harmonic_h}[args.pmf]
    buf = io.StringIO()
    buf.write("arg,value\n")
    for k in range(lo, hi + 1):
        try:
            v = f(k)
        except ValueError as exc:
            raise UsageError(f"--range: {exc}") from None
        buf.write(f"{k},{float(v):.17g}\n")
    _emit(buf.getvalue(), args.out)
    print(f"{args.pmf}: {hi - lo + 1} rows", file=sys.stderr)
    return 0


def _cmd_peel(args, cfg) -> int:
    from .suites import peel_batch, peel_csv

    batch = peel_batch(cfg, extend=args.extend)
    _emit(peel_csv(batch), args.out)
    cens = int(((batch["flags"] & 1) > 0).sum())
    print(f"peel: {cfg.replicates} replicates, {cens} with theta censored", file=sys.stderr)
    return 0


def _cmd_ladders(args, cfg) -> int:
    from . import _core, ladder_walks as lw
    from .samplers import default_tables

    n = cfg.replicates if args.replicates is not None else 1000
    rng = RngStream(cfg.master_seed, 1 << 41)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LADDER_COLUMNS[args.mode].split(","))
    if args.mode == "quadruples":
        q = lw.sample_quadruples(rng, n, cfg.time_cap)
        for i in range(n):
            w.writerow([i, f"{q.T[i]:.17g}", f"{q.U[i]:.17g}", q.H[i], q.Vb[i], q.Vr[i], q.L[i],
                        int(q.censored[i])])
    elif args.mode == "lambda":
        out = np.full((n, cfg.lambda_cap, 7), np.nan)
        lengths = np.zeros(n, np.int64)
        _core.lambda_runs(rng.generator, default_tables().cumulative, n, cfg.lambda_cap, 1,
                          float(cfg.time_cap), out, lengths)
        for i in range(n):
            k = int(lengths[i])
            T = out[i, :k, 0].cumsum()
            U = out[i, :k, 1].cumsum()
            V = int((out[i, :k, 3] + out[i, :k, 4]).sum())
            lam = k if T[-1] < U[-1] else 0
            w.writerow([i, lam, f"{T[-1]:.17g}", f"{U[-1]:.17g}", V])
    else:
        for i in range(n):
            res = lw.joint_two_walk_theta(RngStream(cfg.master_seed, (1 << 41) + 1 + i), args.max_events, args.eps)
            w.writerow([i, f"{res.theta_hat:.17g}", len(res.H), res.checked, int(res.flagged),
                        int(res.inclusions_ok)])
    _emit(buf.getvalue(), args.out)
    print(f"ladders {args.mode}: {n} rows", file=sys.stderr)
    return 0


def _summarize(report: dict):
    for c in report["criteria"]:
        mark = "PASS" if c["pass"] else "FAIL"
        print(f"[{mark}] {report['suite']}.{c['name']}: value={c['value']} target={c['target']}", file=sys.stderr)


def _run_suites(suites, cfg, out_dir) -> int:
    from .suites import report_json, run_suite

    ok = True
    for s in suites:
        report = run_suite(cfg, s, out_dir)
        if not out_dir:
            sys.stdout.write(report_json(report))
        _summarize(report)
        ok &= report["pass"]
    return 0 if ok else 1


def _glue_ranges(argv):
    # "--range -10..1" would otherwise be read as an unknown option
    out = []
    it = iter(argv)
    for a in it:
        if a == "--range":
            nxt = next(it, None)
            out.append(a if nxt is None else f"--range={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_glue_ranges(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "laws":
            return _cmd_laws(args)
        cfg = _config_from(args)
        if args.command == "peel":
            return _cmd_peel(args, cfg)
        if args.command == "ladders":
            return _cmd_ladders(args, cfg)
        if args.command == "tails":
            return _run_suites([f"{args.suite}_tails"], cfg, args.out)
        if args.command == "identities":
            return _run_suites(["identities"], cfg, args.out)
        if args.show_config:
            sys.stdout.write(cfg.to_text())
            return 0
        from .suites import SUITES
        chosen = args.suite or ["all"]
        suites = list(SUITES) if "all" in chosen else chosen
        return _run_suites(suites, cfg, args.out)
    except (UsageError, ValueError, OSError) as exc:
        print(f"uipt-peel {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
