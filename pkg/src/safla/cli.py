"""Command-line entry point.

Exit codes: 0 success (``check``: consistent), 1 error, 2 ``check`` found
inconsistencies.  Data goes to stdout or ``--out``; diagnostics to stderr.

Survival probes fill ANY slots of an intent with TCP, destination port 80
and source port 40000.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

from . import __version__
from .assurance import AssuranceLoop, assurance_cycle, consistency_check
from .extractor import extract
from .flowmodel import SchemaError, parse_flow_tables
from .intentstore import load_repository
from .nskg import build_nskg
from .simnet import SimNetwork, SpecError, load_scenario, run_scenario

log = logging.getLogger("safla")

EXIT_OK, EXIT_ERROR, EXIT_INCONSISTENT = 0, 1, 2


class UsageError(Exception):
    pass


def parse_grid(text: str, step: int = 1) -> list:
    """``"10..100"`` (with ``step``) or ``"1,50,100"`` -> list of ints."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split(".."))
            return list(range(lo, hi + 1, step))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _read(path) -> bytes:
    if path is None:
        raise UsageError("missing input path")
    with open(path, "rb") as fh:
        return fh.read()


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _require(args, *names):
    missing = [f"--{n}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command}: missing {' '.join(missing)}")


def _network(args) -> SimNetwork:
    """Network from ``--state`` or from ``--tables`` + ``--topology``."""
    if args.state:
        return SimNetwork.from_obj(json.loads(_read(args.state)))
    _require(args, "tables", "topology")
    g = build_nskg(_read(args.topology))
    return SimNetwork(g, parse_flow_tables(_read(args.tables)))


def cmd_extract(args) -> int:
    _require(args, "tables", "topology")
    ext = extract(parse_flow_tables(_read(args.tables)), build_nskg(_read(args.topology)))
    _emit(args, _dumps(ext.to_obj()))
    return EXIT_OK


def cmd_check(args) -> int:
    _require(args, "tables", "topology", "intents")
    ext = extract(parse_flow_tables(_read(args.tables)), build_nskg(_read(args.topology)))
    rep = consistency_check(ext.tuples, load_repository(_read(args.intents)))
    _emit(args, _dumps(rep.to_obj()))
    return EXIT_OK if rep.consistent else EXIT_INCONSISTENT


def cmd_remediate(args) -> int:
    _require(args, "intents")
    net = _network(args)
    rep = assurance_cycle(net, load_repository(_read(args.intents)))
    _emit(args, _dumps(rep.to_obj()))
    if args.state_out:
        with open(args.state_out, "w", encoding="utf-8") as fh:
            json.dump(net.to_obj(), fh, separators=(",", ":"))
            fh.write("\n")
    return EXIT_OK


def cmd_assure(args) -> int:
    _require(args, "intents")
    net = _network(args)
    loop = AssuranceLoop(net, load_repository(_read(args.intents)))
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout

    def on_cycle(n, rep):
        out.write(json.dumps({"cycle": n, **rep.to_obj()}, separators=(",", ":")) + "\n")
        out.flush()

    try:
        if args.cycles is None:
            n = 0
            while True:  # until interrupted
                if n and args.period:
                    import time
                    time.sleep(args.period)
                on_cycle(n, loop.cycle())
                n += 1
        loop.run(args.cycles, args.period or 0.0, on_cycle=on_cycle)
    except KeyboardInterrupt:
        pass
    finally:
        if out is not sys.stdout:
            out.close()
    log.info("assure: %d mutations", net.mutations)
    return EXIT_OK


def cmd_sim_run(args) -> int:
    _require(args, "scenario")
    spec = load_scenario(_read(args.scenario))
    if args.seed is not None:
        spec = type(spec)(**{**spec.__dict__, "seed": args.seed})
    res = run_scenario(spec)
    if args.format == "json":
        _emit(args, _dumps([dict(zip(("scenario", "seed", "step", "metric", "value"), r))
                            for r in res.rows]))
    else:
        _emit(args, _csv(res.rows, ("scenario", "seed", "step", "metric", "value")))
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write(res.network.event_log())
    if args.figures:
        from .report import plot_timeline
        plot_timeline(res.rows, args.figures, f"{spec.name}_timeline.png")
    return EXIT_OK


def cmd_sim_sweep(args) -> int:
    from . import bench
    seed = args.seed or 0
    if args.experiment == "hijack":
        rows = bench.hijack_sweep(args.seeds, seed)
        header = ("k", "intensity", "seed", "pre", "baseline", "post")
    else:
        rows = bench.completeness_sweep(args.seeds, seed)
        header = ("completeness", "seed", "pre", "baseline", "feasible", "post")
    if args.format == "json":
        _emit(args, _dumps(rows))
    else:
        _emit(args, _csv([[_cell(r[h]) for h in header] for r in rows], header))
    if args.figures:
        from . import report
        (report.plot_hijack if args.experiment == "hijack" else report.plot_completeness)(
            rows, args.figures)
    return EXIT_OK


def _cell(v) -> str:
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def cmd_bench(args) -> int:
    from . import bench
    seed = args.seed or 0
    if args.what == "extraction":
        grid = parse_grid(args.intents or "10..100", args.step)
        rows = bench.bench_extraction(grid, args.repeat, seed)
        header, x, name = ("intents", "switches", "seconds"), "intents", "bench_extraction.png"
    else:
        switches = parse_grid(args.switches or "1,50,100,200,400")
        intents = parse_grid(args.intents or "60", args.step)
        rows = bench.bench_recovery(switches, intents, args.repeat, seed)
        header, x, name = ("switches", "intents", "seconds"), "switches", "bench_recovery.png"
    if args.format == "json":
        _emit(args, _dumps(rows))
    else:
        _emit(args, _csv([[_cell(r[h]) for h in header] for r in rows], header))
    if args.figures:
        from .report import plot_bench
        plot_bench(rows, x, args.figures, name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tables")
    common.add_argument("--topology")
    common.add_argument("--intents")
    common.add_argument("--state", help="simulator state file (topology + tables)")
    common.add_argument("--scenario")
    common.add_argument("--seed", type=int)
    common.add_argument("--period", type=float)
    common.add_argument("--cycles", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=("json", "csv"), default="csv")
    common.add_argument("--repeat", type=int, default=5)

    p = argparse.ArgumentParser(prog="safla", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("extract", parents=[common], help="extract G and diagnostics (JSON)")
    sub.add_parser("check", parents=[common], help="consistency report; exit 2 if inconsistent")
    r = sub.add_parser("remediate", parents=[common], help="run one assurance cycle")
    r.add_argument("--state-out")
    sub.add_parser("assure", parents=[common], help="assurance loop; JSON line per cycle")

    sim = sub.add_parser("sim", help="simulator").add_subparsers(dest="sim_command", required=True)
    run = sim.add_parser("run", parents=[common], help="run a scenario; metrics CSV")
    run.add_argument("--log", help="write the mutation log (JSONL)")
    run.add_argument("--figures", help="directory for PNG figures")
    sw = sim.add_parser("sweep", parents=[common], help="hijack or completeness sweep")
    sw.add_argument("--experiment", choices=("hijack", "completeness"), required=True)
    sw.add_argument("--seeds", type=int, default=30)
    sw.add_argument("--figures")

    b = sub.add_parser("bench", parents=[common], help="timing harnesses")
    b.add_argument("what", choices=("extraction", "recovery"))
    b.add_argument("--switches")
    b.add_argument("--step", type=int, default=10)
    b.add_argument("--figures")
    # bench --intents takes a grid, not a path
    return p


HANDLERS = {"extract": cmd_extract, "check": cmd_check, "remediate": cmd_remediate,
            "assure": cmd_assure, "bench": cmd_bench}


def run(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SAFLA_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    if args.command == "sim":
        handler = cmd_sim_run if args.sim_command == "run" else cmd_sim_sweep
    else:
        handler = HANDLERS[args.command]
    try:
        return handler(args)
    except (UsageError, SchemaError, SpecError, ValueError, KeyError, OSError) as exc:
        print(f"safla {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
