"""Command-line front end.

Exit statuses: 0 ok, 2 bad arguments, 3 profile error, 4 I/O error,
5 infeasible constraints, 6 connection / timeout / bind failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import signal
import sys
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Sequence

from .cost_model import CostReport, evaluate_plan
from .emulator import (
    EmulationConfig, EmulationError, JitterSpec, OffloadServer, emulate, run_trials,
)
from .phy import PhyConfig, link_bitrate
from .planner import (
    Constraint, InfeasibleError, Objective, binding_constraint, select, sweep,
)
from .profiles import ExecutionPlan, ProfileError, load_profile, parse_override_value

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PROFILE = 3
EXIT_IO = 4
EXIT_INFEASIBLE = 5
EXIT_TRANSPORT = 6

PROFILE_ENV = "OFFSIM_PROFILE"


class CliError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class ReportRow:
    exit: int
    split: int
    accuracy: float
    t_prep_ms: float
    t_local_ms: float
    t_mec_ms: float
    t_ul_ms: float
    t_dl_ms: float
    t_total_ms: float
    e_idle_j: float
    e_prep_j: float
    e_comp_j: float
    e_comm_j: float
    e_total_j: float
    offload_active: bool

    @classmethod
    def from_report(cls, r: CostReport) -> "ReportRow":
        d, e = r.delay, r.energy
        return cls(
            exit=r.plan.exit, split=r.plan.split, accuracy=r.accuracy,
            t_prep_ms=d.t_prep * 1e3, t_local_ms=d.t_local * 1e3, t_mec_ms=d.t_mec * 1e3,
            t_ul_ms=d.t_ul * 1e3, t_dl_ms=d.t_dl * 1e3, t_total_ms=d.t_total * 1e3,
            e_idle_j=e.e_idle, e_prep_j=e.e_prep, e_comp_j=e.e_comp, e_comm_j=e.e_comm,
            e_total_j=e.e_total, offload_active=r.offload_active,
        )

    def csv_cells(self) -> List[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "offload_active":
                out.append("true" if v else "false")
            elif f.name in ("exit", "split"):
                out.append(str(v))
            elif f.name == "accuracy":
                out.append(f"{v:.4f}")
            elif f.name.endswith("_ms"):
                out.append(f"{v:.3f}")
            else:
                out.append(f"{v:.4f}")
        return out

    @classmethod
    def from_csv_cells(cls, cells: Sequence[str]) -> "ReportRow":
        kwargs = {}
        for f, cell in zip(fields(cls), cells):
            if f.name == "offload_active":
                if cell not in ("true", "false"):
                    raise ValueError(f"bad boolean {cell!r}")
                kwargs[f.name] = cell == "true"
            elif f.name in ("exit", "split"):
                kwargs[f.name] = int(cell)
            else:
                kwargs[f.name] = float(cell)
        return cls(**kwargs)


COLUMNS = [f.name for f in fields(ReportRow)]


def rows_to_csv(rows: Sequence[ReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow(row.csv_cells())
    return buf.getvalue()


def rows_from_csv(text: str) -> List[ReportRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != COLUMNS:
        raise ValueError("unexpected CSV header")
    return [ReportRow.from_csv_cells(cells) for cells in reader if cells]


def rows_to_json(rows: Sequence[ReportRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=2) + "\n"


# ---------------------------------------------------------------------------


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--profile", help=f"profile TOML (default: ${PROFILE_ENV} or built-in)")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--refined", dest="refined", action="store_true",
                      help="fitted model with constant overheads (default)")
    mode.add_argument("--idealized", dest="refined", action="store_false",
                      help="idealized model without overheads")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                        help="override a profile key, e.g. network.b_ul=25")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="offsim", parents=[common],
                                     description="Split/early-exit CNN offloading cost model.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="evaluate one plan")
    p.add_argument("--exit", type=int, required=True)
    p.add_argument("--split", type=int, required=True)

    p = sub.add_parser("sweep", parents=[common], help="evaluate every plan")
    p.add_argument("--output", "-o", help="write to this file instead of standard output")

    p = sub.add_parser("optimize", parents=[common], help="pick the best feasible plan")
    p.add_argument("--objective", choices=("delay", "energy", "weighted"), default="delay")
    p.add_argument("--weight-delay", type=float, default=0.5)
    p.add_argument("--weight-energy", type=float, default=0.5)
    p.add_argument("--min-accuracy", type=float)
    p.add_argument("--max-delay", type=float, help="ms")
    p.add_argument("--max-energy", type=float, help="J")

    p = sub.add_parser("emulate", parents=[common], help="replay a plan on the emulator")
    p.add_argument("--exit", type=int, required=True)
    p.add_argument("--split", type=int, required=True)
    p.add_argument("--mode", choices=("event", "socket"), default="event")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", default="none",
                   help="none | gaussian:SIGMA_MS[:targets] | lognormal:MU:SIGMA[:targets]")
    p.add_argument("--endpoint", default="127.0.0.1:5050")
    p.add_argument("--timeout", type=float, default=30.0, help="seconds per stage")
    p.add_argument("--trace", action="store_true", help="also print the first trial's events")

    p = sub.add_parser("serve", parents=[common], help="run the edge server")
    p.add_argument("--endpoint", default="127.0.0.1:5050")
    p.add_argument("--timeout", type=float, default=30.0)

    p = sub.add_parser("bitrate", parents=[common], help="theoretical PHY bitrate")
    p.add_argument("--n-rb", type=int, default=106)
    p.add_argument("--n-sub", type=int, default=12)
    p.add_argument("--n-bits", type=int, default=6)
    p.add_argument("--n-sym", type=float, default=28000.0,
                   help="modulation symbols per subcarrier per second")
    p.add_argument("--code-rate", type=float, default=0.754)
    return parser


def _profile(args):
    path = getattr(args, "profile", None) or os.environ.get(PROFILE_ENV) or None
    overrides = {}
    for item in getattr(args, "overrides", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(EXIT_USAGE, f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = parse_override_value(value.strip())
    try:
        return load_profile(path, overrides)
    except ProfileError as exc:
        raise CliError(EXIT_PROFILE, f"profile error: {exc}") from exc


def _plan(args, profile) -> ExecutionPlan:
    plan = ExecutionPlan(args.exit, args.split)
    try:
        profile.check_plan(plan)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    return plan


def _emit(rows: Sequence[ReportRow], fmt: str, single: bool = False) -> str:
    if fmt == "json":
        if single:
            return json.dumps(asdict(rows[0]), indent=2) + "\n"
        return rows_to_json(rows)
    return rows_to_csv(rows)


def cmd_eval(args, out) -> int:
    profile = _profile(args)
    plan = _plan(args, profile)
    report = evaluate_plan(plan, profile, args.refined)
    out.write(_emit([ReportRow.from_report(report)], args.format, single=True))
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    profile = _profile(args)
    rows = [ReportRow.from_report(r) for r in sweep(profile, args.refined)]
    text = _emit(rows, args.format)
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write {args.output}: {exc}") from exc
    else:
        out.write(text)
    return EXIT_OK


def cmd_optimize(args, out) -> int:
    profile = _profile(args)
    kind = {"delay": "min_delay", "energy": "min_energy", "weighted": "weighted"}[args.objective]
    try:
        objective = Objective(kind, args.weight_delay, args.weight_energy)
        constraint = Constraint(
            min_accuracy=args.min_accuracy,
            max_delay=None if args.max_delay is None else args.max_delay * 1e-3,
            max_energy=args.max_energy,
        )
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    rows = sweep(profile, args.refined).rows
    try:
        best = select(rows, objective, constraint)
    except InfeasibleError as exc:
        raise CliError(EXIT_INFEASIBLE, str(exc)) from exc
    why = binding_constraint(best, rows, objective, constraint)
    row = ReportRow.from_report(best)
    if args.format == "json":
        out.write(json.dumps({**asdict(row), "justification": why}, indent=2) + "\n")
    else:
        out.write(rows_to_csv([row]))
        out.write(f"# {why}\n")
    return EXIT_OK


def cmd_emulate(args, out) -> int:
    profile = _profile(args)
    plan = _plan(args, profile)
    if args.trials < 1:
        raise CliError(EXIT_USAGE, "--trials must be >= 1")
    try:
        cfg = EmulationConfig(mode=args.mode, jitter=JitterSpec.parse(args.jitter),
                              seed=args.seed, listen_endpoint=args.endpoint,
                              timeout=args.timeout, refined=args.refined)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    try:
        trace = emulate(plan, profile, cfg) if args.trace else None
        summary = run_trials(plan, profile, cfg, args.trials)
    except EmulationError as exc:
        raise CliError(EXIT_TRANSPORT, str(exc)) from exc

    stats = {"mean_ms": summary.mean * 1e3, "std_ms": summary.std * 1e3,
             "min_ms": summary.min * 1e3, "max_ms": summary.max * 1e3}
    if args.format == "json":
        doc = {"exit": plan.exit, "split": plan.split, "mode": args.mode,
               "trials_ms": [t * 1e3 for t in summary.totals], "summary": stats}
        if trace is not None:
            doc["trace"] = [{"time_ms": e.time * 1e3, "stage": e.stage, "segment": e.segment}
                            for e in trace.events]
        out.write(json.dumps(doc, indent=2) + "\n")
        return EXIT_OK
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["trial", "total_ms"])
    for k, t in enumerate(summary.totals):
        writer.writerow([k, f"{t * 1e3:.3f}"])
    out.write("\n")
    writer.writerow(list(stats))
    writer.writerow([f"{v:.3f}" for v in stats.values()])
    if trace is not None:
        out.write("\n")
        writer.writerow(["time_ms", "stage"])
        for e in trace.events:
            writer.writerow([f"{e.time * 1e3:.3f}", e.label()])
    return EXIT_OK


def cmd_serve(args, out) -> int:
    profile = _profile(args)

    def log_round(record):
        out.write(record.line() + "\n")
        out.flush()

    try:
        server = OffloadServer(profile, args.endpoint, timeout=args.timeout,
                               refined=args.refined, on_round=log_round)
        server.bind()
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_TRANSPORT, f"cannot listen on {args.endpoint}: {exc}") from exc

    def stop(signum, frame):
        server.shutdown()

    # install the handler before announcing, so an early SIGTERM is clean
    previous = signal.signal(signal.SIGTERM, stop)
    print(f"listening on {server.endpoint}", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    finally:
        signal.signal(signal.SIGTERM, previous)
    return EXIT_OK


def cmd_bitrate(args, out) -> int:
    values = (args.n_rb, args.n_sub, args.n_bits, args.n_sym)
    if any(v < 0 for v in values):
        raise CliError(EXIT_USAGE, "bitrate parameters must be nonnegative")
    try:
        cfg = PhyConfig(args.n_rb, args.n_sub, args.n_bits, args.n_sym, args.code_rate)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    bps = link_bitrate(cfg)
    if args.format == "json":
        out.write(json.dumps({"bitrate_bps": bps, "bitrate_mbps": bps / 1e6}) + "\n")
    else:
        out.write(f"{bps:.3f} bit/s\n{bps / 1e6:.3f} Mbps\n")
    return EXIT_OK


COMMANDS = {
    "eval": cmd_eval, "sweep": cmd_sweep, "optimize": cmd_optimize,
    "emulate": cmd_emulate, "serve": cmd_serve, "bitrate": cmd_bitrate,
}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name, default in (("refined", True), ("format", "csv"), ("profile", None),
                          ("overrides", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        return COMMANDS[args.command](args, out)
    except CliError as exc:
        print(f"offsim {args.command}: {exc}", file=sys.stderr)
        return exc.status


if __name__ == "__main__":
    sys.exit(main())
