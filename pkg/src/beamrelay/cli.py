"""Command-line entry point: schedule, run, field, verify and random."""
from __future__ import annotations

import argparse
import json
import math
import sys

from . import config as cfgmod
from . import fieldmap
from .engine import ReceptionFailure, RegionError, run_random, run_unicast
from .placement import make_random
from .schedule import (U1, U2, PreconditionError, RectSpec, ScheduleParams, build_schedule, route_xy,
                       schedule_table)
from .senders import GridBlock
from .suites import SUITES

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PRECONDITION = 2
EXIT_RECEPTION = 3
EXIT_USAGE = 64
EXIT_CONFIG = 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="beamrelay", description="Beamforming relay unicast simulator")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("schedule", help="print or export a relay-rectangle schedule")
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--w0", type=float, required=True)
    s.add_argument("--distance", type=float, required=True)
    s.add_argument("--variant", choices=(U1, U2), default=U1)
    s.add_argument("--json", dest="json_out")

    r = sub.add_parser("run", help="execute a unicast from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--strict", action="store_true", help="abort on the first failed round")
    r.add_argument("--trace", dest="trace_out")
    r.add_argument("--workers", type=int)

    f = sub.add_parser("field", help="render one round's field")
    f.add_argument("--config", required=True)
    f.add_argument("--round", type=int, required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--mode", choices=(fieldmap.SNR, fieldmap.PHASE), default=fieldmap.SNR)
    f.add_argument("--csv", dest="csv_out")
    f.add_argument("--workers", type=int)

    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("--suite", choices=sorted(SUITES), required=True)

    q = sub.add_parser("random", help="repeated random-placement runs")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--k", type=float, default=3.0)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--runs", type=int, default=1)
    q.add_argument("--lambda", dest="lam", type=float)
    q.add_argument("--workers", type=int)
    return p


def cmd_schedule(a) -> int:
    p = ScheduleParams(a.lam, a.w0, a.variant, a.distance)
    try:
        sched = build_schedule(p, strict=True)
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    print(schedule_table(sched))
    print(f"{len(sched.relays)} relay rounds after rectangle 0")
    if a.json_out:
        with open(a.json_out, "w") as fh:
            fh.write(sched.to_jsonl())
    return EXIT_OK


def _print_summary(summary: dict):
    print(json.dumps(summary, sort_keys=True))


def cmd_run(a) -> int:
    raw = cfgmod.load(a.config)
    rc = cfgmod.build_run_config(raw, a.workers)
    if a.strict:
        rc.strict = True
    try:
        if rc.nodes.model == "random":
            rr = run_random(rc, raw.get("distance"))
            result = rr.result
            if rr.reason:
                result.notes.append(rr.reason)
            ok = rr.success
        else:
            result = run_unicast(rc)
            ok = result.success
    except ReceptionFailure as exc:
        print(f"reception failure: {exc}", file=sys.stderr)
        return EXIT_RECEPTION
    if a.trace_out:
        result.write(a.trace_out)
    _print_summary(result.summary())
    return EXIT_OK if ok else EXIT_RECEPTION


def field_senders(raw: dict, round_no: int):
    """(senders, viewport, resolution, params) for the ``field`` command."""
    if "senders" in raw:
        fs = cfgmod.build_field_setup(raw)
        return fs.senders, fs.viewport, fs.resolution, fs.params
    rc = cfgmod.build_run_config(raw)
    sp = rc.schedule_params
    if sp.variant != U1:
        raise PreconditionError("derived field maps need phase-corrected (u1) senders; give an explicit senders box")
    leg, _ = route_xy((0, 0), (int(round(sp.distance)), 0), sp.lam, sp.w0, sp.variant)
    rects = leg.schedule.rects
    if not 0 <= round_no < len(rects):
        raise PreconditionError(f"round {round_no} outside 0..{len(rects) - 1}")
    rect: RectSpec = rects[round_no]
    amp = rc.nodes.tx_amplitude
    if round_no == 0:
        m = int(round(8 * sp.w0))
        blk = GridBlock(0, m, 0, 1, 1.0, amp)
    else:
        blk = GridBlock(rect.sender_x_lo, rect.sender_x_hi - rect.sender_x_lo + 1, 0, rect.sender_rows, 1.0, amp)
    margin = raw.get("margin", 10.0)
    view = raw.get("viewport", (blk.x0 - margin, rect.x_hi + margin, -margin, rect.y_hi + margin))
    return blk, tuple(view), raw.get("resolution", 1.0), rc.params


def cmd_field(a) -> int:
    raw = cfgmod.load(a.config)
    try:
        blk, view, res, params = field_senders(raw, a.round)
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    try:
        fm = fieldmap.compute_field(blk, view, res, params, a.workers)
    except MemoryError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    with open(a.out, "wb") as fh:
        fh.write(fieldmap.render(fm, a.mode, params.tau))
    if a.csv_out:
        with open(a.csv_out, "w") as fh:
            fh.write(fieldmap.to_csv(fm, params.lam))
    above = int(fm.above_mask(params.tau).sum())
    print(f"{fm.shape[1]}x{fm.shape[0]} cells, {above} at or above tau, {int(fm.source_mask.sum())} sender cells")
    return EXIT_OK


def cmd_verify(a) -> int:
    checks = SUITES[a.suite]()
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'}  {c.name}: {c.detail}")
    return EXIT_OK if all(c.ok for c in checks) else EXIT_FAIL


def cmd_random(a) -> int:
    from .engine import RunConfig
    from .phasor import ChannelParams
    if a.runs < 1 or a.n < 2:
        print("need --runs >= 1 and --n >= 2", file=sys.stderr)
        return EXIT_PRECONDITION
    lam = a.lam if a.lam is not None else 3 * a.k / math.sqrt(math.log(a.n))
    params = ChannelParams(lam=lam)
    wins = 0
    for s in range(a.seed, a.seed + a.runs):
        nodes = make_random(a.n, s, a.k)
        rc = RunConfig(nodes, params, ScheduleParams(lam, 1.0, U1, 0.0), source=None, strict=False,
                       workers=a.workers, k=a.k)
        rr = run_random(rc)
        wins += rr.success
        res = rr.result
        print(json.dumps({"seed": s, "success": rr.success, "rounds": res.rounds_total,
                          "energy_total": res.energy_total, "distance": res.distance, "reason": rr.reason},
                         sort_keys=True))
    print(f"success rate {wins}/{a.runs}")
    return EXIT_OK


COMMANDS = {"schedule": cmd_schedule, "run": cmd_run, "field": cmd_field, "verify": cmd_verify,
            "random": cmd_random}


def cli_main(argv=None) -> int:
    try:
        a = _parser().parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return COMMANDS[a.cmd](a)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PreconditionError, RegionError) as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


def main() -> None:
    sys.exit(cli_main())
