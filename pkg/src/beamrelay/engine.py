"""Round-by-round execution of the unicast protocols with physical verification.

Every leg is simulated in its own frame: ``u`` along the leg, ``v >= 0`` on
the side the rectangles grow into.  Grid nodes keep integer coordinates in
that frame, and the canonical carrier of a node is ``exp(-2j*pi*u/lam)``.

A round is accepted only if every verified receiver measures
``|y|**2 >= tau``.  Sender phasors are tracked as residuals relative to the
canonical carrier: phase-corrected rounds re-align every receiver with its
corrective delay (residual 1), self-synchronised rounds keep the received
phase unchanged.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .kernels import worker_count
from .phasor import ChannelParams
from .placement import GENERATOR, NodeSet, required_count, window_counts
from .schedule import (GROWTH, PHASE_CORRECTED, SELF_SYNC, Leg, RectSchedule, RectSpec,
                       ScheduleParams, route_xy)
from .senders import GridBlock, PointSenders, QuadratureSpec, cell_nodes, cell_quadrature
from .sync import delay_from_field, residual_after_delay, self_sync_error_budget


class ReceptionFailure(RuntimeError):
    def __init__(self, message, traces=None, failures=None):
        super().__init__(message)
        self.traces = traces or []
        self.failures = failures or []


class RegionError(ValueError):
    pass


@dataclass(frozen=True)
class VerifyMode:
    kind: str = "sampled"  # "sampled" or "all"
    count: int = 64
    seed: int = 0
    full_max: int = 100_000  # sampled mode still checks every node of smaller rectangles

    def __post_init__(self):
        if self.kind not in ("sampled", "all"):
            raise ValueError(f"verify mode must be 'sampled' or 'all', got {self.kind!r}")


@dataclass
class RunConfig:
    nodes: NodeSet
    params: ChannelParams
    schedule_params: ScheduleParams
    source: tuple = (0, 0)
    target: tuple | None = None
    t0_processing_s: float = 1e-2
    verify: VerifyMode = field(default_factory=VerifyMode)
    strict: bool = True
    evaluator: str = "auto"  # auto | brute | cells
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    workers: int | None = None
    k: float = 3.0  # random model only

    def __post_init__(self):
        if self.t0_processing_s < 0:
            raise ValueError("t0_processing_s must be >= 0")
        if self.evaluator not in ("auto", "brute", "cells"):
            raise ValueError(f"unknown evaluator {self.evaluator!r}")

    def echo(self) -> dict:
        return {
            "nodes": self.nodes.header(),
            "params": asdict(self.params),
            "schedule_params": asdict(self.schedule_params),
            "source": None if self.source is None else list(self.source),
            "target": None if self.target is None else list(self.target),
            "t0_processing_s": self.t0_processing_s,
            "verify": asdict(self.verify),
            "strict": self.strict,
            "evaluator": self.evaluator,
            "quadrature": asdict(self.quadrature),
        }


@dataclass
class RoundTrace:
    round: int
    stage: str
    sender_rect: dict
    receiver_rect: dict
    senders: int
    receivers_checked: int
    min_snr: float
    min_re: float
    worst_phase_err: float
    energy_added: float
    elapsed_time_s: float
    informed_distance: float
    ok: bool = True
    leg: str = "x"
    policy: str = PHASE_CORRECTED
    max_residual_after_delay: float | None = None
    near_field_pairs: int = 0
    failures: list = field(default_factory=list)

    def record(self) -> dict:
        d = asdict(self)
        d["type"] = "round"
        return d


@dataclass
class RunResult:
    traces: list[RoundTrace]
    header: dict
    distance: float
    grid_spacing_m: float
    success: bool = True
    notes: list = field(default_factory=list)

    @property
    def rounds_total(self) -> int:
        return len(self.traces)

    @property
    def energy_total(self) -> float:
        return math.fsum(t.energy_added for t in self.traces)

    @property
    def time_total_s(self) -> float:
        return math.fsum(t.elapsed_time_s for t in self.traces)

    @property
    def velocity(self) -> float:
        t = self.time_total_s
        return self.distance * self.grid_spacing_m / t if t > 0 else math.inf

    def stage_rounds(self, stage: str) -> int:
        return sum(1 for t in self.traces if t.stage == stage)

    def summary(self) -> dict:
        return {"type": "summary", "rounds_total": self.rounds_total, "energy_total": self.energy_total,
                "time_total_s": self.time_total_s, "velocity": self.velocity, "distance": self.distance,
                "success": self.success, "notes": self.notes}

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header, sort_keys=True)]
        lines += [json.dumps(t.record(), sort_keys=True) for t in self.traces]
        lines.append(json.dumps(self.summary(), sort_keys=True))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())


# -- helpers -----------------------------------------------------------------

def _rect_dict(x_lo, x_hi, y_lo, y_hi, leg: Leg | None = None) -> dict:
    if leg is None:
        return {"x_lo": x_lo, "x_hi": x_hi, "y_lo": y_lo, "y_hi": y_hi}
    (ax, ay), (bx, by) = leg.to_global(x_lo, y_lo), leg.to_global(x_hi, y_hi)
    return {"x_lo": float(min(ax, bx)), "x_hi": float(max(ax, bx)),
            "y_lo": float(min(ay, by)), "y_hi": float(max(ay, by))}


def sample_nodes(c_lo: int, c_hi: int, r_lo: int, r_hi: int, mode: VerifyMode, salt: int) -> np.ndarray:
    """Receiver nodes to verify in an integer block, in canonical order."""
    total = (c_hi - c_lo + 1) * (r_hi - r_lo + 1)
    if mode.kind == "all" or total <= mode.full_max:
        if total > 50_000_000:
            raise MemoryError(f"refusing to verify {total} receivers individually")
        xs = np.repeat(np.arange(c_lo, c_hi + 1), r_hi - r_lo + 1)
        ys = np.tile(np.arange(r_lo, r_hi + 1), c_hi - c_lo + 1)
        return np.column_stack([xs, ys]).astype(np.float64)
    cm, rm = (c_lo + c_hi) // 2, (r_lo + r_hi) // 2
    pts = {(c_lo, r_lo), (c_hi, r_lo), (c_lo, r_hi), (c_hi, r_hi),
           (cm, r_lo), (cm, r_hi), (c_lo, rm), (c_hi, rm), (cm, rm)}
    rng = np.random.Generator(np.random.PCG64([mode.seed, salt]))
    xs = rng.integers(c_lo, c_hi + 1, size=mode.count)
    ys = rng.integers(r_lo, r_hi + 1, size=mode.count)
    pts.update(zip(xs.tolist(), ys.tolist()))
    arr = np.array(sorted(pts), dtype=np.float64)
    return arr


@dataclass
class _Measure:
    y: np.ndarray
    near: int
    min_snr: float
    min_re: float
    worst_phase: float
    failures: list


def _measure(src, pts: np.ndarray, params: ChannelParams, workers) -> _Measure:
    y, near = src.field(pts[:, 0], pts[:, 1], params.lam, workers)
    snr = np.abs(y) ** 2
    bad = ~(snr >= params.tau)
    failures = [(float(a), float(b), float(s)) for (a, b), s in zip(pts[bad], snr[bad])][:50]
    return _Measure(y, near, float(np.min(snr)), float(np.min(y.real)),
                    float(np.max(np.abs(np.angle(y)))), failures)


class _Ctx:
    def __init__(self, cfg: RunConfig, leg: Leg | None, leg_name: str):
        self.cfg = cfg
        self.leg = leg
        self.leg_name = leg_name
        self.params = cfg.params
        self.traces: list[RoundTrace] = []
        self.informed = 0.0
        self.salt = 0

    def hop_time(self, span: float) -> float:
        return span * self.params.grid_spacing_m / self.params.light_speed + self.cfg.t0_processing_s

    def emit(self, tr: RoundTrace, all_traces: list):
        tr.leg = self.leg_name
        self.traces.append(tr)
        all_traces.append(tr)
        if not tr.ok and self.cfg.strict:
            raise ReceptionFailure(
                f"round {tr.round} ({tr.stage}) failed: min |y|^2 = {tr.min_snr:.6g} < tau", all_traces, tr.failures)


# -- line phase ----------------------------------------------------------------

def line_reach(m_end: int, params: ChannelParams, amp: float = 1.0, limit: int | None = None) -> int:
    """Largest axis node reached when nodes ``0..m_end`` transmit in phase."""
    blk = GridBlock(0, m_end + 1, 0, 1, 1.0, amp)

    def ok(j):
        y, _ = blk.field(np.array([float(j)]), np.array([0.0]), params.lam, 1)
        return abs(y[0]) ** 2 >= params.tau

    lo = m_end + 1
    if not ok(lo):
        return m_end
    step = max(1, m_end)
    hi = lo + step
    while ok(hi):
        lo = hi
        step *= 2
        hi = lo + step
        if limit is not None and lo >= limit:
            return limit
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo if limit is None else min(lo, limit)


def line_broadcast(m_target: int, params: ChannelParams, width: int | None = None) -> tuple[int, list[int]]:
    """Rounds of in-phase prefix broadcasting until ``m_target`` axis nodes are informed."""
    if m_target < 2:
        raise ValueError("m_target must be >= 2")
    if width is not None and m_target > width:
        raise ValueError(f"m_target {m_target} exceeds grid width {width}")
    end = 0
    growth = []
    while end + 1 < m_target:
        nxt = line_reach(end, params)
        if nxt <= end:
            raise ReceptionFailure(f"line broadcast stalled at prefix end {end}")
        end = nxt
        growth.append(end)
    return len(growth), growth


def _line_phase(ctx: _Ctx, goal: int, limit: int, all_traces: list):
    """Grow the informed axis prefix until node ``goal`` is informed."""
    cfg, params = ctx.cfg, ctx.params
    amp = cfg.nodes.tx_amplitude
    end = int(ctx.informed)
    while end < goal:
        j = line_reach(end, params, amp, limit)
        if j <= end:
            raise ReceptionFailure(f"line broadcast stalled at prefix end {end}", all_traces)
        blk = GridBlock(0, end + 1, 0, 1, 1.0, amp)
        ctx.salt += 1
        pts = sample_nodes(end + 1, j, 0, 0, cfg.verify, ctx.salt)
        m = _measure(blk, pts, params, cfg.workers)
        ctx.informed = max(ctx.informed, j)
        tr = RoundTrace(len(all_traces) + 1, "line", _rect_dict(0, end, 0, 0, ctx.leg),
                        _rect_dict(end + 1, j, 0, 0, ctx.leg), blk.count, len(pts), m.min_snr, m.min_re,
                        m.worst_phase, blk.count * amp ** 2, ctx.hop_time(j), ctx.informed,
                        ok=not m.failures, near_field_pairs=m.near, failures=m.failures)
        ctx.emit(tr, all_traces)
        end = j


# -- rectangle rounds ------------------------------------------------------------

def _block_for(rect: RectSpec, c_lo=None, c_hi=None, rows=None, amp=1.0) -> GridBlock:
    a, b = rect.columns()
    r0, r1 = rect.rows()
    c_lo = a if c_lo is None else c_lo
    c_hi = b if c_hi is None else c_hi
    nrows = (r1 - r0 + 1) if rows is None else rows
    return GridBlock(c_lo, c_hi - c_lo + 1, r0, nrows, 1.0, amp)


def _use_cells(cfg: RunConfig, senders: int, receivers: int, policy: str) -> bool:
    if cfg.evaluator == "cells":
        return True
    if cfg.evaluator == "brute":
        return False
    if policy == SELF_SYNC:
        return senders > 200_000
    return senders * receivers > 5e9


def relay_round(senders, receivers: RectSpec, policy: str, params: ChannelParams, verify: VerifyMode,
                round_no: int = 1, salt: int = 0, workers=None, amp: float = 1.0):
    """Evaluate one beamforming round at the verified receivers of ``receivers``.

    ``senders`` is a :class:`GridBlock` or :class:`PointSenders` carrying
    residual phasors.  Returns ``(RoundTrace, aligned field, points)``.
    """
    c_lo, c_hi = receivers.columns()
    r_lo, r_hi = receivers.rows()
    pts = sample_nodes(c_lo, c_hi, r_lo, r_hi, verify, salt)
    m = _measure(senders, pts, params, workers)
    post = None
    if policy == PHASE_CORRECTED:
        d = delay_from_field(m.y, params)
        post = float(np.max(np.abs(residual_after_delay(m.y, d, params))))
    tr = RoundTrace(round_no, "relay", {}, _rect_dict(receivers.x_lo, receivers.x_hi, receivers.y_lo, receivers.y_hi),
                    int(getattr(senders, "count", 0)), len(pts), m.min_snr, m.min_re, m.worst_phase,
                    0.0, 0.0, receivers.x_hi, ok=not m.failures, policy=policy,
                    max_residual_after_delay=post, near_field_pairs=m.near, failures=m.failures)
    return tr, m.y, pts


def first_rectangle_hop(m: int, rect0: RectSpec, params: ChannelParams, verify: VerifyMode = VerifyMode(),
                        amp: float = 1.0, workers=None, strict: bool = True) -> RoundTrace:
    """In-phase line ``0..m-1`` beamforms into ``rect0``."""
    line = GridBlock(0, m, 0, 1, 1.0, amp)
    tr, _, _ = relay_round(line, rect0, rect0.policy, params, verify, 1, 0, workers)
    tr.stage = "hop0"
    tr.sender_rect = _rect_dict(0, m - 1, 0, 0)
    tr.energy_added = m * amp ** 2
    if strict and not tr.ok:
        raise ReceptionFailure(f"first rectangle: min |y|^2 = {tr.min_snr:.6g} below tau", [tr], tr.failures)
    return tr


def _rect_phase(ctx: _Ctx, sched: RectSchedule, w0: float, all_traces: list):
    cfg, params = ctx.cfg, ctx.params
    amp = cfg.nodes.tx_amplitude
    policy = sched.params.policy
    m = int(round(8 * w0))
    rects = sched.rects
    # senders of the upcoming round: exact line first
    src = GridBlock(0, m, 0, 1, 1.0, amp)
    span_lo = 0.0
    stage = "hop0"
    for idx, rect in enumerate(rects):
        nxt = rects[idx + 1] if idx + 1 < len(rects) else None
        ctx.salt += 1
        tr, y, pts = relay_round(src, rect, policy, params, cfg.verify, len(all_traces) + 1, ctx.salt, cfg.workers)
        tr.stage = stage
        if stage == "hop0":
            tr.sender_rect = _rect_dict(0, m - 1, 0, 0, ctx.leg)
        else:
            tr.sender_rect = _rect_dict(rect.sender_x_lo, rect.sender_x_hi, 0, rect.sender_rows - 1, ctx.leg)
        tr.receiver_rect = _rect_dict(rect.x_lo, rect.x_hi, rect.y_lo, rect.y_hi, ctx.leg)
        tr.energy_added = src_count(src, stage, m, rect) * amp ** 2
        tr.elapsed_time_s = ctx.hop_time(rect.x_hi - span_lo)
        ctx.informed = max(ctx.informed, rect.x_hi)
        tr.informed_distance = ctx.informed
        ctx.emit(tr, all_traces)
        if nxt is None:
            break
        # next round's senders: the active block of this rectangle
        r0, _ = rect.rows()
        blk = GridBlock(nxt.sender_x_lo, nxt.sender_x_hi - nxt.sender_x_lo + 1, r0, nxt.sender_rows, 1.0, amp)
        span_lo = float(nxt.sender_x_lo)
        if policy == PHASE_CORRECTED:
            if _use_cells(cfg, blk.count, len(pts), policy):
                src = cell_quadrature(blk, spec=cfg.quadrature)
            else:
                src = blk
        else:
            if _use_cells(cfg, blk.count, len(pts), policy):
                qx, qy, _ = cell_nodes(blk, cfg.quadrature)
                a = _unit_phase(src, qx, qy, params, cfg.workers)
                src = cell_quadrature(blk, a, cfg.quadrature)
            else:
                p = blk.to_points()
                p.phasors = _unit_phase(src, p.x, p.y, params, cfg.workers) * amp
                src = p
        stage = "relay"


def src_count(src, stage, m, rect) -> float:
    if stage == "hop0":
        return float(m)
    return float((rect.sender_x_hi - rect.sender_x_lo + 1) * rect.sender_rows)


def _unit_phase(src, x, y, params, workers):
    f, _ = src.field(x, y, params.lam, workers)
    mag = np.abs(f)
    return np.where(mag > 0, f / np.where(mag > 0, mag, 1.0), 1.0)


# -- full unicast ----------------------------------------------------------------

def _leg_limits(cfg: RunConfig, leg: Leg) -> tuple[int, int]:
    """(max u, max v) available to the leg inside the grid."""
    nodes = cfg.nodes
    ox, oy = leg.origin
    ax, ay = leg.axis
    if ax > 0:
        umax = nodes.cols - 1 - ox
    elif ax < 0:
        umax = ox
    elif ay > 0:
        umax = nodes.rows - 1 - oy
    else:
        umax = oy
    nx, ny = -ay * leg.side, ax * leg.side
    if nx > 0:
        vmax = nodes.cols - 1 - ox
    elif nx < 0:
        vmax = ox
    elif ny > 0:
        vmax = nodes.rows - 1 - oy
    else:
        vmax = oy
    return int(umax), int(vmax)


def _run_leg(cfg: RunConfig, leg: Leg, name: str, all_traces: list):
    if leg.empty:
        return
    ctx = _Ctx(cfg, leg, name)
    sp = cfg.schedule_params
    D = int(round(leg.length))
    umax, vmax = _leg_limits(cfg, leg)
    if D > umax:
        raise RegionError(f"target at {D} lies outside the grid (max {umax})")
    w0 = sp.w0
    if D <= 9 * w0:
        _line_phase(ctx, D, umax, all_traces)
        return
    m = int(round(8 * w0))
    _line_phase(ctx, m - 1, umax, all_traces)
    sched = leg.schedule
    hmax = max(r.y_hi for r in sched.rects)
    if math.floor(hmax) > vmax:
        raise RegionError(f"rectangle height {hmax:.4g} exceeds the {vmax} rows available beside the leg")
    _rect_phase(ctx, sched, w0, all_traces)


def run_unicast(cfg: RunConfig) -> RunResult:
    """Line phase, first-rectangle hop and relay rounds along the x leg, then the y leg."""
    if cfg.nodes.model != "grid":
        raise ValueError("run_unicast needs a grid node set; use run_random")
    sp = cfg.schedule_params
    src = tuple(int(v) for v in cfg.source)
    tgt = cfg.target if cfg.target is not None else (src[0] + int(round(sp.distance)), src[1])
    tgt = tuple(int(v) for v in tgt)
    for p in (src, tgt):
        if not cfg.nodes.contains(*p):
            raise RegionError(f"node {p} is outside the grid")
    leg_x, leg_y = route_xy(src, tgt, sp.lam, sp.w0, sp.variant, cfg.nodes.rows, cfg.nodes.cols)
    header = {"type": "header", "config": cfg.echo(), "seed": cfg.verify.seed, "generator": GENERATOR,
              "source": list(src), "target": list(tgt)}
    traces: list[RoundTrace] = []
    d = math.hypot(tgt[0] - src[0], tgt[1] - src[1])
    result = RunResult(traces, header, d, cfg.params.grid_spacing_m)
    try:
        _run_leg(cfg, leg_x, "x", traces)
        _run_leg(cfg, leg_y, "y", traces)
    except ReceptionFailure:
        result.success = False
        raise
    result.success = all(t.ok for t in traces)
    if cfg.params.lam > 0.5:
        result.notes.append("wavelength above 1/2: neighbouring nodes are not in the far field")
    return result


def self_sync_report(result: RunResult) -> list[dict]:
    """Per rectangle round: measured worst phase error against the cumulative budget.

    The first-rectangle hop is index 0 and is held to the one-round budget;
    relay round ``r`` has accumulated ``r`` self-synchronised hops.
    """
    out = []
    k = 0
    for t in result.traces:
        if t.policy == SELF_SYNC and t.stage in ("hop0", "relay"):
            idx = 0 if t.stage == "hop0" else k + 1
            k = idx
            out.append({"round": t.round, "index": idx, "worst_phase_err": t.worst_phase_err,
                        "budget": self_sync_error_budget(max(idx, 1)), "min_re": t.min_re})
    return out


# -- random placement ----------------------------------------------------------------

@dataclass
class RandomRun:
    result: RunResult
    density: list = field(default_factory=list)
    reason: str = ""

    @property
    def success(self) -> bool:
        return self.result.success and not self.reason


def _nodes_in(pos, x_lo, x_hi, y_lo, y_hi):
    m = (pos[:, 0] >= x_lo) & (pos[:, 0] <= x_hi) & (pos[:, 1] >= y_lo) & (pos[:, 1] <= y_hi)
    q = pos[m]
    return q[np.lexsort((q[:, 1], q[:, 0]))]


def _density_check(pos, box, side, need):
    x_lo, x_hi, y_lo, y_hi = box
    counts, _, _ = window_counts(pos, x_lo, x_hi, y_lo, y_hi, side)
    if counts.size == 0:
        # the box is narrower than a window: count the box itself
        mn = len(_nodes_in(pos, *box))
        return {"box": list(box), "windows": 1, "min_count": int(mn), "required": need, "pass": mn >= need}
    mn = int(counts.min())
    return {"box": list(box), "windows": int(counts.size), "min_count": mn, "required": need, "pass": mn >= need}


def run_random(cfg: RunConfig, distance: float | None = None) -> RandomRun:
    """Unicast on a random placement: source square, preparation hop, then relays.

    The source is the node nearest ``cfg.source`` (default: 10% in from the
    left edge, mid-height); the target column lies ``distance`` to its right
    (default: 80% of the side).
    """
    nodes = cfg.nodes
    if nodes.model != "random":
        raise ValueError("run_random needs a random node set")
    params = cfg.params
    n, k = nodes.n, nodes.k
    pos = nodes.positions
    side = nodes.side
    A = nodes.tx_amplitude
    ln = math.log(n)
    need = required_count(n)
    sq = k * math.sqrt(ln)
    w1 = k * ln ** 1.5 / 3.0
    h1 = k * math.sqrt(ln)
    lam_min = 3 * k / math.sqrt(ln)
    notes = []
    if params.lam < lam_min * (1 - 1e-12):
        notes.append(f"lambda {params.lam:.6g} below 3k/sqrt(ln n) = {lam_min:.6g}")
    want = cfg.source if cfg.source is not None else (0.1 * side, 0.5 * side)
    s_idx = int(np.argmin((pos[:, 0] - want[0]) ** 2 + (pos[:, 1] - want[1]) ** 2))
    sx, sy = pos[s_idx]
    dist = 0.8 * side if distance is None else float(distance)
    tx = sx + dist
    header = {"type": "header", "config": cfg.echo(), "seed": nodes.seed, "generator": GENERATOR,
              "log_base": "e", "source": [float(sx), float(sy)], "target_x": float(tx)}
    traces: list[RoundTrace] = []
    result = RunResult(traces, header, dist, params.grid_spacing_m, notes=notes)
    run = RandomRun(result)
    ctx = _Ctx(cfg, None, "x")

    def fits(x_lo, x_hi, y_lo, y_hi):
        return x_lo >= 0 and y_lo >= 0 and x_hi <= side and y_hi <= side

    def do_round(stage, spos, box, extra=None):
        recv = _nodes_in(pos, *box)
        recv = recv[~((recv[:, 0] == sx) & (recv[:, 1] == sy))] if stage == "source" else recv
        src = PointSenders(spos[:, 0] - sx, spos[:, 1] - sy, A)
        pts = recv - np.array([sx, sy])
        if len(pts) == 0:
            m = _Measure(np.zeros(0), 0, math.inf, math.inf, 0.0, [])
        else:
            m = _measure(src, pts, params, cfg.workers)
        span = box[1] - float(spos[:, 0].min())
        ctx.informed = max(ctx.informed, box[1] - sx)
        tr = RoundTrace(len(traces) + 1, stage,
                        _rect_dict(float(spos[:, 0].min()), float(spos[:, 0].max()),
                                   float(spos[:, 1].min()), float(spos[:, 1].max())),
                        _rect_dict(*box), len(spos), len(pts), m.min_snr, m.min_re, m.worst_phase,
                        len(spos) * A ** 2, ctx.hop_time(span), ctx.informed,
                        ok=not m.failures, near_field_pairs=m.near, failures=m.failures)
        tr.leg = "x"
        traces.append(tr)
        return recv

    src_pt = np.array([[sx, sy]])
    sq_box = (sx - sq / 2, sx + sq / 2, sy - sq / 2, sy + sq / 2)
    r1_box = (sq_box[1] + w1, sq_box[1] + 2 * w1, sy, sy + h1)
    if not fits(*sq_box) or not fits(*r1_box) or tx > side or tx <= r1_box[1]:
        run.reason = "preparation geometry does not fit in the region"
        result.success = False
        return run
    sq_nodes = do_round("source", src_pt, sq_box)
    run.density.append(_density_check(pos, sq_box, sq, need))
    sq_senders = np.vstack([src_pt, sq_nodes])
    sq_senders = sq_senders[np.lexsort((sq_senders[:, 1], sq_senders[:, 0]))]
    cur = do_round("prep", sq_senders, r1_box)
    run.density.append(_density_check(pos, r1_box, sq, need))
    w, h, x = w1, h1, r1_box[1]
    i = 1
    while x < tx - 1e-9:
        W = A * w * h / GROWTH
        rem = tx - x
        if rem <= 2 * W:
            wn, xe = rem / 2, tx
        elif rem < 4 * W:
            wn = rem / 4
            xe = x + 2 * wn
        else:
            wn = W
            xe = x + 2 * wn
        hn = max(h, math.sqrt(params.lam * wn / 4.0))
        box = (x + wn, xe, sy, sy + hn)
        if not fits(*box):
            run.reason = f"relay rectangle {i + 1} leaves the region"
            result.success = False
            return run
        cur_next = do_round("relay", cur, box)
        run.density.append(_density_check(pos, box, sq, need))
        cur, w, h, x = cur_next, wn, hn, xe
        i += 1
        if i > 64:
            raise RuntimeError("random relay exceeded 64 rounds")
    result.success = all(t.ok for t in traces)
    if not all(d["pass"] for d in run.density):
        run.reason = "density check failed"
    if not result.success:
        run.reason = run.reason or "reception failure"
    return run


# -- growth law and amplitude scans -------------------------------------------------

def growth_limit(tau: float = 1.0, power: float = 1.0) -> float:
    """Quadratic growth constant: d' <= d + 2*pi*d**2*sqrt(P/tau) <= (1 + 2*pi*sqrt(P/tau))*d**2 for d >= 1."""
    return 1.0 + 2.0 * math.pi * math.sqrt(power / tau)


def lower_bound_check(trace, tau: float = 1.0, power: float = 1.0) -> dict:
    """Fit the smallest ``k`` with ``d_{i+1} <= k*d_i**2`` and compare with the physical limit.

    ``trace`` is a :class:`RunResult`, a list of :class:`RoundTrace` or a plain
    list of informed distances.
    """
    if isinstance(trace, RunResult):
        trace = trace.traces
    d = [t.informed_distance if isinstance(t, RoundTrace) else float(t) for t in trace]
    d = [v for v in d if v >= 1.0]
    if len(d) < 3:
        raise ValueError("need at least three rounds with informed distance >= 1")
    ratios = [b / (a * a) for a, b in zip(d[:-1], d[1:])]
    k = max(ratios)
    limit = growth_limit(tau, power)
    return {"ok": bool(math.isfinite(k) and k <= limit), "fitted_k": k, "limit": limit,
            "violations": sum(1 for r in ratios if r > limit)}


def max_amplitude_scan(senders, region, resolution: float, lam: float, workers=None) -> dict:
    """Largest |y| on a raster over ``region`` (x_lo, x_hi, y_lo, y_hi), skipping sender positions."""
    x_lo, x_hi, y_lo, y_hi = region
    nx = max(1, math.ceil((x_hi - x_lo) * resolution))
    ny = max(1, math.ceil((y_hi - y_lo) * resolution))
    gx, gy = np.meshgrid(x_lo + np.arange(nx) / resolution, y_lo + np.arange(ny) / resolution, indexing="ij")
    px, py = gx.ravel(), gy.ravel()
    if isinstance(senders, GridBlock):
        occupied = ((px >= senders.x0) & (px <= senders.x1) & (py >= senders.y0) & (py <= senders.y1)
                    & (px == np.round(px)) & (py == np.round(py)))
    else:
        occ = set(zip(senders.x.tolist(), senders.y.tolist()))
        occupied = np.array([(a, b) in occ for a, b in zip(px.tolist(), py.tolist())], dtype=bool)
    px, py = px[~occupied], py[~occupied]
    y, _ = senders.field(px, py, lam, workers)
    mag = np.abs(y)
    i = int(np.argmax(mag))
    return {"max_amp": float(mag[i]), "argmax": (float(px[i]), float(py[i])), "points": int(px.size)}


def final_round_senders(n: int, lam: float) -> GridBlock:
    """Sender block of the last relay round over distance sqrt(n)."""
    w = (math.sqrt(n) / 2.0) ** (2.0 / 3.0) * (72.0 / lam) ** (1.0 / 3.0)
    h = 0.5 * math.sqrt(lam * w)
    return GridBlock(0, math.floor(w) + 1, 0, math.floor(h) + 1)


def amplitude_shape(n: int, lam: float) -> float:
    return lam ** (1.0 / 3.0) * n ** (1.0 / 6.0) * math.log(n / lam)


def effective_workers(workers=None) -> int:
    return worker_count(workers)
