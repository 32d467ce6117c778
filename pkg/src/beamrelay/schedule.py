"""Relay-rectangle schedules for the two unicast variants.

Coordinates: a leg runs along +x from its source at x = 0.  Rectangle 0
occupies ``[origin, origin + w0] x [0, h0]``; rectangle ``i`` starts a gap of
``w_i`` after rectangle ``i-1`` ends and is ``w_i`` wide.  Heights grow on one
side of the axis only.  Node membership uses closed intervals on integer
coordinates.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

SQRT18 = math.sqrt(18.0)
GROWTH = 3.0 * math.sqrt(2.0)  # node budget per unit of next-rectangle width
MAX_ROUNDS = 64
RTOL = 1e-9

PHASE_CORRECTED = "PhaseCorrected"
SELF_SYNC = "SelfSync"
U1 = "u1"
U2 = "u2"


def log_series_partial(terms: int) -> float:
    """Partial sum of sum_{u>=0} log2(2+u) / 1.5**(u+1)."""
    return math.fsum(math.log2(2 + u) / 1.5 ** (u + 1) for u in range(terms))


LOG_SERIES = log_series_partial(200)
SHRINK_FACTOR = 2.0 ** LOG_SERIES
HEIGHT_GAIN = 18.0 ** -0.25


@dataclass(frozen=True)
class RectDims:
    w: float
    h: float


def _le(a, b, rtol=RTOL):
    return a <= b + rtol * abs(b)


def validate_step(prev: RectDims, nxt: RectDims, i: int, lam: float, variant: str = U1) -> list[str]:
    """Labels of the growth inequalities violated by the step ``prev -> nxt``."""
    bad = []
    if not _le(prev.h, nxt.h):
        bad.append("h ↑ violated")
    if not _le(prev.w, nxt.w):
        bad.append("w ↑ violated")
    if not _le(nxt.w, prev.w * prev.h / GROWTH):
        bad.append("w_{i+1} ≤ w_i·h_i/(3√2) violated")
    if not _le(nxt.h, nxt.w):
        bad.append("h ≤ w violated")
    if variant == U1:
        if not _le(nxt.h ** 2, lam * nxt.w / 4.0):
            bad.append("h_{i+1}² ≤ λ·w_{i+1}/4 violated")
    elif variant == U2:
        if not _le(prev.h ** 2, 3.0 * lam * prev.w / (2.0 * math.pi ** 2 * (i + 1) ** 2)):
            bad.append("h_i² ≤ 3λw_i/(2π²(i+1)²) violated")
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return bad


# -- unicast I ---------------------------------------------------------------

def u1_height(w: float, lam: float) -> float:
    return math.sqrt(lam * w / 4.0)


def u1_min_w0(lam: float) -> float:
    return 72.0 / lam


def closed_form_unicast1(i: int, lam: float, w0: float) -> RectDims:
    if w0 < u1_min_w0(lam) * (1 - 1e-12):
        raise ValueError("base below 1, sequence shrinks")
    if i == 0:
        return RectDims(w0, u1_height(w0, lam))
    e = 1.5 ** i
    h0 = u1_height(w0, lam)
    return RectDims((72.0 / lam) * (lam * w0 / 72.0) ** e, SQRT18 * (h0 / SQRT18) ** e)


def step_unicast1(prev: RectDims, lam: float) -> RectDims:
    w = prev.w * prev.h / GROWTH
    return RectDims(w, u1_height(w, lam))


# -- unicast II --------------------------------------------------------------

def u2_height(w: float, i: int, lam: float) -> float:
    return math.sqrt(3.0 * lam * w / (2.0 * math.pi ** 2 * (i + 1) ** 2))


def u2_min_w0(lam: float) -> float:
    """Smallest admissible base width, using the shrink factor ``2**LOG_SERIES`` (the stricter form)."""
    return 96.0 * math.pi ** 2 * math.e * SHRINK_FACTOR / lam


def u2_min_w0_stated(lam: float) -> float:
    """The same threshold written with the series sum instead of the shrink factor (looser)."""
    return 96.0 * math.pi ** 2 * math.e * LOG_SERIES / lam


def recursion_unicast2(prev: RectDims, i: int, lam: float) -> RectDims:
    w = math.sqrt(lam) / (math.sqrt(12.0) * math.pi * (i + 1)) * prev.w ** 1.5
    h = HEIGHT_GAIN * (1 + i) / (2 + i) * prev.h ** 1.5
    return RectDims(w, h)


def closed_form_bounds_unicast2(i: int, lam: float, w0: float) -> tuple[float, float]:
    """Bounds ``(lower, upper)`` on the width of rectangle ``i``.

    Unrolling the width recursion gives
    ``w_i = c1**(2*1.5**i - 2) * P_i * w0**(1.5**i)`` with ``c1 = sqrt(lam)/(sqrt(12)*pi)``
    and ``P_i = 2**(-S_i * 1.5**i)``, where ``S_i`` is a partial sum of a
    series dominated term-wise by ``LOG_SERIES``.  Hence ``SHRINK_FACTOR`` yields
    the lower bound and dropping ``P_i <= 1`` yields the upper bound.
    """
    c1 = math.sqrt(lam) / (math.sqrt(12.0) * math.pi)
    e = 1.5 ** i
    # in log space: w0**e overflows for i >= 8
    base = (2 * e - 2) * math.log(c1) + e * math.log(w0)
    lower = math.exp(base - e * math.log(SHRINK_FACTOR))
    upper = math.exp(base)
    return lower, upper


# -- layout ------------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleParams:
    lam: float
    w0: float
    variant: str = U1
    distance: float = 0.0
    h0: float | None = None
    origin: float = 0.0

    def __post_init__(self):
        if self.variant not in (U1, U2):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.h0 is None:
            h0 = u1_height(self.w0, self.lam) if self.variant == U1 else u2_height(self.w0, 0, self.lam)
            object.__setattr__(self, "h0", h0)

    @property
    def policy(self) -> str:
        return PHASE_CORRECTED if self.variant == U1 else SELF_SYNC

    def check(self) -> list[str]:
        """Precondition problems (empty when the parameters are admissible)."""
        out = []
        if self.variant == U1:
            if self.w0 < u1_min_w0(self.lam) * (1 - 1e-12):
                out.append(f"w0={self.w0} below 72/lambda={u1_min_w0(self.lam):.6g}")
            if self.h0 < SQRT18 * (1 - 1e-12):
                out.append(f"h0={self.h0} below sqrt(18)")
        else:
            if self.w0 < u2_min_w0(self.lam):
                out.append(f"w0={self.w0} below 96*pi^2*e*2**series/lambda={u2_min_w0(self.lam):.6g}")
            if self.h0 < 4 * SQRT18 * (1 - 1e-12):
                out.append(f"h0={self.h0} below 4*sqrt(18)")
        return out


class PreconditionError(ValueError):
    pass


@dataclass
class RectSpec:
    round: int
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    policy: str = PHASE_CORRECTED
    kind: str = "full"  # full | shrunk | final
    # block of this rectangle's predecessor that transmits in this round
    sender_x_lo: int | None = None
    sender_x_hi: int | None = None
    sender_rows: int | None = None

    @property
    def w(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def h(self) -> float:
        return self.y_hi - self.y_lo

    @property
    def dims(self) -> RectDims:
        return RectDims(self.w, self.h)

    def columns(self) -> tuple[int, int]:
        return math.ceil(self.x_lo - 1e-9), math.floor(self.x_hi + 1e-9)

    def rows(self) -> tuple[int, int]:
        return math.ceil(self.y_lo - 1e-9), math.floor(self.y_hi + 1e-9)

    @property
    def ncols(self) -> int:
        a, b = self.columns()
        return max(0, b - a + 1)

    @property
    def nrows(self) -> int:
        a, b = self.rows()
        return max(0, b - a + 1)

    @property
    def node_count(self) -> int:
        return self.ncols * self.nrows

    def record(self) -> dict:
        d = {"round": self.round, "x_lo": self.x_lo, "x_hi": self.x_hi, "y_lo": self.y_lo,
             "y_hi": self.y_hi, "w": self.w, "h": self.h, "policy": self.policy}
        if self.kind != "full":
            d["kind"] = self.kind
        if self.sender_x_lo is not None:
            d.update(sender_x_lo=self.sender_x_lo, sender_x_hi=self.sender_x_hi, sender_rows=self.sender_rows)
        return d


@dataclass
class RectSchedule:
    params: ScheduleParams
    rects: list[RectSpec] = field(default_factory=list)
    degenerate: bool = False

    @property
    def relays(self) -> list[RectSpec]:
        return self.rects[1:]

    def __len__(self):
        return len(self.relays)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.record()) + "\n" for r in self.rects)

    def violations(self) -> list[tuple[int, list[str]]]:
        out = []
        for a, b in zip(self.rects[:-1], self.rects[1:]):
            v = validate_step(a.dims, b.dims, a.round, self.params.lam, self.params.variant)
            if v:
                out.append((b.round, v))
        return out


def _full_next(prev: RectDims, i: int, p: ScheduleParams) -> RectDims:
    if p.variant == U1:
        return step_unicast1(prev, p.lam)
    return recursion_unicast2(prev, i, p.lam)


def _height(w: float, i: int, p: ScheduleParams) -> float:
    return u1_height(w, p.lam) if p.variant == U1 else u2_height(w, i, p.lam)


def _sender_block(prev: RectSpec, next_w: float) -> tuple[int, int, int]:
    """Right-most columns of ``prev`` carrying the node budget for a hop of width ``next_w``."""
    c_lo, c_hi = prev.columns()
    rows = prev.nrows
    cols = c_hi - c_lo + 1
    need = math.ceil(GROWTH * next_w / rows - 1e-9)
    c = max(1, min(cols, need))
    return c_hi - c + 1, c_hi, rows


def build_schedule(p: ScheduleParams, strict: bool = True) -> RectSchedule:
    """Lay out rectangles until one contains the target at ``x = distance``.

    Full steps follow the growth law.  When the remaining distance fits in one
    full step, the last rectangle is clipped to end exactly at the target;
    when it would leave a sliver too small for a useful final hop, the step
    before is shortened so the last two hops share the remainder.  Only the
    monotonicity rules can fail for such clipped rectangles.
    """
    problems = p.check()
    if problems and strict:
        raise PreconditionError("; ".join(problems))
    sched = RectSchedule(p)
    rel = p.distance - p.origin
    if rel < p.w0 - 1e-9:
        sched.degenerate = True
        sched.rects.append(RectSpec(0, p.origin, p.origin + max(rel, 0.0), 0.0, p.h0, p.policy, "final"))
        return sched
    sched.rects.append(RectSpec(0, p.origin, p.origin + p.w0, 0.0, p.h0, p.policy))
    cur = RectDims(p.w0, p.h0)
    x = p.origin + p.w0
    i = 0
    shrunk = False
    while x < p.distance - 1e-9:
        if i >= MAX_ROUNDS:
            raise RuntimeError(f"schedule exceeded {MAX_ROUNDS} rounds")
        nxt = _full_next(cur, i, p)
        rem = p.distance - x
        # a shrunk step leaves exactly one final hop of the same width
        if shrunk or rem <= 2 * nxt.w:
            w = rem / 2.0
            kind = "final"
        elif rem < 4 * nxt.w:
            # split the remainder into two hops, never narrower than the current rectangle
            w = max(rem / 4.0, cur.w)
            kind = "shrunk"
        else:
            w = nxt.w
            kind = "full"
        h = nxt.h if kind == "full" else _height(w, i + 1, p)
        prev = sched.rects[-1]
        s_lo, s_hi, s_rows = _sender_block(prev, w)
        x_lo = x + w
        x_hi = p.distance if kind == "final" else x + 2 * w
        sched.rects.append(RectSpec(i + 1, x_lo, x_hi, 0.0, h, p.policy, kind, s_lo, s_hi, s_rows))
        cur = RectDims(w, h)
        x = x_hi
        shrunk = kind == "shrunk"
        i += 1
    return sched


def round_bound_unicast1(lam: float, w0: float, distance: float) -> int:
    """ceil(log_{3/2} log_{lam*w0/72}(distance*lam/72)) + 2."""
    base = lam * w0 / 72.0
    arg = distance * lam / 72.0
    if base <= 1.0 or arg <= base:
        return 2
    return math.ceil(math.log(math.log(arg) / math.log(base), 1.5)) + 2


# -- routing -----------------------------------------------------------------

@dataclass
class Leg:
    """One straight leg: local coordinates map to the grid by ``origin + u*axis + v*side*normal``."""

    origin: tuple[float, float]
    axis: tuple[int, int]
    side: int
    length: float
    schedule: RectSchedule | None = None

    @property
    def empty(self) -> bool:
        return self.length == 0

    def to_global(self, u, v):
        ax, ay = self.axis
        nx, ny = -ay * self.side, ax * self.side
        return (self.origin[0] + u * ax + v * nx, self.origin[1] + u * ay + v * ny)


def _side_toward_center(coord: float, extent: int | None) -> int:
    if extent is None:
        return 1
    return 1 if coord <= (extent - 1) / 2.0 else -1


def route_xy(source, target, lam: float, w0: float, variant: str = U1,
             rows: int | None = None, cols: int | None = None, strict: bool = True) -> tuple[Leg, Leg]:
    """Split a unicast into an x leg then a y leg turning at ``(target_x, source_y)``.

    Each non-empty leg carries its relay schedule in leg coordinates, with
    rectangle 0 placed nine base widths from the leg's start.
    """
    sx, sy = source
    tx, ty = target
    dx, dy = tx - sx, ty - sy

    def leg(origin, axis, length, side):
        lg = Leg(origin, axis, side, abs(length))
        if lg.length > 0:
            p = ScheduleParams(lam, w0, variant, lg.length, origin=9 * w0)
            lg.schedule = build_schedule(p, strict=strict)
        return lg

    # for the x leg the rectangles grow along y; for the y leg along x
    ax = (1 if dx >= 0 else -1, 0)
    side_x = _side_toward_center(sy, rows) * (1 if ax[0] > 0 else -1)
    ay = (0, 1 if dy >= 0 else -1)
    side_y = -_side_toward_center(tx, cols) * (1 if ay[1] > 0 else -1)
    leg_x = leg((sx, sy), ax, dx, side_x)
    leg_y = leg((tx, sy), ay, dy, side_y)
    return leg_x, leg_y


def schedule_table(sched: RectSchedule) -> str:
    lines = [f"{'round':>5} {'x_lo':>14} {'x_hi':>14} {'w':>14} {'h':>10} {'kind':>7}"]
    for r in sched.rects:
        lines.append(f"{r.round:>5} {r.x_lo:>14.6g} {r.x_hi:>14.6g} {r.w:>14.6g} {r.h:>10.5g} {r.kind:>7}")
    return "\n".join(lines)


def params_record(p: ScheduleParams) -> dict:
    return asdict(p)
