"""Corrective delays and phase-shift bounds.

The delay for a receiver is ``1/f + arg(y_al)/(2*pi*f)`` where ``y_al`` is
the received field relative to the receiver's canonical carrier.  Waiting
that long rotates the received phasor by ``-2*pi - arg(y_al)`` and so lands
it exactly on the canonical phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .phasor import ChannelParams, ZeroDistanceError
from .schedule import PHASE_CORRECTED, RectSpec
from .senders import GridBlock, PointSenders


@dataclass
class DelayPlan:
    delays_s: np.ndarray
    round: int
    policy: str = PHASE_CORRECTED


@dataclass(frozen=True)
class PhaseShiftBound:
    h: float
    w: float
    lam: float
    alpha: float

    @property
    def bound(self) -> float:
        return excess_phase_bound(self.h, self.w, self.lam)

    @property
    def certified(self) -> bool:
        return self.h ** 2 <= (self.alpha / math.pi) * self.lam * self.w * (1 + 1e-12)


def excess_phase_bound(h: float, w: float, lam: float) -> float:
    """Upper bound pi*h**2/(lam*w) on the excess phase at lateral offset h, range w."""
    return math.pi * h * h / (lam * w)


def phase_shift_delta(s, r, lam: float) -> float:
    """Exact excess phase (2*pi/lam)*(dist - dx) of ``r`` relative to ``s``."""
    dx = float(r[0]) - float(s[0])
    dy = float(r[1]) - float(s[1])
    d = math.hypot(dx, dy)
    ex = dy * dy / (d + dx) if dx > 0 else d - dx
    return 2.0 * math.pi * ex / lam


def self_sync_error_budget(rounds) -> float:
    """sum_{i=1..rounds} 3/(2*pi*i**2); ``math.inf`` gives the limit pi/4."""
    if rounds == math.inf:
        return math.pi / 4.0
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    return math.fsum(3.0 / (2.0 * math.pi * i * i) for i in range(1, int(rounds) + 1))


def sqrt_expansion_gap(x):
    """x**2/2 - (sqrt(1+x**2) - 1), computed without cancellation; never negative."""
    x = np.asarray(x, dtype=np.float64)
    s = np.sqrt(1.0 + x * x)
    return x * x / 2.0 - x * x / (s + 1.0)


def delay_from_field(y_al, params: ChannelParams):
    """Delay in seconds that realigns a received aligned-frame field."""
    ang = np.angle(y_al)
    ang = np.where(ang == -np.pi, np.pi, ang)  # principal branch (-pi, pi]
    return (1.0 + ang / (2.0 * np.pi)) / params.carrier_freq_hz


def residual_after_delay(y_al, delay_s, params: ChannelParams):
    """Phase of the received field relative to canonical after waiting ``delay_s``."""
    rot = np.exp(-2j * np.pi * np.mod(delay_s * params.carrier_freq_hz, 1.0))
    return np.angle(np.asarray(y_al) * rot)


def _one(field_fn, r):
    y, _ = field_fn(np.array([float(r[0])]), np.array([float(r[1])]))
    if np.isnan(y[0]):
        raise ZeroDistanceError("zero distance")
    return y[0]


def block_of(rect: RectSpec, col_phasors=1.0, amp: float = 1.0) -> GridBlock:
    c_lo, c_hi = rect.columns()
    r_lo, r_hi = rect.rows()
    return GridBlock(c_lo, c_hi - c_lo + 1, r_lo, r_hi - r_lo + 1, col_phasors, amp)


def psi_rect(i: int, r, senders: RectSpec | GridBlock | PointSenders, params: ChannelParams) -> float:
    """Corrective delay at ``r`` for the field of round ``i``'s senders (brute force)."""
    src = block_of(senders) if isinstance(senders, RectSpec) else senders
    if src.count == 0:
        raise ValueError("empty sender set")
    y = _one(lambda x, yy: src.field(x, yy, params.lam), r)
    return float(delay_from_field(y, params))


def line_senders(m: int, amp: float = 1.0) -> GridBlock:
    return GridBlock(0, int(m), 0, 1, 1.0, amp)


def psi_line(r, m: int, params: ChannelParams) -> float:
    """Corrective delay at ``r`` for the in-phase line of nodes ``0..m-1`` on the axis."""
    if r[0] <= m - 1 and r[1] == 0:
        raise ValueError("receiver must lie right of the line")
    return psi_rect(0, r, line_senders(m), params)


def plan_delays(i: int, receivers: np.ndarray, senders, params: ChannelParams) -> DelayPlan:
    y, _ = senders.field(receivers[:, 0], receivers[:, 1], params.lam)
    return DelayPlan(delay_from_field(y, params), i)
