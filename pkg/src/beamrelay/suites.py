"""Self-contained property suites run by ``beamrelay verify``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import lower_bound_check
from .schedule import (SHRINK_FACTOR, LOG_SERIES, U1, RectDims, closed_form_bounds_unicast2, closed_form_unicast1,
                       log_series_partial, recursion_unicast2, step_unicast1, u1_min_w0, u2_height, u2_min_w0,
                       validate_step)
from .sync import phase_shift_delta, self_sync_error_budget

LAMBDAS = (0.05, 0.1, 0.25, 0.5)
W0_MULTIPLES = (1, 2, 4)
MAX_STEP = 8


@dataclass
class Check:
    name: str
    ok: bool
    detail: str


def unicast1_consistency() -> tuple[int, int, float]:
    """(schedules, violations, worst relative gap closed form vs recursion) over the parameter grid."""
    violations = 0
    worst = 0.0
    schedules = 0
    for lam in LAMBDAS:
        for mult in W0_MULTIPLES:
            schedules += 1
            w0 = mult * u1_min_w0(lam)
            it = closed_form_unicast1(0, lam, w0)
            prev = it
            for i in range(1, MAX_STEP + 1):
                cf = closed_form_unicast1(i, lam, w0)
                violations += len(validate_step(prev, cf, i - 1, lam, U1))
                it = step_unicast1(it, lam)
                worst = max(worst, abs(cf.w - it.w) / it.w, abs(cf.h - it.h) / it.h)
                prev = cf
    return schedules, violations, worst


def corner_phase_sweep(count: int = 10_000, seed: int = 0) -> float:
    """Largest corner excess phase over random (w, h, lam) with h**2 <= lam*w/4."""
    rng = np.random.Generator(np.random.PCG64(seed))
    lam = rng.uniform(0.01, 2.0, count)
    w = 10.0 ** rng.uniform(0.0, 8.0, count)
    h = np.sqrt(lam * w / 4.0) * rng.uniform(0.0, 1.0, count)
    worst = 0.0
    for a, b, c in zip(w.tolist(), h.tolist(), lam.tolist()):
        worst = max(worst, phase_shift_delta((0.0, 0.0), (a, b), c))
    return worst


def lemmas() -> list[Check]:
    n, bad, gap = unicast1_consistency()
    out = [Check("closed-form widths pass every growth inequality", bad == 0, f"{n} schedules, {bad} violations"),
           Check("closed form matches the recursion", gap <= 1e-9, f"max relative gap {gap:.3e}")]
    worst = corner_phase_sweep()
    out.append(Check("corner phase shift within pi/4", worst <= math.pi / 4 + 1e-9,
                     f"max {worst:.12f} vs {math.pi / 4:.12f}"))
    return out


def series() -> list[Check]:
    s = log_series_partial(200)
    return [Check("log-growth series", abs(s - 3.586) <= 1e-3, f"series sum = {s:.6f}"),
            Check("width shrink factor", abs(2.0 ** s - 12.011) <= 1e-2, f"2**sum = {SHRINK_FACTOR:.6f}"),
            Check("self-sync budget limit", abs(self_sync_error_budget(math.inf) - math.pi / 4) <= 1e-12,
                  f"partial(10**5) = {self_sync_error_budget(100_000):.12f}")]


def bounds() -> list[Check]:
    out = []
    worst_lo, worst_hi = math.inf, math.inf
    for lam in (0.5, 1.0, 2.0, 4.0):
        w0 = math.ceil(u2_min_w0(lam))
        d = RectDims(w0, u2_height(w0, 0, lam))
        for i in range(0, 7):
            lo, hi = closed_form_bounds_unicast2(i, lam, w0)
            worst_lo = min(worst_lo, d.w / lo)
            worst_hi = min(worst_hi, hi / d.w)
            d = recursion_unicast2(d, i, lam)
    out.append(Check("unicast II widths above the lower bound", worst_lo >= 1 - 1e-12, f"min w/lower {worst_lo:.6g}"))
    out.append(Check("unicast II widths below the upper bound", worst_hi >= 1 - 1e-12, f"min upper/w {worst_hi:.6g}"))
    dexp = [2.0 ** (2 ** i) for i in range(5)]
    r = lower_bound_check(dexp)
    out.append(Check("double-exponential trace fits k = 1", r["ok"] and r["fitted_k"] <= 1 + 1e-12,
                     f"fitted k {r['fitted_k']:.6g}"))
    sup = [2.0 ** (3 ** i) for i in range(1, 5)]
    r = lower_bound_check(sup)
    out.append(Check("super-quadratic trace rejected", not r["ok"], f"fitted k {r['fitted_k']:.6g}"))
    out.append(Check("series sum below shrink factor", LOG_SERIES < SHRINK_FACTOR, f"{LOG_SERIES:.5f} < {SHRINK_FACTOR:.5f}"))
    return out


SUITES = {"lemmas": lemmas, "series": series, "bounds": bounds}
