"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""
from __future__ import annotations

import math
import time

import numpy as np
import pytest

from beamrelay.cli import cli_main
from beamrelay.engine import (RunConfig, VerifyMode, amplitude_shape, final_round_senders, lower_bound_check,
                              max_amplitude_scan, run_random, run_unicast, self_sync_report)
from beamrelay.fieldmap import compute_field, is_diagonal, lobe_directions, render
from beamrelay.phasor import ChannelParams, channel_gain, perturb_integer_wavelength
from beamrelay.placement import make_grid, make_random
from beamrelay.schedule import (SHRINK_FACTOR, U1, U2, ScheduleParams, build_schedule, log_series_partial,
                                closed_form_unicast1, validate_step)
from beamrelay.senders import GridBlock
from beamrelay.sync import self_sync_error_budget

LIGHT = 299_792_458.0
DISTANCES = (10 ** 4, 10 ** 5, 10 ** 6)


def unicast1_config(d: int, workers: int) -> RunConfig:
    sp = ScheduleParams(0.1, 1440, U1, float(d))
    return RunConfig(make_grid(256, d + 1), ChannelParams(lam=0.1), sp, t0_processing_s=1e-2,
                     verify=VerifyMode("sampled", 64, 0, full_max=0), strict=True, workers=workers)


@pytest.fixture(scope="module")
def unicast1_runs():
    return {d: run_unicast(unicast1_config(d, 1)) for d in DISTANCES}


# -- 1 ---------------------------------------------------------------------------

def test_criterion_01_growth_law_consistency(report):
    t = time.perf_counter()
    combos = violations = 0
    worst = 0.0
    for lam in (0.05, 0.1, 0.25, 0.5):
        for mult in (1, 2, 4):
            w0 = mult * 72 / lam
            w, h = w0, math.sqrt(lam * w0 / 4)
            prev = closed_form_unicast1(0, lam, w0)
            for i in range(1, 9):
                # independent iteration of the growth law
                w = w * h / (3 * math.sqrt(2))
                h = math.sqrt(lam * w / 4)
                cf = closed_form_unicast1(i, lam, w0)
                violations += len(validate_step(prev, cf, i - 1, lam, U1))
                worst = max(worst, abs(cf.w - w) / w, abs(cf.h - h) / h)
                prev = cf
                combos += 1
    dt = time.perf_counter() - t
    ok = combos >= 50 and violations == 0 and worst <= 1e-9 and dt < 1.0
    report("criterion 1 growth-law consistency", ok,
           f"{combos} (lambda, w0, i) combos, {violations} violations, max rel gap {worst:.2e}, {dt:.3f} s")


# -- 2 ---------------------------------------------------------------------------

def test_criterion_02_constants(report):
    s = log_series_partial(200)
    budget = self_sync_error_budget(math.inf)
    partial = self_sync_error_budget(10 ** 6)
    ok = abs(s - 3.586) <= 1e-3 and abs(2 ** s - 12.011) <= 1e-2 and abs(budget - math.pi / 4) <= 1e-12
    ok = ok and abs(partial - math.pi / 4) < 1e-6 and SHRINK_FACTOR == 2 ** s
    report("criterion 2 constants", ok,
           f"series sum {s:.6f}, shrink factor {2 ** s:.6f}, budget(inf) {budget:.15f}, budget(1e6) {partial:.12f}")


# -- 3 ---------------------------------------------------------------------------

def test_criterion_03_phase_bound(report):
    t = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(2024))
    n = 10_000
    lam = rng.uniform(0.01, 2.0, n)
    w = 10.0 ** rng.uniform(0.0, 7.0, n)
    h = np.sqrt(lam * w / 4.0) * np.sqrt(rng.uniform(0.0, 1.0, n))
    worst = 0.0
    for a, b, c in zip(w.tolist(), h.tolist(), lam.tolist()):
        p = ChannelParams(lam=c)
        # arrival phase at the corner relative to the canonical phase at the same x
        rel = channel_gain((0.0, 0.0), (a, b), p) / channel_gain((0.0, 0.0), (a, 0.0), p)
        worst = max(worst, abs(math.atan2(rel.imag, rel.real)))
    dt = time.perf_counter() - t
    ok = worst <= math.pi / 4 + 1e-9 and dt < 5.0
    report("criterion 3 corner phase bound", ok, f"max shift {worst:.12f} <= pi/4 + 1e-9, {dt:.2f} s")


# -- 4 ---------------------------------------------------------------------------

def test_criterion_04_field_map(report):
    t = time.perf_counter()
    senders = GridBlock(0, 341, 90, 6)
    view = (0, 1705, 0, 186)
    params = ChannelParams(lam=0.1)
    fm = compute_field(senders, view, 1.0, params)
    dt = time.perf_counter() - t
    snr = np.abs(fm.aligned) ** 2
    recv = snr[90:97, 822:1304]
    mask = fm.above_mask(params.tau)
    lobes = lobe_directions(mask, view, 1.0, senders.x1, senders.y0, senders.y1)
    up, lo = lobes["upper"], lobes["lower"]
    ok = (fm.shape == (186, 1705) and senders.count == 2046 and recv.shape == (7, 482)
          and bool(np.all(recv >= 1.0)) and is_diagonal(up["angle"]) and is_diagonal(lo["angle"]) and dt < 60)
    ang = lambda d: "none" if d["angle"] is None else f"{d['angle']:.1f} deg ({d['cells']} cells)"  # noqa: E731
    report("criterion 4 field map", ok,
           f"receiver min |y|^2 {recv.min():.3f}, side lobes upper {ang(up)} lower {ang(lo)}, {dt:.1f} s")


# -- 5 ---------------------------------------------------------------------------

def test_criterion_05a_strict_run(report, unicast1_runs):
    res = unicast1_runs[10 ** 6]
    min_re = min(t.min_re for t in res.traces)
    report("criterion 5a strict run d=1e6", res.success,
           f"{res.rounds_total} rounds, min Re(y) {min_re:.3f}, {sum(t.receivers_checked for t in res.traces)} receivers")


def test_criterion_05b_relay_rounds(report, unicast1_runs):
    res = unicast1_runs[10 ** 6]
    relays = res.stage_rounds("relay")
    report("criterion 5b relay rounds after line phase", relays <= 7,
           f"{relays} relay rounds (+{res.stage_rounds('hop0')} first-rectangle hop, {res.stage_rounds('line')} line)")


def test_criterion_05c_round_pacing(report, unicast1_runs):
    rounds = [unicast1_runs[d].rounds_total for d in DISTANCES]
    ok = True
    parts = []
    for (d0, r0), (d1, r1) in zip(zip(DISTANCES, rounds), zip(DISTANCES[1:], rounds[1:])):
        decades = math.log(math.log(d1)) - math.log(math.log(d0))
        allowed = 2 * math.ceil(decades)
        ok = ok and r1 - r0 <= allowed
        parts.append(f"{d0:.0e}->{d1:.0e}: +{r1 - r0} (allowed {allowed})")
    report("criterion 5c round pacing", ok, f"rounds {rounds}; " + "; ".join(parts))


# -- 6 ---------------------------------------------------------------------------

def test_criterion_06_energy(report, unicast1_runs):
    ratios = []
    ok = True
    for d in DISTANCES:
        res = unicast1_runs[d]
        line = math.fsum(t.energy_added for t in res.traces if t.stage == "line")
        ratio = res.energy_total / d
        ok = ok and ratio <= 3 * math.sqrt(2) + line / d
        ratios.append(ratio)
    ok = ok and all(b <= a for a, b in zip(ratios, ratios[1:]))
    report("criterion 6 energy per distance", ok, "E/d " + ", ".join(f"{r:.5f}" for r in ratios))


# -- 7 ---------------------------------------------------------------------------

def test_criterion_07_velocity(report, unicast1_runs):
    v = {d: unicast1_runs[d].velocity / LIGHT for d in DISTANCES}
    model = {}
    for d in DISTANCES:
        res = unicast1_runs[d]
        model[d] = math.fsum(t.elapsed_time_s for t in res.traces)
    monotone = v[10 ** 4] <= v[10 ** 5] <= v[10 ** 6]
    ok = v[10 ** 4] >= 0.5 and v[10 ** 6] >= 0.9 and monotone
    report("criterion 7 velocity", ok,
           ", ".join(f"v({d:.0e})/c {v[d]:.3e}" for d in DISTANCES)
           + f"; T(1e6) {model[10 ** 6]:.3f} s of which processing {unicast1_runs[10 ** 6].rounds_total * 1e-2:.2f} s")


# -- 8 ---------------------------------------------------------------------------

def test_criterion_08_growth_law(report, unicast1_runs):
    checks = {d: lower_bound_check(unicast1_runs[d]) for d in DISTANCES}
    synthetic = lower_bound_check([2.0 ** (3 ** i) for i in range(1, 5)])
    ok = all(c["ok"] and math.isfinite(c["fitted_k"]) for c in checks.values()) and not synthetic["ok"]
    report("criterion 8 growth law", ok,
           ", ".join(f"k({d:.0e}) {c['fitted_k']:.3f}" for d, c in checks.items())
           + f" <= {checks[10 ** 6]['limit']:.3f}; 2^(3^i) fitted k {synthetic['fitted_k']:.3g} rejected")


# -- 9 ---------------------------------------------------------------------------

def test_criterion_09_self_sync(report):
    with pytest.warns(UserWarning):
        lam = perturb_integer_wavelength(2.0)
    w0 = math.ceil(96 * math.pi ** 2 * math.e * SHRINK_FACTOR / lam)
    probe = build_schedule(ScheduleParams(lam, w0, U2, 1e15, origin=9 * w0))
    distance = probe.rects[4].x_hi
    sp = ScheduleParams(lam, w0, U2, distance)
    cfg = RunConfig(make_grid(200_000, 10 ** 13), ChannelParams(lam=lam), sp,
                    verify=VerifyMode("sampled", 64, 0, full_max=0), strict=True)
    res = run_unicast(cfg)
    rep = self_sync_report(res)
    relays = [r for r in rep if r["index"] >= 1]
    ok = (res.success and len(relays) == 4 and all(r["worst_phase_err"] <= r["budget"] for r in rep)
          and all(r["min_re"] >= 1.0 for r in rep))
    detail = "; ".join(f"#{r['index']} err {r['worst_phase_err']:.3f}/{r['budget']:.3f} Re {r['min_re']:.3f}"
                       for r in rep)
    report("criterion 9 self-sync", ok, f"w0 {w0}, d {distance:.4e}: {detail}")


# -- 10 --------------------------------------------------------------------------

def test_criterion_10_random_model(report):
    n, k = 100_000, 3.0
    lam = 3 * k / math.sqrt(math.log(n))
    params = ChannelParams(lam=lam)
    wins = 0
    ratios = []
    failures = []
    for seed in range(100):
        cfg = RunConfig(make_random(n, seed, k), params, ScheduleParams(lam, 1.0, U1, 0.0), source=None,
                        strict=False, k=k)
        run = run_random(cfg)
        wins += run.success
        if not run.success:
            failures.append((seed, run.reason, [d for d in run.density if not d["pass"]][:1]))
        r = run.result
        ratios.append(r.energy_total / (r.distance * math.log(n)))
    c_fit = max(ratios[:50])
    held = max(ratios[50:])
    ok = wins >= 95 and held <= c_fit
    report("criterion 10 random model", ok,
           f"{wins}/100 succeeded; energy C fitted on seeds 0-49 = {c_fit:.3f}, held-out max {held:.3f}"
           + (f"; failures {failures[:3]}" if failures else ""))


# -- 11 --------------------------------------------------------------------------

def test_criterion_11_field_strength(report):
    lam = 0.1
    ratios = {}
    for n in (10 ** 4, 10 ** 5, 10 ** 6):
        b = final_round_senders(n, lam)
        w = b.ncols
        near = max_amplitude_scan(b, (-16, w + 16, -16, b.nrows + 16), 1.0, lam)
        far = max_amplitude_scan(b, (-w, 3 * w, -w, w), 0.125, lam)
        ratios[n] = max(near["max_amp"], far["max_amp"]) / amplitude_shape(n, lam)
    c_fit = max(ratios[10 ** 4], ratios[10 ** 5])
    ok = ratios[10 ** 6] <= c_fit
    report("criterion 11 field strength", ok,
           ", ".join(f"max|y|/shape(n={n:.0e}) {r:.4f}" for n, r in ratios.items()) + f"; C fitted {c_fit:.4f}")


# -- 12 --------------------------------------------------------------------------

def test_criterion_12_determinism(report, unicast1_runs, tmp_path):
    again = run_unicast(unicast1_config(10 ** 6, 4))
    same_trace = again.to_jsonl() == unicast1_runs[10 ** 6].to_jsonl()
    cfg = tmp_path / "c5.cfg"
    cfg.write_text("rows=256\ncols=1000001\nlambda=0.1\nw0=1440\ndistance=1000000\nresolution=0.25\n")
    images = []
    for workers in ("1", "4"):
        out = tmp_path / f"r1_{workers}.ppm"
        assert cli_main(["field", "--config", str(cfg), "--round", "1", "--out", str(out), "--workers", workers]) == 0
        images.append(out.read_bytes())
    fm = compute_field(GridBlock(0, 341, 90, 6), (800, 900, 80, 110), 1.0, ChannelParams(lam=0.1), 1)
    fm4 = compute_field(GridBlock(0, 341, 90, 6), (800, 900, 80, 110), 1.0, ChannelParams(lam=0.1), 4)
    ok = same_trace and images[0] == images[1] and render(fm) == render(fm4)
    report("criterion 12 determinism", ok,
           f"trace bytes identical (workers 1 vs 4): {same_trace}; PPM identical: {images[0] == images[1]}")
