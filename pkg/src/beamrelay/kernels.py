"""Compiled field-summation kernels.

All fields are evaluated in the *aligned* frame: a sender at ``u`` carries a
residual phasor ``a`` relative to the canonical carrier ``exp(-2j*pi*u_x/lam)``
and the kernels return

    y_al(r) = sum_s a_s * exp(-2j*pi*excess/lam) / dist,  excess = dist - (r_x - u_x)

so that the physical field is ``exp(-2j*pi*r_x/lam) * y_al(r)``.  The path
excess is computed as ``dy**2 / (dist + dx)`` when ``dx > 0``, which keeps full
relative precision at distances of 1e12 grid units.

Every per-receiver sum walks the senders in the caller's order and combines
them with a fixed pairwise tree (sequential leaves of ``LEAF`` terms, merged
with a binary counter).  Receivers are split into chunks that run on a thread
pool; each receiver's value depends only on its own tree, so results are
bit-identical for any worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

LEAF = 64
_STACK = 64
TWO_PI = 2.0 * math.pi
WORKERS_ENV = "BEAMRELAY_WORKERS"


@njit(cache=True, nogil=True)
def _excess(dx, dy, d):
    if dx > 0.0:
        return dy * dy / (d + dx)
    return d - dx


@njit(cache=True, nogil=True)
def _rotor(excess, lam):
    t = excess / lam
    t = t - math.floor(t)
    ph = -TWO_PI * t
    return math.cos(ph), math.sin(ph)


@njit(cache=True, nogil=True)
def _push(st_re, st_im, st_lv, sp, re, im):
    st_re[sp] = re
    st_im[sp] = im
    st_lv[sp] = 0
    sp += 1
    while sp >= 2 and st_lv[sp - 1] == st_lv[sp - 2]:
        st_re[sp - 2] = st_re[sp - 2] + st_re[sp - 1]
        st_im[sp - 2] = st_im[sp - 2] + st_im[sp - 1]
        st_lv[sp - 2] += 1
        sp -= 1
    return sp


@njit(cache=True, nogil=True)
def _fold(st_re, st_im, sp, leaf_re, leaf_im, cnt):
    # the partial leaf is the right-most operand
    if cnt > 0:
        tot_re = leaf_re
        tot_im = leaf_im
        k = sp - 1
    elif sp > 0:
        tot_re = st_re[sp - 1]
        tot_im = st_im[sp - 1]
        k = sp - 2
    else:
        return 0.0, 0.0
    while k >= 0:
        tot_re = st_re[k] + tot_re
        tot_im = st_im[k] + tot_im
        k -= 1
    return tot_re, tot_im


@njit(cache=True, nogil=True)
def pairwise_sum(re, im):
    """Sum complex terms (split into re/im arrays) with the fixed tree."""
    st_re = np.empty(_STACK)
    st_im = np.empty(_STACK)
    st_lv = np.empty(_STACK, dtype=np.int64)
    sp = 0
    leaf_re = 0.0
    leaf_im = 0.0
    cnt = 0
    for k in range(re.shape[0]):
        leaf_re += re[k]
        leaf_im += im[k]
        cnt += 1
        if cnt == LEAF:
            sp = _push(st_re, st_im, st_lv, sp, leaf_re, leaf_im)
            leaf_re = 0.0
            leaf_im = 0.0
            cnt = 0
    return _fold(st_re, st_im, sp, leaf_re, leaf_im, cnt)


@njit(cache=True, nogil=True)
def _points_kernel(rx, ry, sx, sy, sre, sim, lam, out_re, out_im, near):
    st_re = np.empty(_STACK)
    st_im = np.empty(_STACK)
    st_lv = np.empty(_STACK, dtype=np.int64)
    lim = 2.0 * lam
    n_near = 0
    for i in range(rx.shape[0]):
        sp = 0
        leaf_re = 0.0
        leaf_im = 0.0
        cnt = 0
        hit = False
        for k in range(sx.shape[0]):
            dx = rx[i] - sx[k]
            dy = ry[i] - sy[k]
            d = math.sqrt(dx * dx + dy * dy)
            if d == 0.0:
                hit = True
                break
            if d <= lim:
                n_near += 1
            c, s = _rotor(_excess(dx, dy, d), lam)
            inv = 1.0 / d
            leaf_re += (sre[k] * c - sim[k] * s) * inv
            leaf_im += (sre[k] * s + sim[k] * c) * inv
            cnt += 1
            if cnt == LEAF:
                sp = _push(st_re, st_im, st_lv, sp, leaf_re, leaf_im)
                leaf_re = 0.0
                leaf_im = 0.0
                cnt = 0
        if hit:
            out_re[i] = np.nan
            out_im[i] = np.nan
            continue
        out_re[i], out_im[i] = _fold(st_re, st_im, sp, leaf_re, leaf_im, cnt)
    near[0] = n_near


@njit(cache=True, nogil=True)
def _block_kernel(rx, ry, x0, ncols, y0, nrows, cre, cim, amp, lam, out_re, out_im, near):
    # senders are the integer nodes x0..x0+ncols-1 by y0..y0+nrows-1, walked
    # column by column; every column shares the residual (cre, cim)
    st_re = np.empty(_STACK)
    st_im = np.empty(_STACK)
    st_lv = np.empty(_STACK, dtype=np.int64)
    lim = 2.0 * lam
    n_near = 0
    for i in range(rx.shape[0]):
        sp = 0
        leaf_re = 0.0
        leaf_im = 0.0
        cnt = 0
        hit = False
        for cx in range(ncols):
            dx = rx[i] - (x0 + cx)
            ar = cre[cx] * amp
            ai = cim[cx] * amp
            for cy in range(nrows):
                dy = ry[i] - (y0 + cy)
                d = math.sqrt(dx * dx + dy * dy)
                if d == 0.0:
                    hit = True
                    break
                if d <= lim:
                    n_near += 1
                c, s = _rotor(_excess(dx, dy, d), lam)
                inv = 1.0 / d
                leaf_re += (ar * c - ai * s) * inv
                leaf_im += (ar * s + ai * c) * inv
                cnt += 1
                if cnt == LEAF:
                    sp = _push(st_re, st_im, st_lv, sp, leaf_re, leaf_im)
                    leaf_re = 0.0
                    leaf_im = 0.0
                    cnt = 0
            if hit:
                break
        if hit:
            out_re[i] = np.nan
            out_im[i] = np.nan
            continue
        out_re[i], out_im[i] = _fold(st_re, st_im, sp, leaf_re, leaf_im, cnt)
    near[0] = n_near


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _dispatch(fn, rx, ry, args, workers, chunk=512):
    """Run ``fn`` over receiver chunks; returns (complex field, near-field count)."""
    n = rx.shape[0]
    out_re = np.zeros(n)
    out_im = np.zeros(n)
    bounds = [(a, min(n, a + chunk)) for a in range(0, n, chunk)]
    nears = np.zeros((max(1, len(bounds)), 1), dtype=np.int64)

    def task(k):
        a, b = bounds[k]
        fn(rx[a:b], ry[a:b], *args, out_re[a:b], out_im[a:b], nears[k])

    w = worker_count(workers)
    if w == 1 or len(bounds) <= 1:
        for k in range(len(bounds)):
            task(k)
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            list(pool.map(task, range(len(bounds))))
    return out_re + 1j * out_im, int(nears.sum())


def field_points(rx, ry, sx, sy, phasors, lam, workers=None):
    """Aligned field at receivers from explicit senders (caller fixes the order)."""
    rx = np.ascontiguousarray(rx, dtype=np.float64)
    ry = np.ascontiguousarray(ry, dtype=np.float64)
    ph = np.asarray(phasors, dtype=np.complex128)
    args = (
        np.ascontiguousarray(sx, dtype=np.float64),
        np.ascontiguousarray(sy, dtype=np.float64),
        np.ascontiguousarray(ph.real),
        np.ascontiguousarray(ph.imag),
        float(lam),
    )
    return _dispatch(_points_kernel, rx, ry, args, workers)


def field_block(rx, ry, x0, ncols, y0, nrows, col_phasors, amp, lam, workers=None):
    """Aligned field at receivers from an integer grid block of senders."""
    rx = np.ascontiguousarray(rx, dtype=np.float64)
    ry = np.ascontiguousarray(ry, dtype=np.float64)
    cp = np.broadcast_to(np.asarray(col_phasors, dtype=np.complex128), (int(ncols),))
    args = (
        float(x0), int(ncols), float(y0), int(nrows),
        np.ascontiguousarray(cp.real), np.ascontiguousarray(cp.imag),
        float(amp), float(lam),
    )
    return _dispatch(_block_kernel, rx, ry, args, workers)
