"""Field rasters, PPM rendering and CSV dumps."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .phasor import ChannelParams, from_aligned

MAX_CELLS = 100_000_000

PURPLE = np.array([128, 0, 128], dtype=np.float64)
CYAN = np.array([0, 255, 255], dtype=np.float64)
ORANGE = np.array([255, 165, 0], dtype=np.float64)
WHITE = np.array([255, 255, 255], dtype=np.float64)
BLACK = np.array([0, 0, 0], dtype=np.float64)
BLUE = np.array([0, 0, 255], dtype=np.float64)
ABOVE_CAP = 0.99  # keeps the above-threshold band off pure white, which marks senders

SNR = "snr"
PHASE = "phase"


@dataclass
class FieldMap:
    """Aligned-frame field samples at ``x_lo + i/res``, ``y_lo + j/res``; ``cells[j, i]``."""

    viewport: tuple
    resolution: float
    aligned: np.ndarray
    source_mask: np.ndarray

    @property
    def shape(self):
        return self.aligned.shape

    def xs(self) -> np.ndarray:
        return self.viewport[0] + np.arange(self.shape[1]) / self.resolution

    def ys(self) -> np.ndarray:
        return self.viewport[2] + np.arange(self.shape[0]) / self.resolution

    def snr(self) -> np.ndarray:
        s = np.abs(self.aligned) ** 2
        s[self.source_mask] = np.nan
        return s

    def phase_error(self) -> np.ndarray:
        return np.abs(np.angle(self.aligned))

    def cells(self, lam: float) -> np.ndarray:
        """Physical phasors (aligned values rotated onto each cell's carrier)."""
        x = np.broadcast_to(self.xs()[None, :], self.shape)
        return from_aligned(self.aligned, x, lam)

    def above_mask(self, tau: float) -> np.ndarray:
        return (np.abs(self.aligned) ** 2 >= tau) & ~self.source_mask


def raster_shape(viewport, resolution: float) -> tuple[int, int]:
    x_lo, x_hi, y_lo, y_hi = viewport
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if not (x_hi > x_lo and y_hi > y_lo):
        raise ValueError(f"empty viewport {viewport}")
    return math.ceil((y_hi - y_lo) * resolution - 1e-9), math.ceil((x_hi - x_lo) * resolution - 1e-9)


def compute_field(senders, viewport, resolution: float, params: ChannelParams, workers=None) -> FieldMap:
    """Superposed field of ``senders`` sampled on a raster over ``viewport``."""
    ny, nx = raster_shape(viewport, resolution)
    if nx * ny > MAX_CELLS:
        raise MemoryError(f"raster of {nx}x{ny} cells exceeds the {MAX_CELLS} cell limit")
    xs = viewport[0] + np.arange(nx) / resolution
    ys = viewport[2] + np.arange(ny) / resolution
    gx, gy = np.meshgrid(xs, ys)
    if senders is None or senders.count == 0:
        y = np.zeros(nx * ny, dtype=np.complex128)
    else:
        y, _ = senders.field(gx.ravel(), gy.ravel(), params.lam, workers)
    y = y.reshape(ny, nx)
    mask = np.isnan(y.real)
    y[mask] = 0
    return FieldMap(tuple(viewport), resolution, y, mask)


def _lerp(a, b, t):
    return a[None, :] + t[:, None] * (b - a)[None, :]


def colorize(fm: FieldMap, mode: str = SNR, tau: float = 1.0) -> np.ndarray:
    """RGB image (rows top = highest y) as uint8."""
    flat_src = fm.source_mask.ravel()
    if mode == SNR:
        s = (np.abs(fm.aligned) ** 2).ravel()
        above = s >= tau
        rgb = np.empty((s.size, 3))
        tb = np.clip(s[~above] / tau, 0.0, 1.0)
        rgb[~above] = _lerp(PURPLE, CYAN, tb)
        ta = np.minimum(1.0 - tau / s[above], ABOVE_CAP)
        rgb[above] = _lerp(ORANGE, WHITE, ta)
    elif mode == PHASE:
        t = fm.phase_error().ravel() / math.pi
        rgb = _lerp(BLACK, BLUE, t)
    else:
        raise ValueError(f"unknown render mode {mode!r}")
    rgb[flat_src] = WHITE
    img = np.rint(rgb).astype(np.uint8).reshape(fm.shape + (3,))
    return img[::-1]


def render(fm: FieldMap, mode: str = SNR, tau: float = 1.0) -> bytes:
    """Binary PPM (P6, maxval 255)."""
    if fm.aligned.size == 0:
        raise ValueError("empty field map")
    img = colorize(fm, mode, tau)
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def read_ppm(data: bytes) -> np.ndarray:
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)


def band_of(img: np.ndarray) -> np.ndarray:
    """Per-pixel band: 2 = sender, 1 = at/above threshold, 0 = below threshold."""
    white = np.all(img == 255, axis=-1)
    above = (img[..., 0] == 255) & ~white
    out = above.astype(np.int8)
    out[white] = 2
    return out


def to_csv(fm: FieldMap, lam: float) -> str:
    """Rows ``x,y,re,im,snr`` in raster order with 17 significant digits."""
    cells = fm.cells(lam)
    snr = fm.snr()
    xs, ys = fm.xs(), fm.ys()
    buf = io.StringIO()
    buf.write("x,y,re,im,snr\n")
    for j in range(fm.shape[0]):
        for i in range(fm.shape[1]):
            c = cells[j, i]
            re, im = (c.real, c.imag) if not fm.source_mask[j, i] else (math.nan, math.nan)
            buf.write(f"{xs[i]:.17g},{ys[j]:.17g},{re:.17g},{im:.17g},{snr[j, i]:.17g}\n")
    return buf.getvalue()


def mask_from_csv(text: str, shape, tau: float) -> np.ndarray:
    rows = text.strip().split("\n")[1:]
    snr = np.array([float(r.rsplit(",", 1)[1]) for r in rows]).reshape(shape)
    with np.errstate(invalid="ignore"):
        return snr >= tau


def lobe_directions(mask: np.ndarray, viewport, resolution: float, corner_x: float, axis_lo: float,
                    axis_hi: float, min_angle: float = 20.0) -> dict:
    """Direction of above-threshold cells leaving a sender block's right end, per half-plane.

    Angles are measured from the block's upper (lower) right corner for the
    upper (lower) half-plane; cells within ``min_angle`` degrees of the axis
    belong to the main beam and are ignored.
    """
    ys_idx, xs_idx = np.nonzero(mask)
    x = viewport[0] + xs_idx / resolution
    y = viewport[2] + ys_idx / resolution
    out = {}
    for name, cy, sgn in (("upper", axis_hi, 1.0), ("lower", axis_lo, -1.0)):
        dx = x - corner_x
        dy = (y - cy) * sgn
        ang = np.degrees(np.arctan2(dy, dx))
        sel = (dx > 0) & (dy > 0) & (ang >= min_angle)
        if not np.any(sel):
            out[name] = {"cells": 0, "angle": None}
            continue
        out[name] = {"cells": int(sel.sum()), "angle": float(np.mean(ang[sel])),
                     "reach": float(np.max(np.hypot(dx[sel], dy[sel])))}
    return out


def is_diagonal(angle) -> bool:
    """True when the nearest compass octant of ``angle`` (degrees) is the 45-degree one."""
    return angle is not None and 22.5 <= angle < 67.5
