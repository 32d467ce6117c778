"""Free-space channel physics: complex gains, superposition, reception rule.

Phasors are plain Python/numpy complex numbers.  Positions are ``(x, y)``
pairs in grid units.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels


class Position(NamedTuple):
    x: float
    y: float


class ZeroDistanceError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    lam: float = 0.1
    tau: float = 1.0
    carrier_freq_hz: float = 2.4e9
    light_speed: float = 299_792_458.0
    grid_spacing_m: float = 1.0

    def __post_init__(self):
        for name in ("lam", "tau", "carrier_freq_hz", "light_speed", "grid_spacing_m"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def period_s(self) -> float:
        return 1.0 / self.carrier_freq_hz

    def far_field_ok(self) -> bool:
        # neighbours on the unit grid are in the far field only for lam <= 1/2
        return self.lam <= 0.5


def perturb_integer_wavelength(lam: float, eps: float = 1e-6) -> float:
    """Nudge a wavelength that is an integer multiple of the grid distance.

    An integral wavelength makes every on-grid phase identical and produces
    degenerate interference; the nudge breaks the tie.
    """
    if lam >= 1.0 and float(lam).is_integer():
        warnings.warn(f"wavelength {lam} is an integer multiple of the grid spacing; using {lam + eps}")
        return lam + eps
    return lam


@dataclass
class NearFieldCounter:
    """Counts channel evaluations closer than two wavelengths."""

    count: int = 0
    pairs: list = field(default_factory=list)

    def add(self, n: int = 1):
        self.count += int(n)


def _reduced_phase(dist, lam):
    """-2*pi * frac(dist/lam), with the ratio formed in extended precision."""
    q = np.asarray(dist, dtype=np.longdouble) / np.longdouble(lam)
    frac = q - np.rint(q)
    return (-2.0 * np.pi) * frac.astype(np.float64)


def channel_gain(s, r, params: ChannelParams, counter: NearFieldCounter | None = None) -> complex:
    """Baseband gain ``exp(-2j*pi*dist/lam) / dist`` from ``s`` to ``r``."""
    dx = np.longdouble(r[0]) - np.longdouble(s[0])
    dy = np.longdouble(r[1]) - np.longdouble(s[1])
    dist_ld = np.sqrt(dx * dx + dy * dy)
    if dist_ld == 0:
        raise ZeroDistanceError("zero distance")
    dist = float(dist_ld)
    if counter is not None and dist <= 2.0 * params.lam:
        counter.add()
        counter.pairs.append((tuple(s), tuple(r)))
    ph = float(_reduced_phase(dist_ld, params.lam))
    return complex(math.cos(ph), math.sin(ph)) / dist


def channel_gains(sx, sy, r, params: ChannelParams) -> np.ndarray:
    """Vectorised :func:`channel_gain` for many senders and one receiver."""
    dx = np.longdouble(r[0]) - np.asarray(sx, dtype=np.longdouble)
    dy = np.longdouble(r[1]) - np.asarray(sy, dtype=np.longdouble)
    dist_ld = np.sqrt(dx * dx + dy * dy)
    if np.any(dist_ld == 0):
        raise ZeroDistanceError("zero distance")
    ph = _reduced_phase(dist_ld, params.lam)
    return np.exp(1j * ph) / dist_ld.astype(np.float64)


def pairwise_sum(terms) -> complex:
    """Fixed-tree pairwise sum of complex terms, in the given order."""
    t = np.asarray(terms, dtype=np.complex128)
    if t.size == 0:
        return 0j
    re, im = kernels.pairwise_sum(np.ascontiguousarray(t.real), np.ascontiguousarray(t.imag))
    return complex(re, im)


def superpose(senders: Sequence[tuple], r, params: ChannelParams) -> complex:
    """Received signal ``sum_i gain_i * x_i`` for ``senders = [(pos, x), ...]``."""
    if len(senders) == 0:
        return 0j
    pos = np.asarray([p for p, _ in senders], dtype=np.float64).reshape(-1, 2)
    x = np.asarray([v for _, v in senders], dtype=np.complex128)
    g = channel_gains(pos[:, 0], pos[:, 1], r, params)
    return pairwise_sum(g * x)


def received_power(y) -> float:
    return float(abs(complex(y)) ** 2)


def can_receive(y, params: ChannelParams) -> bool:
    return received_power(y) >= params.tau


def canonical_rotor(x, lam) -> np.ndarray:
    """Canonical carrier ``exp(-2j*pi*x/lam)`` with extended-precision reduction."""
    return np.exp(1j * _reduced_phase(x, lam))


def to_aligned(phasors, x, lam) -> np.ndarray:
    """Express transmitted phasors relative to the canonical carrier at ``x``."""
    return np.asarray(phasors, dtype=np.complex128) * np.conj(canonical_rotor(x, lam))


def from_aligned(aligned, x, lam) -> np.ndarray:
    return np.asarray(aligned, dtype=np.complex128) * canonical_rotor(x, lam)
