"""Sender sets and their aligned-frame field evaluation.

Two exact representations feed the compiled kernels:

* :class:`GridBlock` -- every integer node of an axis-aligned block, one
  residual phasor per column (phase-corrected rounds).
* :class:`PointSenders` -- explicit positions with per-node residuals
  (line sources, random placements, self-synchronised rounds).

:func:`cell_quadrature` replaces a huge grid block by a tensor Gauss-Legendre
rule over the union of its unit cells.  The lattice sum of a smooth integrand
equals the integral over the cells up to a relative error of order
``1/(24 L**2)`` where ``L`` is the length over which the integrand varies, so
the substitution is only used when the residual phase and the path excess
vary slowly across a cell.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels


@dataclass
class GridBlock:
    x0: int
    ncols: int
    y0: int
    nrows: int
    col_phasors: np.ndarray | complex = 1.0
    amp: float = 1.0

    def __post_init__(self):
        self.x0, self.ncols, self.y0, self.nrows = int(self.x0), int(self.ncols), int(self.y0), int(self.nrows)
        if self.ncols < 0 or self.nrows < 0:
            raise ValueError("negative block size")

    @property
    def count(self) -> int:
        return self.ncols * self.nrows

    @property
    def x1(self) -> int:
        return self.x0 + self.ncols - 1

    @property
    def y1(self) -> int:
        return self.y0 + self.nrows - 1

    def positions(self) -> np.ndarray:
        xs = np.repeat(np.arange(self.x0, self.x0 + self.ncols, dtype=np.float64), self.nrows)
        ys = np.tile(np.arange(self.y0, self.y0 + self.nrows, dtype=np.float64), self.ncols)
        return np.column_stack([xs, ys])

    def residuals(self) -> np.ndarray:
        cp = np.broadcast_to(np.asarray(self.col_phasors, dtype=np.complex128), (self.ncols,))
        return np.repeat(cp, self.nrows) * self.amp

    def to_points(self) -> "PointSenders":
        p = self.positions()
        return PointSenders(p[:, 0], p[:, 1], self.residuals())

    def field(self, rx, ry, lam, workers=None):
        if self.count == 0:
            return np.zeros(np.shape(rx), dtype=np.complex128), 0
        return kernels.field_block(rx, ry, self.x0, self.ncols, self.y0, self.nrows,
                                   self.col_phasors, self.amp, lam, workers)


@dataclass
class PointSenders:
    x: np.ndarray
    y: np.ndarray
    phasors: np.ndarray = field(default=None)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64).ravel()
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.phasors is None:
            self.phasors = np.ones(self.x.size, dtype=np.complex128)
        self.phasors = np.broadcast_to(np.asarray(self.phasors, dtype=np.complex128), self.x.shape).copy()

    @property
    def count(self) -> int:
        return int(self.x.size)

    def sorted(self) -> "PointSenders":
        """Canonical order: ascending x, then ascending y."""
        order = np.lexsort((self.y, self.x))
        return PointSenders(self.x[order], self.y[order], self.phasors[order])

    def field(self, rx, ry, lam, workers=None):
        if self.count == 0:
            return np.zeros(np.shape(rx), dtype=np.complex128), 0
        return kernels.field_points(rx, ry, self.x, self.y, self.phasors, lam, workers)


def _gauss_panels(lo, hi, panels, order):
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * t + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class QuadratureSpec:
    x_panels: int = 2
    y_panels: int = 2
    order: int = 16


def cell_nodes(block: GridBlock, spec: QuadratureSpec = QuadratureSpec()):
    """Quadrature nodes and weights over the unit cells of ``block``."""
    xn, xw = _gauss_panels(block.x0 - 0.5, block.x1 + 0.5, spec.x_panels, spec.order)
    yn, yw = _gauss_panels(block.y0 - 0.5, block.y1 + 0.5, spec.y_panels, spec.order)
    gx, gy = np.meshgrid(xn, yn, indexing="ij")
    gw = np.outer(xw, yw)
    return gx.ravel(), gy.ravel(), gw.ravel()


def cell_quadrature(block: GridBlock, residual: Callable | np.ndarray | None = None,
                    spec: QuadratureSpec = QuadratureSpec()) -> PointSenders:
    """Equivalent weighted point senders for a large grid block.

    ``residual`` gives the per-node residual phasor at the quadrature nodes,
    either as an array aligned with :func:`cell_nodes` or as a callable
    ``f(x, y)``; by default the block's uniform column phasor is used.
    """
    x, y, w = cell_nodes(block, spec)
    if residual is None:
        cp = np.asarray(block.col_phasors, dtype=np.complex128)
        if cp.ndim != 0:
            raise ValueError("per-column residuals need an explicit residual field")
        a = np.full(x.size, complex(cp))
    elif callable(residual):
        a = np.asarray(residual(x, y), dtype=np.complex128)
    else:
        a = np.asarray(residual, dtype=np.complex128)
    return PointSenders(x, y, a * w * block.amp)
