"""Node placement: unit grid and uniform-random square, plus density sweeps."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

GENERATOR = "numpy.random.PCG64"


@dataclass
class NodeSet:
    model: str  # "grid" or "random"
    rows: int = 0
    cols: int = 0
    n: int = 0
    seed: int | None = None
    k: float = 0.0
    tx_range: float = 1.0
    tx_amplitude: float = 1.0
    _positions: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.rows * self.cols if self.model == "grid" else self.n

    @property
    def side(self) -> float:
        return math.sqrt(self.n) if self.model == "random" else float(max(self.rows, self.cols))

    @property
    def positions(self) -> np.ndarray:
        if self._positions is None:
            if self.size > 50_000_000:
                raise MemoryError(f"refusing to materialise {self.size} grid positions")
            xs, ys = np.meshgrid(np.arange(self.cols, dtype=np.float64),
                                 np.arange(self.rows, dtype=np.float64))
            self._positions = np.column_stack([xs.ravel(), ys.ravel()])
        return self._positions

    def contains(self, x, y) -> bool:
        if self.model == "grid":
            return 0 <= x <= self.cols - 1 and 0 <= y <= self.rows - 1
        s = self.side
        return 0 <= x <= s and 0 <= y <= s

    def in_rect(self, x_lo, x_hi, y_lo, y_hi) -> np.ndarray:
        """Positions inside a closed rectangle, in canonical (x, then y) order."""
        p = self.positions
        m = (p[:, 0] >= x_lo) & (p[:, 0] <= x_hi) & (p[:, 1] >= y_lo) & (p[:, 1] <= y_hi)
        q = p[m]
        return q[np.lexsort((q[:, 1], q[:, 0]))]

    def header(self) -> dict:
        d = {"model": self.model, "tx_range": self.tx_range, "tx_amplitude": self.tx_amplitude}
        if self.model == "grid":
            d.update(rows=self.rows, cols=self.cols)
        else:
            d.update(n=self.n, k=self.k, seed=self.seed, generator=GENERATOR, log_base="e")
        return d


def make_grid(rows: int, cols: int) -> NodeSet:
    if rows < 1 or cols < 1:
        raise ValueError(f"grid needs positive dimensions, got {rows}x{cols}")
    return NodeSet("grid", rows=int(rows), cols=int(cols), tx_range=1.0, tx_amplitude=1.0)


def random_amplitude(n: int, k: float) -> float:
    return k * math.sqrt(math.log(n))


def make_random(n: int, seed: int, k: float) -> NodeSet:
    """``n`` i.i.d. uniform nodes in ``[0, sqrt(n)]**2`` (PCG64, seeded)."""
    if n < 2 or k <= 0:
        raise ValueError("need n >= 2 and k > 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    side = math.sqrt(n)
    pos = rng.random((n, 2)) * side
    a = random_amplitude(n, k)
    return NodeSet("random", n=int(n), seed=seed, k=float(k), tx_range=a, tx_amplitude=a, _positions=pos)


@dataclass
class DensityReport:
    square_side: float
    min_count: int
    required: int
    windows: int = 0
    where: tuple = ()

    @property
    def passed(self) -> bool:
        return self.min_count >= self.required


def required_count(n: int) -> int:
    return math.ceil(math.log(n))


def window_counts(points: np.ndarray, x_lo, x_hi, y_lo, y_hi, side: float):
    """Node counts of all ``side`` windows on a ``side/4`` lattice inside a box.

    Returns ``(counts, x0s, y0s)``; windows are half-open squares fully
    contained in the box.  An empty array means the box is smaller than one
    window.
    """
    step = side / 4.0
    nx = int(math.floor((x_hi - x_lo) / step + 1e-9))
    ny = int(math.floor((y_hi - y_lo) / step + 1e-9))
    if nx < 4 or ny < 4:
        return np.zeros((0, 0), dtype=np.int64), np.zeros(0), np.zeros(0)
    ix = np.floor((points[:, 0] - x_lo) / step).astype(np.int64)
    iy = np.floor((points[:, 1] - y_lo) / step).astype(np.int64)
    ok = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
    hist = np.zeros((nx, ny), dtype=np.int64)
    np.add.at(hist, (ix[ok], iy[ok]), 1)
    c = np.zeros((nx + 1, ny + 1), dtype=np.int64)
    c[1:, 1:] = hist.cumsum(0).cumsum(1)
    counts = c[4:, 4:] - c[:-4, 4:] - c[4:, :-4] + c[:-4, :-4]
    x0s = x_lo + step * np.arange(nx - 3)
    y0s = y_lo + step * np.arange(ny - 3)
    return counts, x0s, y0s


def min_density(nodes: NodeSet, square_side: float) -> DensityReport:
    if nodes.model != "random":
        raise ValueError("density check applies to random model")
    s = nodes.side
    counts, x0s, y0s = window_counts(nodes.positions, 0.0, s, 0.0, s, square_side)
    need = required_count(nodes.n)
    if counts.size == 0:
        return DensityReport(square_side, 0, need, 0)
    i, j = np.unravel_index(np.argmin(counts), counts.shape)
    return DensityReport(square_side, int(counts[i, j]), need, int(counts.size), (float(x0s[i]), float(y0s[j])))


def save_csv(nodes: NodeSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in nodes.positions:
            w.writerow([repr(float(x)), repr(float(y))])


def load_csv(path, k: float = 1.0) -> NodeSet:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        head = next(r)
        if [h.strip() for h in head] != ["x", "y"]:
            raise ValueError(f"expected header x,y, got {head}")
        pos = np.array([[float(a), float(b)] for a, b in r], dtype=np.float64).reshape(-1, 2)
    n = len(pos)
    a = random_amplitude(n, k) if n >= 2 else k
    return NodeSet("random", n=n, k=k, tx_range=a, tx_amplitude=a, _positions=pos)
