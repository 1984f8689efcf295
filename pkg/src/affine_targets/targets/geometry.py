"""Target cubes, their preimages, covering strategies and box counting."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..bernoulli import WorkBudgetExceeded, count_Nk
from ..scales import ell2, k_of_r, r_of_depth
from ..symbolic import CylinderRect, Params, SymbolWord, cube, pi_2d, pi_I

BOX_GUARD = 10 ** 8


@dataclass(frozen=True)
class TargetSpec:
    """Shrinking cubes ``Q(z, gamma**n)`` around the point coded by ``z``."""

    z: SymbolWord
    p: Params

    def __post_init__(self):
        if len(self.z) < 1:
            raise ValueError("the centre coding must be nonempty")

    @property
    def center(self) -> tuple[float, float]:
        return pi_2d(self.z, self.p.lam)

    def cube(self, n: int) -> CylinderRect:
        return cube(self.center, self.p.gamma ** n)


class RectArray:
    """Struct-of-arrays batch of axis-aligned rectangles."""

    __slots__ = ("x_lo", "x_hi", "y_lo", "y_hi")

    def __init__(self, x_lo, x_hi, y_lo, y_hi):
        self.x_lo = np.asarray(x_lo, dtype=np.float64)
        self.x_hi = np.asarray(x_hi, dtype=np.float64)
        self.y_lo = np.asarray(y_lo, dtype=np.float64)
        self.y_hi = np.asarray(y_hi, dtype=np.float64)

    @classmethod
    def from_rects(cls, rects: Sequence[CylinderRect]) -> "RectArray":
        if not rects:
            return cls([], [], [], [])
        a = np.array([(r.x_lo, r.x_hi, r.y_lo, r.y_hi) for r in rects], dtype=np.float64)
        return cls(a[:, 0], a[:, 1], a[:, 2], a[:, 3])

    def __len__(self) -> int:
        return self.x_lo.size

    def to_rects(self) -> list[CylinderRect]:
        return [CylinderRect(*map(float, t))
                for t in zip(self.x_lo, self.x_hi, self.y_lo, self.y_hi)]


def word_offsets(lam: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``f_w(0)`` for every word of length ``n``, indexed by the word read MSB first."""
    if n > 26:
        raise ValueError("enumeration of all words is limited to n <= 26")
    xs = np.zeros(1)
    for d in range(n):
        xs = np.stack((xs, xs + (1.0 - lam) * lam ** d), axis=1).ravel()
    ys = np.arange(1 << n, dtype=np.float64) * math.ldexp(1.0, -n)
    return xs, ys


def cylinder_rects(lam: float, n: int) -> RectArray:
    """All depth-``n`` cylinders ``f_w([0,1]^2)``; their union contains the attractor."""
    xs, ys = word_offsets(lam, n)
    return RectArray(xs, xs + lam ** n, ys, ys + math.ldexp(1.0, -n))


def preimage_arrays(t: TargetSpec, n: int, clip: bool = True) -> RectArray:
    """The ``2**n`` rectangles ``f_w(Q_n)``; ``clip`` first intersects ``Q_n`` with the unit square."""
    q = t.cube(n)
    x0, x1, y0, y1 = q.x_lo, q.x_hi, q.y_lo, q.y_hi
    if clip:
        x0, x1 = max(x0, 0.0), min(x1, 1.0)
        y0, y1 = max(y0, 0.0), min(y1, 1.0)
    xs, ys = word_offsets(t.p.lam, n)
    sx, sy = t.p.lam ** n, math.ldexp(1.0, -n)
    return RectArray(xs + sx * x0, xs + sx * x1, ys + sy * y0, ys + sy * y1)


def preimage_rects(t: TargetSpec, n: int, clip: bool = True) -> list[CylinderRect]:
    if n > 20:
        raise ValueError("object lists are limited to n <= 20; use preimage_arrays")
    return preimage_arrays(t, n, clip).to_rects()


# ---------------------------------------------------------------- box counting

def _cell_ranges(rects: RectArray, r: int):
    scale = float(1 << r)
    top = (1 << r) - 1
    i_lo = np.clip(np.floor(rects.x_lo * scale), 0, top).astype(np.int64)
    i_hi = np.clip(np.ceil(rects.x_hi * scale) - 1, 0, top).astype(np.int64)
    j_lo = np.clip(np.floor(rects.y_lo * scale), 0, top).astype(np.int64)
    j_hi = np.clip(np.ceil(rects.y_hi * scale) - 1, 0, top).astype(np.int64)
    # degenerate extents still occupy the cell containing them
    i_hi = np.maximum(i_hi, i_lo)
    j_hi = np.maximum(j_hi, j_lo)
    return i_lo, i_hi, j_lo, j_hi


def occupied_cells(rects: RectArray, r: int, guard: int = BOX_GUARD,
                   chunk: int = 5_000_000) -> np.ndarray:
    """Sorted unique codes ``i * 2**r + j`` of grid cells meeting the rectangles.

    Cells are half-open ``[i 2^-r, (i+1) 2^-r)`` anchored at the origin and
    rectangle extents are treated as half-open too, so rectangles that only
    touch along a grid line do not spill into the neighbouring cell.
    """
    if not 0 <= r <= 30:
        raise ValueError("r must be in [0, 30]")
    if len(rects) == 0:
        return np.zeros(0, dtype=np.int64)
    i_lo, i_hi, j_lo, j_hi = _cell_ranges(rects, r)
    nx = i_hi - i_lo + 1
    ny = j_hi - j_lo + 1
    sizes = nx * ny
    total = int(sizes.sum())
    if total > guard:
        raise WorkBudgetExceeded(f"box count would enumerate {total} cells (guard {guard})", total)
    parts = []
    starts = np.concatenate(([0], np.cumsum(sizes)))
    lo = 0
    while lo < len(rects):
        hi = int(np.searchsorted(starts, starts[lo] + chunk, side="right")) - 1
        hi = max(hi, lo + 1)
        sl = slice(lo, hi)
        cnt = sizes[sl]
        rid = np.repeat(np.arange(hi - lo), cnt)
        local = np.arange(int(cnt.sum())) - np.repeat(starts[sl] - starts[lo], cnt)
        ii = i_lo[sl][rid] + local // ny[sl][rid]
        jj = j_lo[sl][rid] + local % ny[sl][rid]
        parts.append(np.unique(ii * (1 << r) + jj))
        lo = hi
    return np.unique(np.concatenate(parts))


def box_count(rects, r: int, guard: int = BOX_GUARD) -> int:
    if not isinstance(rects, RectArray):
        rects = RectArray.from_rects(list(rects))
    return int(occupied_cells(rects, r, guard).size)


def occupancy_grid(rects: RectArray, r: int) -> np.ndarray:
    """Boolean raster, row 0 at the top (largest ``y``)."""
    side = 1 << r
    grid = np.zeros((side, side), dtype=bool)
    codes = occupied_cells(rects, r)
    i, j = codes >> r, codes & (side - 1)
    grid[side - 1 - j, i] = True
    return grid


def render_pgm(rects: RectArray, r: int) -> bytes:
    """Binary PGM (P5, maxval 255) with occupied cells white."""
    grid = occupancy_grid(rects, r)
    side = grid.shape[0]
    header = f"P5\n{side} {side}\n255\n".encode("ascii")
    return header + (grid.astype(np.uint8) * 255).tobytes()


@dataclass(frozen=True)
class BoxDim:
    slope: float
    stderr: float
    r: tuple
    counts: tuple


def dim_box_estimate(rects: RectArray, r_lo: int, r_hi: int) -> BoxDim:
    """Least-squares slope of ``log N(2^-r)`` against ``r log 2``."""
    rs = list(range(r_lo, r_hi + 1))
    if len(rs) < 3:
        raise ValueError("need at least three scales")
    counts = [box_count(rects, r) for r in rs]
    x = np.asarray(rs, dtype=float) * math.log(2.0)
    y = np.log(np.asarray(counts, dtype=float))
    coef, cov = np.polyfit(x, y, 1, cov=True)
    return BoxDim(float(coef[0]), float(math.sqrt(cov[0, 0])), tuple(rs), tuple(counts))


def attractor_depth(lam: float, r_hi: int) -> int:
    """Cylinder depth at which widths drop strictly below ``2**-r_hi``."""
    return k_of_r(r_hi, lam) + 1


def dim_box_attractor(lam: float, r_lo: int, r_hi: int) -> BoxDim:
    return dim_box_estimate(cylinder_rects(lam, attractor_depth(lam, r_hi)), r_lo, r_hi)


# ---------------------------------------------------------------- covers

@dataclass(frozen=True)
class CoverCount:
    strategy: str
    n: int
    log_side: float
    log_count: float
    exponent: float
    n_count: Optional[float] = None
    extrapolated: bool = False

    @property
    def side(self) -> float:
        return math.exp(self.log_side)

    @property
    def count(self) -> float:
        return math.exp(self.log_count)


def _log_ceil_exp(v: float) -> float:
    """``log(ceil(exp(v)))`` without overflow."""
    if v > 40.0:
        return v
    return math.log(math.ceil(math.exp(v) - 1e-12))


def log_Nk(x: float, k: int, lam: float, budget: int = 200_000,
           fit_window: int = 12, max_direct: int = 256) -> tuple[float, bool]:
    """``log N_k(x)`` with ``rho = 1``.

    Measured directly when ``k <= max_direct`` and the tree walk fits in
    ``budget`` nodes; otherwise extrapolated linearly from the growth of
    ``log N_d`` over the deepest affordable depths ``d <= min(k, 64)``.
    """
    if k <= max_direct:
        try:
            return math.log(count_Nk(x, 1.0, k, lam, budget=budget).count), False
        except WorkBudgetExceeded:
            pass
    ks, logs = [], []
    for d in range(1, min(k, 64) + 1):
        try:
            c = count_Nk(x, 1.0, d, lam, budget=budget).count
        except WorkBudgetExceeded:
            break
        ks.append(d)
        logs.append(math.log(c))
    ks, logs = ks[-fit_window:], logs[-fit_window:]
    if len(ks) < 2:
        raise WorkBudgetExceeded(f"cannot measure N_k growth within budget {budget}", budget)
    rate = float(np.polyfit(ks, logs, 1)[0])
    return logs[-1] + rate * (k - ks[-1]), True


def cover_count(strategy: str, t: TargetSpec, n: int, nk_budget: int = 200_000) -> CoverCount:
    """Side and number of cubes in one of the three covers of the ``n``-th preimages.

    Values are returned in log form since the counts overflow binary64 for
    the depths of interest.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lam, gam = t.p.lam, t.p.gamma
    log2 = math.log(2.0)
    l2 = ell2(n, t.p)
    s = strategy.upper()
    if s == "A":
        r0 = r_of_depth(n + l2, lam)
        log_side = -r0 * log2
        log_count = n * log2
        nk, ext = None, False
    elif s == "B":
        log_side = n * math.log(gam / 2.0)
        log_count = n * log2 + _log_ceil_exp(n * math.log(2.0 * lam))
        nk, ext = None, False
    elif s == "C":
        x = pi_I(t.z, lam).value
        nk, ext = log_Nk(x, l2, lam, budget=nk_budget)
        log_side = -(n + l2) * log2
        log_count = n * log2 + nk + _log_ceil_exp((n + l2) * math.log(2.0 * lam))
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if log_side >= 0:
        exponent = math.inf
    else:
        exponent = log_count / -log_side
    return CoverCount(s, n, log_side, log_count, exponent, nk, ext)
