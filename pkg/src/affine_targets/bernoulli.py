"""Bernoulli convolution: dyadic histogram, branching counters, unique expansions.

The counters walk the binary tree of prefixes one level at a time.  Every
node carries the interval its extensions can reach; nodes whose interval
misses the target are dropped and nodes whose whole subtree is known to
qualify are counted in one step.  Because ``lam > 1/2`` the two child
intervals cover the parent interval, so this pruning is exact.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .symbolic import MAX_DEPTH, SymbolWord

DEFAULT_NODE_BUDGET = 10 ** 8


class WorkBudgetExceeded(RuntimeError):
    """Raised when a tree walk would visit more nodes than allowed."""

    def __init__(self, message: str, nodes: int, partial: Optional[int] = None):
        super().__init__(message)
        self.nodes = nodes
        self.partial = partial


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class BranchCount:
    k: int
    x: float
    rho: float
    count: int
    nodes: int = field(default=0, compare=False)


def _check_lam(lam: float) -> None:
    if not 0.5 < lam < 1.0:
        raise ValueError(f"lambda must lie in (1/2, 1), got {lam}")


# ---------------------------------------------------------------- histogram

@dataclass(frozen=True)
class DyadicHistogram:
    """Bin masses of a measure on [0, 1] over the bins ``[j 2^-m, (j+1) 2^-m)``."""

    level: int
    mass: np.ndarray
    lam: Optional[float] = None
    residual: float = 0.0
    iterations: int = 0

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.shape != (1 << self.level,):
            raise ValueError(f"expected {1 << self.level} bins, got {mass.shape}")
        if np.any(mass < 0):
            raise ValueError("bin masses must be nonnegative")
        object.__setattr__(self, "mass", mass)

    @property
    def cdf(self) -> np.ndarray:
        """CDF at the bin edges, length ``2**level + 1``."""
        return np.concatenate(([0.0], np.cumsum(self.mass)))

    def coarsen(self, level: int) -> np.ndarray:
        if not 0 <= level <= self.level:
            raise ValueError("level out of range")
        return self.mass.reshape(1 << level, -1).sum(axis=1)

    def to_csv(self) -> str:
        lines = ["bin_index,mass"]
        lines += [f"{j},{v:.17g}" for j, v in enumerate(self.mass)]
        return "\n".join(lines) + "\n"


def _transfer(cdf: np.ndarray, grid: np.ndarray, lam: float) -> np.ndarray:
    # F(x) = F(x/lam)/2 + F((x - 1 + lam)/lam)/2, F piecewise linear on grid
    a = np.interp(grid / lam, grid, cdf, left=0.0, right=1.0)
    b = np.interp((grid - (1.0 - lam)) / lam, grid, cdf, left=0.0, right=1.0)
    return 0.5 * (a + b)


def build_histogram(lam: float, level: int, iterations: Optional[int] = None,
                    tol: float = 1e-9) -> DyadicHistogram:
    """Approximate the Bernoulli convolution by iterating the self-similarity
    relation on a piecewise-linear CDF, starting from Lebesgue measure.

    Stops once the L1 distance between successive bin-mass vectors is below
    ``tol``; raises :class:`ConvergenceError` if ``iterations`` (default
    ``10 * level``) run out first.
    """
    _check_lam(lam)
    if not 1 <= level <= 24:
        raise ValueError("level must be in [1, 24]")
    if iterations is None:
        iterations = 10 * level
    if iterations < 4 * level:
        raise ValueError("need at least 4 * level iterations")
    grid = np.linspace(0.0, 1.0, (1 << level) + 1)
    cdf = grid.copy()
    residual = math.inf
    for it in range(1, iterations + 1):
        new = _transfer(cdf, grid, lam)
        new[0], new[-1] = 0.0, 1.0
        residual = float(np.abs(np.diff(new) - np.diff(cdf)).sum())
        cdf = new
        if residual < tol:
            break
    else:
        raise ConvergenceError(
            f"histogram did not converge in {iterations} iterations "
            f"(residual {residual:.3e})", residual)
    mass = np.clip(np.diff(cdf), 0.0, None)
    mass /= mass.sum()
    return DyadicHistogram(level, mass, lam=lam, residual=residual, iterations=it)


def measure_interval(h: DyadicHistogram, a: float, b: float) -> float:
    """Mass of ``[a, b]``: whole bins plus linear fractions of the end bins."""
    if not 0.0 <= a <= b <= 1.0:
        raise ValueError(f"need 0 <= a <= b <= 1, got [{a}, {b}]")
    cdf = h.cdf
    grid = np.linspace(0.0, 1.0, cdf.size)
    lo, hi = np.interp([a, b], grid, cdf)
    return float(min(max(hi - lo, 0.0), 1.0))


@dataclass(frozen=True)
class LocalDim:
    slope: float
    residual: float
    radii: tuple
    masses: tuple
    excluded: tuple


def local_dim_estimate(h: DyadicHistogram, x: float, r_range: Iterable[int]) -> LocalDim:
    """Least-squares slope of ``log nu(B(x, 2^-r))`` against ``log 2^-r``."""
    if not 0.0 < x < 1.0:
        raise ValueError("x must lie in (0, 1)")
    rs, ms, bad = [], [], []
    for r in r_range:
        if r > h.level:
            raise ValueError(f"r = {r} is finer than histogram level {h.level}")
        rad = math.ldexp(1.0, -r)
        m = measure_interval(h, max(x - rad, 0.0), min(x + rad, 1.0))
        if m > 0.0:
            rs.append(r)
            ms.append(m)
        else:
            bad.append(r)
    if len(rs) < 2:
        raise ValueError("fewer than two radii with positive mass")
    lx = -np.asarray(rs, dtype=float) * math.log(2.0)
    ly = np.log(ms)
    coef, res, *_ = np.polyfit(lx, ly, 1, full=True)
    resid = float(math.sqrt(res[0] / len(rs))) if res.size else 0.0
    return LocalDim(float(coef[0]), resid, tuple(rs), tuple(ms), tuple(bad))


def frostman_exponent(h: DyadicHistogram) -> float:
    """Min over dyadic intervals ``I`` of levels ``1..m`` of ``log nu(I) / log |I|``."""
    worst = math.inf
    for lev in range(1, h.level + 1):
        top = float(h.coarsen(lev).max())
        if top >= 1.0:
            return 0.0
        worst = min(worst, math.log(top) / (-lev * math.log(2.0)))
    return worst


# ---------------------------------------------------------------- counters

def _split(arr: np.ndarray, parts: int) -> list[np.ndarray]:
    return [a for a in np.array_split(arr, parts) if a.size]


def _interval_walk(lam: float, k: int, lo: float, hi: float, budget: int,
                   threads: int) -> tuple[int, int]:
    """Count depth-``k`` words whose interval meets ``[lo, hi]``.

    A node stores the sums of the digit-1 and digit-0 increments so far;
    its interval is ``[ones, 1 - zeros]``.  Right ends are compared as
    ``zeros`` against ``1 - lo``, which keeps the tests symmetric under the
    digit flip, so points near 1 are resolved as finely as points near 0.
    """
    clo, chi = 1.0 - lo, 1.0 - hi
    powers = lam ** np.arange(k + 1, dtype=np.float64)
    step = (1.0 - lam) * powers

    def contained(front: np.ndarray, d: int) -> np.ndarray:
        # a node interval has width lam**d, so a narrower target cannot hold it
        if hi - lo < powers[d]:
            return np.zeros(front.shape[0], dtype=bool)
        return (front[:, 0] >= lo) & (front[:, 1] >= chi)

    def expand(front: np.ndarray, d: int) -> np.ndarray:
        nxt = np.concatenate((front, front))
        half = front.shape[0]
        nxt[:half, 1] += step[d]
        nxt[half:, 0] += step[d]
        return nxt[(nxt[:, 0] <= hi) & (nxt[:, 1] <= clo)]

    def walk(front: np.ndarray, d0: int, count: int, nodes: int) -> tuple[int, int]:
        for d in range(d0, k):
            inside = contained(front, d)
            if inside.any():
                count += int(inside.sum()) << (k - d)
                front = front[~inside]
            nodes += 2 * front.shape[0]
            front = expand(front, d)
            if nodes > budget:
                raise WorkBudgetExceeded(
                    f"node budget {budget} exceeded at depth {d + 1}", nodes, count)
            if front.shape[0] == 0:
                break
        else:
            count += int(front.shape[0])
        return count, nodes

    root = np.zeros((1, 2))
    if not (0.0 <= hi and 1.0 >= lo):
        return 0, 1
    if threads <= 1 or k < 8:
        return walk(root, 0, 0, 1)
    # expand a few levels serially, then hand out slices of the frontier
    pre_depth = min(k, max(1, int(math.log2(threads)) + 4))
    if pre_depth == k:
        return walk(root, 0, 0, 1)
    count, nodes = 0, 1
    front = root
    for d in range(pre_depth):
        inside = contained(front, d)
        count += int(inside.sum()) << (k - d)
        front = front[~inside]
        nodes += 2 * front.shape[0]
        front = expand(front, d)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        results = list(ex.map(lambda f: walk(f, pre_depth, 0, 0), _split(front, threads)))
    for c, n in results:
        count += c
        nodes += n
    if nodes > budget:
        raise WorkBudgetExceeded(f"node budget {budget} exceeded", nodes, count)
    return count, nodes


def count_Nk(x: float, rho: float, k: int, lam: float, *,
             budget: int = DEFAULT_NODE_BUDGET, threads: int = 1) -> BranchCount:
    """Number of depth-``k`` words whose interval meets ``[x - rho lam^k, x + rho lam^k]``."""
    _check_lam(lam)
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if rho <= 0:
        raise ValueError("rho must be positive")
    if not 0 <= k <= MAX_DEPTH:
        raise ValueError(f"k must be in [0, {MAX_DEPTH}]")
    rad = rho * lam ** k
    count, nodes = _interval_walk(lam, k, x - rad, x + rad, budget, threads)
    return BranchCount(k=k, x=x, rho=rho, count=count, nodes=nodes)


def count_expansions(x: float, lam: float, k: int, *,
                     budget: int = DEFAULT_NODE_BUDGET, threads: int = 1) -> int:
    """Number of depth-``k`` words ``w`` with ``x`` in ``[pi_I(w), pi_I(w) + lam^k]``."""
    _check_lam(lam)
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if not 0 <= k <= MAX_DEPTH:
        raise ValueError(f"k must be in [0, {MAX_DEPTH}]")
    return _interval_walk(lam, k, x, x, budget, threads)[0]


def _d_setup(center: SymbolWord, m: int, lam: float):
    if len(center) < m:
        raise ValueError(f"center has length {len(center)} < m = {m}")
    c = center.prefix(m).digits().astype(np.float64)
    powers = lam ** np.arange(1, m + 1, dtype=np.float64)  # lam^i, i = 1..m
    # reachable range of the remaining sum after fixing i <= d
    up = np.concatenate((np.cumsum((powers * (1 - c))[::-1])[::-1], [0.0]))
    down = np.concatenate((np.cumsum((powers * c)[::-1])[::-1], [0.0]))
    return c, powers, up, down


def count_D(center: SymbolWord, rho: float, m: int, lam: float, *,
            budget: int = DEFAULT_NODE_BUDGET, threads: int = 1) -> BranchCount:
    """Number of length-``m`` words ``j`` with ``|sum_i (j_i - c_i) lam^i| < rho``."""
    _check_lam(lam)
    if rho <= 0:
        raise ValueError("rho must be positive")
    c, powers, up, down = _d_setup(center, m, lam)

    def walk(front: np.ndarray, d0: int, count: int, nodes: int) -> tuple[int, int]:
        for d in range(d0, m):
            inside = (front - down[d] > -rho) & (front + up[d] < rho)
            if inside.any():
                count += int(inside.sum()) << (m - d)
                front = front[~inside]
            delta = powers[d] * (np.array([0.0, 1.0]) - c[d])
            nxt = np.concatenate((front + delta[0], front + delta[1]))
            keep = (nxt + up[d + 1] > -rho) & (nxt - down[d + 1] < rho)
            front = nxt[keep]
            nodes += nxt.size
            if nodes > budget:
                raise WorkBudgetExceeded(
                    f"node budget {budget} exceeded at depth {d + 1}", nodes, count)
            if front.size == 0:
                break
        else:
            count += int(np.count_nonzero(np.abs(front) < rho))
        return count, nodes

    root = np.zeros(1)
    if threads <= 1 or m < 8:
        count, nodes = walk(root, 0, 0, 1)
    else:
        pre = min(m, int(math.log2(threads)) + 4)
        count, nodes = 0, 1
        front = root
        for d in range(pre):
            inside = (front - down[d] > -rho) & (front + up[d] < rho)
            count += int(inside.sum()) << (m - d)
            front = front[~inside]
            delta = powers[d] * (np.array([0.0, 1.0]) - c[d])
            nxt = np.concatenate((front + delta[0], front + delta[1]))
            front = nxt[(nxt + up[d + 1] > -rho) & (nxt - down[d + 1] < rho)]
            nodes += nxt.size
        if pre == m:
            count += int(np.count_nonzero(np.abs(front) < rho))
        else:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                res = list(ex.map(lambda f: walk(f, pre, 0, 0), _split(front, threads)))
            for cnt, nd in res:
                count += cnt
                nodes += nd
    return BranchCount(k=m, x=float("nan"), rho=rho, count=count, nodes=nodes)


def enumerate_D(center: SymbolWord, rho: float, m: int, lam: float, *,
                budget: int = DEFAULT_NODE_BUDGET) -> np.ndarray:
    """Members of the set counted by :func:`count_D`, as sorted MSB-first integers."""
    _check_lam(lam)
    if m > 62:
        raise ValueError("explicit enumeration is limited to m <= 62")
    c, powers, up, down = _d_setup(center, m, lam)
    vals = np.zeros(1)
    words = np.zeros(1, dtype=np.int64)
    nodes = 1
    for d in range(m):
        delta = powers[d] * (np.array([0.0, 1.0]) - c[d])
        nv = np.concatenate((vals + delta[0], vals + delta[1]))
        nw = np.concatenate((words << 1, (words << 1) | 1))
        keep = (nv + up[d + 1] > -rho) & (nv - down[d + 1] < rho)
        vals, words = nv[keep], nw[keep]
        nodes += nv.size
        if nodes > budget:
            raise WorkBudgetExceeded(f"node budget {budget} exceeded at depth {d + 1}", nodes)
    words = words[np.abs(vals) < rho]
    return np.sort(words)


def count_with_prefix(members: np.ndarray, m: int, prefix_bits: int, plen: int) -> int:
    """How many of the sorted length-``m`` words in ``members`` start with the given prefix."""
    shift = m - plen
    lo = prefix_bits << shift
    hi = (prefix_bits + 1) << shift
    return int(np.searchsorted(members, hi) - np.searchsorted(members, lo))


def growth_rate(counts: Sequence[int], ks: Sequence[int]) -> float:
    """Least-squares slope of ``log count`` against ``k``."""
    ks = np.asarray(ks, dtype=float)
    lc = np.log(np.asarray(counts, dtype=float))
    if ks.size < 2:
        raise ValueError("need at least two depths")
    return float(np.polyfit(ks, lc, 1)[0])
