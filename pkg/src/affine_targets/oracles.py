"""Unpruned reference implementations used to cross-check the fast paths.

Everything here enumerates the full space, so sizes are capped hard.
"""
from __future__ import annotations

import numpy as np

from .symbolic import SymbolWord


def all_words(k: int) -> np.ndarray:
    """All ``2**k`` words of length ``k`` as a (2**k, k) uint8 array, MSB first."""
    if k > 22:
        raise ValueError("brute force limited to k <= 22")
    if k == 0:
        return np.zeros((1, 0), dtype=np.uint8)
    idx = np.arange(1 << k, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def _ends(k: int, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """``ones`` and ``zeros`` increment sums of every depth-``k`` word; the
    interval is ``[ones, 1 - zeros]``."""
    words = all_words(k).astype(np.float64)
    ones = np.zeros(words.shape[0])
    zeros = np.zeros(words.shape[0])
    for d in range(k):
        inc = (1.0 - lam) * lam ** d
        ones = ones + words[:, d] * inc
        zeros = zeros + (1.0 - words[:, d]) * inc
    return ones, zeros


def brute_Nk(x: float, rho: float, k: int, lam: float) -> int:
    ones, zeros = _ends(k, lam)
    rad = rho * lam ** k
    lo, hi = x - rad, x + rad
    return int(np.count_nonzero((ones <= hi) & (zeros <= 1.0 - lo)))


def brute_expansions(x: float, lam: float, k: int) -> int:
    ones, zeros = _ends(k, lam)
    return int(np.count_nonzero((ones <= x) & (zeros <= 1.0 - x)))


def brute_D(center: SymbolWord, rho: float, m: int, lam: float) -> int:
    return int(brute_D_members(center, rho, m, lam).size)


def brute_D_members(center: SymbolWord, rho: float, m: int, lam: float) -> np.ndarray:
    words = all_words(m).astype(np.float64)
    c = center.prefix(m).digits().astype(np.float64)
    s = np.zeros(words.shape[0])
    for i in range(m):
        s = s + (words[:, i] - c[i]) * lam ** (i + 1)
    return np.flatnonzero(np.abs(s) < rho).astype(np.int64)


def brute_min_poly(lam: float, n: int) -> float:
    """Min of ``|P(lam)|`` over nonzero coefficient vectors in {-1,0,1}^(n+1)."""
    if n > 14:
        raise ValueError("brute force limited to n <= 14")
    idx = np.arange(3 ** (n + 1), dtype=np.int64)
    idx = idx[idx != (3 ** (n + 1) - 1) // 2]  # the zero vector
    acc = np.zeros(idx.size)
    for j in range(n, -1, -1):
        acc = acc * lam + ((idx // 3 ** j) % 3 - 1)
    return float(np.abs(acc).min())


def support_words(ms, depth: int) -> list:
    """All ``(word, weight)`` with positive weight at ``depth``, without spatial pruning."""
    from .symbolic import SymbolWord
    out = [(SymbolWord(0, 0), 1.0)]
    for _ in range(depth):
        nxt = []
        for w, _wt in out:
            for a in (0, 1):
                c = w.append(a)
                cw = ms.weight(c)
                if cw > 0:
                    nxt.append((c, cw))
        out = nxt
        if len(out) > 1 << 20:
            raise ValueError("support too large for brute force")
    return out


def brute_mu_ball(ms, x: SymbolWord, R: float, depth: int) -> tuple[float, float]:
    """Upper and lower ball sums over explicitly enumerated support cylinders, in exact arithmetic."""
    from fractions import Fraction
    lam = Fraction(ms.p.lam)
    c = [(1 - lam) * lam ** k for k in range(max(depth, len(x)))]

    def point(w):
        d = w.digits()
        px = sum((c[k] for k in range(len(w)) if d[k]), Fraction(0))
        py = Fraction(w.bits, 1 << len(w))
        return px, py

    cx, cy = point(x)
    r = Fraction(R)
    wx, wy = lam ** depth, Fraction(1, 1 << depth)
    up = lo = 0.0
    for w, wt in support_words(ms, depth):
        px, py = point(w)
        if px <= cx + r and px + wx >= cx - r and py <= cy + r and py + wy >= cy - r:
            up += wt
            if px >= cx - r and px + wx <= cx + r and py >= cy - r and py + wy <= cy + r:
                lo += wt
    return up, lo
