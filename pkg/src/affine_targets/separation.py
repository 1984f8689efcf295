"""Exponential separation and transversality diagnostics.

Polynomials of degree ``n`` have coefficient vectors ``(c_0, ..., c_n)`` in
``{-1, 0, 1}`` with the zero vector excluded; a leading zero is allowed so
that the classes are nested in ``n``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bernoulli import WorkBudgetExceeded
from .symbolic import SymbolWord

# largest half-enumeration (3**15 values, about 115 MB per float array)
MAX_HALF = 3 ** 15
EPS = np.finfo(np.float64).eps


def horner(coeffs: np.ndarray, lam: float) -> np.ndarray:
    """Evaluate rows of ``coeffs`` (constant term first) at ``lam`` by Horner's rule."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    acc = np.zeros(coeffs.shape[0])
    for j in range(coeffs.shape[1] - 1, -1, -1):
        acc = acc * lam + coeffs[:, j]
    return acc


def _half_values(lam: float, start: int, count: int) -> np.ndarray:
    # index i encodes digit j as ((i // 3**j) % 3) - 1
    vals = np.zeros(1)
    for j in range(count):
        p = lam ** (start + j)
        vals = np.concatenate((vals - p, vals, vals + p))
    return vals


def _decode(idx: np.ndarray, count: int) -> np.ndarray:
    out = np.empty((idx.size, count), dtype=np.float64)
    rest = idx.astype(np.int64).copy()
    for j in range(count):
        out[:, j] = rest % 3 - 1
        rest //= 3
    return out


@dataclass(frozen=True)
class PolyMin:
    n: int
    value: float
    coeffs: np.ndarray = field(compare=False)


def min_poly(lam: float, n: int, max_half: int = MAX_HALF) -> PolyMin:
    """Minimum of ``|P(lam)|`` over the degree-``n`` class, with a minimiser.

    Meet in the middle: the low and high coefficient halves are enumerated,
    one side sorted and the other matched by binary search.  Pairs within a
    rounding margin of the best are then re-evaluated by Horner's rule, so
    the result is bit-identical to an exhaustive Horner scan.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    total = n + 1
    h = total // 2
    if 3 ** max(h, total - h) > max_half:
        raise WorkBudgetExceeded(
            f"degree {n} needs 3**{total - h} values per half (cap {max_half})", 3 ** (total - h))
    low = _half_values(lam, 0, h)             # constant-term side, 3**h values
    high = _half_values(lam, h, total - h)    # already scaled by lam**h
    zero_low = (low.size - 1) // 2
    zero_high = (high.size - 1) // 2

    order = np.argsort(low, kind="stable")
    sorted_low = low[order]
    nonzero_sorted = sorted_low[order != zero_low]
    nonzero_order = order[order != zero_low]

    # best over (nonzero low, any high) and (zero low, nonzero high)
    target = -high
    pos = np.searchsorted(nonzero_sorted, target)
    best = math.inf
    if nonzero_sorted.size:
        for shift in (-1, 0):
            q = np.clip(pos + shift, 0, nonzero_sorted.size - 1)
            best = min(best, float(np.abs(nonzero_sorted[q] - target).min()))
    hn = np.delete(np.abs(high), zero_high)
    if hn.size:
        best = min(best, float(hn.min()))

    # collect every pair within the rounding margin, then re-evaluate exactly
    margin = best + 64 * EPS * (1.0 + total)
    cand_low: list[np.ndarray] = []
    cand_high: list[np.ndarray] = []
    if nonzero_sorted.size:
        lo_pos = np.searchsorted(nonzero_sorted, target - margin, side="left")
        hi_pos = np.searchsorted(nonzero_sorted, target + margin, side="right")
        for hi_idx in np.flatnonzero(hi_pos > lo_pos):
            rng = nonzero_order[lo_pos[hi_idx]:hi_pos[hi_idx]]
            cand_low.append(rng)
            cand_high.append(np.full(rng.size, hi_idx))
    z = np.flatnonzero(np.abs(high) <= margin)
    z = z[z != zero_high]
    if z.size:
        cand_low.append(np.full(z.size, zero_low))
        cand_high.append(z)
    li = np.concatenate(cand_low)
    hi_ = np.concatenate(cand_high)
    coeffs = np.hstack((_decode(li, h), _decode(hi_, total - h)))
    vals = np.abs(horner(coeffs, lam))
    k = int(np.argmin(vals))
    return PolyMin(n=n, value=float(vals[k]), coeffs=coeffs[k].astype(np.int8))


def min_poly_value(lam: float, n: int, max_half: int = MAX_HALF) -> float:
    return min_poly(lam, n, max_half).value


def rounding_bound(lam: float, n: int) -> float:
    """Bound on the evaluation error of a class member at ``lam``."""
    return 4.0 * (n + 1) * EPS * sum(lam ** j for j in range(n + 1))


@dataclass(frozen=True)
class ProfileRow:
    n: int
    min_value: float
    log_min_over_n: float
    exact_zero: bool
    seconds: float


def _changes_sign(coeffs: np.ndarray, lam: float, delta: float) -> bool:
    a, b = horner(coeffs, lam - delta)[0], horner(coeffs, lam + delta)[0]
    return a == 0.0 or b == 0.0 or (a < 0) != (b < 0)


def separation_profile(lam: float, n_max: int, delta: float = 0.0,
                       max_half: int = MAX_HALF) -> list[ProfileRow]:
    """Rows ``(n, min |P(lam)|, (1/n) log min, exact_zero)`` for ``n = 0 .. n_max``.

    A row is flagged as an exact zero when the minimum is within rounding
    error, or when ``delta > 0`` and the minimising polynomial changes sign
    on ``[lam - delta, lam + delta]`` (``lam`` known only to that accuracy).
    Once flagged, later rows stay flagged since the classes are nested.
    """
    rows = []
    hit = False
    for n in range(n_max + 1):
        t0 = time.perf_counter()
        pm = min_poly(lam, n, max_half)
        if not hit:
            hit = bool(pm.value <= rounding_bound(lam, n) or (
                delta > 0 and _changes_sign(pm.coeffs, lam, delta)))
        if hit:
            lmn = -math.inf
        elif n == 0:
            lmn = math.log(pm.value)
        else:
            lmn = math.log(pm.value) / n
        rows.append(ProfileRow(n, pm.value, lmn, hit, time.perf_counter() - t0))
    return rows


# ---------------------------------------------------------------- double zeros

@dataclass(frozen=True)
class DoubleZeroReport:
    samples: int
    roots: int
    violations: list
    min_abs_derivative: float


def _bisect_roots(coeffs: np.ndarray, a: np.ndarray, b: np.ndarray, iters: int = 60):
    fa = np.einsum("ij,ij->i", coeffs, a[:, None] ** np.arange(coeffs.shape[1]))
    for _ in range(iters):
        mid = 0.5 * (a + b)
        fm = np.einsum("ij,ij->i", coeffs, mid[:, None] ** np.arange(coeffs.shape[1]))
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, mid, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, mid)
    return 0.5 * (a + b)


def double_zero_scan(lambda_lo: float, lambda_hi: float, degree: int, delta: float,
                     samples: int, seed: int = 0, grid: int = 4001,
                     coeffs: Optional[np.ndarray] = None,
                     chunk: int = 500) -> DoubleZeroReport:
    """Sampled search for ``g(lam) = 1 + sum b_n lam**n`` with ``g = g' = 0``.

    Random ``b`` in {-1, 0, 1}**degree (or the rows of ``coeffs``) are
    evaluated on a grid; each sign change is refined by bisection and any
    root with ``|g'| < delta`` is reported as a violation.
    """
    if not 0.5 <= lambda_lo < lambda_hi < 1.0:
        raise ValueError("need 1/2 <= lambda_lo < lambda_hi < 1")
    if degree < 1 or degree > 64:
        raise ValueError("degree must be in [1, 64]")
    if coeffs is None:
        rng = np.random.default_rng(seed)
        b = rng.integers(-1, 2, size=(samples, degree)).astype(np.float64)
    else:
        b = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
        if b.shape[1] != degree:
            raise ValueError("coefficient rows must have length degree")
    full = np.hstack((np.ones((b.shape[0], 1)), b))
    exps = np.arange(degree + 1)
    xs = np.linspace(lambda_lo, lambda_hi, grid)
    basis = xs[None, :] ** exps[:, None]          # (degree+1, grid)
    dexps = exps[1:] * 1.0
    violations = []
    n_roots = 0
    min_d = math.inf
    for s in range(0, full.shape[0], chunk):
        blk = full[s:s + chunk]
        vals = blk @ basis
        sgn = np.signbit(vals)
        rows, cols = np.nonzero(sgn[:, 1:] != sgn[:, :-1])
        exact_r, exact_c = np.nonzero(vals == 0.0)
        if rows.size == 0 and exact_r.size == 0:
            continue
        roots = _bisect_roots(blk[rows], xs[cols], xs[cols + 1]) if rows.size else np.zeros(0)
        rows = np.concatenate((rows, exact_r))
        roots = np.concatenate((roots, xs[exact_c]))
        dg = np.einsum("ij,ij->i", blk[rows, 1:] * dexps,
                       roots[:, None] ** (exps[1:] - 1))
        n_roots += rows.size
        if dg.size:
            min_d = min(min_d, float(np.abs(dg).min()))
        for r, x, d in zip(rows, roots, dg):
            if abs(d) < delta:
                violations.append({"sample": int(s + r), "root": float(x), "g_prime": float(d),
                                   "coefficients": blk[r, 1:].astype(int).tolist()})
    return DoubleZeroReport(samples=full.shape[0], roots=n_roots,
                            violations=violations, min_abs_derivative=min_d)


# ---------------------------------------------------------------- transversality

@dataclass(frozen=True)
class TransversalityResult:
    measure: float
    ratio: float
    undecided: float


def transversality_measure(i: SymbolWord, j: SymbolWord, rho: float,
                           lambda_lo: float, lambda_hi: float, depth: int,
                           resolution: float = 1e-8) -> TransversalityResult:
    """Lebesgue measure of ``{lam in [lo, hi] : |sum_{k<=d} (i_k - j_k) lam**k| < rho}``.

    Intervals are bisected until the sign-split bound decides them or their
    width drops below ``resolution``; undecided cells are classified by
    their midpoint and their total width is reported.
    """
    if len(i) < depth or len(j) < depth:
        raise ValueError(f"words must have length >= depth = {depth}")
    if len(i) == 0 or i[0] == j[0]:
        raise ValueError("words must differ in the first symbol")
    if not 0.5 < lambda_lo < lambda_hi < 1.0:
        raise ValueError("need 1/2 < lambda_lo < lambda_hi < 1")
    if rho <= 0:
        raise ValueError("rho must be positive")
    tail = lambda_hi ** (depth + 1) / (1.0 - lambda_hi)
    if tail >= rho / 10.0:
        raise ValueError(f"depth {depth} too small: tail bound {tail:.3e} >= rho/10")
    c = i.prefix(depth).digits().astype(np.float64) - j.prefix(depth).digits().astype(np.float64)
    coeffs = np.concatenate(([0.0], c))
    pos = np.where(coeffs > 0, coeffs, 0.0)
    neg = np.where(coeffs < 0, -coeffs, 0.0)

    ev = _poly_eval
    a = np.array([lambda_lo])
    b = np.array([lambda_hi])
    measure = 0.0
    undecided = 0.0
    while a.size:
        ppa, ppb = ev(pos, a), ev(pos, b)
        pna, pnb = ev(neg, a), ev(neg, b)
        lo_v = ppa - pnb
        hi_v = ppb - pna
        inside = (lo_v > -rho) & (hi_v < rho)
        outside = (lo_v >= rho) | (hi_v <= -rho)
        measure += float((b - a)[inside].sum())
        rest = ~(inside | outside)
        a, b = a[rest], b[rest]
        small = (b - a) < resolution
        if small.any():
            mid = 0.5 * (a[small] + b[small])
            v = ev(coeffs, mid)
            w = (b - a)[small]
            measure += float(w[np.abs(v) < rho].sum())
            undecided += float(w.sum())
            a, b = a[~small], b[~small]
        mid = 0.5 * (a + b)
        a, b = np.concatenate((a, mid)), np.concatenate((mid, b))
    return TransversalityResult(measure=measure, ratio=measure / rho, undecided=undecided)


def _poly_eval(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(x)
    for cj in coeffs[::-1]:
        acc = acc * x + cj
    return acc
