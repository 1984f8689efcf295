"""Ball masses, local-dimension probes, energy estimates, dynamical targets.

Ball masses are computed by a level-synchronous descent of the coding tree
that keeps only cylinders meeting the cube.  Probes reach cube sides far
below binary64 resolution (``2**-60`` near ``0.5``), so node positions are
stored relative to the ball centre: the second coordinate as an exact
integer offset on the dyadic grid of the current depth, the first as a
double-double sum of exactly rounded constants.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from ..bernoulli import DEFAULT_NODE_BUDGET, WorkBudgetExceeded
from ..scales import dim_formula, ell_n_dynamical, k_of_r
from ..symbolic import SymbolWord, separation_constant
from .geometry import TargetSpec
from .measures import AMB, FREE, PIN, MeasureSpec

LOG2 = math.log(2.0)


# ---------------------------------------------------------------- exact constants

@functools.lru_cache(maxsize=16)
def _x_terms(lam: float, depth: int) -> tuple[list, np.ndarray, np.ndarray]:
    """Exact ``(1-lam) lam**(k-1)`` for ``k = 1..depth`` and their hi/lo split."""
    q = Fraction(lam)
    c = (1 - q)
    terms = []
    for _ in range(depth):
        terms.append(c)
        c = c * q
    hi = np.array([float(t) for t in terms])
    lo = np.array([float(t - Fraction(h)) for t, h in zip(terms, hi)])
    return terms, hi, lo


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    e = e + al + bl
    hi = s + e
    return hi, e - (hi - s)


class _Centres:
    """Data about a batch of ball centres ``pi(x_s)`` needed at every depth."""

    def __init__(self, digits: np.ndarray, lam: float, depth: int):
        digits = np.atleast_2d(digits)
        count, n = digits.shape
        width = max(depth, n)
        _, c_hi, c_lo = _x_terms(lam, max(width, 1))
        dig = np.zeros((count, width + 1), dtype=np.int64)
        dig[:, :n] = digits
        # tails T_d = sum_{k > d} x_k c_k in double-double, and frac_d of 2**d y
        t_hi = np.zeros((count, width + 1))
        t_lo = np.zeros((count, width + 1))
        frac = np.zeros((count, width + 1))
        for d in range(n - 1, -1, -1):
            on = dig[:, d].astype(np.float64)
            t_hi[:, d], t_lo[:, d] = _dd_add(t_hi[:, d + 1], t_lo[:, d + 1],
                                             on * c_hi[d], on * c_lo[d])
            frac[:, d] = 0.5 * (on + frac[:, d + 1])
        self.count = count
        self.digit = dig[:, :depth + 1]
        self.t_hi = t_hi[:, :depth + 1]
        self.t_lo = t_lo[:, :depth + 1]
        self.frac = frac[:, :depth + 1]


@dataclass(frozen=True)
class MuBall:
    R: float
    upper: float
    lower: float
    depth: int
    nodes: int
    complete: bool = True


def ball_depth(R: float, lam: float) -> int:
    """Truncation depth ``k(ceil(-log2 R)) + 4``."""
    r = max(math.ceil(-math.log2(R)), 0)
    return k_of_r(r, lam) + 4


def _cube_tests(ex, ey, span_x: float, R: float, d: int):
    """Cylinders meeting / contained in the cube, in centre-relative coordinates."""
    ry = math.ldexp(R, d)
    hit = (ex <= R) & (ex + span_x >= -R) & (ey <= ry) & (ey + 1.0 >= -ry)
    inside = (ex >= -R) & (ex + span_x <= R) & (ey >= -ry) & (ey + 1.0 <= ry)
    return hit, inside


def _descend(ms: MeasureSpec, centres: np.ndarray, radii: Sequence[float],
             depths: Sequence[int], shortcut: bool, budget: int):
    """Upper and lower cube sums, shape ``(samples, len(radii))``, for nested
    cubes around each centre coding (rows of ``centres``).

    ``radii`` must be nonincreasing and ``depths`` nondecreasing; cube ``i``
    is evaluated with depth-``depths[i]`` cylinders.  ``budget`` caps the
    number of visited nodes per centre.  Returns ``(upper, lower, nodes,
    complete)``.
    """
    lam = ms.p.lam
    dmax = max(depths)
    ms.check_depth(dmax)
    cen = _Centres(centres, lam, dmax)
    _, c_hi, c_lo = _x_terms(lam, max(dmax, 1))
    S, nr = cen.count, len(radii)
    if shortcut and nr != 1:
        raise ValueError("the containment shortcut is only valid for a single cube")
    upper = np.zeros((S, nr))
    lower = np.zeros((S, nr))
    # one root node per centre
    sid = np.arange(S)
    a_hi = np.zeros(S)
    a_lo = np.zeros(S)
    dy = np.zeros(S, dtype=np.int64)
    wt = np.ones(S)
    seg = np.zeros(S, dtype=np.int64)
    segc = np.ones(S, dtype=np.int64)
    nodes = S
    nxt_r = 0  # first cube not yet recorded
    for d in range(dmax + 1):
        span_x = lam ** d
        ex_hi, ex_lo = _dd_add(a_hi, a_lo, -cen.t_hi[sid, d], -cen.t_lo[sid, d])
        ex = ex_hi + ex_lo
        ey = dy - cen.frac[sid, d]
        while nxt_r < nr and depths[nxt_r] == d:
            hit, inside = _cube_tests(ex, ey, span_x, radii[nxt_r], d)
            upper[:, nxt_r] += np.bincount(sid[hit], wt[hit], minlength=S)
            lower[:, nxt_r] += np.bincount(sid[inside], wt[inside], minlength=S)
            nxt_r += 1
        if nxt_r == nr:
            break
        # prune with the largest cube still to be recorded
        hit, inside = _cube_tests(ex, ey, span_x, radii[nxt_r], d)
        if shortcut and inside.any():
            # a contained cylinder keeps its whole mass at every later depth
            m = np.bincount(sid[inside], wt[inside], minlength=S)
            upper[:, 0] += m
            lower[:, 0] += m
            hit = hit & ~inside
        sid, a_hi, a_lo, dy, wt, seg, segc = (v[hit] for v in (sid, a_hi, a_lo, dy, wt, seg, segc))
        if wt.size == 0:
            break
        # expand position d (0-based)
        kind = ms.kind[d]
        xd = cen.digit[sid, d]
        syms = [int(ms.pin[d])] if kind == PIN else [0, 1]
        if kind == AMB:
            widx = int(ms.win[d])
            win = ms.windows[widx]
            plen = d - win.start + 1
            if plen == 1:
                seg = np.zeros(wt.size, dtype=np.int64)
                segc = np.full(wt.size, ms.d_count(widx), dtype=np.int64)
        parts = []
        for a in syms:
            step = a - xd
            stepf = step.astype(np.float64)
            ch, cl = _dd_add(a_hi, a_lo, stepf * c_hi[d], stepf * c_lo[d])
            ndy = 2 * dy + step
            if kind == AMB:
                nseg = (seg << 1) | a
                nsegc = ms._prefix_count(widx, nseg, plen).astype(np.int64)
                nw = wt * nsegc / segc
                ok = nsegc > 0
                parts.append((sid[ok], ch[ok], cl[ok], ndy[ok], nw[ok], nseg[ok], nsegc[ok]))
            else:
                nw = wt * 0.5 if kind == FREE else wt
                parts.append((sid, ch, cl, ndy, nw, seg, segc))
        sid, a_hi, a_lo, dy, wt, seg, segc = (np.concatenate(col) for col in zip(*parts))
        nodes += wt.size
        if nodes > budget * S:
            return upper, lower, nodes, False
    return upper, lower, nodes, True


def mu_ball(ms: MeasureSpec, x: SymbolWord, R: float,
            budget: int = DEFAULT_NODE_BUDGET) -> MuBall:
    """Mass of the closed cube of half-side ``R`` around ``pi(x)``.

    ``upper`` sums the cylinders meeting the cube at the truncation depth,
    ``lower`` those contained in it.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    if R >= 2.0:
        return MuBall(R, 1.0, 1.0, 0, 1)
    d = ball_depth(R, ms.p.lam)
    up, lo, nodes, ok = _descend(ms, x.digits(), [R], [d], True, budget)
    return MuBall(R, min(float(up[0, 0]), 1.0), min(float(lo[0, 0]), 1.0), d, nodes, ok)


def ball_profile(ms: MeasureSpec, x: SymbolWord, rs: Sequence[int],
                 budget: int = DEFAULT_NODE_BUDGET) -> list[MuBall]:
    """``mu_ball`` at ``R = 2**-r`` for every ``r`` in ``rs`` from one descent."""
    rs = sorted(set(int(r) for r in rs))
    radii = [math.ldexp(1.0, -r) for r in rs]
    depths = [ball_depth(R, ms.p.lam) for R in radii]
    up, lo, nodes, ok = _descend(ms, x.digits(), radii, depths, False, budget)
    if not ok:
        raise WorkBudgetExceeded(f"ball profile exceeded {budget} nodes", nodes)
    return [MuBall(R, min(float(u), 1.0), min(float(l), 1.0), d, nodes)
            for R, u, l, d in zip(radii, up[0], lo[0], depths)]


# ---------------------------------------------------------------- probes

@dataclass(frozen=True)
class ProbeResult:
    case: int
    lam: float
    gamma: float
    schedule: tuple
    r: tuple
    log_mu: tuple
    log_R: tuple
    ratios: tuple
    summary: float
    slope: float
    formula: float

    def to_json(self) -> dict:
        return {
            "case": self.case, "lambda": self.lam, "gamma": self.gamma,
            "schedule": list(self.schedule), "r": list(self.r),
            "log_mu": list(self.log_mu), "log_R": list(self.log_R),
            "ratio": list(self.ratios), "summary": self.summary,
            "slope": self.slope, "formula": self.formula,
            "cube": "closed, side 2R",
        }


def local_dim_probe(ms: MeasureSpec, x: SymbolWord, r_lo: int, r_hi: int,
                    budget: int = DEFAULT_NODE_BUDGET) -> ProbeResult:
    """``log mu(Q(pi(x), 2^-r)) / log 2^-r`` for ``r_lo <= r <= r_hi``.

    The summary is the minimum ratio over the window (a finite stand-in for
    the lower limit); ``slope`` is the least-squares slope over the window.
    """
    rs = list(range(r_lo, r_hi + 1))
    prof = ball_profile(ms, x, rs, budget)
    log_mu = [math.log(b.upper) if b.upper > 0 else -math.inf for b in prof]
    log_R = [-r * LOG2 for r in rs]
    ratios = [lm / lr for lm, lr in zip(log_mu, log_R)]
    if len(rs) >= 2 and all(math.isfinite(v) for v in log_mu):
        slope = float(np.polyfit(log_R, log_mu, 1)[0])
    else:
        slope = math.nan
    return ProbeResult(ms.case, ms.p.lam, ms.p.gamma, ms.schedule.n, tuple(rs),
                       tuple(log_mu), tuple(log_R), tuple(ratios), min(ratios), slope,
                       dim_formula(ms.case, ms.p))


# ---------------------------------------------------------------- energy

@dataclass(frozen=True)
class EnergyResult:
    t: float
    depths: tuple
    means: tuple
    stderr: tuple
    trend: str
    method: str
    samples: int


def classify_trend(means: Sequence[float]) -> str:
    """``growing`` if strictly increasing with non-shrinking increments, else ``bounded``."""
    inc = np.diff(np.asarray(means, dtype=float))
    if inc.size and np.all(inc > 0) and np.all(inc[1:] >= inc[:-1]):
        return "growing"
    return "bounded"


def _shell_energy(phi: np.ndarray, t: float) -> np.ndarray:
    """Energy from ball masses ``phi[:, k] = mu(Q(., 2^-k))``, ``k = 0..K``.

    Pairs at sup-distance in ``(2^-(k+1), 2^-k]`` are charged
    ``2^((k+1/2) t)`` and pairs closer than ``2^-K`` the floor value
    ``2^(K t)``; the sum is arranged so that ``t = 0`` gives exactly 1.
    """
    K = phi.shape[1] - 1
    k = np.arange(K + 1, dtype=float)
    mid = np.exp2((k + 0.5) * t)
    coef = np.empty(K + 1)
    coef[0] = mid[0]
    coef[1:K] = mid[1:K] - mid[0:K - 1]
    coef[K] = 2.0 ** (K * t) - mid[K - 1] if K >= 1 else 1.0
    if t == 0:
        coef[:] = 0.0
        coef[0] = 1.0
    return phi @ coef


def energy_profile(ms: MeasureSpec, K: int, samples: int, seed: int,
                   budget: int = DEFAULT_NODE_BUDGET, batch: int = 250) -> np.ndarray:
    """Ball masses ``mu(Q(pi(i), 2^-k))``, ``k = 0..K``, for ``samples`` points ``i ~ mu``."""
    radii = [math.ldexp(1.0, -k) for k in range(K + 1)]
    depths = [ball_depth(R, ms.p.lam) for R in radii]
    rng = np.random.default_rng(seed)
    codes = ms.sample_digits(depths[-1], samples, rng)
    phi = np.empty((samples, K + 1))
    for s in range(0, samples, batch):
        up, _, nodes, ok = _descend(ms, codes[s:s + batch], radii, depths, False, budget)
        if not ok:
            raise WorkBudgetExceeded(f"energy profile exceeded {budget} nodes", nodes)
        phi[s:s + batch] = np.minimum(up, 1.0)
    return phi


def energy_estimate(ms: MeasureSpec, t: float, pairs: int, depth: int, seed: int = 0,
                    method: str = "conditional", scales: Sequence[int] = (1, 2, 4),
                    budget: int = DEFAULT_NODE_BUDGET,
                    phi: Optional[np.ndarray] = None) -> EnergyResult:
    """Mean of ``max(|pi(i) - pi(j)|, floor)^-t`` at depths ``depth * s``.

    ``method="pairs"`` averages over independent pairs drawn from the
    measure with the floor ``C 2^-depth`` (``C`` the separation constant).
    ``method="conditional"`` draws only ``i`` and integrates ``j`` exactly
    through the ball masses around ``pi(i)`` on dyadic shells, which sees
    the small scales that plain pair sampling almost never reaches.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if pairs < 1000:
        raise ValueError("need at least 1000 pairs")
    ds = [depth * s for s in scales]
    if method == "pairs":
        lam = ms.p.lam
        C = separation_constant(lam)
        rng = np.random.default_rng(seed)
        means, errs = [], []
        for d in ds:
            a = ms.sample_digits(d, pairs, rng).astype(np.float64)
            b = ms.sample_digits(d, pairs, rng).astype(np.float64)
            wx = (1.0 - lam) * lam ** np.arange(d)
            wy = np.exp2(-np.arange(1, d + 1, dtype=float))
            dist = np.maximum(np.abs((a - b) @ wx), np.abs((a - b) @ wy))
            vals = np.maximum(dist, C * math.ldexp(1.0, -d)) ** (-t)
            means.append(float(vals.mean()))
            errs.append(float(vals.std(ddof=1) / math.sqrt(pairs)))
        return EnergyResult(t, tuple(ds), tuple(means), tuple(errs),
                            classify_trend(means), method, pairs)
    if method != "conditional":
        raise ValueError(f"unknown method {method!r}")
    K = max(ds)
    if phi is None:
        phi = energy_profile(ms, K, pairs, seed, budget)
    means, errs = [], []
    for d in ds:
        e = _shell_energy(phi[:, :d + 1], t)
        means.append(float(e.mean()))
        errs.append(float(e.std(ddof=1) / math.sqrt(e.size)))
    return EnergyResult(t, tuple(ds), tuple(means), tuple(errs),
                        classify_trend(means), method, phi.shape[0])


# ---------------------------------------------------------------- dynamical targets

def dynamical_membership(i: SymbolWord, t: TargetSpec, n: int) -> bool:
    """Whether the ``ell_n`` symbols after position ``n`` repeat the start of ``z``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    ell = 0 if n == 0 else ell_n_dynamical(n, t.p)
    if len(i) < n + ell:
        raise ValueError(f"coding of length {len(i)} is shorter than n + ell_n = {n + ell}")
    if len(t.z) < ell:
        raise ValueError(f"centre coding shorter than ell_n = {ell}")
    return i.slice(n, n + ell) == t.z.prefix(ell)
