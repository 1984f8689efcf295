"""Cantor mass distributions on codings, evaluated lazily path by path.

Every position of a coding falls into one of three kinds of segment:

* free: both symbols allowed, mass halves;
* pinned: the symbol must equal the corresponding digit of the centre;
* ambiguous (case 3 only): the whole segment must be a member of the set
  ``D`` of words whose projection stays within ``lam**L`` of the centre's,
  and mass is split evenly between the members.

For return time ``n_m`` the cases 1 and 2 pin positions
``n_m + 1 .. n_m + ell2(n_m)`` to ``z_1 .. z_ell2``.  Case 3 pins only the
first ``ell1(n_m)`` of them and makes the remaining ``ell2 - ell1`` positions
ambiguous.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from ..bernoulli import enumerate_D
from ..scales import ell1, ell2
from ..symbolic import Params, SymbolWord
from .geometry import TargetSpec

FREE, PIN, AMB = 0, 1, 2


@dataclass(frozen=True)
class Schedule:
    n: tuple
    c: float = 4.0

    def __post_init__(self):
        if not self.n:
            raise ValueError("schedule needs at least one return time")
        if any(b <= a for a, b in zip(self.n, self.n[1:])) or self.n[0] < 1:
            raise ValueError(f"return times must be positive and increasing: {self.n}")

    def check(self, p: Params) -> None:
        """Raise unless consecutive returns leave room for the pinned windows."""
        for a, b in zip(self.n, self.n[1:]):
            if b <= a + ell2(a, p):
                raise ValueError(
                    f"return {b} overlaps the window of {a} (needs > {a + ell2(a, p)})")

    def next_return(self, p: Params) -> int:
        last = self.n[-1]
        return max(math.ceil(self.c * last), last + ell2(last, p) + 1)


def build_schedule(p: Params, n1: int, count: int = 3, c: float = 4.0) -> Schedule:
    """``n_{m+1} = max(c n_m, n_m + ell2(n_m) + 1)`` starting from ``n1``."""
    if c < 3:
        raise ValueError("growth factor c must be at least 3")
    if not 1 <= count <= 5:
        raise ValueError("schedules hold between 1 and 5 returns")
    ns = [n1]
    while len(ns) < count:
        a = ns[-1]
        ns.append(max(math.ceil(c * a), a + ell2(a, p) + 1))
    return Schedule(tuple(ns), c)


@dataclass
class _Window:
    start: int          # 0-based position of the first ambiguous symbol
    length: int
    center: SymbolWord
    rho: float
    members: Optional[np.ndarray] = None


class MeasureSpec:
    """Lazy description of one of the three mass distributions."""

    def __init__(self, case: int, target: TargetSpec, schedule: Schedule,
                 lambda0: Optional[float] = None):
        if case not in (1, 2, 3):
            raise ValueError("case must be 1, 2 or 3")
        self.case = case
        self.target = target
        self.schedule = schedule
        self.lambda0 = lambda0
        p = target.p
        schedule.check(p)
        self.coverage = schedule.next_return(p) - 1
        z = target.z
        need = max(ell2(n, p) for n in schedule.n)
        if len(z) < need:
            raise ValueError(f"centre coding has length {len(z)}, schedule needs {need}")
        kind = np.zeros(self.coverage, dtype=np.int8)
        pin = np.zeros(self.coverage, dtype=np.int8)
        win = np.full(self.coverage, -1, dtype=np.int32)
        zd = z.digits()
        self.windows: list[_Window] = []
        self._lock = threading.Lock()
        for n in schedule.n:
            l2 = ell2(n, p)
            l1 = ell1(n, p.gamma) if case == 3 else l2
            l1 = min(l1, l2)
            kind[n:n + l1] = PIN
            pin[n:n + l1] = zd[:l1]
            if l2 > l1:
                L = l2 - l1
                kind[n + l1:n + l2] = AMB
                win[n + l1:n + l2] = len(self.windows)
                self.windows.append(_Window(n + l1, L, z.slice(l1, l2), p.lam ** L))
        self.kind, self.pin, self.win = kind, pin, win

    @property
    def p(self) -> Params:
        return self.target.p

    def members(self, idx: int) -> np.ndarray:
        """Sorted members of the ambiguous set for window ``idx`` (memoised)."""
        w = self.windows[idx]
        if w.members is None:
            m = enumerate_D(w.center, w.rho, w.length, self.p.lam)
            with self._lock:
                w.members = m
        return w.members

    def d_count(self, idx: int) -> int:
        return int(self.members(idx).size)

    def _prefix_count(self, idx: int, bits, plen: int):
        w = self.windows[idx]
        mem = self.members(idx)
        shift = w.length - plen
        lo = np.left_shift(np.asarray(bits, dtype=np.int64), shift)
        hi = np.left_shift(np.asarray(bits, dtype=np.int64) + 1, shift)
        return np.searchsorted(mem, hi) - np.searchsorted(mem, lo)

    def check_depth(self, depth: int) -> None:
        if depth > self.coverage:
            raise ValueError(
                f"schedule {self.schedule.n} only covers depth {self.coverage}, asked {depth}")

    # -- weights ---------------------------------------------------------

    def weight(self, w: SymbolWord, exact: bool = False):
        """Mass of the cylinder ``[w]``."""
        n = len(w)
        self.check_depth(n)
        d = w.digits()
        kind = self.kind[:n]
        if np.any((kind == PIN) & (d != self.pin[:n])):
            return Fraction(0) if exact else 0.0
        free = int(np.count_nonzero(kind == FREE))
        num, den = 1, 1
        for idx, win in enumerate(self.windows):
            if win.start >= n:
                break
            plen = min(win.length, n - win.start)
            seg = 0
            for b in d[win.start:win.start + plen]:
                seg = (seg << 1) | int(b)
            cnt = int(self._prefix_count(idx, seg, plen))
            if cnt == 0:
                return Fraction(0) if exact else 0.0
            num *= cnt
            den *= self.d_count(idx)
        if exact:
            return Fraction(num, den << free)
        return math.ldexp(num / den, -free)

    # -- sampling --------------------------------------------------------

    def sample_digits(self, depth: int, count: int, rng: np.random.Generator) -> np.ndarray:
        """``count`` independent codings of length ``depth`` drawn from the measure."""
        self.check_depth(depth)
        out = rng.integers(0, 2, size=(count, depth), dtype=np.uint8)
        kind = self.kind[:depth]
        pins = np.flatnonzero(kind == PIN)
        out[:, pins] = self.pin[pins]
        for idx, win in enumerate(self.windows):
            if win.start >= depth:
                break
            mem = self.members(idx)
            pick = mem[rng.integers(0, mem.size, size=count)]
            shifts = np.arange(win.length - 1, -1, -1, dtype=np.int64)
            bits = ((pick[:, None] >> shifts) & 1).astype(np.uint8)
            stop = min(win.start + win.length, depth)
            out[:, win.start:stop] = bits[:, :stop - win.start]
        return out

    def sample_path(self, depth: int, seed: int = 0) -> SymbolWord:
        rng = np.random.default_rng(seed)
        return SymbolWord.from_digits(self.sample_digits(depth, 1, rng)[0])

    def describe(self) -> dict:
        return {
            "case": self.case,
            "lambda": self.p.lam,
            "gamma": self.p.gamma,
            "schedule": list(self.schedule.n),
            "coverage": self.coverage,
            "windows": [{"start": w.start, "length": w.length} for w in self.windows],
        }
