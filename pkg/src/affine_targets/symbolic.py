"""Binary codings, the two iterated function systems and their projections.

The planar system is ``f0(x, y) = (lam*x, y/2)`` and
``f1(x, y) = (lam*x + 1 - lam, y/2 + 1/2)``; its projection to the first
coordinate is ``g0(x) = lam*x``, ``g1(x) = lam*x + 1 - lam``.

A finite word ``w = w_1 ... w_n`` codes the cylinder ``f_w([0,1]^2)``, an
axis-aligned rectangle of width ``lam**n`` and height ``2**-n``.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

MAX_DEPTH = 4096

# relative slack used when deciding equality of float powers
REL_TOL = 1e-12


class SymbolWord:
    """Immutable finite word over {0, 1}, bit-packed into a Python int.

    The first symbol is the most significant bit, so prefixes are right
    shifts and the longest common prefix of two words is a single XOR.
    """

    __slots__ = ("_bits", "_length")

    def __init__(self, bits: int = 0, length: int = 0):
        if length < 0 or length > MAX_DEPTH:
            raise ValueError(f"word length must be in [0, {MAX_DEPTH}], got {length}")
        if bits < 0 or bits >> length:
            raise ValueError("bits do not fit in the declared length")
        self._bits = bits
        self._length = length

    @classmethod
    def from_str(cls, s: str) -> "SymbolWord":
        s = s.strip()
        if s and set(s) - {"0", "1"}:
            raise ValueError(f"not a binary word: {s!r}")
        return cls(int(s, 2) if s else 0, len(s))

    @classmethod
    def from_digits(cls, digits: Iterable[int]) -> "SymbolWord":
        digits = [int(d) for d in digits]
        if any(d not in (0, 1) for d in digits):
            raise ValueError("symbols must be 0 or 1")
        return cls.from_str("".join(map(str, digits)))

    @classmethod
    def repeat(cls, pattern: str, length: int) -> "SymbolWord":
        """Periodic word ``pattern pattern ...`` truncated to ``length``."""
        if not pattern:
            raise ValueError("empty pattern")
        reps = -(-length // len(pattern))
        return cls.from_str((pattern * reps)[:length])

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "SymbolWord":
        return cls.from_digits(rng.integers(0, 2, size=length))

    @property
    def bits(self) -> int:
        return self._bits

    @property
    def length(self) -> int:
        return self._length

    def __len__(self) -> int:
        return self._length

    def __getitem__(self, k: int) -> int:
        """Symbol at 0-based position ``k`` (that is, ``w_{k+1}``)."""
        if k < 0:
            k += self._length
        if not 0 <= k < self._length:
            raise IndexError(k)
        return (self._bits >> (self._length - 1 - k)) & 1

    def __iter__(self):
        for k in range(self._length):
            yield self[k]

    def __add__(self, other: "SymbolWord") -> "SymbolWord":
        return SymbolWord((self._bits << other._length) | other._bits,
                          self._length + other._length)

    def __eq__(self, other) -> bool:
        return (isinstance(other, SymbolWord) and self._length == other._length
                and self._bits == other._bits)

    def __hash__(self) -> int:
        return hash((self._bits, self._length))

    def __str__(self) -> str:
        return format(self._bits, f"0{self._length}b") if self._length else ""

    def __repr__(self) -> str:
        s = str(self)
        if len(s) > 40:
            s = s[:37] + "..."
        return f"SymbolWord('{s}', length={self._length})"

    def append(self, symbol: int) -> "SymbolWord":
        return SymbolWord((self._bits << 1) | (symbol & 1), self._length + 1)

    def prefix(self, n: int) -> "SymbolWord":
        if not 0 <= n <= self._length:
            raise ValueError(f"prefix length {n} outside [0, {self._length}]")
        return SymbolWord(self._bits >> (self._length - n), n)

    def shift(self, n: int = 1) -> "SymbolWord":
        """Drop the first ``n`` symbols (the shift map applied ``n`` times)."""
        if not 0 <= n <= self._length:
            raise ValueError(f"cannot shift a word of length {self._length} by {n}")
        rest = self._length - n
        return SymbolWord(self._bits & ((1 << rest) - 1), rest)

    def slice(self, start: int, stop: int) -> "SymbolWord":
        """Symbols ``w_{start+1} ... w_stop``."""
        return self.prefix(stop).shift(start)

    def digits(self) -> np.ndarray:
        if self._length == 0:
            return np.zeros(0, dtype=np.uint8)
        nbytes = -(-self._length // 8)
        raw = np.frombuffer((self._bits << (8 * nbytes - self._length)).to_bytes(nbytes, "big"),
                            dtype=np.uint8)
        return np.unpackbits(raw)[: self._length]


def wedge(i: SymbolWord, j: SymbolWord) -> int:
    """Length of the longest common prefix of ``i`` and ``j``."""
    m = min(len(i), len(j))
    diff = i.prefix(m).bits ^ j.prefix(m).bits
    return m - diff.bit_length()


class Regime(enum.Enum):
    CASE1 = "case1"
    BOUNDARY = "boundary"
    CASE23 = "case23"


@dataclass(frozen=True)
class Params:
    lam: float
    gamma: float

    def __post_init__(self):
        if not 0.5 < self.lam < 1.0:
            raise ValueError(f"lambda must lie in (1/2, 1), got {self.lam}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    @property
    def regime(self) -> Regime:
        prod = 2.0 * self.lam * self.gamma
        if abs(prod - 1.0) <= REL_TOL:
            return Regime.BOUNDARY
        return Regime.CASE1 if prod < 1.0 else Regime.CASE23


@dataclass(frozen=True)
class CylinderRect:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if self.x_lo > self.x_hi or self.y_lo > self.y_hi:
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def height(self) -> float:
        return self.y_hi - self.y_lo

    def contains(self, other: "CylinderRect", slack: float = 0.0) -> bool:
        return (self.x_lo - slack <= other.x_lo and other.x_hi <= self.x_hi + slack
                and self.y_lo - slack <= other.y_lo and other.y_hi <= self.y_hi + slack)

    def contains_point(self, x: float, y: float, slack: float = 0.0) -> bool:
        return (self.x_lo - slack <= x <= self.x_hi + slack
                and self.y_lo - slack <= y <= self.y_hi + slack)

    def intersects(self, other: "CylinderRect") -> bool:
        return (self.x_lo <= other.x_hi and other.x_lo <= self.x_hi
                and self.y_lo <= other.y_hi and other.y_lo <= self.y_hi)


def cube(center: tuple[float, float], r: float) -> CylinderRect:
    """Closed square ``Q(center, r)`` of side ``2r``."""
    x, y = center
    return CylinderRect(x - r, x + r, y - r, y + r)


class Approx(NamedTuple):
    value: float
    error: float


@functools.lru_cache(maxsize=64)
def _x_weights(lam: float) -> np.ndarray:
    # (1 - lam) * lam**(k-1), k = 1..MAX_DEPTH
    w = (1.0 - lam) * lam ** np.arange(MAX_DEPTH, dtype=np.float64)
    w.flags.writeable = False
    return w


def x_weights(lam: float, n: int) -> np.ndarray:
    """Coefficients of the first-coordinate projection for depth ``n``."""
    return _x_weights(float(lam))[:n]


def _y_value(w: SymbolWord) -> float:
    n = len(w)
    if n <= 60:
        return math.ldexp(w.bits, -n)
    return math.ldexp(w.bits >> (n - 60), -60)


def pi_I(w: SymbolWord, lam: float) -> Approx:
    """Projection of the cylinder ``[w]`` to ``[0, 1]`` under ``g0, g1``.

    Returns the left end ``g_w(0)`` of the cylinder interval together with
    the truncation bound ``lam**len(w)``: every infinite extension of ``w``
    projects into ``[value, value + error]``.
    """
    n = len(w)
    if n == 0:
        return Approx(0.0, 1.0)
    value = float(np.dot(w.digits(), x_weights(lam, n)))
    return Approx(min(max(value, 0.0), 1.0), lam ** n)


def pi_2d(w: SymbolWord, lam: float) -> tuple[float, float]:
    """Point ``f_w(0)`` approximating the planar projection of ``[w]``."""
    return pi_I(w, lam).value, _y_value(w)


def cylinder_box(w: SymbolWord, lam: float) -> CylinderRect:
    """The rectangle ``f_w([0,1]^2)``."""
    n = len(w)
    x = pi_I(w, lam).value
    y = _y_value(w)
    return CylinderRect(x, min(x + lam ** n, 1.0), y, min(y + math.ldexp(1.0, -n), 1.0))


def expand_orbit(w: SymbolWord, n: int, lam: float) -> tuple[float, float]:
    """Image of ``pi(w)`` under ``n`` iterates of the expanding map."""
    if n > len(w):
        raise ValueError(f"cannot iterate {n} times on a coding of length {len(w)}")
    return pi_2d(w.shift(n), lam)


def lift_point(y: float, depth: int) -> SymbolWord:
    """Coding of the planar point with second coordinate ``y``.

    The second coordinate alone determines the coding (binary digits of
    ``y``); at dyadic ``y`` the lexicographically smallest expansion is
    returned, which agrees with choosing ``f0`` on the overlap.
    """
    if not 0.0 <= y <= 1.0:
        raise ValueError("y must lie in [0, 1]")
    if depth > 60:
        raise ValueError("lifting is limited to depth 60 in binary64")
    scaled = y * (1 << depth)
    k = math.floor(scaled)
    if k == scaled and k > 0:
        k -= 1  # ... 0 111... rather than ... 1 000...
    return SymbolWord(min(k, (1 << depth) - 1), depth)


def separation_exponent(lam: float) -> int:
    """Least ``n`` with ``(1-lam)*lam + lam**(n+1) < lam**2 - lam**(n+1)``."""
    if not 0.5 < lam < 1.0:
        raise ValueError(f"lambda must lie in (1/2, 1), got {lam}")
    lhs0 = (1.0 - lam) * lam
    n = 1
    while not lhs0 + lam ** (n + 1) < lam ** 2 - lam ** (n + 1):
        n += 1
    return n


def separation_constant(lam: float) -> float:
    """Constant ``C`` with ``d(pi(i), pi(j)) >= C * 2**-wedge(i, j)``.

    ``C = min(2**-n, C1)`` with ``n`` from :func:`separation_exponent` and
    ``C1 = lam**2 - lam**(n+1) - ((1-lam)*lam + lam**(n+1))``.
    """
    n = separation_exponent(lam)
    c1 = lam ** 2 - lam ** (n + 1) - ((1.0 - lam) * lam + lam ** (n + 1))
    return min(math.ldexp(1.0, -n), c1)


def sup_distance(p: tuple[float, float], q: tuple[float, float]) -> float:
    return max(abs(p[0] - q[0]), abs(p[1] - q[1]))
