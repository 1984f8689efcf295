"""Integer scale functions, threshold tables and closed-form dimension values.

All integer scales are defined by inequalities between powers, e.g.
``ell2(n)`` is the least integer with ``lam**ell2 <= gamma**n``.  They are
found from a logarithmic guess and then repaired by direct comparison of
the powers, so the inequalities themselves are the contract.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .symbolic import REL_TOL, Params

# upper end of the interval on which {0, +-1} power series have no double zeros
LAMBDA_BAR = 0.668

_TINY = 1e-290


def pow_le(a: float, e: int, b: float, f: int) -> bool:
    """``a**e <= b**f`` for bases in (0, 1), ties within ``REL_TOL`` allowed."""
    lhs = a ** e
    rhs = b ** f
    if lhs > _TINY and rhs > _TINY:
        return lhs <= rhs * (1.0 + REL_TOL)
    la = e * math.log(a)
    lb = f * math.log(b)
    return la <= lb + max(REL_TOL, 4e-16 * abs(lb))


def smallest_exponent(base: float, target_base: float, target_exp: int) -> int:
    """Least integer ``e >= 0`` with ``base**e <= target_base**target_exp``."""
    guess = math.ceil(target_exp * math.log(target_base) / math.log(base))
    e = max(guess, 0)
    while e > 0 and pow_le(base, e - 1, target_base, target_exp):
        e -= 1
    while not pow_le(base, e, target_base, target_exp):
        e += 1
    return e


def largest_exponent(base: float, target_base: float, target_exp: int) -> int:
    """Largest integer ``e >= 0`` with ``base**e >= target_base**target_exp``."""
    # base**e >= t  <=>  not (base**e < t); found as one less than the least
    # e with base**e < t, i.e. with t**1 <= base**e failing.
    guess = math.floor(target_exp * math.log(target_base) / math.log(base))
    e = max(guess, 0)
    while not pow_le(target_base, target_exp, base, e) and e > 0:
        e -= 1
    while pow_le(target_base, target_exp, base, e + 1):
        e += 1
    return e


def ell1(n: int, gamma: float) -> int:
    """Least ``l`` with ``(1/2)**l <= gamma**n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return smallest_exponent(0.5, gamma, n)


def ell2(n: int, p: Params) -> int:
    """Least ``l`` with ``lam**l <= gamma**n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return smallest_exponent(p.lam, p.gamma, n)


def k_of_r(r: int, lam: float) -> int:
    """Least ``k`` with ``lam**k <= (1/2)**r``."""
    if r < 0:
        raise ValueError("r must be >= 0")
    return smallest_exponent(lam, 0.5, r)


def r_of_depth(depth: int, lam: float) -> int:
    """Largest ``r`` with ``(1/2)**r >= lam**depth``."""
    return largest_exponent(0.5, lam, depth)


def ell_n_dynamical(n: int, p: Params) -> int:
    """``ceil(n * log(lam) / log(gamma))``, evaluated as least ``l`` with ``gamma**l <= lam**n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return smallest_exponent(p.gamma, p.lam, n)


@dataclass(frozen=True)
class ScaleTable:
    n_m: int
    ell1: int
    ell2: int
    r_minus1: int
    r_0: int
    r_1: Optional[int]


def thresholds(n_m: int, p: Params, n_next: Optional[int] = None) -> ScaleTable:
    """Scales attached to the return time ``n_m``.

    ``r_minus1`` is the largest ``r`` with ``2**-r >= lam**n_m``, ``r_0`` the
    least ``r`` with ``k(r) >= n_m + ell2(n_m)`` and ``r_1`` the largest ``r``
    with ``2**-r >= lam**n_next`` (only when ``n_next`` is given).
    """
    l2 = ell2(n_m, p)
    target = n_m + l2
    r0 = max(math.floor(target * -math.log(p.lam) / math.log(2)) - 1, 0)
    while r0 > 0 and k_of_r(r0 - 1, p.lam) >= target:
        r0 -= 1
    while k_of_r(r0, p.lam) < target:
        r0 += 1
    return ScaleTable(
        n_m=n_m,
        ell1=ell1(n_m, p.gamma),
        ell2=l2,
        r_minus1=r_of_depth(n_m, p.lam),
        r_0=r0,
        r_1=None if n_next is None else r_of_depth(n_next, p.lam),
    )


def dim_formula(case: int, p: Params) -> float:
    """Hausdorff dimension of the shrinking target set in each case."""
    ll, lg, l2 = math.log(p.lam), math.log(p.gamma), math.log(2.0)
    if case == 1:
        return -l2 / (ll + lg)
    if case == 2:
        return 2.0 + ll / l2 - lg / (lg + ll)
    if case == 3:
        return (2.0 * l2 + ll) / (l2 - lg)
    raise ValueError(f"case must be 1, 2 or 3, got {case}")


def dim_formula_dynamical(case: int, p: Params) -> float:
    """Dimension of the projected cylinder-target set (cases 1 and 2)."""
    if case not in (1, 2):
        raise ValueError("cylinder targets have cases 1 and 2 only")
    return dim_formula(case, p)


def t_gamma_forms(p: Params) -> list[float]:
    """Every displayed rewriting of the case-2 value, in order."""
    ll, lg, l2 = math.log(p.lam), math.log(p.gamma), math.log(2.0)
    lgl = math.log(p.gamma * p.lam)
    q = lg / ll
    t = 2.0 + ll / l2 - lg / lgl
    return [
        t,
        (l2 * (2.0 + q) + lgl) / (l2 * (1.0 + q)),
        2.0 / (1.0 + q) + lg / lgl + lg / (l2 * (1.0 + q)) + ll / (l2 * (1.0 + q)),
        (2.0 + ll / l2) / (1.0 + q) + lg / lgl * (1.0 + ll / l2),
        (2.0 + ll / l2) / (1.0 + q) + lg / lgl * (2.0 + ll / l2) - lg / lgl,
    ]


def t_gamma_identity_check(p: Params) -> float:
    """Largest deviation among the rewritings, including the auxiliary identity."""
    forms = t_gamma_forms(p)
    dev = max(abs(f - forms[0]) for f in forms[1:])
    ll, lg = math.log(p.lam), math.log(p.gamma)
    aux = 1.0 / (1.0 + lg / ll) + lg / math.log(p.lam * p.gamma)
    return max(dev, abs(aux - 1.0))


@dataclass(frozen=True)
class Case3Constants:
    xi: float
    s: float
    eta: float
    lambda0: float
    lambda1: float


def case3_constants(lambda0: float, lambda1: float, gamma: float) -> Case3Constants:
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    lo = 1.0 / (2.0 * gamma)
    if not (lo < lambda0 <= lambda1 < LAMBDA_BAR):
        raise ValueError(
            f"need 1/(2*gamma) = {lo:.6g} < lambda0 <= lambda1 < {LAMBDA_BAR}, "
            f"got [{lambda0}, {lambda1}]")
    l2, lg = math.log(2.0), math.log(gamma)
    l0, l1 = math.log(lambda0), math.log(lambda1)
    xi = lg * math.log(2.0 * lambda0) / (l0 * l2)
    s = (2.0 * l2 + l0) / math.log(2.0 / gamma)
    eta = (l0 / l1 - 1.0) + (s + 1.0) * (lg / l1 - lg / l0)
    return Case3Constants(xi=xi, s=s, eta=eta, lambda0=lambda0, lambda1=lambda1)
