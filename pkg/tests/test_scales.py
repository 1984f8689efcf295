import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from affine_targets.scales import (case3_constants, dim_formula, ell1, ell2, ell_n_dynamical,
                                   k_of_r, pow_le, r_of_depth, t_gamma_forms,
                                   t_gamma_identity_check, thresholds)
from affine_targets.symbolic import Params


def scan_smallest(base, target):
    """Smallest e >= 0 with base**e <= target, by a plain loop."""
    e = 0
    while base ** e > target * (1 + 1e-12):
        e += 1
    return e


lams = st.floats(0.51, 0.99)
gams = st.floats(0.05, 0.95)


class TestEll:
    def test_ell1_examples(self):
        assert [ell1(n, 0.5) for n in (1, 7, 30)] == [1, 7, 30]
        assert ell1(10, 0.8) == 4

    def test_ell2_examples(self):
        assert ell2(9, Params(0.7, 0.7)) == 9
        assert ell2(2, Params(0.6, 0.5)) == 3
        assert ell2(10, Params(0.65, 0.8)) == scan_smallest(0.65, 0.8 ** 10) == 6

    @given(st.integers(1, 200), lams, gams)
    def test_defining_inequalities(self, n, lam, gam):
        l1 = ell1(n, gam)
        assert pow_le(0.5, l1, gam, n) and not pow_le(0.5, l1 - 1, gam, n)
        l2 = ell2(n, Params(lam, gam))
        assert pow_le(lam, l2, gam, n) and not pow_le(lam, l2 - 1, gam, n)

    @given(st.integers(1, 150), lams, gams)
    def test_monotone(self, n, lam, gam):
        p = Params(lam, gam)
        assert ell1(n + 1, gam) >= ell1(n, gam)
        assert ell2(n + 1, p) >= ell2(n, p)
        assert k_of_r(n + 1, lam) >= k_of_r(n, lam)

    def test_limits(self):
        n = 100_000
        p = Params(0.63, 0.8)
        assert abs(ell1(n, p.gamma) / n - math.log(p.gamma) / -math.log(2)) < 1e-4
        assert abs(ell2(n, p) / n - math.log(p.gamma) / math.log(p.lam)) < 1e-4
        assert abs(k_of_r(n, p.lam) / n - math.log(2) / -math.log(p.lam)) < 1e-4


class TestK:
    def test_examples(self):
        assert k_of_r(5, 2 ** -0.5) == 10
        assert k_of_r(10, 0.6) == 14
        assert k_of_r(1, 0.51) == 2

    @given(st.integers(1, 300), lams)
    def test_against_scan(self, r, lam):
        k = k_of_r(r, lam)
        assert pow_le(lam, k, 0.5, r) and not pow_le(lam, k - 1, 0.5, r)


class TestThresholds:
    def test_exact_power(self):
        for n in range(1, 30):
            assert thresholds(n, Params(2 ** -0.5, 0.5)).r_minus1 == n // 2

    def test_case1_table(self):
        p = Params(0.6, 0.5)
        t = thresholds(20, p)
        assert (t.ell1, t.ell2) == (20, 28)
        # r_{-1}: largest r with 2^-r >= 0.6^20; r_0: smallest r with k(r) >= 48
        r = 0
        while 0.5 ** (r + 1) >= 0.6 ** 20:
            r += 1
        assert t.r_minus1 == r == 14
        r0 = 1
        while k_of_r(r0, 0.6) < 20 + 28:
            r0 += 1
        assert t.r_0 == r0 == 35
        assert t.r_0 > t.n_m

    def test_case23_ordering_deep(self):
        # only asymptotic: needs n_m large when 2 lam gamma is close to 1
        p = Params(0.7, 0.9)
        for n in (50, 200, 1000):
            t = thresholds(n, p)
            assert t.r_minus1 < t.r_0 < t.n_m

    def test_r1(self):
        t = thresholds(10, Params(0.6, 0.5), n_next=50)
        assert t.r_1 == r_of_depth(50, 0.6)


class TestFormulas:
    def test_values(self):
        p = Params(0.6, 0.5)
        assert dim_formula(1, p) == pytest.approx(-math.log(2) / math.log(0.3))
        assert dim_formula(1, p) == pytest.approx(0.575717, abs=1e-6)
        assert dim_formula(3, Params(0.65, 0.8)) == pytest.approx(1.0428, abs=1e-4)
        with pytest.raises(ValueError):
            dim_formula(4, p)

    @given(st.floats(0.51, 0.99))
    def test_boundary_continuity(self, gam_inv):
        gam = 1 / (2 * gam_inv)
        p = Params(gam_inv, gam)
        for c in (1, 2, 3):
            assert abs(dim_formula(c, p) - 1.0) < 1e-12

    def test_identity_examples(self):
        assert t_gamma_identity_check(Params(0.7, 0.9)) < 1e-12
        assert t_gamma_identity_check(Params(0.51, 0.99)) < 1e-11
        forms = t_gamma_forms(Params(0.7, 0.9))
        assert len(forms) == 5
        assert forms[0] == pytest.approx(dim_formula(2, Params(0.7, 0.9)))

    def test_dynamical_ell(self):
        assert ell_n_dynamical(10, Params(0.6, 0.5)) == 8
        assert ell_n_dynamical(10, Params(0.9, 0.5)) == 2
        assert ell_n_dynamical(7, Params(0.7, 0.7)) == 7


class TestCase3:
    def test_eta_zero_on_point_interval(self):
        k = case3_constants(0.63, 0.63, 0.8)
        assert k.eta == 0.0

    def test_values(self):
        k = case3_constants(0.63, 0.64, 0.8)
        xi = math.log(0.8) * math.log(1.26) / (math.log(0.63) * math.log(2))
        assert k.xi == pytest.approx(xi) and k.xi > 0
        assert k.s == pytest.approx((2 * math.log(2) + math.log(0.63)) / math.log(2.5))
        assert 0 < k.s < 2 and k.eta >= 0

    def test_eta_shrinks(self):
        etas = [case3_constants(0.63, 0.63 + d, 0.8).eta for d in (0.03, 0.01, 0.001)]
        assert etas[0] > etas[1] > etas[2] > 0

    def test_rejects(self):
        with pytest.raises(ValueError):
            case3_constants(0.6, 0.64, 0.8)   # below 1/(2 gamma)
        with pytest.raises(ValueError):
            case3_constants(0.63, 0.67, 0.8)  # beyond the transversality bound
