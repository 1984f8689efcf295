import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affine_targets.symbolic import (CylinderRect, Params, Regime, SymbolWord, cube,
                                     cylinder_box, expand_orbit, lift_point, pi_2d, pi_I,
                                     separation_constant, separation_exponent, sup_distance,
                                     wedge)

words = st.text(alphabet="01", min_size=0, max_size=120).map(SymbolWord.from_str)


class TestSymbolWord:
    def test_roundtrip_and_indexing(self):
        w = SymbolWord.from_str("0110")
        assert str(w) == "0110" and len(w) == 4
        assert [w[k] for k in range(4)] == [0, 1, 1, 0]
        assert w.digits().tolist() == [0, 1, 1, 0]

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            SymbolWord.from_str("012")
        with pytest.raises(ValueError):
            SymbolWord(0, 5000)
        with pytest.raises(ValueError):
            SymbolWord(8, 3)

    @given(words, words)
    def test_concatenation_is_additive(self, a, b):
        c = a + b
        assert len(c) == len(a) + len(b)
        assert c.prefix(len(a)) == a and c.shift(len(a)) == b

    @given(words, st.integers(0, 120))
    def test_shift_reduces_length(self, w, n):
        if n > len(w):
            with pytest.raises(ValueError):
                w.shift(n)
        else:
            assert len(w.shift(n)) == len(w) - n

    def test_repeat_and_slice(self):
        w = SymbolWord.repeat("10", 7)
        assert str(w) == "1010101"
        assert str(w.slice(2, 5)) == "101"


class TestWedge:
    def test_examples(self):
        assert wedge(SymbolWord.from_str("0110"), SymbolWord.from_str("0111")) == 3
        w = SymbolWord.from_str("110100")
        assert wedge(w, w) == 6
        assert wedge(SymbolWord.from_str("1"), SymbolWord.from_str("0")) == 0

    @given(words, words)
    def test_matches_scan(self, a, b):
        n = 0
        while n < min(len(a), len(b)) and a[n] == b[n]:
            n += 1
        assert wedge(a, b) == n


class TestParams:
    def test_ranges(self):
        for lam, gam in [(0.5, 0.5), (1.0, 0.5), (0.6, 0.0), (0.6, 1.0)]:
            with pytest.raises(ValueError):
                Params(lam, gam)

    def test_regimes(self):
        assert Params(0.6, 0.5).regime is Regime.CASE1
        assert Params(0.625, 0.8).regime is Regime.BOUNDARY
        assert Params(0.65, 0.8).regime is Regime.CASE23


class TestProjections:
    def test_fixed_points(self):
        ones = SymbolWord.repeat("1", 60)
        v = pi_I(ones, 0.6)
        assert abs(v.value - 1.0) <= v.error + 1e-15
        assert pi_I(SymbolWord.repeat("0", 60), 0.7).value == 0.0
        v = pi_I(SymbolWord.from_str("1" + "0" * 20), 0.6)
        assert abs(v.value - 0.4) < 1e-15 and v.error == pytest.approx(0.6 ** 21)

    def test_alternating_point(self):
        x, y = pi_2d(SymbolWord.repeat("10", 60), 0.6)
        assert abs(x - 0.625) < 1e-9 and abs(y - 2 / 3) < 1e-9

    @given(words, st.floats(0.51, 0.99))
    def test_truncation_consistency(self, w, lam):
        for n in range(0, len(w) + 1, 7):
            assert abs(pi_I(w.prefix(n), lam).value - pi_I(w, lam).value) <= lam ** n + 1e-12

    @given(words, st.floats(0.51, 0.99))
    def test_point_in_every_prefix_box(self, w, lam):
        x, y = pi_2d(w, lam)
        for n in range(1, len(w) + 1, 5):
            assert cylinder_box(w.prefix(n), lam).contains_point(x, y, slack=1e-12)


class TestCylinders:
    def test_first_level(self):
        assert cylinder_box(SymbolWord.from_str("0"), 0.6) == CylinderRect(0.0, 0.6, 0.0, 0.5)
        b = cylinder_box(SymbolWord.from_str("1"), 0.6)
        assert b.x_lo == pytest.approx(0.4) and b.x_hi == 1.0 and b.y_lo == 0.5
        b = cylinder_box(SymbolWord.from_str("01"), 0.6)
        assert (b.x_lo, b.x_hi, b.y_lo, b.y_hi) == pytest.approx((0.24, 0.6, 0.25, 0.5))

    @given(st.text(alphabet="01", min_size=1, max_size=60).map(SymbolWord.from_str),
           st.floats(0.51, 0.99))
    def test_nesting_and_size(self, w, lam):
        box = cylinder_box(w, lam)
        n = len(w)
        if lam ** n > 1e-300:
            assert box.width == pytest.approx(lam ** n, rel=1e-9)
        assert box.height == pytest.approx(2.0 ** -n, rel=1e-9)
        for a in (0, 1):
            assert box.contains(cylinder_box(w.append(a), lam), slack=1e-12)

    def test_cube_side(self):
        q = cube((0.5, 0.5), 0.25)
        assert q.width == 0.5 and q.height == 0.5


class TestOrbit:
    def test_shift(self):
        w = SymbolWord.repeat("01", 40)
        assert expand_orbit(w, 1, 0.6) == pi_2d(w.shift(1), 0.6)
        assert expand_orbit(w, 0, 0.6) == pi_2d(w, 0.6)
        with pytest.raises(ValueError):
            expand_orbit(w, 41, 0.6)

    def test_lift_prefers_smallest_coding(self):
        assert str(lift_point(0.5, 4)) == "0111"
        assert str(lift_point(0.75, 3)) == "101"


class TestSeparation:
    def test_lam_08(self):
        assert separation_exponent(0.8) == 6
        c1 = 0.8 ** 2 - 0.8 ** 7 - (0.2 * 0.8 + 0.8 ** 7)
        assert c1 == pytest.approx(0.0606, abs=1e-4)
        assert separation_constant(0.8) == 2.0 ** -6

    def test_scan_oracle(self):
        for lam in (0.51, 0.6, 0.9):
            n = 1
            while not (1 - lam) * lam + lam ** (n + 1) < lam ** 2 - lam ** (n + 1):
                n += 1
            c1 = lam ** 2 - lam ** (n + 1) - ((1 - lam) * lam + lam ** (n + 1))
            assert separation_constant(lam) == min(2.0 ** -n, c1) > 0

    def test_rejects_half(self):
        with pytest.raises(ValueError):
            separation_constant(0.5)

    @pytest.mark.parametrize("lam", [0.55, 0.6, 0.7, 0.8])
    def test_lower_bound_on_random_pairs(self, lam):
        rng = np.random.default_rng(7)
        C = separation_constant(lam)
        count, depth = 100_000, 200
        a = rng.integers(0, 2, size=(count, depth), dtype=np.int8)
        b = a.copy()
        # force a common prefix of random length, then independent tails
        cut = rng.integers(0, 40, size=count)
        tail = rng.integers(0, 2, size=(count, depth), dtype=np.int8)
        mask = np.arange(depth)[None, :] >= cut[:, None]
        b[mask] = tail[mask]
        diff = (a != b)
        wedge_len = np.where(diff.any(axis=1), diff.argmax(axis=1), depth)
        d = (a - b).astype(float)
        dx = np.abs(d @ ((1 - lam) * lam ** np.arange(depth)))
        dy = np.abs(d @ (0.5 ** np.arange(1, depth + 1)))
        dist = np.maximum(dx, dy)
        keep = wedge_len < 60  # deeper wedges fall below binary64 resolution in y
        assert np.all(dist[keep] >= C * 2.0 ** -wedge_len[keep] * (1 - 1e-9))

    def test_sup_distance(self):
        assert sup_distance((0, 0), (0.3, -0.5)) == 0.5
