import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affine_targets.bernoulli import enumerate_D
from affine_targets.oracles import brute_mu_ball
from affine_targets.scales import dim_formula, ell1, ell2
from affine_targets.symbolic import CylinderRect, Params, SymbolWord, cylinder_box, pi_2d
from affine_targets.targets import (MeasureSpec, RectArray, Schedule, TargetSpec, box_count,
                                    build_schedule, cover_count, cylinder_rects,
                                    dim_box_estimate, dynamical_membership, energy_estimate,
                                    local_dim_probe, mu_ball, preimage_arrays, preimage_rects,
                                    render_pgm)
from affine_targets.targets.geometry import occupancy_grid
from affine_targets.targets.measures import AMB, FREE, PIN
from affine_targets.targets.probes import ball_depth, ball_profile

P1 = Params(0.6, 0.5)
P3 = Params(0.63, 0.8)


def zword(seed=0, n=400):
    return SymbolWord.random(n, np.random.default_rng(seed))


@pytest.fixture(scope="module")
def ms1():
    return MeasureSpec(1, TargetSpec(zword(0), P1), Schedule((4, 16, 64)))


@pytest.fixture(scope="module")
def ms3():
    return MeasureSpec(3, TargetSpec(zword(5), P3), build_schedule(P3, 12, 3, 4.0))


# ---------------------------------------------------------------- geometry

class TestPreimages:
    def test_first_level_side_2r(self):
        z = SymbolWord.from_str("10" * 30)
        t = TargetSpec(z, P1)
        rects = preimage_rects(t, 1, clip=False)
        assert len(rects) == 2
        for r in rects:
            # closed cube of side 2 gamma, shrunk by (lam, 1/2)
            assert r.width == pytest.approx(0.6 * 2 * 0.5)
            assert r.height == pytest.approx(0.5 * 2 * 0.5)
        cx, cy = t.center
        assert (rects[0].x_lo + rects[0].x_hi) / 2 == pytest.approx(0.6 * cx)
        assert (rects[1].y_lo + rects[1].y_hi) / 2 == pytest.approx(0.5 * cy + 0.5)

    def test_zero_is_clipped_cube(self):
        t = TargetSpec(SymbolWord.from_str("10" * 30), P1)
        (r,) = preimage_rects(t, 0)
        assert (r.x_lo, r.x_hi, r.y_lo, r.y_hi) == (0.0, 1.0, 0.0, 1.0)

    @pytest.mark.parametrize("n", [1, 5, 9])
    def test_sizes(self, n):
        t = TargetSpec(zword(1), P1)
        ra = preimage_arrays(t, n, clip=False)
        assert len(ra) == 2 ** n
        assert np.allclose(ra.x_hi - ra.x_lo, 0.6 ** n * 2 * 0.5 ** n)
        assert np.allclose(ra.y_hi - ra.y_lo, 0.5 ** n * 2 * 0.5 ** n)

    def test_inside_cylinders(self):
        t = TargetSpec(zword(2), P1)
        ra = preimage_arrays(t, 6)
        cyl = cylinder_rects(0.6, 6)
        for k in range(len(ra)):
            box = CylinderRect(cyl.x_lo[k], cyl.x_hi[k], cyl.y_lo[k], cyl.y_hi[k])
            r = CylinderRect(ra.x_lo[k], ra.x_hi[k], ra.y_lo[k], ra.y_hi[k])
            assert box.contains(r, slack=1e-12)

    def test_cylinder_rects_match_boxes(self):
        cyl = cylinder_rects(0.6, 4)
        for k in range(16):
            b = cylinder_box(SymbolWord(k, 4), 0.6)
            assert cyl.x_lo[k] == pytest.approx(b.x_lo) and cyl.y_lo[k] == b.y_lo


class TestBoxCount:
    def test_trivial(self):
        unit = RectArray.from_rects([CylinderRect(0, 1, 0, 1)])
        assert box_count(unit, 5) == 4 ** 5
        assert box_count([], 3) == 0
        cells = [CylinderRect(0, 0.5, 0, 0.5), CylinderRect(0.5, 1, 0.5, 1)]
        assert box_count(cells, 1) == 2

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 9), st.floats(0.51, 0.95), st.integers(3, 9))
    def test_refinement_bounds(self, r, lam, depth):
        rects = cylinder_rects(lam, depth)
        a, b = box_count(rects, r), box_count(rects, r + 1)
        assert a <= b <= 4 * a

    def test_guard(self):
        from affine_targets.bernoulli import WorkBudgetExceeded
        with pytest.raises(WorkBudgetExceeded):
            box_count(RectArray.from_rects([CylinderRect(0, 1, 0, 1)]), 14, guard=1000)

    def test_pgm_matches_count(self):
        rects = cylinder_rects(0.6, 12)
        data = render_pgm(rects, 8)
        assert data.startswith(b"P5\n256 256\n255\n")
        pix = np.frombuffer(data[-256 * 256:], dtype=np.uint8)
        assert int(np.count_nonzero(pix)) == box_count(rects, 8)
        grid = occupancy_grid(rects, 8)
        assert grid[-1, 0]  # the corner (0, 0) is on F, drawn bottom-left

    def test_dimension_estimates(self):
        seg = RectArray.from_rects([CylinderRect(0, 1, 0, 0)])
        assert dim_box_estimate(seg, 4, 10).slope == pytest.approx(1.0, abs=0.01)
        sq = RectArray.from_rects([CylinderRect(0, 1, 0, 1)])
        assert dim_box_estimate(sq, 4, 10).slope == pytest.approx(2.0, abs=0.01)
        with pytest.raises(ValueError):
            dim_box_estimate(sq, 4, 5)


class TestCovers:
    def test_first_return_values_are_finite(self):
        t = TargetSpec(zword(0), P1)
        for s in "ABC":
            cc = cover_count(s, t, 1)
            assert math.isfinite(cc.exponent) and cc.count >= 1 and 0 < cc.side < 1

    def test_b_closed_form(self):
        t = TargetSpec(zword(0), P1)
        cc = cover_count("B", t, 10)
        assert cc.side == pytest.approx(0.25 ** 10)
        assert cc.count == pytest.approx(2 ** 10 * math.ceil(1.2 ** 10))

    def test_exponent_limits(self):
        t1 = TargetSpec(zword(0), P1)
        a = cover_count("A", t1, 4000).exponent
        assert a == pytest.approx(-math.log(2) / math.log(0.3), abs=2e-3)
        t3 = TargetSpec(zword(0), Params(0.65, 0.8))
        b = cover_count("B", t3, 4000).exponent
        assert b == pytest.approx(dim_formula(3, Params(0.65, 0.8)), abs=2e-3)

    def test_c_uses_measured_count(self):
        from affine_targets.bernoulli import count_Nk
        p = Params(0.7, 0.9)
        t = TargetSpec(SymbolWord.from_str("0" * 100), p)
        cc = cover_count("C", t, 20)
        assert not cc.extrapolated
        assert cc.n_count == pytest.approx(math.log(count_Nk(0.0, 1.0, ell2(20, p), 0.7).count))

    def test_unknown(self):
        with pytest.raises(ValueError):
            cover_count("D", TargetSpec(zword(0), P1), 3)


# ---------------------------------------------------------------- measures

def exact_children_check(ms, depth):
    """Exhaustive child-sum check over the support, in exact arithmetic."""
    level = [(SymbolWord(0, 0), Fraction(1))]
    assert ms.weight(SymbolWord(0, 0), exact=True) == 1
    for _ in range(depth):
        nxt = []
        for w, wt in level:
            kids = [(w.append(a), ms.weight(w.append(a), exact=True)) for a in (0, 1)]
            assert sum(k[1] for k in kids) == wt
            nxt += [k for k in kids if k[1] > 0]
        level = nxt
    return len(level)


class TestSchedule:
    def test_rule(self):
        s = build_schedule(P1, 4, 4)
        assert s.n[0] == 4
        for a, b in zip(s.n, s.n[1:]):
            assert b == max(math.ceil(4 * a), a + ell2(a, P1) + 1)
        s.check(P1)

    def test_rejects(self):
        with pytest.raises(ValueError):
            Schedule((4, 3))
        with pytest.raises(ValueError):
            Schedule((4, 6)).check(P1)
        with pytest.raises(ValueError):
            build_schedule(P1, 4, 3, c=2.0)
        with pytest.raises(ValueError):
            build_schedule(P1, 4, 6)


class TestMeasures:
    def test_layout(self, ms1, ms3):
        assert ms1.kind[:4].tolist() == [FREE] * 4
        assert ms1.kind[4:4 + ell2(4, P1)].tolist() == [PIN] * ell2(4, P1)
        l1, l2 = ell1(12, 0.8), ell2(12, P3)
        assert ms3.kind[12:12 + l1].tolist() == [PIN] * l1
        assert ms3.kind[12 + l1:12 + l2].tolist() == [AMB] * (l2 - l1)

    def test_free_region(self, ms1):
        for w in ("", "0", "1011"):
            assert ms1.weight(SymbolWord.from_str(w)) == 2.0 ** -len(w)

    def test_pinned_violation(self, ms1):
        z = ms1.target.z
        w = SymbolWord.from_str("0000") + z.prefix(3)
        assert ms1.weight(w) == 2.0 ** -4
        bad = SymbolWord.from_str("0000") + z.prefix(2).append(1 - z[2])
        assert ms1.weight(bad) == 0.0

    def test_case3_split(self, ms3):
        w = ms3.sample_path(18, seed=1)
        win = ms3.windows[0]
        assert ms3.weight(w, exact=True) == ms3.weight(w.prefix(12), exact=True) / ms3.d_count(0)
        assert win.rho == pytest.approx(0.63 ** win.length)

    def test_case3_members(self, ms3):
        w = ms3.windows[0]
        ref = enumerate_D(w.center, w.rho, w.length, 0.63)
        assert np.array_equal(ms3.members(0), ref)

    def test_depth_check(self, ms1):
        with pytest.raises(ValueError):
            ms1.weight(SymbolWord(0, ms1.coverage + 1))

    @pytest.mark.parametrize("case", [1, 2])
    def test_conservation_cases_1_2(self, case):
        ms = MeasureSpec(case, TargetSpec(zword(3), P1), Schedule((4, 16, 64)))
        assert exact_children_check(ms, 40) > 0

    def test_conservation_case_3(self, ms3):
        w = ms3.windows[0]
        assert exact_children_check(ms3, w.start + w.length + 1) > 0

    def test_sampling(self, ms1, ms3):
        rng = np.random.default_rng(4)
        free8 = MeasureSpec(1, TargetSpec(zword(0), P1), Schedule((8, 40)))
        codes = free8.sample_digits(8, 40_000, rng)
        idx = codes @ (1 << np.arange(7, -1, -1))
        freq = np.bincount(idx, minlength=256)
        expected = 40_000 / 256
        chi2 = float(((freq - expected) ** 2 / expected).sum())
        assert chi2 < 360  # 255 degrees of freedom
        deep = ms1.sample_digits(40, 500, rng)
        z = ms1.target.z.digits()
        assert np.all(deep[:, 4:4 + ell2(4, P1)] == z[:ell2(4, P1)])
        win = ms3.windows[1]
        c3 = ms3.sample_digits(win.start + win.length, 300, rng)
        seg = c3[:, win.start:win.start + win.length] @ (1 << np.arange(win.length - 1, -1, -1))
        assert set(seg.tolist()) <= set(ms3.members(1).tolist())
        for row in c3[:20]:
            assert ms3.weight(SymbolWord.from_digits(row)) > 0


# ---------------------------------------------------------------- probes

class TestMuBall:
    def test_whole_space(self, ms1):
        assert mu_ball(ms1, ms1.sample_path(40), 2.0).upper == 1.0

    def test_against_enumeration(self, ms1):
        x = ms1.sample_path(60, seed=2)
        for R in (2.0 ** -20, 2.0 ** -10, 0.01):
            mb = mu_ball(ms1, x, R)
            up, lo = brute_mu_ball(ms1, x, R, mb.depth)
            assert mb.upper == pytest.approx(up, rel=1e-12, abs=1e-15)
            assert mb.lower == pytest.approx(lo, rel=1e-12, abs=1e-15)
        assert ball_depth(2.0 ** -20, 0.6) == 32

    def test_monotone(self, ms1):
        x = ms1.sample_path(80, seed=3)
        prof = ball_profile(ms1, x, range(2, 30))
        ups = [b.upper for b in prof]  # radii decrease along the profile
        assert all(b <= a + 1e-15 for a, b in zip(ups, ups[1:]))
        assert all(0 <= u <= 1 for u in ups)

    def test_single_cylinder(self, ms1):
        # a ball far below the cylinder scale holds at most the cylinder mass
        x = ms1.sample_path(40, seed=5)
        mb = mu_ball(ms1, x, 1e-9)
        assert mb.upper <= ms1.weight(x.prefix(20)) + 1e-15


class TestProbes:
    def test_case1_probe_shape(self, ms1):
        pr = local_dim_probe(ms1, ms1.sample_path(60, seed=1), 20, 30)
        assert len(pr.ratios) == 11 and pr.summary == min(pr.ratios)
        assert pr.formula == pytest.approx(dim_formula(1, P1))
        js = pr.to_json()
        assert {"case", "lambda", "gamma", "schedule", "r", "log_mu", "log_R", "slope"} <= set(js)

    def test_case3_probe(self, ms3):
        x = ms3.sample_path(160, seed=2)
        pr = local_dim_probe(ms3, x, 10, 80)
        assert abs(pr.summary - dim_formula(3, P3)) < 0.2

    def test_point_mass_like_measure(self):
        # every symbol after the first return is pinned, so the mass of small
        # balls stays at 2^-n1 and the ratio decays like n1 / r
        ms = MeasureSpec(1, TargetSpec(zword(9), Params(0.6, 1e-4)), Schedule((2,)))
        x = ms.sample_path(ms.coverage, seed=0)
        pr = local_dim_probe(ms, x, 10, 24)
        assert pr.summary == pytest.approx(2 / 24, abs=0.02)


class TestEnergy:
    def test_zero_exponent(self, ms1):
        er = energy_estimate(ms1, 0.0, 1000, 8)
        assert er.means == (1.0, 1.0, 1.0)
        er = energy_estimate(ms1, 0.0, 1000, 8, method="pairs")
        assert er.means == (1.0, 1.0, 1.0)

    def test_small_exponent_bounded(self, ms1):
        er = energy_estimate(ms1, 0.1, 2000, 6)
        assert er.trend == "bounded"
        assert max(er.means) < 2.0

    def test_rejects(self, ms1):
        with pytest.raises(ValueError):
            energy_estimate(ms1, 0.5, 10, 8)
        with pytest.raises(ValueError):
            energy_estimate(ms1, -1.0, 1000, 8)
        with pytest.raises(ValueError):
            energy_estimate(ms1, 0.5, 1000, 8, method="other")


class TestDynamical:
    def test_membership(self):
        z = SymbolWord.from_str("1011001110")
        n = 6
        from affine_targets.scales import ell_n_dynamical
        ell = ell_n_dynamical(n, P1)
        assert ell == math.ceil(6 * math.log(0.6) / math.log(0.5)) == 5
        i = SymbolWord.from_str("010101") + z.prefix(ell)
        t = TargetSpec(z, P1)
        assert dynamical_membership(i, t, n)
        flipped = SymbolWord(i.bits ^ 1, len(i))
        assert not dynamical_membership(flipped, t, n)
        assert dynamical_membership(i, t, 0)
        with pytest.raises(ValueError):
            dynamical_membership(i.prefix(n + ell - 1), t, n)
