import math

import numpy as np
import pytest

from quasidiff.lattice import Region
from quasidiff.presets import integer_scheme, sqrt2_chain_scheme, sqrt2_product_scheme
from quasidiff.scheme import (
    SchemeError,
    Window,
    cut_and_project,
    density,
    flc_count_bound,
    flc_report,
)

SQRT2 = math.sqrt(2.0)


class TestWindow:
    def test_box_volume_membership(self):
        w = Window.interval(-1, 1)
        assert w.volume() == pytest.approx(2.0)
        assert w.membership(np.array([[-1.0]]))[0]  # lower-closed
        assert not w.membership(np.array([[1.0]]))[0]  # upper-open

    def test_ball(self):
        w = Window.ball([0, 0], 1.5)
        assert w.volume() == pytest.approx(math.pi * 2.25)
        assert w.membership(np.array([[1.5, 0.0]]))[0]

    def test_difference(self):
        w = Window.interval(-2, 2).difference(Window.interval(-1, 1))
        assert w.volume() == pytest.approx(2.0)
        assert not w.membership(np.array([[0.0]]))[0]
        assert w.membership(np.array([[1.5]]))[0]

    def test_box_ft_vs_quadrature(self):
        w = Window.box([[-1, 1], [0, 2]])
        xi = np.array([[0.3, -0.7]])
        val = w.ft(xi)[0]
        xs = np.linspace(-1, 1, 2001)
        ys = np.linspace(0, 2, 2001)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        integrand = np.exp(-2j * np.pi * (0.3 * X - 0.7 * Y))
        num = np.trapezoid(np.trapezoid(integrand, ys, axis=1), xs)
        assert val == pytest.approx(num, abs=1e-5)

    def test_disk_ft_vs_quadrature(self):
        w = Window.ball([0, 0], 1.0)
        xi = np.array([[0.4, 0.2]])
        val = w.ft(xi)[0]
        n = 1200
        xs = np.linspace(-1, 1, n)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        mask = X**2 + Y**2 <= 1
        integrand = np.exp(-2j * np.pi * (0.4 * X + 0.2 * Y)) * mask
        num = np.trapezoid(np.trapezoid(integrand, xs, axis=1), xs)
        assert val == pytest.approx(num, abs=2e-3)
        assert w.ft(np.array([[0.0, 0.0]]))[0] == pytest.approx(math.pi, rel=1e-12)


class TestCutAndProject:
    def test_integer_scheme_selects_b_zero(self):
        scheme = integer_scheme()
        ms = cut_and_project(scheme, Window.interval(-0.4, 0.4), Region.interval(0, 5))
        assert sorted(ms.points[:, 0].tolist()) == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]

    def test_sqrt2_chain_vs_bruteforce(self):
        scheme = sqrt2_chain_scheme()
        ms = cut_and_project(scheme, Window.interval(-1, 1), Region.interval(0, 10))
        brute = []
        for a in range(-20, 21):
            for b in range(-20, 21):
                star = a - b * SQRT2
                phys = a + b * SQRT2
                if -1 <= star < 1 and 0 <= phys <= 10:
                    brute.append((a, b))
        assert set(map(tuple, ms.ints)) == set(brute)

    def test_empty_window(self):
        scheme = integer_scheme()
        ms = cut_and_project(scheme, Window.empty(1), Region.interval(0, 5))
        assert ms.count == 0

    def test_window_monotone(self):
        scheme = sqrt2_chain_scheme()
        small = cut_and_project(scheme, Window.interval(-0.5, 0.5), Region.interval(-30, 30))
        big = cut_and_project(scheme, Window.interval(-1, 1), Region.interval(-30, 30))
        small_set = set(map(tuple, small.ints))
        big_set = set(map(tuple, big.ints))
        assert small_set <= big_set

    def test_count_bound(self):
        scheme = sqrt2_chain_scheme()
        window = Window.interval(-1, 1)
        region = Region.interval(-50, 50)
        ms = cut_and_project(scheme, window, region)
        assert ms.count <= flc_count_bound(scheme, window, region)

    def test_translation_covariance(self):
        # translating by the lattice point gamma(1,0) = (1, 1) shifts the
        # region by the physical part and the window by the internal part
        scheme = sqrt2_chain_scheme()
        ms0 = cut_and_project(scheme, Window.interval(-1, 1), Region.interval(-20, 20))
        ms1 = cut_and_project(scheme, Window.interval(0, 2), Region.interval(-19, 21))
        shifted = ms0.ints + np.array([1, 0])
        assert set(map(tuple, shifted)) == set(map(tuple, ms1.ints))
        assert np.allclose(np.sort(ms1.points[:, 0]), np.sort(ms0.points[:, 0] + 1.0))

    def test_dimension_mismatch(self):
        with pytest.raises(SchemeError):
            cut_and_project(integer_scheme(), Window.box([[0, 1], [0, 1]]), Region.interval(0, 1))


class TestDensity:
    def test_integer_lattice(self):
        ms = cut_and_project(
            integer_scheme(), Window.interval(-0.5, 0.5), Region.interval(0, 10_000)
        )
        assert density(ms) == pytest.approx(1.0, abs=1e-3)

    def test_sqrt2_chain_density(self):
        scheme = sqrt2_chain_scheme()
        ms = cut_and_project(
            scheme, Window.interval(-1, 1), Region.interval(-10_000, 10_000)
        )
        oracle = 2.0 / (2 * SQRT2)  # vol(W) / covol
        assert density(ms) == pytest.approx(oracle, abs=5e-4)
        assert oracle == pytest.approx(1 / SQRT2, rel=1e-15)

    def test_density_converges(self):
        scheme = sqrt2_chain_scheme()
        window = Window.interval(-1, 1)
        vals = []
        for t in (2_000, 8_000):
            ms = cut_and_project(scheme, window, Region.interval(-t, t))
            vals.append(density(ms) * scheme.covolume())
        assert abs(vals[0] - window.volume()) <= 1e-2
        assert abs(vals[1] - window.volume()) <= 1e-2

    def test_empty(self):
        ms = cut_and_project(integer_scheme(), Window.empty(1), Region.interval(0, 5))
        assert density(ms) == 0.0


class TestFLC:
    def test_integer_lattice(self):
        ms = cut_and_project(
            integer_scheme(), Window.interval(-0.4, 0.4), Region.interval(-50, 50)
        )
        dmin, occ = flc_report(ms, 1.5)
        assert dmin == pytest.approx(1.0)
        assert occ == 3

    def test_scaled_lattice(self):
        ms = cut_and_project(
            integer_scheme(scale=2.0), Window.interval(-0.4, 0.4), Region.interval(-50, 50)
        )
        dmin, occ = flc_report(ms, 1.5)
        assert dmin == pytest.approx(2.0)
        assert occ == 1

    def test_sqrt2_min_gap_vs_bruteforce(self):
        scheme = sqrt2_chain_scheme()
        ms = cut_and_project(scheme, Window.interval(-1, 1), Region.interval(-300, 300))
        dmin, _ = flc_report(ms, 2.0)
        pts = np.sort(ms.points[:, 0])
        brute = np.min(np.diff(pts))
        assert dmin == pytest.approx(brute, rel=1e-12)
        assert dmin > 0


class TestSchemeChecks:
    def test_product_scheme_valid(self):
        scheme = sqrt2_product_scheme()
        assert scheme.n_phys == 2 and scheme.m_int == 2
        assert scheme.covolume() == pytest.approx((2 * SQRT2) ** 2, rel=1e-13)

    def test_injectivity_violation_warns(self):
        from quasidiff.lattice import LatticeBasis
        from quasidiff.scheme import Scheme

        # second generator (0, 1) has vanishing physical part
        with pytest.warns(UserWarning, match="not injective"):
            Scheme(1, 1, LatticeBasis(np.array([[1.0, 0.0], [0.5, 1.0]])), name="bad")

    def test_duplicate_physical_points_rejected(self):
        # Z x Z with a window wide enough to accept b in {-1, 0, 1}
        scheme = integer_scheme()
        with pytest.raises(SchemeError, match="duplicate"):
            cut_and_project(scheme, Window.interval(-1.5, 1.5), Region.interval(0, 5))
