import math

import numpy as np
import pytest

from quasidiff import kernels
from quasidiff._backend import set_backend
from quasidiff.lattice import (
    DegenerateLatticeError,
    LatticeBasis,
    Region,
    UnboundedRegionError,
    covolume,
    dual_lattice,
    enumerate_points,
)
from quasidiff.presets import sqrt2_chain_scheme

SQRT2 = math.sqrt(2.0)


def sqrt2_basis():
    return sqrt2_chain_scheme().gamma


class TestCovolume:
    def test_identity(self):
        assert covolume(LatticeBasis(np.eye(2))) == pytest.approx(1.0, abs=0)

    def test_sqrt2_scheme(self):
        # |1*(-sqrt2) - 1*sqrt2| = 2 sqrt2
        assert covolume(sqrt2_basis()) == pytest.approx(2 * SQRT2, rel=1e-14)

    def test_diagonal(self):
        assert covolume(LatticeBasis(np.diag([2.0, 0.5]))) == pytest.approx(1.0, abs=1e-15)

    def test_singular_rejected(self):
        with pytest.raises(DegenerateLatticeError):
            LatticeBasis(np.array([[1.0, 2.0], [2.0, 4.0]]))


class TestDual:
    def test_identity_self_dual(self):
        dual = dual_lattice(LatticeBasis(np.eye(3)))
        assert np.allclose(dual.columns, np.eye(3))

    def test_diagonal(self):
        dual = dual_lattice(LatticeBasis(np.diag([2.0, 0.5])))
        assert np.allclose(dual.columns, np.diag([0.5, 2.0]))

    def test_sqrt2_dual_pairing(self):
        basis = sqrt2_basis()
        dual = dual_lattice(basis)
        expected = np.array([[0.5, SQRT2 / 4], [0.5, -SQRT2 / 4]])
        assert np.allclose(dual.columns, expected, atol=1e-15)
        gram = dual.columns.T @ basis.columns
        assert np.allclose(gram, np.eye(2), atol=1e-14)

    def test_exact_dual_is_exact(self):
        dual = dual_lattice(sqrt2_basis())
        assert dual.exact is not None
        approx = np.array([[float(x) for x in row] for row in dual.exact])
        assert np.max(np.abs(approx - dual.columns)) <= 1e-15

    def test_double_dual_random(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            d = rng.integers(1, 5)
            while True:
                cols = rng.normal(size=(d, d))
                if abs(np.linalg.det(cols)) > 0.3:  # well-conditioned only
                    break
            basis = LatticeBasis(cols)
            double = dual_lattice(dual_lattice(basis))
            assert np.max(np.abs(double.columns - basis.columns)) <= 1e-12
            assert covolume(basis) * covolume(dual_lattice(basis)) == pytest.approx(
                1.0, rel=1e-10
            )


class TestEnumerate:
    def test_z2_box(self):
        ints, pts = enumerate_points(LatticeBasis(np.eye(2)), Region.box([[-1.5, 1.5]] * 2))
        assert ints.shape == (9, 2)
        assert set(map(tuple, ints)) == {(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)}

    def test_empty_box(self):
        ints, pts = enumerate_points(LatticeBasis(np.eye(2)), Region.box([[1.0, 0.5], [0, 1]]))
        assert ints.shape == (0, 2)

    def test_sqrt2_vs_bruteforce(self):
        basis = sqrt2_basis()
        region = Region.box([[-3, 3], [-3, 3]])
        ints, pts = enumerate_points(basis, region)
        brute = set()
        for a in range(-10, 11):
            for b in range(-10, 11):
                x, y = a + b * SQRT2, a - b * SQRT2
                if -3 <= x <= 3 and -3 <= y <= 3:
                    brute.add((a, b))
        assert set(map(tuple, ints)) == brute

    def test_negation_symmetry(self):
        basis = sqrt2_basis()
        ints, _ = enumerate_points(basis, Region.box([[-4, 4], [-4, 4]]))
        got = set(map(tuple, ints))
        assert got == {(-a, -b) for (a, b) in got}

    def test_membership_of_emitted_points(self):
        basis = LatticeBasis(np.array([[1.0, 0.3], [0.0, 1.1]]))
        region = Region.ball([0.2, -0.1], 2.5)
        ints, pts = enumerate_points(basis, region)
        assert np.all(region.membership(pts))
        # every integer vector of the search box not emitted fails membership
        bb = region.bounding_box()
        allints = kernels.enumerate_box(basis.columns, bb[:, 0] - 1e-9, bb[:, 1] + 1e-9)
        emitted = set(map(tuple, ints))
        for n in allints:
            if tuple(n) not in emitted:
                assert not region.membership(basis.columns @ n)[0]

    def test_unbounded_region_rejected(self):
        with pytest.raises(UnboundedRegionError):
            enumerate_points(LatticeBasis(np.eye(1)), Region.box([[0, np.inf]]))

    def test_lex_order(self):
        ints, _ = enumerate_points(LatticeBasis(np.eye(2)), Region.box([[-2.2, 2.2]] * 2))
        as_tuples = list(map(tuple, ints))
        assert as_tuples == sorted(as_tuples)

    def test_backends_agree(self):
        basis = sqrt2_basis()
        region = Region.box([[-30, 30], [-2, 2]])
        prev = set_backend("numba")
        try:
            a, _ = enumerate_points(basis, region)
            set_backend("numpy")
            b, _ = enumerate_points(basis, region)
        finally:
            set_backend(prev)
        assert np.array_equal(a, b)


class TestRegion:
    def test_ball_volume(self):
        assert Region.ball([0, 0], 2.0).volume() == pytest.approx(math.pi * 4)

    def test_half_open_membership(self):
        r = Region.box([[0, 1]], half_open=True)
        assert r.membership(np.array([[0.0]]))[0]
        assert not r.membership(np.array([[1.0]]))[0]

    def test_expand_contains(self):
        r = Region.box([[0, 1], [0, 1]])
        assert r.expand(0.5).contains_region(r)
        assert not r.contains_region(r.expand(0.5))
