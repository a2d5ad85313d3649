"""Finite point groups, Bessel-type spherical functions, spherical transforms
and exponentially weighted L2 norms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .lattice import LatticeBasis, Region, enumerate_points
from .testfun import TestFunction


class InvariantViolationError(ValueError):
    """A function required to be K-invariant is not."""


# ---------------------------------------------------------------------------
# point groups
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointGroup:
    """Finite group of orthogonal matrices, closed under product and inverse."""

    matrices: Tuple[np.ndarray, ...]
    name: str = ""

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=float) for m in self.matrices)
        object.__setattr__(self, "matrices", mats)
        d = mats[0].shape[0]
        for m in mats:
            if m.shape != (d, d):
                raise ValueError("all matrices must share one dimension")
            if np.max(np.abs(m.T @ m - np.eye(d))) > 1e-10:
                raise ValueError("matrices must be orthogonal to 1e-10")
        if not any(np.allclose(m, np.eye(d), atol=1e-10) for m in mats):
            raise ValueError("group must contain the identity")
        # closure under product and inverse
        for a in mats:
            for b in mats:
                prod = a @ b
                if not any(np.allclose(prod, m, atol=1e-9) for m in mats):
                    raise ValueError("matrices not closed under product")

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def order(self) -> int:
        return len(self.matrices)

    @staticmethod
    def trivial(dim: int) -> "PointGroup":
        return PointGroup((np.eye(dim),), name="trivial")

    @staticmethod
    def sign_flip() -> "PointGroup":
        return PointGroup((np.eye(1), -np.eye(1)), name="pm1")

    @staticmethod
    def cyclic(n: int) -> "PointGroup":
        mats = []
        for k in range(n):
            t = 2 * math.pi * k / n
            mats.append(np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]]))
        return PointGroup(tuple(mats), name=f"C{n}")

    @staticmethod
    def dihedral(n: int) -> "PointGroup":
        rots = PointGroup.cyclic(n).matrices
        flip = np.array([[1.0, 0.0], [0.0, -1.0]])
        return PointGroup(rots + tuple(r @ flip for r in rots), name=f"D{n}")


def orbit(group: PointGroup, xi, tol: float = 1e-9) -> np.ndarray:
    """K-orbit {k xi}, deduplicated, sorted lexicographically."""
    xi = np.asarray(xi, dtype=float)
    images = np.array([m @ xi for m in group.matrices])
    keep = []
    for v in images:
        if not any(np.max(np.abs(v - u)) <= tol for u in keep):
            keep.append(v)
    arr = np.array(keep)
    return arr[np.lexsort(arr.T[::-1])]


def orbit_representative(group: PointGroup, xi, tol: float = 1e-9) -> tuple:
    """Lexicographically minimal orbit element (the canonical label)."""
    return tuple(orbit(group, xi, tol)[0])


@dataclass(frozen=True)
class BesselLabel:
    """Spherical function label: K-orbit of a physical frequency."""

    xi: tuple
    group: PointGroup

    def canonical(self) -> tuple:
        return orbit_representative(self.group, np.asarray(self.xi))


@dataclass(frozen=True)
class NilpotentLabel:
    """Heisenberg branch label: central frequency and Laguerre index."""

    lam1: float
    index: int

    def __post_init__(self):
        if self.lam1 == 0:
            raise ValueError("central frequency must be nonzero")
        if self.index < 0:
            raise ValueError("Laguerre index must be >= 0")


def bessel_spherical(group: PointGroup, xi1, x) -> np.ndarray:
    """Normalized orbit average (1/|K|) sum_k exp(2 pi i <k xi1, x>).

    Equals 1 at x = 0; for trivial K it is the character of xi1.
    """
    xi1 = np.asarray(xi1, dtype=float)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    acc = np.zeros(pts.shape[0], dtype=complex)
    for m in group.matrices:
        acc += np.exp(2j * math.pi * (pts @ (m @ xi1)))
    return acc / group.order


def check_invariance(
    f: TestFunction, group: PointGroup, tol: float = 1e-8, nsamples: int = 16, seed: int = 7
) -> float:
    rng = np.random.default_rng(seed)
    radius = max(f.support_radius(), 1.0)
    pts = rng.uniform(-radius / 2, radius / 2, size=(nsamples, f.dim))
    base = f.eval(pts)
    scale = max(1.0, float(np.abs(base).max()))
    worst = 0.0
    for m in group.matrices:
        worst = max(worst, float(np.abs(f.eval(pts @ m.T) - base).max()))
    return worst / scale


def spherical_ft(f: TestFunction, label: BesselLabel, tol: float = 1e-8) -> complex:
    """Spherical transform of a K-invariant f at a Bessel label.

    By K-invariance the plain transform is constant on the orbit; the orbit
    average is returned for numerical safety.
    """
    group = label.group
    residual = check_invariance(f, group, tol)
    if residual > tol:
        raise InvariantViolationError(
            f"function is not K-invariant (residual {residual:.2e} > {tol:.0e})"
        )
    orb = orbit(group, np.asarray(label.xi, dtype=float))
    return complex(np.mean(f.ft(orb)))


# ---------------------------------------------------------------------------
# weighted L2 norms
# ---------------------------------------------------------------------------
#
# The product metric adds the physical and internal distances; within each
# Euclidean factor we use the l1 metric d(x, 0) = sum_d |x_d|, which is a
# proper invariant metric and makes the weight factor over coordinates, so
# tensor products factorize exactly.


@dataclass(frozen=True)
class WeightedNormParams:
    alpha: float
    lattice: Optional[LatticeBasis] = None
    constant: Optional[float] = None  # C = sqrt(sum_gamma exp(-alpha d(gamma)/2))

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")

    @staticmethod
    def for_lattice(alpha: float, basis: LatticeBasis, tol: float = 1e-8) -> "WeightedNormParams":
        c = periodization_constant(basis, alpha, tol)
        return WeightedNormParams(alpha, basis, c)


def periodization_constant(basis: LatticeBasis, alpha: float, tol: float = 1e-8) -> float:
    """C with ||P_Gamma F||_2 <= C ||F||_{2, alpha}: square root of the
    exponentially weighted lattice sum, with a Cauchy convergence check."""
    d = basis.dim
    radius = 8.0
    prev = None
    for _ in range(32):
        box = Region.box([[-radius, radius]] * d)
        _, pts = enumerate_points(basis, box)
        s = float(np.sum(np.exp(-alpha * np.abs(pts).sum(axis=1) / 2)))
        if prev is not None and abs(s - prev) <= tol:
            return math.sqrt(s)
        prev = s
        radius *= 1.5
    raise RuntimeError("weighted lattice sum did not converge (alpha too small?)")


def _atom_pair_weighted_integral(atom_a, atom_b, alpha: float) -> float:
    lo_a, hi_a = atom_a.support()
    lo_b, hi_b = atom_b.support()
    lo, hi = max(lo_a, lo_b), min(hi_a, hi_b)
    if hi <= lo:
        return 0.0

    def integrand(x):
        return float(atom_a.eval(x) * atom_b.eval(x) * math.exp(alpha * abs(x)))

    knots = [lo, 0.0, hi] if lo < 0 < hi else [lo, hi]
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=1e-12, epsrel=1e-10, limit=200)
        total += val
    return total


def weighted_norm(f: TestFunction, params: WeightedNormParams) -> float:
    """||f||_{2, alpha} = (int |f|^2 exp(alpha * sum_d |x_d|))^(1/2).

    Cross terms factorize over coordinates; each 1D factor is integrated
    adaptively (split at 0 where the weight has a kink).
    """
    alpha = params.alpha
    total = 0.0 + 0j
    for ci, atoms_i in f.terms:
        for cj, atoms_j in f.terms:
            val = np.conj(ci) * cj
            for a_i, a_j in zip(atoms_i, atoms_j):
                # conj(a_i) has the same profile: atoms are real-valued
                val = val * _atom_pair_weighted_integral(a_i, a_j, alpha)
                if val == 0:
                    break
            total += val
    result = float(np.real(total))
    return math.sqrt(max(result, 0.0))


def weighted_norm_quadrature(f: TestFunction, params: WeightedNormParams) -> float:
    """Direct multi-d quadrature of the weighted norm (oracle path, dim <= 2)."""
    alpha = params.alpha
    bb = f.support_box()
    if f.dim == 1:
        def g(x):
            return float(np.abs(f.eval(np.array([x]))[0]) ** 2 * math.exp(alpha * abs(x)))

        total = 0.0
        knots = [bb[0, 0], 0.0, bb[0, 1]] if bb[0, 0] < 0 < bb[0, 1] else [bb[0, 0], bb[0, 1]]
        for a, b in zip(knots[:-1], knots[1:]):
            val, _ = integrate.quad(g, a, b, epsabs=1e-12, epsrel=1e-10, limit=200)
            total += val
        return math.sqrt(max(total, 0.0))
    if f.dim == 2:
        def g2(y, x):
            v = np.abs(f.eval(np.array([[x, y]]))[0]) ** 2
            return float(v * math.exp(alpha * (abs(x) + abs(y))))

        total, _ = integrate.dblquad(
            g2, bb[0, 0], bb[0, 1], bb[1, 0], bb[1, 1], epsabs=1e-10, epsrel=1e-8
        )
        return math.sqrt(max(total, 0.0))
    raise NotImplementedError("quadrature oracle implemented for dim <= 2")
