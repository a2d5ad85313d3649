"""Test functions with exact Fourier transforms.

The algebra is generated by three 1D primitives

* box indicator on [lo, hi]  (amplitude 1),
* B-spline of order k on [lo, hi]  (k-fold convolution of equal boxes),
* centered Gaussian with scale sigma (amplitude 1, treated as compactly
  supported after truncation at 12 sigma; the tail there is < 1e-30),

closed under tensor products, finite linear combinations, convolution,
involution f*(x) = conj(f(-x)), translation and dilation.  Every value and
every Fourier transform is evaluated in closed form; the only special
function involved is erf (for box-Gaussian convolutions).

Fourier convention: ft(f)(xi) = int f(x) exp(-2*pi*i*<xi, x>) dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.special import erf

GAUSS_TRUNC = 12.0  # support radius of a Gaussian factor, in units of sigma

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Atom1D:
    """Convolution u_{w1} * ... * u_{wk} * g_sigma, shifted to ``center``.

    u_w is the indicator of [-w/2, w/2] (amplitude 1) and g_sigma the
    amplitude-1 Gaussian exp(-x^2 / (2 sigma^2)); either part may be absent
    (empty widths / sigma == 0), but not both.
    """

    widths: Tuple[float, ...]
    sigma: float
    center: float

    def __post_init__(self):
        if len(self.widths) == 0 and self.sigma == 0.0:
            raise ValueError("atom needs at least one box or a gaussian")
        if any(w <= 0 for w in self.widths) or self.sigma < 0:
            raise ValueError("widths must be > 0 and sigma >= 0")
        object.__setattr__(self, "widths", tuple(sorted(float(w) for w in self.widths)))

    # -- geometry ---------------------------------------------------------

    def half_support(self) -> float:
        return 0.5 * sum(self.widths) + GAUSS_TRUNC * self.sigma

    def support(self) -> Tuple[float, float]:
        h = self.half_support()
        return self.center - h, self.center + h

    # -- evaluation -------------------------------------------------------

    def _subset_sums(self):
        sums = np.array([0.0])
        signs = np.array([1.0])
        for w in self.widths:
            sums = np.concatenate([sums, sums + w])
            signs = np.concatenate([signs, -signs])
        return sums, signs

    def eval(self, x) -> np.ndarray:
        t = np.asarray(x, dtype=float) - self.center
        k = len(self.widths)
        if k == 0:
            return np.exp(-(t**2) / (2 * self.sigma**2))
        if k == 1 and self.sigma == 0.0:
            w = self.widths[0]
            return ((t >= -w / 2) & (t < w / 2)).astype(float)
        W = sum(self.widths)
        sums, signs = self._subset_sums()
        args = t[..., None] + (W / 2 - sums)
        m = k - 1
        if self.sigma == 0.0:
            vals = np.where(args > 0, args, 0.0) ** m if m > 0 else (args > 0).astype(float)
        else:
            vals = _gauss_smoothed_power(args, m, self.sigma)
        return (vals * signs).sum(axis=-1) / math.factorial(m)

    def ft(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        out = np.ones(xi.shape, dtype=complex)
        for w in self.widths:
            out = out * (w * np.sinc(w * xi))
        if self.sigma > 0:
            out = out * (self.sigma * _SQRT2PI * np.exp(-2 * math.pi**2 * self.sigma**2 * xi**2))
        return out * np.exp(-2j * math.pi * xi * self.center)

    # -- algebra ----------------------------------------------------------

    def convolve(self, other: "Atom1D"):
        """Returns (atom, amplitude_factor)."""
        sigma = math.hypot(self.sigma, other.sigma)
        fac = 1.0
        if self.sigma > 0 and other.sigma > 0:
            fac = self.sigma * other.sigma * _SQRT2PI / sigma
        return (
            Atom1D(self.widths + other.widths, sigma, self.center + other.center),
            fac,
        )

    def reflect(self) -> "Atom1D":
        return Atom1D(self.widths, self.sigma, -self.center)

    def translate(self, tau: float) -> "Atom1D":
        return Atom1D(self.widths, self.sigma, self.center + tau)

    def dilate(self, s: float):
        """x -> f(x/s); returns (atom, amplitude_factor)."""
        if s <= 0:
            raise ValueError("dilation factor must be > 0")
        j = len(self.widths) + (1 if self.sigma > 0 else 0)
        atom = Atom1D(tuple(w * s for w in self.widths), self.sigma * s, self.center * s)
        return atom, s ** (1 - j)


def _gauss_smoothed_power(t, m: int, sigma: float):
    """I_m(t) = int_{-inf}^{t} (t-s)^m exp(-s^2/(2 sigma^2)) ds."""
    t = np.asarray(t, dtype=float)
    g = np.exp(-(t**2) / (2 * sigma**2))
    i_prev = sigma * math.sqrt(math.pi / 2) * (1.0 + erf(t / (sigma * math.sqrt(2))))
    if m == 0:
        return i_prev
    i_cur = t * i_prev + sigma**2 * g
    for mm in range(2, m + 1):
        i_cur, i_prev = t * i_cur + sigma**2 * (mm - 1) * i_prev, i_cur
    return i_cur


@dataclass(frozen=True)
class TestFunction:
    """Finite linear combination of tensor products of 1D atoms."""

    dim: int
    terms: Tuple[Tuple[complex, Tuple[Atom1D, ...]], ...]

    # -- constructors -----------------------------------------------------

    @staticmethod
    def box(lo: float, hi: float) -> "TestFunction":
        if hi <= lo:
            raise ValueError("empty box")
        atom = Atom1D((hi - lo,), 0.0, (lo + hi) / 2)
        return TestFunction(1, (((1.0 + 0j), (atom,)),))

    @staticmethod
    def bspline(order: int, lo: float, hi: float, normalized: bool = True) -> "TestFunction":
        """Order-k B-spline on [lo, hi]: k-fold convolution of equal boxes."""
        if order < 1:
            raise ValueError("order must be >= 1")
        if hi <= lo:
            raise ValueError("empty support")
        w = (hi - lo) / order
        atom = Atom1D((w,) * order, 0.0, (lo + hi) / 2)
        coeff = w ** (-order) if normalized else 1.0
        return TestFunction(1, (((coeff + 0j), (atom,)),))

    @staticmethod
    def tent(lo: float = -1.0, hi: float = 1.0) -> "TestFunction":
        return TestFunction.bspline(2, lo, hi)

    @staticmethod
    def gaussian(sigma: float, center: float = 0.0) -> "TestFunction":
        if sigma <= 0:
            raise ValueError("sigma must be > 0")
        return TestFunction(1, (((1.0 + 0j), (Atom1D((), sigma, center),)),))

    @staticmethod
    def zero(dim: int = 1) -> "TestFunction":
        return TestFunction(dim, ())

    @staticmethod
    def tensor(*factors: "TestFunction") -> "TestFunction":
        dim = sum(f.dim for f in factors)
        terms = (((1.0 + 0j), ()),)
        for f in factors:
            terms = tuple(
                (c1 * c2, a1 + a2) for (c1, a1) in terms for (c2, a2) in f.terms
            )
        return TestFunction(dim, terms)

    @staticmethod
    def radial_gaussian(sigma: float, dim: int) -> "TestFunction":
        return TestFunction.tensor(*(TestFunction.gaussian(sigma) for _ in range(dim)))

    # -- linear structure --------------------------------------------------

    def __add__(self, other: "TestFunction") -> "TestFunction":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return TestFunction(self.dim, self.terms + other.terms)

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return self + (-other)

    def __neg__(self) -> "TestFunction":
        return self * (-1.0)

    def __mul__(self, scalar) -> "TestFunction":
        return TestFunction(
            self.dim, tuple((c * scalar, atoms) for (c, atoms) in self.terms)
        )

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return len(self.terms) == 0 or all(c == 0 for c, _ in self.terms)

    # -- evaluation --------------------------------------------------------

    def _pts(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 0:
            pts = pts.reshape(1, 1)
        elif pts.ndim == 1:
            pts = pts[:, None] if self.dim == 1 else pts[None, :]
        return pts

    def eval(self, x) -> np.ndarray:
        pts = self._pts(x)
        out = np.zeros(pts.shape[0], dtype=complex)
        for coeff, atoms in self.terms:
            term = np.full(pts.shape[0], coeff, dtype=complex)
            for d, atom in enumerate(atoms):
                term = term * atom.eval(pts[:, d])
            out += term
        return out

    def __call__(self, x) -> np.ndarray:
        return self.eval(x)

    def ft(self, xi) -> np.ndarray:
        freq = self._pts(xi)
        out = np.zeros(freq.shape[0], dtype=complex)
        for coeff, atoms in self.terms:
            term = np.full(freq.shape[0], coeff, dtype=complex)
            for d, atom in enumerate(atoms):
                term = term * atom.ft(freq[:, d])
            out += term
        return out

    def integral(self) -> complex:
        return complex(self.ft(np.zeros(self.dim))[0])

    # -- group operations --------------------------------------------------

    def convolve(self, other: "TestFunction") -> "TestFunction":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        terms = []
        for c1, a1 in self.terms:
            for c2, a2 in other.terms:
                coeff = c1 * c2
                atoms = []
                for atom1, atom2 in zip(a1, a2):
                    atom, fac = atom1.convolve(atom2)
                    coeff *= fac
                    atoms.append(atom)
                terms.append((coeff, tuple(atoms)))
        return TestFunction(self.dim, tuple(terms))

    def involution(self) -> "TestFunction":
        """f*(x) = conj(f(-x))."""
        return TestFunction(
            self.dim,
            tuple(
                (np.conj(c), tuple(a.reflect() for a in atoms))
                for (c, atoms) in self.terms
            ),
        )

    def autocorrelation(self) -> "TestFunction":
        """f* * f (always positive-definite)."""
        return self.involution().convolve(self)

    def translate(self, tau) -> "TestFunction":
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        return TestFunction(
            self.dim,
            tuple(
                (c, tuple(a.translate(tau[d]) for d, a in enumerate(atoms)))
                for (c, atoms) in self.terms
            ),
        )

    def dilate(self, s: float) -> "TestFunction":
        """x -> f(x/s), exact amplitude bookkeeping per factor."""
        terms = []
        for c, atoms in self.terms:
            coeff = c
            new_atoms = []
            for a in atoms:
                atom, fac = a.dilate(s)
                coeff *= fac
                new_atoms.append(atom)
            terms.append((coeff, tuple(new_atoms)))
        return TestFunction(self.dim, tuple(terms))

    # -- support -----------------------------------------------------------

    def support_box(self) -> np.ndarray:
        if not self.terms:
            return np.zeros((self.dim, 2))
        lo = np.full(self.dim, np.inf)
        hi = np.full(self.dim, -np.inf)
        for _, atoms in self.terms:
            for d, atom in enumerate(atoms):
                a, b = atom.support()
                lo[d] = min(lo[d], a)
                hi[d] = max(hi[d], b)
        return np.stack([lo, hi], axis=1)

    def support_radius(self) -> float:
        if not self.terms:
            return 0.0
        bb = self.support_box()
        return float(np.sqrt(np.sum(np.max(bb**2, axis=1))))
