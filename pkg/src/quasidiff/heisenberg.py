"""The 2-step nilpotent branch: Heisenberg group H3, the Z[i]/Z[sqrt2]
cut-and-project lattice, twisted convolutions, Laguerre spherical functions
and the two families of diffraction coefficients.

Group law on H3 = C (+)_beta R:  (q, z)(q', z') = (q + q', z + z' + Im(q~ q'))
with the symplectic cocycle beta(q, q') = Im(conj(q) q').  The lattice

    Gamma_N = Delta (+)_beta Xi,
    Delta = {(a + b sqrt2, a - b sqrt2) : a, b in Z[i]},
    Xi    = {(c + d sqrt2, c - d sqrt2) : c, d in Z},

embeds in R^6 with coordinates (Re q1, Im q1, z1, Re q2, Im q2, z2) and
integer coordinates (a1, a2, b1, b2, c, d).  The cocycle closes exactly:
beta1 + beta2 lands in Xi with c = Im(a~ a' + 2 b~ b'), d = Im(a~ b' + b~ a').
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.hermite import herm2poly, hermgauss
from numpy.polynomial.laguerre import lagval
from numpy.polynomial.polynomial import polyval2d
from scipy import integrate
from scipy.special import erf

from .autocorr import EmpiricalAutocorrelation, InsufficientMarginError
from .kernels import enumerate_box, mc_heis_periodization, pairs_within
from .lattice import LatticeBasis, Region
from .qexact import qmat_from_triples, qmat_to_float
from .scheme import ModelSet, Scheme, Window, cut_and_project

SQRT2 = math.sqrt(2.0)


class AnsatzDegenerateError(ArithmeticError):
    """Gram matrix of the variational ansatz is numerically singular."""


# ---------------------------------------------------------------------------
# group arithmetic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HPoint:
    q: complex
    z: float

    def __iter__(self):
        yield self.q
        yield self.z


def h_mul(x: HPoint, y: HPoint) -> HPoint:
    return HPoint(x.q + y.q, x.z + y.z + (np.conj(x.q) * y.q).imag)


def h_inv(x: HPoint) -> HPoint:
    return HPoint(-x.q, -x.z)


def h_mul_arrays(qx, zx, qy, zy):
    return qx + qy, zx + zy + (np.conj(qx) * qy).imag


# integer-coordinate group law on Gamma_N (exact)


def gamma_cocycle_ints(A: np.ndarray, B: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Integer (c, d) with beta1 = c + d sqrt2, beta2 = c - d sqrt2.

    A, B are (..., 4) integer arrays (a1, a2, b1, b2) of the two Delta
    elements; c = Im(a~ a' + 2 b~ b'), d = Im(a~ b' + b~ a').
    """
    a1, a2, b1, b2 = A[..., 0], A[..., 1], A[..., 2], A[..., 3]
    p1, p2, r1, r2 = B[..., 0], B[..., 1], B[..., 2], B[..., 3]
    c = (a1 * p2 - a2 * p1) + 2 * (b1 * r2 - b2 * r1)
    d = (a1 * r2 - a2 * r1) + (b1 * p2 - b2 * p1)
    return c, d


def gamma_mul_ints(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Group product in integer coordinates (a1, a2, b1, b2, c, d)."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    cb, db = gamma_cocycle_ints(x[..., :4], y[..., :4])
    out = x + y
    out[..., 4] += cb
    out[..., 5] += db
    return out


def gamma_inv_ints(x: np.ndarray) -> np.ndarray:
    return -np.asarray(x, dtype=np.int64)


# ---------------------------------------------------------------------------
# the cut-and-project scheme
# ---------------------------------------------------------------------------


def _gamma_n_basis() -> LatticeBasis:
    Z = (0, 0)
    one = (1, 0)
    rt = (0, 1)
    mrt = (0, -1)
    rows = [
        [one, Z, rt, Z, Z, Z],
        [Z, one, Z, rt, Z, Z],
        [Z, Z, Z, Z, one, rt],
        [one, Z, mrt, Z, Z, Z],
        [Z, one, Z, mrt, Z, Z],
        [Z, Z, Z, Z, one, mrt],
    ]
    exact = qmat_from_triples(rows, s=2)
    return LatticeBasis(qmat_to_float(exact), exact=exact)


@dataclass(frozen=True)
class HScheme:
    """Heisenberg cut-and-project data (p = q = 1)."""

    scheme: Scheme

    @staticmethod
    def standard() -> "HScheme":
        return HScheme(Scheme(3, 3, _gamma_n_basis(), name="heisenberg_zsqrt2", check_radius=3.0))

    @property
    def basis(self) -> LatticeBasis:
        return self.scheme.gamma

    def covolume(self) -> float:
        return self.scheme.covolume()

    def delta_physical(self, ints: np.ndarray) -> np.ndarray:
        """delta1 = (a1 + sqrt2 b1) + i (a2 + sqrt2 b2) from integer coords."""
        ints = np.asarray(ints, dtype=float)
        return (ints[..., 0] + SQRT2 * ints[..., 2]) + 1j * (ints[..., 1] + SQRT2 * ints[..., 3])

    def delta_internal(self, ints: np.ndarray) -> np.ndarray:
        ints = np.asarray(ints, dtype=float)
        return (ints[..., 0] - SQRT2 * ints[..., 2]) + 1j * (ints[..., 1] - SQRT2 * ints[..., 3])

    def cocycle_identity_exhaustive(self, max_norm: int = 5, chunk: int = 512) -> int:
        """Exact closure check of beta(Delta, Delta) in Xi.

        Expands Im(conj(delta) delta') in exact Z[i][sqrt2] arithmetic
        (coefficient pair) and compares with the integer formulas
        c = Im(a~ a' + 2 b~ b'), d = Im(a~ b' + b~ a'), for all pairs with
        Gaussian-integer modulus of a, b up to max_norm.  Returns the number
        of ordered pairs checked; raises on the first mismatch.
        """
        vals = [
            (u, v)
            for u in range(-max_norm, max_norm + 1)
            for v in range(-max_norm, max_norm + 1)
            if u * u + v * v <= max_norm * max_norm
        ]
        gi = np.array(vals, dtype=np.int64)
        # all (a, b) pairs of Gaussian integers
        na = gi.shape[0]
        A = np.empty((na * na, 4), dtype=np.int64)
        A[:, 0:2] = np.repeat(gi, na, axis=0)
        A[:, 2:4] = np.tile(gi, (na, 1))
        total = 0
        for start in range(0, A.shape[0], chunk):
            blockA = A[start : start + chunk][:, None, :]
            blockB = A[None, :, :]
            c, d = gamma_cocycle_ints(blockA, blockB)
            # independent path: expand conj(delta1) * delta1' = g + h sqrt2
            # over Z[i] and compare imaginary parts
            a1, a2, b1, b2 = (blockA[..., k] for k in range(4))
            p1, p2, r1, r2 = (blockB[..., k] for k in range(4))
            # g = a~ a' + 2 b~ b'; h = a~ b' + b~ a' (as Gaussian integers)
            g_im = (a1 * p2 - a2 * p1) + 2 * (b1 * r2 - b2 * r1)
            h_im = (a1 * r2 - a2 * r1) + (b1 * p2 - b2 * p1)
            # beta1 = Im(g) + Im(h) sqrt2, beta2 = Im(g) - Im(h) sqrt2:
            # membership in Xi demands beta1 = c + d sqrt2, beta2 = c - d sqrt2
            if not (np.array_equal(g_im, c) and np.array_equal(h_im, d)):
                raise AssertionError("cocycle closure identity violated")
            total += int(c.size)
        return total


def h_model_set(hscheme: HScheme, window: Window, region: Region) -> ModelSet:
    """Model set in H3: keep points with internal (q2, z2) in the window."""
    return cut_and_project(hscheme.scheme, window, region)


# ---------------------------------------------------------------------------
# empirical autocorrelation with the group difference x^{-1} y
# ---------------------------------------------------------------------------


def h_empirical_autocorr(
    model_set: ModelSet, averaging_region: Region, cutoff: float
) -> EmpiricalAutocorrelation:
    """Pair estimator with differences h_inv(x) * y, truncated to the set
    B_R = {(q, z) : |q| <= R, |z| <= R^2}."""
    rz = cutoff * cutoff
    bb = averaging_region.bounding_box()
    qmax = float(np.max(np.linalg.norm(_box_corners(bb[:2]), axis=1)))
    needed = Region.box(
        np.stack(
            [
                np.concatenate([bb[:2, 0] - cutoff, [bb[2, 0] - rz - qmax * cutoff]]),
                np.concatenate([bb[:2, 1] + cutoff, [bb[2, 1] + rz + qmax * cutoff]]),
            ],
            axis=1,
        )
    )
    if not model_set.region.contains_region(needed):
        raise InsufficientMarginError(
            "sample region must contain the B_R-neighbourhood of F_t "
            "(q margin R, central margin R^2 + max|q| R)"
        )
    vol = averaging_region.volume()
    if model_set.count == 0:
        return EmpiricalAutocorrelation(cutoff, vol, np.zeros((0, 3)), np.zeros(0), np.zeros((0, 6), np.int64))
    mask = averaging_region.membership(model_set.points)
    # Euclidean prefilter covers the group ball: |q_y - q_x| = |q(x^-1 y)|
    # and |z_y - z_x| <= R^2 + max|q| R
    pre = math.hypot(cutoff, rz + qmax * cutoff)
    I, J = pairs_within(model_set.points, mask, pre)
    dn = gamma_mul_ints(gamma_inv_ints(model_set.ints[I]), model_set.ints[J])
    qd = (dn[:, 0] + SQRT2 * dn[:, 2]) + 1j * (dn[:, 1] + SQRT2 * dn[:, 3])
    zd = dn[:, 4] + SQRT2 * dn[:, 5]
    keep = (np.abs(qd) <= cutoff + 1e-12) & (np.abs(zd) <= rz + 1e-12)
    uniq, counts = np.unique(dn[keep], axis=0, return_counts=True)
    qd = (uniq[:, 0] + SQRT2 * uniq[:, 2]) + 1j * (uniq[:, 1] + SQRT2 * uniq[:, 3])
    zd = uniq[:, 4] + SQRT2 * uniq[:, 5]
    z = np.stack([qd.real, qd.imag, zd], axis=1)
    return EmpiricalAutocorrelation(cutoff, vol, z, counts / vol, uniq.astype(np.int64))


def _box_corners(bb: np.ndarray) -> np.ndarray:
    d = bb.shape[0]
    idx = np.indices((2,) * d).reshape(d, -1).T
    return bb[np.arange(d), idx]


def radialize_u1(ac: EmpiricalAutocorrelation, tol: float = 1e-9) -> EmpiricalAutocorrelation:
    """Merge atoms over the U(1) invariants (|q|, z)."""
    if ac.natoms == 0:
        return EmpiricalAutocorrelation(ac.cutoff, ac.volume, np.zeros((0, 2)), np.zeros(0), None, True)
    labels = np.stack([np.hypot(ac.z[:, 0], ac.z[:, 1]), ac.z[:, 2]], axis=1)
    rounded = np.round(labels / tol) * tol
    uniq, inverse = np.unique(rounded, axis=0, return_inverse=True)
    coeffs = np.zeros(uniq.shape[0])
    np.add.at(coeffs, inverse, ac.coeffs)
    reps = np.zeros_like(uniq)
    for i in range(uniq.shape[0]):
        reps[i] = labels[np.nonzero(inverse == i)[0][0]]
    return EmpiricalAutocorrelation(ac.cutoff, ac.volume, reps, coeffs, None, True)


# ---------------------------------------------------------------------------
# Laguerre spherical functions (the nontrivial-central-character branch)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LaguerreSpherical:
    """(K, chi1)-spherical function for K = U(1), chi1(t) = exp(2 pi i lam1 t):

        omega(q) = exp(-pi |lam1| |q|^2) L_m(2 pi |lam1| |q|^2).

    The defining functional equation (the correctness oracle) is

        (1/2pi) int omega(x + e^{i th} y) chi1(beta(x, e^{i th} y)) dth
            = omega(x) omega(y).
    """

    lam1: float
    index: int

    def __post_init__(self):
        if self.lam1 == 0:
            raise ValueError("central frequency must be nonzero")
        if self.index < 0:
            raise ValueError("Laguerre index must be >= 0")

    @property
    def scale(self) -> float:
        return math.pi * abs(self.lam1)

    def eval(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=complex)
        s = np.abs(q) ** 2
        c = np.zeros(self.index + 1)
        c[self.index] = 1.0
        return np.exp(-self.scale * s) * lagval(2 * self.scale * s, c)

    def norm_sq_l2(self) -> float:
        """||omega||^2 over C: equals 1/(2 |lam1|) for every index."""
        return 1.0 / (2.0 * abs(self.lam1))

    def functional_equation_residual(self, x: complex, y: complex, ntheta: int = 512) -> float:
        th = np.linspace(0.0, 2 * math.pi, ntheta, endpoint=False)
        ky = np.exp(1j * th) * y
        beta = (np.conj(x) * ky).imag
        lhs = np.mean(self.eval(x + ky) * np.exp(2j * math.pi * self.lam1 * beta))
        rhs = self.eval(np.array([x]))[0] * self.eval(np.array([y]))[0]
        return float(abs(lhs - rhs))

    def edc_envelope(self) -> Tuple[np.ndarray, float]:
        """(polynomial coefficients in |q|^2, decay rate c) with
        |omega(q)| <= L(|q|^2) exp(-c |q|^2)."""
        a = self.scale
        m = self.index
        coeffs = np.array(
            [math.comb(m, k) * (2 * a) ** k / math.factorial(k) for k in range(m + 1)]
        )
        return coeffs, a

    def edc_check(self, rmax: float = 8.0, npts: int = 4001) -> bool:
        coeffs, c = self.edc_envelope()
        r = np.linspace(0.0, rmax, npts)
        s = r * r
        envelope = np.polyval(coeffs[::-1], s) * np.exp(-c * s)
        vals = np.abs(self.eval(r.astype(complex)))
        return bool(np.all(vals <= envelope + 1e-12))


# ---------------------------------------------------------------------------
# polynomial-Gaussian calculus on C = R^2 and twisted convolutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolyGauss2D:
    """P(y1, y2) * exp(-s (y1^2 + y2^2)) with complex coefficient matrix P."""

    coeffs: np.ndarray  # (D+1, D+1), coeffs[m, n] multiplies y1^m y2^n
    s: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=complex))
        if self.s <= 0:
            raise ValueError("Gaussian scale must be positive")

    def eval(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        y1, y2 = pts[:, 0], pts[:, 1]
        return polyval2d(y1, y2, self.coeffs) * np.exp(-self.s * (y1**2 + y2**2))

    def involution(self) -> "PolyGauss2D":
        """f*(y) = conj(f(-y))."""
        d1, d2 = self.coeffs.shape
        signs = np.fromfunction(lambda m, n: (-1.0) ** (m + n), (d1, d2))
        return PolyGauss2D(np.conj(self.coeffs) * signs, self.s)

    @property
    def degree(self) -> int:
        return max(self.coeffs.shape) - 1


def hermite_gaussian_basis(dim: int, s: float) -> Tuple[PolyGauss2D, ...]:
    """First ``dim`` L2-normalized Hermite-Gaussian functions on C, ordered
    by total degree: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ..."""
    orders = []
    deg = 0
    while len(orders) < dim:
        for m in range(deg, -1, -1):
            orders.append((m, deg - m))
            if len(orders) == dim:
                break
        deg += 1
    basis = []
    root = math.sqrt(2 * s)
    for m, n in orders:
        hm = herm2poly([0.0] * m + [1.0])
        hn = herm2poly([0.0] * n + [1.0])
        cm = np.array(hm) * root ** np.arange(m + 1)
        cn = np.array(hn) * root ** np.arange(n + 1)
        norm = math.sqrt(
            (2**m * math.factorial(m) * math.sqrt(math.pi) / root)
            * (2**n * math.factorial(n) * math.sqrt(math.pi) / root)
        )
        coeffs = np.outer(cm, cn) / norm
        basis.append(PolyGauss2D(coeffs, s))
    return tuple(basis)


def twisted_conv_pg_pg(f: PolyGauss2D, g: PolyGauss2D, lam2: float, X) -> np.ndarray:
    """(f *_chi g)(x) = int f(x-y) g(y) exp(2 pi i lam2 beta(y, x)) dy.

    Closed form via Gauss-Hermite quadrature around the complex-shifted
    center (exact for the polynomial part).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    x1, x2 = X[:, 0], X[:, 1]
    w = 2 * math.pi * lam2
    a = f.s + g.s
    mu1 = (2 * f.s * x1 + 1j * w * x2) / (2 * a)
    mu2 = (2 * f.s * x2 - 1j * w * x1) / (2 * a)
    const = np.exp(a * (mu1**2 + mu2**2) - f.s * (x1**2 + x2**2))
    G = (f.degree + g.degree) // 2 + 2
    nodes, weights = hermgauss(G)
    total = np.zeros(X.shape[0], dtype=complex)
    ra = math.sqrt(a)
    for i in range(G):
        y1 = mu1 + nodes[i] / ra
        for j in range(G):
            y2 = mu2 + nodes[j] / ra
            R = polyval2d(x1 - y1, x2 - y2, f.coeffs) * polyval2d(y1, y2, g.coeffs)
            total += weights[i] * weights[j] * R
    return total / a * const


def _complex_gauss_box_moments(lo, hi, s: float, mmax: int) -> np.ndarray:
    """K_k = int_lo^hi u^k exp(-s u^2) du for complex endpoints, k <= mmax.

    Endpoints are complex (contour integrals of an entire integrand);
    recursion K_k = ((k-1)/(2s)) K_{k-2} + boundary terms.
    """
    lo = np.asarray(lo, dtype=complex)
    hi = np.asarray(hi, dtype=complex)
    rs = math.sqrt(s)
    elo = np.exp(-s * lo**2)
    ehi = np.exp(-s * hi**2)
    out = np.zeros((mmax + 1,) + lo.shape, dtype=complex)
    out[0] = math.sqrt(math.pi) / (2 * rs) * (erf(rs * hi) - erf(rs * lo))
    if mmax >= 1:
        out[1] = (elo - ehi) / (2 * s)
    for k in range(2, mmax + 1):
        out[k] = ((k - 1) / (2 * s)) * out[k - 2] + (
            lo ** (k - 1) * elo - hi ** (k - 1) * ehi
        ) / (2 * s)
    return out


def _box_factor(m_max: int, x, omega_tilde, s: float, lo_y: float, hi_y: float):
    """T_m(x) = int_{lo_y}^{hi_y} (x-y)^m exp(-s (x-y)^2 + i w~ y) dy for m <= m_max."""
    x = np.asarray(x, dtype=float)
    wt = np.asarray(omega_tilde, dtype=float)
    mu = -1j * wt / (2 * s)
    lo = x - hi_y - mu
    hi = x - lo_y - mu
    K = _complex_gauss_box_moments(lo, hi, s, m_max)
    phase = np.exp(1j * wt * x - wt**2 / (4 * s))
    out = np.zeros((m_max + 1,) + x.shape, dtype=complex)
    for m in range(m_max + 1):
        acc = np.zeros(x.shape, dtype=complex)
        for k in range(m + 1):
            acc += math.comb(m, k) * mu ** (m - k) * K[k]
        out[m] = acc * phase
    return out


def twisted_conv_pg_box(f: PolyGauss2D, bounds, lam2: float, X) -> np.ndarray:
    """(f *_chi chi_B)(x) for an axis box B; separable per monomial of f."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    x1, x2 = X[:, 0], X[:, 1]
    b = np.asarray(bounds, dtype=float)
    w = 2 * math.pi * lam2
    d1, d2 = f.coeffs.shape
    T1 = _box_factor(d1 - 1, x1, w * x2, f.s, b[0, 0], b[0, 1])
    T2 = _box_factor(d2 - 1, x2, -w * x1, f.s, b[1, 0], b[1, 1])
    total = np.zeros(X.shape[0], dtype=complex)
    for m in range(d1):
        for n in range(d2):
            c = f.coeffs[m, n]
            if c != 0:
                total += c * T1[m] * T2[n]
    return total


def twisted_convolution(h1, h2, lam2: float, support_radius: float = None, tol: float = 1e-8):
    """Evaluator of the chi2-twisted convolution of two functions on C.

    PolyGauss2D inputs use the closed form; other callables are integrated
    by an adaptive tensor Gauss-Legendre rule (doubling until Cauchy-stable
    within ``tol``).  The returned object is callable on (N, 2) points.
    """
    if isinstance(h1, PolyGauss2D) and isinstance(h2, PolyGauss2D):
        return lambda X: twisted_conv_pg_pg(h1, h2, lam2, X)

    def _as_eval(h):
        if isinstance(h, PolyGauss2D):
            return h.eval, 12.0 / math.sqrt(h.s)
        if hasattr(h, "eval") and hasattr(h, "support_radius"):
            return (lambda P: h.eval(P)), h.support_radius()
        raise TypeError("expected PolyGauss2D or a 2D TestFunction-like object")

    e1, r1 = _as_eval(h1)
    e2, r2 = _as_eval(h2)
    L = r2 if support_radius is None else support_radius
    w = 2 * math.pi * lam2

    def evaluate(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = 24
        prev = None
        while True:
            nodes, weights = np.polynomial.legendre.leggauss(n)
            y = L * nodes
            wts = L * weights
            Y1, Y2 = np.meshgrid(y, y, indexing="ij")
            W = np.outer(wts, wts).ravel()
            pts = np.stack([Y1.ravel(), Y2.ravel()], axis=1)
            vals2 = e2(pts)
            out = np.zeros(X.shape[0], dtype=complex)
            for k in range(X.shape[0]):
                x = X[k]
                phase = np.exp(1j * w * (pts[:, 0] * x[1] - pts[:, 1] * x[0]))
                out[k] = np.sum(W * e1(x - pts) * vals2 * phase)
            if prev is not None and np.max(np.abs(out - prev)) <= tol * max(
                1.0, float(np.max(np.abs(out)))
            ):
                return out
            if n >= 192:
                return out
            prev = out
            n *= 2

    return evaluate


def twisted_convolution_intro_form(h1, h2, lam2: float, **kw):
    """The introduction's variant (psi1 *_chi psi2)(w) = int psi1(w')
    psi2(w - w') chi2(beta(w', w)) dw'; a wrapper over the adopted form:
    substituting y = w - w' gives conv(h2, h1) with the conjugate character.
    """
    return twisted_convolution(h2, h1, -lam2, **kw)


def partial_central_transform(r, lam2: float):
    """r_chi2(q) = int r(q, t) exp(-2 pi i lam2 t) dt for tensor functions.

    For a 3D tensor TestFunction the central factor transforms in closed
    form; lam2 = 0 gives the plain central integral r_1.
    """
    from .testfun import TestFunction

    if not isinstance(r, TestFunction) or r.dim != 3:
        raise TypeError("expected a 3D TestFunction (q1, q2, t)")
    terms = []
    for coeff, atoms in r.terms:
        factor = complex(atoms[2].ft(np.array([lam2]))[0])
        terms.append((coeff * factor, atoms[:2]))
    return TestFunction(2, tuple(terms))


# ---------------------------------------------------------------------------
# dual data for the standard scheme (exact in Q(sqrt2, i))
# ---------------------------------------------------------------------------
#
# Delta-dual: eta1 = alpha/2 + beta sqrt2/4, eta2 = alpha/2 - beta sqrt2/4
# with alpha, beta in Z[i];  |eta1|^2 = P/8 + Q sqrt2/4 and
# |eta2|^2 = P/8 - Q sqrt2/4 where P = 2|alpha|^2 + |beta|^2 and
# Q = Re(alpha conj(beta)) are integers.  Xi-dual analogously with integers.

_DUAL_DELTA_BASIS = np.array(
    [
        [0.5, 0.0, SQRT2 / 4, 0.0],
        [0.0, 0.5, 0.0, SQRT2 / 4],
        [0.5, 0.0, -SQRT2 / 4, 0.0],
        [0.0, 0.5, 0.0, -SQRT2 / 4],
    ]
)  # columns (m1, m2, n1, n2) -> (Re eta1, Im eta1, Re eta2, Im eta2)


def _eta_modulus_pair(alpha: Tuple[int, int], beta: Tuple[int, int]) -> Tuple[int, int]:
    P = 2 * (alpha[0] ** 2 + alpha[1] ** 2) + beta[0] ** 2 + beta[1] ** 2
    Q = alpha[0] * beta[0] + alpha[1] * beta[1]
    return P, Q


def xi_dual_frequencies(cstar: int, dstar: int) -> Tuple[float, float]:
    """(lam1, lam2) of the Xi-dual point with integer coordinates (c*, d*)."""
    return cstar / 2 + dstar * SQRT2 / 4, cstar / 2 - dstar * SQRT2 / 4


def bessel_orbit_partners(alpha: Tuple[int, int], beta: Tuple[int, int]) -> np.ndarray:
    """(K eta1)^(2) for K = U(1): all eta2 of dual points with |eta1'| = |eta1|.

    Exact: equality of |eta1'|^2 in Q(sqrt2) reduces to the integer pair
    (P, Q).  The partner set is finite (lattice meets circle x circle).
    """
    P0, Q0 = _eta_modulus_pair(alpha, beta)
    r1sq = P0 / 8 + Q0 * SQRT2 / 4
    r2sq = P0 / 8 - Q0 * SQRT2 / 4
    r1, r2 = math.sqrt(max(r1sq, 0.0)), math.sqrt(max(r2sq, 0.0))
    lo = np.array([-r1, -r1, -r2, -r2]) - 1e-9
    hi = np.array([r1, r1, r2, r2]) + 1e-9
    ints = enumerate_box(_DUAL_DELTA_BASIS, lo, hi)
    partners = []
    for m1, m2, n1, n2 in ints:
        P, Q = _eta_modulus_pair((m1, m2), (n1, n2))
        if P == P0 and Q == Q0:
            partners.append(
                [m1 / 2 - n1 * SQRT2 / 4, m2 / 2 - n2 * SQRT2 / 4]
            )
    return np.asarray(partners, dtype=float).reshape(-1, 2)


def bessel_branch_coefficient(
    hscheme: HScheme,
    window: Window,
    alpha: Tuple[int, int],
    beta: Tuple[int, int],
) -> float:
    """Diffraction intensity at the Bessel label [eta1], eta1 = alpha/2 +
    beta sqrt2/4: the orbit sum of |FT of the centrally integrated window|^2.

    The partner set is exact and finite, so no truncation tail arises.
    """
    if window.dim != 3:
        raise ValueError("window must be 3-dimensional (Re q2, Im q2, z2)")
    partners = bessel_orbit_partners(alpha, beta)
    if partners.shape[0] == 0:
        return 0.0
    w2d, zlen = _split_window(window)
    vals = np.abs(w2d.ft(partners) * zlen) ** 2
    return float(vals.sum())


def _split_window(window: Window):
    """Split a 3D box window into its 2D q-part and central length."""
    if len(window.pieces) != 1 or window.pieces[0][1] not in ("hbox", "cbox"):
        raise NotImplementedError("Heisenberg branch coefficients need a box window")
    b = np.asarray(window.pieces[0][2])
    w2d = Window.box(b[:2], half_open=window.pieces[0][1] == "hbox")
    zlen = b[2, 1] - b[2, 0]
    return w2d, float(zlen)


def _central_window_factor(window: Window, lam2: float) -> complex:
    """int over the window's z-interval of exp(-2 pi i lam2 t) dt."""
    b = np.asarray(window.pieces[0][2])
    lo, hi = b[2]
    if lam2 == 0:
        return complex(hi - lo)
    c = 2j * math.pi * lam2
    return complex((np.exp(-c * lo) - np.exp(-c * hi)) / c)


# ---------------------------------------------------------------------------
# nilpotent-branch coefficient (generalized Rayleigh quotient)
# ---------------------------------------------------------------------------


def _delta_candidates(r1: float, r2: float) -> np.ndarray:
    """Integer (a1, a2, b1, b2) with |delta1| <= r1 and |delta2| <= r2."""
    B = np.array(
        [
            [1.0, 0.0, SQRT2, 0.0],
            [0.0, 1.0, 0.0, SQRT2],
            [1.0, 0.0, -SQRT2, 0.0],
            [0.0, 1.0, 0.0, -SQRT2],
        ]
    )
    lo = np.array([-r1, -r1, -r2, -r2])
    hi = np.array([r1, r1, r2, r2])
    ints = enumerate_box(B, lo, hi)
    d1 = (ints[:, 0] + SQRT2 * ints[:, 2]) ** 2 + (ints[:, 1] + SQRT2 * ints[:, 3]) ** 2
    d2 = (ints[:, 0] - SQRT2 * ints[:, 2]) ** 2 + (ints[:, 1] - SQRT2 * ints[:, 3]) ** 2
    return ints[(d1 <= r1 * r1 + 1e-9) & (d2 <= r2 * r2 + 1e-9)]


@dataclass(frozen=True)
class NilpotentCoefficient:
    value: float  # certified lower bound of the diffraction intensity
    ansatz_dim: int
    gram_min_eigenvalue: float
    hermiticity_residual: float
    truncation_radii: Tuple[float, float]
    lam1: float
    lam2: float
    laguerre_index: int


def nilpotent_branch_coefficient(
    hscheme: HScheme,
    window: Window,
    cstar: int,
    dstar: int,
    index: int,
    ansatz_dim: int,
    tail_exponent: float = 32.0,
) -> NilpotentCoefficient:
    """Lower bound of the intensity at omega_o (x) chi_1 via a finite ansatz.

    chi1 has frequency lam1 = c*/2 + d* sqrt2/4 (a Xi-dual projection) and
    chi2 is its unique partner with chi1 (x) chi2 in the Xi-dual.  With
    Hermite-Gaussian ansatz functions phi_j the constrained supremum
    restricted to their span is the generalized Rayleigh quotient
    (v^H M^{-1} v) / ||omega_o||^2 where

        v_j    = sum_Delta omega_o(delta1) (phi_j^* *_chi2 (chi_W)_chi2)(delta2),
        M_jk   = sum_Delta omega_o(delta1) (phi_j^* *_chi2 phi_k)(delta2).

    The value is monotone nondecreasing in ansatz_dim (nested spans).
    """
    if (cstar, dstar) == (0, 0):
        raise ValueError("central character must be nontrivial")
    if ansatz_dim < 1:
        raise ValueError("ansatz_dim must be >= 1")
    lam1, lam2 = xi_dual_frequencies(cstar, dstar)
    omega = LaguerreSpherical(lam1, index)
    s_phi = math.pi * abs(lam2)
    basis = hermite_gaussian_basis(ansatz_dim, s_phi)
    w2d_bounds = np.asarray(window.pieces[0][2])[:2] if window.pieces else None
    if w2d_bounds is None:
        return NilpotentCoefficient(0.0, ansatz_dim, 0.0, 0.0, (0.0, 0.0), lam1, lam2, index)
    _split_window(window)  # validates the box shape
    cw = _central_window_factor(window, lam2)

    # truncation radii from the Gaussian envelopes
    r1 = math.sqrt(tail_exponent / (math.pi * abs(lam1))) * 1.25 + 1.0
    box_diag = float(np.linalg.norm(w2d_bounds[:, 1] - w2d_bounds[:, 0]))
    r2 = math.sqrt(tail_exponent / s_phi) * 1.25 + box_diag + 1.0
    cands = _delta_candidates(r1, r2)
    d1 = (cands[:, 0] + SQRT2 * cands[:, 2]) + 1j * (cands[:, 1] + SQRT2 * cands[:, 3])
    d2 = np.stack(
        [cands[:, 0] - SQRT2 * cands[:, 2], cands[:, 1] - SQRT2 * cands[:, 3]], axis=1
    )
    wts = omega.eval(d1)

    stars = [phi.involution() for phi in basis]
    v = np.zeros(ansatz_dim, dtype=complex)
    for j in range(ansatz_dim):
        conv = twisted_conv_pg_box(stars[j], w2d_bounds, lam2, d2)
        v[j] = cw * np.sum(wts * conv)
    M = np.zeros((ansatz_dim, ansatz_dim), dtype=complex)
    for j in range(ansatz_dim):
        for k in range(j, ansatz_dim):
            conv = twisted_conv_pg_pg(stars[j], basis[k], lam2, d2)
            M[j, k] = np.sum(wts * conv)
            if k != j:
                M[k, j] = np.conj(M[j, k])
    # Hermiticity of the independently computed lower triangle
    M_check = np.zeros_like(M)
    for j in range(ansatz_dim):
        for k in range(j):
            M_check[j, k] = np.sum(wts * twisted_conv_pg_pg(stars[j], basis[k], lam2, d2))
    herm_res = 0.0
    if ansatz_dim > 1:
        lower = np.tril_indices(ansatz_dim, -1)
        herm_res = float(np.max(np.abs(M_check[lower] - M[lower])))
    scale = float(np.max(np.abs(M))) or 1.0
    eigmin = float(np.min(np.linalg.eigvalsh((M + M.conj().T) / 2)))
    if eigmin < -1e-8 * scale:
        raise AnsatzDegenerateError(f"Gram matrix has eigenvalue {eigmin:.3e} < 0")
    try:
        sol = np.linalg.solve(M + 1e-14 * scale * np.eye(ansatz_dim), v)
    except np.linalg.LinAlgError as exc:
        raise AnsatzDegenerateError(str(exc)) from exc
    value = float(np.real(np.conj(v) @ sol)) / omega.norm_sq_l2()
    return NilpotentCoefficient(
        value, ansatz_dim, eigmin, herm_res, (r1, r2), lam1, lam2, index
    )


# ---------------------------------------------------------------------------
# the semidirect-product lattice-sum identity (Monte Carlo vs lattice sum)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HGaussian:
    """amp * exp(-aq |q|^2 - az z^2) on H3; U(1)-invariant by construction."""

    aq: float
    az: float
    amp: float = 1.0

    def __post_init__(self):
        if self.aq <= 0 or self.az <= 0:
            raise ValueError("Gaussian exponents must be positive")

    def eval(self, q, z) -> np.ndarray:
        return self.amp * np.exp(-self.aq * np.abs(q) ** 2 - self.az * np.asarray(z) ** 2)


def heis_group_autoconv(g: HGaussian, Q, Z) -> np.ndarray:
    """(g* * g)(Q, Z) on H3 in closed form.

    The central integral leaves a Gaussian of the shifted coordinate
    Z + beta(q, Q); completing the square in q gives a rank-one-corrected
    2D Gaussian integral.
    """
    Q = np.asarray(Q, dtype=complex)
    Z = np.asarray(Z, dtype=float)
    al, be = g.aq, g.az
    q1, q2 = Q.real, Q.imag
    v1, v2 = q2, -q1  # beta(q, Q) = q . v
    vv = v1 * v1 + v2 * v2
    det = 4 * al * al + al * be * vv
    c1 = 2 * al * q1 + be * Z * v1
    c2 = 2 * al * q2 + be * Z * v2
    # c^T A^{-1} c with A = 2 al I + (be/2) v v^T (Sherman-Morrison)
    cv = c1 * v1 + c2 * v2
    cAc = (c1 * c1 + c2 * c2) / (2 * al) - (be / 2) * cv * cv / (
        2 * al * (2 * al + (be / 2) * vv)
    )
    const = al * (q1 * q1 + q2 * q2) + (be / 2) * Z * Z
    return (
        g.amp**2
        * math.sqrt(math.pi / (2 * be))
        * math.pi
        / np.sqrt(det)
        * np.exp(cAc / 4 - const)
    )


def heis_group_autoconv_quad(g: HGaussian, Q: complex, Z: float) -> float:
    """3D quadrature oracle for the group autoconvolution."""

    def inner(z, x, y):
        q = x + 1j * y
        prod = g.eval(q, z) * g.eval(q + Q, z + Z + (np.conj(q) * Q).imag)
        return float(prod)

    L = math.sqrt(40.0 / g.aq) + abs(Q)
    Lz = math.sqrt(40.0 / g.az) + abs(Z) + (abs(Q) + L) * abs(Q)
    val, _ = integrate.tplquad(
        inner, -L, L, -L, L, -Lz, Lz, epsabs=1e-10, epsrel=1e-8
    )
    return val


@dataclass(frozen=True)
class LatticeSumIdentityReport:
    lattice_sum: float
    mc_norm: float
    mc_stderr: float
    rel_gap: float
    nsamples: int


def _lattice_sum_side(hscheme: HScheme, f: HGaussian, r: HGaussian, tail_exponent: float) -> float:
    """sum over Gamma_N of (f* * f)(gamma1) (r* * r)(gamma2).

    Candidates factor over Delta x Xi; blocks of Delta broadcast against all
    of Xi.  Truncation radii come from the Gaussian decay of the group
    autoconvolutions: e^{-a|Q|^2} in q and e^{-b(|Z| - S)^2/2} in the center,
    where S bounds |beta(q, Q)| over the significant q-range.
    """
    rq1 = math.sqrt(tail_exponent / f.aq) + 1e-9
    rq2 = math.sqrt(tail_exponent / r.aq) + 1e-9
    s1 = math.sqrt(tail_exponent / (2 * f.aq)) * rq1
    s2 = math.sqrt(tail_exponent / (2 * r.aq)) * rq2
    rz1 = math.sqrt(2 * tail_exponent / f.az) + s1
    rz2 = math.sqrt(2 * tail_exponent / r.az) + s2
    dcands = _delta_candidates(rq1, rq2)
    xB = np.array([[1.0, SQRT2], [1.0, -SQRT2]])
    xints = enumerate_box(xB, np.array([-rz1, -rz2]), np.array([rz1, rz2]))
    XI = xints @ xB.T
    d1 = (dcands[:, 0] + SQRT2 * dcands[:, 2]) + 1j * (dcands[:, 1] + SQRT2 * dcands[:, 3])
    d2 = (dcands[:, 0] - SQRT2 * dcands[:, 2]) + 1j * (dcands[:, 1] - SQRT2 * dcands[:, 3])
    total = 0.0
    block = 64
    for start in range(0, d1.shape[0], block):
        Q1 = d1[start : start + block][:, None]
        Q2 = d2[start : start + block][:, None]
        Z1 = XI[None, :, 0]
        Z2 = XI[None, :, 1]
        g1 = heis_group_autoconv(f, Q1, Z1)
        g2 = heis_group_autoconv(r, Q2, Z2)
        total += float(np.sum(g1 * g2))
    return total


def lattice_sum_identity_check(
    hscheme: HScheme,
    f: HGaussian,
    r: HGaussian,
    nsamples: int = 1_000_000,
    seed: int = 1,
    tail_exponent: float = 30.0,
) -> LatticeSumIdentityReport:
    """||P_Gamma(f (x) r)||^2 (Monte Carlo over a fundamental box, Lebesgue)
    against the lattice sum of (f* * f)(gamma1) (r* * r)(gamma2)."""
    B6 = hscheme.basis.columns
    lattice_sum = _lattice_sum_side(hscheme, f, r, 2 * tail_exponent)

    # Monte Carlo side: uniform samples in the centered fundamental box;
    # candidate translates cover the box plus the Gaussian support radii
    offset = -B6 @ np.full(6, 0.5)
    corners = _box_corners(np.stack([np.zeros(6), np.ones(6)], axis=1))
    box_pts = corners @ B6.T + offset
    bmin, bmax = box_pts.min(axis=0), box_pts.max(axis=0)
    CUT = 46.0  # matches the kernel's exponent cut
    rf = math.sqrt(CUT / f.aq)
    rr = math.sqrt(CUT / r.aq)
    rfz = math.sqrt(CUT / f.az)
    rrz = math.sqrt(CUT / r.az)
    qb1 = float(np.max(np.hypot(box_pts[:, 0], box_pts[:, 1])))
    qb2 = float(np.max(np.hypot(box_pts[:, 3], box_pts[:, 4])))
    beta1 = qb1 * (qb1 + rf)
    beta2 = qb2 * (qb2 + rr)

    dB = np.array(
        [
            [1.0, 0.0, SQRT2, 0.0],
            [0.0, 1.0, 0.0, SQRT2],
            [1.0, 0.0, -SQRT2, 0.0],
            [0.0, 1.0, 0.0, -SQRT2],
        ]
    )
    dlo = np.array([-bmax[0] - rf, -bmax[1] - rf, -bmax[3] - rr, -bmax[4] - rr])
    dhi = np.array([-bmin[0] + rf, -bmin[1] + rf, -bmin[3] + rr, -bmin[4] + rr])
    dints = enumerate_box(dB, dlo, dhi)
    dA = dints @ dB.T  # (n, 4): (Re d1, Im d1, Re d2, Im d2)
    dA = dA[np.argsort(dA[:, 0], kind="stable")]

    xB = np.array([[1.0, SQRT2], [1.0, -SQRT2]])
    xlo = np.array([-bmax[2] - rfz - beta1, -bmax[5] - rrz - beta2])
    xhi = np.array([-bmin[2] + rfz + beta1, -bmin[5] + rrz + beta2])
    xints = enumerate_box(xB, xlo, xhi)
    XI = xints @ xB.T
    XI = XI[np.argsort(XI[:, 0], kind="stable")]

    mc, stderr = mc_heis_periodization(
        seed, nsamples, B6, offset, dA, XI, f.aq, f.az, r.aq, r.az
    )
    # the kernel accumulates unit-amplitude exponentials; the closed-form
    # lattice side already carries the amplitudes
    ampsq = (f.amp * r.amp) ** 2
    mc *= ampsq
    stderr *= ampsq
    gap = abs(mc - lattice_sum) / max(abs(lattice_sum), 1e-300)
    return LatticeSumIdentityReport(lattice_sum, mc, stderr, gap, nsamples)
