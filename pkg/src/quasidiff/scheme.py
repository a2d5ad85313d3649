"""Cut-and-project schemes, windows and model sets.

A scheme is a full-rank lattice in R^(n+m) together with the splitting into
the first n (physical) and last m (internal) coordinates.  A model set
collects the physical parts of the lattice points whose internal parts fall
into a compact window, restricted to a bounded physical region.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import j1

from .kernels import pairs_within
from .lattice import (
    LatticeBasis,
    Region,
    UnboundedRegionError,
    covolume,
    enumerate_points,
)


class SchemeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    """Compact internal-space region: signed combination of boxes and balls.

    Boxes are half-open (lower-closed) by default so that translates tile
    exactly; balls are closed.  The signed combination must itself be an
    indicator (unions of disjoint pieces, set differences of nested pieces);
    volume and Fourier transform are linear in the pieces.
    """

    dim: int
    pieces: Tuple[Tuple[float, str, tuple], ...]  # (sign, kind, params)

    @staticmethod
    def box(bounds: Sequence[Sequence[float]], half_open: bool = True) -> "Window":
        b = np.atleast_2d(np.asarray(bounds, dtype=float))
        if np.any(b[:, 1] < b[:, 0]):
            raise ValueError("box bounds must be ordered")
        kind = "hbox" if half_open else "cbox"
        return Window(b.shape[0], ((1.0, kind, tuple(map(tuple, b))),))

    @staticmethod
    def interval(lo: float, hi: float, half_open: bool = True) -> "Window":
        return Window.box([[lo, hi]], half_open=half_open)

    @staticmethod
    def ball(center: Sequence[float], radius: float) -> "Window":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if radius < 0:
            raise ValueError("radius must be >= 0")
        return Window(c.shape[0], ((1.0, "ball", (tuple(c), float(radius))),))

    @staticmethod
    def empty(dim: int) -> "Window":
        return Window(dim, ())

    def union(self, other: "Window") -> "Window":
        """Union of windows assumed disjoint (volumes add)."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return Window(self.dim, self.pieces + other.pieces)

    def difference(self, other: "Window") -> "Window":
        """Set difference with ``other`` assumed contained in ``self``."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        flipped = tuple((-s, k, p) for (s, k, p) in other.pieces)
        return Window(self.dim, self.pieces + flipped)

    def is_empty(self) -> bool:
        return len(self.pieces) == 0 or self.volume() <= 0

    # -- geometry ----------------------------------------------------------

    def volume(self) -> float:
        total = 0.0
        for sign, kind, params in self.pieces:
            if kind in ("hbox", "cbox"):
                b = np.asarray(params)
                total += sign * float(np.prod(np.clip(b[:, 1] - b[:, 0], 0, None)))
            else:
                c, r = params
                d = len(c)
                total += sign * math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d
        return total

    def bounding_box(self) -> np.ndarray:
        if not self.pieces:
            return np.zeros((self.dim, 2))
        lo = np.full(self.dim, np.inf)
        hi = np.full(self.dim, -np.inf)
        for _, kind, params in self.pieces:
            if kind in ("hbox", "cbox"):
                b = np.asarray(params)
                lo = np.minimum(lo, b[:, 0])
                hi = np.maximum(hi, b[:, 1])
            else:
                c, r = params
                lo = np.minimum(lo, np.asarray(c) - r)
                hi = np.maximum(hi, np.asarray(c) + r)
        return np.stack([lo, hi], axis=1)

    def diameter(self) -> float:
        bb = self.bounding_box()
        return float(np.linalg.norm(bb[:, 1] - bb[:, 0]))

    def membership(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        acc = np.zeros(pts.shape[0])
        for sign, kind, params in self.pieces:
            if kind == "hbox":
                b = np.asarray(params)
                ind = np.all((pts >= b[:, 0]) & (pts < b[:, 1]), axis=1)
            elif kind == "cbox":
                b = np.asarray(params)
                ind = np.all((pts >= b[:, 0]) & (pts <= b[:, 1]), axis=1)
            else:
                c, r = params
                ind = np.sum((pts - np.asarray(c)) ** 2, axis=1) <= r * r
            acc += sign * ind
        return acc > 0.5

    # -- Fourier transform ---------------------------------------------------

    def ft(self, xi) -> np.ndarray:
        """Closed-form transform int_W exp(-2 pi i <xi, x>) dx."""
        freq = np.atleast_2d(np.asarray(xi, dtype=float))
        out = np.zeros(freq.shape[0], dtype=complex)
        for sign, kind, params in self.pieces:
            if kind in ("hbox", "cbox"):
                b = np.asarray(params)
                val = np.ones(freq.shape[0], dtype=complex)
                for d in range(self.dim):
                    lo, hi = b[d]
                    w, c = hi - lo, (hi + lo) / 2
                    val = val * (w * np.sinc(w * freq[:, d])) * np.exp(
                        -2j * math.pi * freq[:, d] * c
                    )
                out += sign * val
            else:
                c, r = params
                c = np.asarray(c)
                rho = np.linalg.norm(freq, axis=1)
                phase = np.exp(-2j * math.pi * (freq @ c))
                if self.dim == 1:
                    val = 2 * r * np.sinc(2 * r * rho)
                elif self.dim == 2:
                    u = 2 * math.pi * r * rho
                    with np.errstate(invalid="ignore", divide="ignore"):
                        val = np.where(u > 1e-12, r * j1(u) / np.where(rho > 0, rho, 1.0), math.pi * r**2)
                elif self.dim == 3:
                    u = 2 * math.pi * r * rho
                    with np.errstate(invalid="ignore", divide="ignore"):
                        val = np.where(
                            u > 1e-8,
                            (np.sin(u) - u * np.cos(u)) / (2 * math.pi**2 * np.where(rho > 0, rho, 1.0) ** 3),
                            4 / 3 * math.pi * r**3,
                        )
                else:
                    raise NotImplementedError("ball FT implemented for dim <= 3")
                out += sign * phase * val
        return out


# ---------------------------------------------------------------------------
# schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scheme:
    """Cut-and-project data: lattice in R^(n+m) with an n/m splitting."""

    n_phys: int
    m_int: int
    gamma: LatticeBasis
    name: str = ""
    check_radius: float = field(default=8.0, repr=False)

    def __post_init__(self):
        if self.n_phys + self.m_int != self.gamma.dim:
            raise SchemeError("physical + internal dimensions must match the lattice")
        self._check_injectivity()

    @property
    def dim(self) -> int:
        return self.gamma.dim

    def physical(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points)[:, : self.n_phys]

    def internal(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points)[:, self.n_phys :]

    @property
    def physical_basis(self) -> np.ndarray:
        return self.gamma.columns[: self.n_phys]

    @property
    def internal_basis(self) -> np.ndarray:
        return self.gamma.columns[self.n_phys :]

    def covolume(self) -> float:
        return covolume(self.gamma)

    def _check_injectivity(self):
        """Injectivity proxy: nonzero lattice points with physical part ~ 0.

        A violation is only a warning: rational toy schemes (Z x Z) carry
        such points yet still define model sets for small windows; the hard
        uniform-discreteness check happens at model-set construction.
        """
        if self.check_radius <= 0:
            return
        R = self.check_radius
        box = Region.box([[-R, R]] * self.dim)
        ints, pts = enumerate_points(self.gamma, box)
        phys = self.physical(pts)
        bad = (np.linalg.norm(phys, axis=1) <= 1e-9) & np.any(ints != 0, axis=1)
        if np.any(bad):
            warnings.warn(
                "lattice point with vanishing physical part: "
                f"{ints[bad][0].tolist()} (physical projection not injective; "
                "model sets require windows small enough to avoid duplicates)",
                stacklevel=3,
            )

    def dense_projection_report(self, radius: float = 50.0, eps: Optional[float] = None):
        """Fill distance of internal projections in the window-scale box.

        Warns (never raises) when the sampled projections are not eps-dense:
        density of the internal projection is an asymptotic property that a
        finite sample cannot certify.
        """
        box = Region.box(
            [[-radius, radius]] * self.n_phys + [[-2.0, 2.0]] * self.m_int
        )
        _, pts = enumerate_points(self.gamma, box)
        internal = self.internal(pts)
        if eps is None:
            eps = 0.05 * 4.0
        grid_axes = [np.arange(-1.0, 1.0 + 1e-9, eps / 2) for _ in range(self.m_int)]
        mesh = np.stack(np.meshgrid(*grid_axes, indexing="ij"), axis=-1).reshape(-1, self.m_int)
        fill = 0.0
        for chunk in np.array_split(mesh, max(1, len(mesh) // 4096)):
            d = np.min(
                np.linalg.norm(chunk[:, None, :] - internal[None, :, :], axis=2), axis=1
            )
            fill = max(fill, float(d.max()))
        if fill > eps:
            warnings.warn(
                f"internal projections not {eps:.3g}-dense at radius {radius} "
                f"(fill distance {fill:.3g})",
                stacklevel=2,
            )
        return fill


# ---------------------------------------------------------------------------
# model sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSet:
    scheme: Scheme
    window: Window
    region: Region
    ints: np.ndarray  # (N, n+m) integer lattice coordinates
    points: np.ndarray  # (N, n) physical points
    internal_points: np.ndarray  # (N, m)

    @property
    def count(self) -> int:
        return self.ints.shape[0]

    def to_csv(self, path):
        n, m = self.scheme.n_phys, self.scheme.m_int
        header = (
            [f"n{i}" for i in range(n + m)]
            + [f"x{i}" for i in range(n)]
            + [f"y{i}" for i in range(m)]
        )
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for k in range(self.count):
                row = [str(int(v)) for v in self.ints[k]]
                row += [f"{v:.17g}" for v in self.points[k]]
                row += [f"{v:.17g}" for v in self.internal_points[k]]
                fh.write(",".join(row) + "\n")


def cut_and_project(scheme: Scheme, window: Window, region: Region) -> ModelSet:
    """Points p_G(gamma) with p_H(gamma) in the window and p_G(gamma) in region."""
    if window.dim != scheme.m_int:
        raise SchemeError("window dimension must equal the internal dimension")
    if region.dim != scheme.n_phys:
        raise SchemeError("region dimension must equal the physical dimension")
    bb_region = region.bounding_box()
    if not np.all(np.isfinite(bb_region)):
        raise UnboundedRegionError("region must be bounded")
    if window.is_empty() and not window.pieces:
        empty = np.zeros((0, scheme.dim), dtype=np.int64)
        return ModelSet(
            scheme,
            window,
            region,
            empty,
            np.zeros((0, scheme.n_phys)),
            np.zeros((0, scheme.m_int)),
        )
    bb_window = window.bounding_box()
    full = Region.box(np.vstack([bb_region, bb_window]))
    ints, pts = enumerate_points(scheme.gamma, full)
    phys = scheme.physical(pts)
    internal = scheme.internal(pts)
    keep = window.membership(internal) & region.membership(phys)
    phys_kept = phys[keep]
    if phys_kept.shape[0] > 1:
        uniq = np.unique(np.round(phys_kept, 9), axis=0)
        if uniq.shape[0] != phys_kept.shape[0]:
            raise SchemeError(
                "duplicate physical points: window too large for a scheme "
                "whose physical projection is not injective"
            )
    return ModelSet(scheme, window, region, ints[keep], phys_kept, internal[keep])


def density(model_set: ModelSet) -> float:
    """Point count divided by the region volume."""
    vol = model_set.region.volume()
    if vol <= 0:
        raise ValueError("region has zero volume")
    return model_set.count / vol


def flc_report(model_set: ModelSet, probe_radius: float) -> Tuple[float, int]:
    """(min pairwise distance, max point count in a probe ball).

    Balls are centered at every sample point (center included in its count).
    """
    if model_set.count < 2:
        raise ValueError("need at least two points")
    pts = model_set.points
    mask = np.ones(model_set.count, dtype=bool)
    I, J = pairs_within(pts, mask, probe_radius)
    occupancy = np.bincount(I, minlength=model_set.count)
    neq = I != J
    if np.any(neq):
        d = np.linalg.norm(pts[I[neq]] - pts[J[neq]], axis=1)
        min_dist = float(d.min())
    else:
        # no neighbours within the probe radius: widen until a pair appears
        radius = probe_radius
        min_dist = math.inf
        while not np.any(neq):
            radius *= 2
            I, J = pairs_within(pts, mask, radius)
            neq = I != J
        d = np.linalg.norm(pts[I[neq]] - pts[J[neq]], axis=1)
        min_dist = float(d.min())
    return min_dist, int(occupancy.max())


def flc_count_bound(scheme: Scheme, window: Window, region: Region) -> int:
    """Upper bound on |model set ∩ region| from covolume and window size.

    Every point of R^d lies within rho of a lattice point, with rho at most
    half the sum of the generator norms; expanding (region x window) by rho
    and dividing by the covolume bounds the count.
    """
    rho = 0.5 * float(np.sum(np.linalg.norm(scheme.gamma.columns, axis=0)))
    bb = np.vstack([region.bounding_box(), window.bounding_box()])
    widths = bb[:, 1] - bb[:, 0] + 2 * rho
    return int(math.ceil(float(np.prod(widths)) / scheme.covolume()))
