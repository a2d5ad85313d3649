"""Lattice bases, duals, covolumes and point enumeration in compact regions.

A lattice is given by the columns of a full-rank square matrix.  Bases may
carry an exact quadratic-field form (entries a + b*sqrt(s)); when present it
is kept in sync with the float matrix and used for exact duals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import qexact
from .kernels import enumerate_box


class DegenerateLatticeError(ValueError):
    """Raised when a basis matrix is singular (or numerically so)."""


class UnboundedRegionError(ValueError):
    """Raised when an operation needs a bounded region."""


@dataclass(frozen=True)
class Region:
    """Axis box, half-open axis box (lower-closed) or closed ball."""

    kind: str  # "axis-box" | "half-open-box" | "ball"
    bounds: Optional[np.ndarray] = None  # (d, 2) for boxes
    center: Optional[np.ndarray] = None  # (d,) for balls
    radius: float = 0.0

    @staticmethod
    def box(bounds: Sequence[Sequence[float]], half_open: bool = False) -> "Region":
        b = np.atleast_2d(np.asarray(bounds, dtype=float))
        return Region("half-open-box" if half_open else "axis-box", bounds=b)

    @staticmethod
    def interval(lo: float, hi: float, half_open: bool = False) -> "Region":
        return Region.box([[lo, hi]], half_open=half_open)

    @staticmethod
    def ball(center: Sequence[float], radius: float) -> "Region":
        if radius < 0:
            raise ValueError("radius must be >= 0")
        return Region("ball", center=np.atleast_1d(np.asarray(center, dtype=float)), radius=radius)

    @property
    def dim(self) -> int:
        return self.bounds.shape[0] if self.bounds is not None else self.center.shape[0]

    def is_empty(self) -> bool:
        if self.kind == "ball":
            return False
        return bool(np.any(self.bounds[:, 1] < self.bounds[:, 0]))

    def bounding_box(self) -> np.ndarray:
        if self.kind == "ball":
            return np.stack([self.center - self.radius, self.center + self.radius], axis=1)
        return self.bounds.copy()

    def volume(self) -> float:
        if self.kind == "ball":
            d = self.dim
            from math import gamma, pi

            return pi ** (d / 2) / gamma(d / 2 + 1) * self.radius**d
        w = np.clip(self.bounds[:, 1] - self.bounds[:, 0], 0.0, None)
        return float(np.prod(w))

    def membership(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "ball":
            d2 = np.sum((pts - self.center) ** 2, axis=1)
            return d2 <= self.radius**2 + 1e-12
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if self.kind == "half-open-box":
            return np.all((pts >= lo) & (pts < hi), axis=1)
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def expand(self, margin: float) -> "Region":
        """Region enlarged by ``margin`` in every direction (conservative)."""
        if self.kind == "ball":
            return Region.ball(self.center, self.radius + margin)
        b = self.bounds.copy()
        b[:, 0] -= margin
        b[:, 1] += margin
        return Region(self.kind, bounds=b)

    def contains_region(self, other: "Region") -> bool:
        obb = other.bounding_box()
        sbb = self.bounding_box()
        inside_bb = bool(np.all(obb[:, 0] >= sbb[:, 0] - 1e-12) and np.all(obb[:, 1] <= sbb[:, 1] + 1e-12))
        if self.kind == "ball":
            corners = _box_corners(obb)
            return bool(np.all(np.sum((corners - self.center) ** 2, axis=1) <= self.radius**2 + 1e-12))
        return inside_bb


def _box_corners(bb: np.ndarray) -> np.ndarray:
    d = bb.shape[0]
    idx = np.indices((2,) * d).reshape(d, -1).T
    return bb[np.arange(d), idx]


@dataclass(frozen=True)
class LatticeBasis:
    """Full-rank lattice: column j of ``columns`` is the j-th generator."""

    columns: np.ndarray
    exact: Optional[list] = field(default=None, repr=False)  # QSqrt rows, optional

    def __post_init__(self):
        cols = np.ascontiguousarray(np.asarray(self.columns, dtype=float))
        if cols.ndim != 2 or cols.shape[0] != cols.shape[1]:
            raise ValueError("basis must be a square matrix")
        object.__setattr__(self, "columns", cols)
        self.columns.setflags(write=False)
        if abs(np.linalg.det(cols)) < 1e-12 * max(1.0, np.abs(cols).max() ** cols.shape[0]):
            raise DegenerateLatticeError("basis matrix is singular")
        if self.exact is not None:
            approx = qexact.qmat_to_float(self.exact)
            if approx.shape != cols.shape or np.max(np.abs(approx - cols)) > 1e-12:
                raise ValueError("exact form disagrees with float matrix beyond 1e-12")

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    @staticmethod
    def from_exact(rows, s: int = 2) -> "LatticeBasis":
        exact = qexact.qmat_from_triples(rows, s=s)
        return LatticeBasis(qexact.qmat_to_float(exact), exact=exact)

    def point(self, n: Sequence[int]) -> np.ndarray:
        return self.columns @ np.asarray(n, dtype=float)


def covolume(basis: LatticeBasis) -> float:
    """|det| of the basis matrix (Haar volume of a fundamental domain)."""
    det = np.linalg.det(basis.columns)
    if abs(det) < 1e-300:
        raise DegenerateLatticeError("zero determinant")
    return abs(float(det))


def dual_lattice(basis: LatticeBasis) -> LatticeBasis:
    """Inverse-transpose basis: <dual_i, primal_j> = delta_ij.

    With the character convention chi_lambda(x) = exp(2*pi*i*<lambda, x>)
    this is exactly the annihilator lattice of the primal.
    """
    try:
        cols = np.linalg.inv(basis.columns).T
    except np.linalg.LinAlgError as exc:
        raise DegenerateLatticeError(str(exc)) from exc
    exact = None
    if basis.exact is not None:
        exact = qexact.qmat_transpose(qexact.qmat_inverse(basis.exact))
    return LatticeBasis(cols, exact=exact)


def enumerate_points(basis: LatticeBasis, region: Region, cap: int = 50_000_000):
    """Lattice points inside ``region``.

    Returns ``(ints, points)``: integer coordinates (lexicographically
    sorted) and the corresponding points.  The search box comes from the
    inverse basis applied to the region's bounding box; exact membership is
    then applied per point.
    """
    if region.kind == "ball" and not np.isfinite(region.radius):
        raise UnboundedRegionError("region must be bounded")
    bb = region.bounding_box()
    if not np.all(np.isfinite(bb)):
        raise UnboundedRegionError("region must be bounded")
    if region.is_empty():
        return np.zeros((0, basis.dim), dtype=np.int64), np.zeros((0, basis.dim))
    ints = enumerate_box(basis.columns, bb[:, 0] - 1e-9, bb[:, 1] + 1e-9, cap=cap)
    points = ints @ basis.columns.T
    keep = region.membership(points)
    return ints[keep], points[keep]


def lattice_membership(basis: LatticeBasis, x: np.ndarray, tol: float = 1e-9):
    """Integer coordinates of x if x lies in the lattice, else None."""
    n = np.linalg.solve(basis.columns, np.asarray(x, dtype=float))
    rounded = np.round(n)
    if np.max(np.abs(n - rounded)) <= tol:
        return rounded.astype(np.int64)
    return None
