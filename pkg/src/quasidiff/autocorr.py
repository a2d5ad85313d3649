"""Empirical spherical autocorrelation by window averaging.

The estimator is the normalized pair sum

    (1/vol(F_t)) sum_{x in P0 ∩ F_t} sum_{y in P0} delta_{x^{-1} y},

truncated to differences in a ball of radius R.  The inner sum runs over the
whole sample (not only F_t), so the sample region must contain an
R-neighbourhood of F_t.  Differences are grouped by their exact integer
lattice coordinates, which finite local complexity makes a faultless key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import j1

from .harmonic import PointGroup, orbit_representative
from .kernels import pairs_within
from .lattice import Region
from .scheme import ModelSet, Scheme, Window
from .testfun import TestFunction


class InsufficientMarginError(ValueError):
    """Sample region does not contain the R-neighbourhood of F_t."""


class SupportExceedsCutoffError(ValueError):
    """Test function support reaches beyond the stored cutoff radius."""


class TrivialCharacterError(ValueError):
    """The decay diagnostic excludes the trivial character xi = 0."""


@dataclass(frozen=True)
class EmpiricalAutocorrelation:
    """Finite-cutoff atom list c(z) of the empirical autocorrelation.

    ``z`` holds one representative vector per atom (the physical difference,
    or the orbit label after radialization); ``int_coords`` holds the exact
    lattice coordinates of the difference (dropped after radialization).
    """

    cutoff: float
    volume: float
    z: np.ndarray  # (M, k)
    coeffs: np.ndarray  # (M,)
    int_coords: Optional[np.ndarray] = None  # (M, d)
    radialized: bool = False

    @property
    def natoms(self) -> int:
        return self.z.shape[0]

    def coefficient(self, int_coords: Sequence[int]) -> float:
        if self.int_coords is None:
            raise ValueError("atom lookup by integer coordinates needs the raw atom list")
        target = np.asarray(int_coords, dtype=np.int64)
        hit = np.all(self.int_coords == target, axis=1)
        idx = np.nonzero(hit)[0]
        return float(self.coeffs[idx[0]]) if idx.size else 0.0

    def coefficient_at(self, zvec, tol: float = 1e-9) -> float:
        d = np.max(np.abs(self.z - np.asarray(zvec, dtype=float)), axis=1)
        idx = np.nonzero(d <= tol)[0]
        return float(self.coeffs[idx[0]]) if idx.size else 0.0

    def to_csv(self, path, group: Optional[PointGroup] = None):
        k = self.z.shape[1]
        header = [f"z{i}" for i in range(k)] + ["orbit_label", "coefficient"]
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            order = np.lexsort(self.z.T[::-1])
            for idx in order:
                zv = self.z[idx]
                if group is not None:
                    rep = orbit_representative(group, zv)
                else:
                    rep = tuple(zv)
                label = ";".join(f"{v:.17g}" for v in rep)
                row = [f"{v:.17g}" for v in zv] + [label, f"{self.coeffs[idx]:.17g}"]
                fh.write(",".join(row) + "\n")


def empirical_autocorr(
    model_set: ModelSet, averaging_region: Region, cutoff: float
) -> EmpiricalAutocorrelation:
    """Truncated pair-difference estimator over the averaging region F_t."""
    needed = averaging_region.expand(cutoff)
    if not model_set.region.contains_region(needed):
        raise InsufficientMarginError(
            "model-set region must contain the cutoff-neighbourhood of the "
            "averaging region (enlarge the sample or shrink F_t/R)"
        )
    vol = averaging_region.volume()
    if vol <= 0:
        raise ValueError("averaging region must have positive volume")
    if model_set.count == 0:
        return EmpiricalAutocorrelation(
            cutoff,
            vol,
            np.zeros((0, model_set.scheme.n_phys)),
            np.zeros(0),
            np.zeros((0, model_set.scheme.dim), dtype=np.int64),
        )
    mask = averaging_region.membership(model_set.points)
    I, J = pairs_within(model_set.points, mask, cutoff)
    dn = model_set.ints[J] - model_set.ints[I]
    uniq, counts = np.unique(dn, axis=0, return_counts=True)
    zvec = uniq @ model_set.scheme.physical_basis.T
    return EmpiricalAutocorrelation(
        cutoff, vol, zvec, counts / vol, uniq.astype(np.int64)
    )


def theoretical_autocorr_coeff(
    scheme: Scheme, window: Window, z_int_coords: Sequence[int]
) -> float:
    """c(z) = vol(W ∩ (W - z*)) / covol with z* the internal part of z."""
    n = np.asarray(z_int_coords, dtype=float)
    z_star = scheme.internal_basis @ n
    vol, _ = window_overlap_volume(window, z_star)
    return vol / scheme.covolume()


def window_overlap_volume(
    window: Window, shift, mc_samples: int = 1_000_000, seed: int = 2
) -> Tuple[float, float]:
    """vol(W ∩ (W - shift)) with a closed form for box/ball pieces.

    Mixed piece kinds fall back to Monte Carlo; returns (value, stderr)
    where stderr is 0 for closed forms.
    """
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    total = 0.0
    exact = True
    for s1, k1, p1 in window.pieces:
        for s2, k2, p2 in window.pieces:
            if k1 in ("hbox", "cbox") and k2 in ("hbox", "cbox"):
                b1 = np.asarray(p1)
                b2 = np.asarray(p2)
                # [a1,b1] ∩ [a2-s, b2-s] per coordinate
                lo = np.maximum(b1[:, 0], b2[:, 0] - shift)
                hi = np.minimum(b1[:, 1], b2[:, 1] - shift)
                total += s1 * s2 * float(np.prod(np.clip(hi - lo, 0, None)))
            elif k1 == "ball" and k2 == "ball" and window.dim in (1, 2):
                c1, r1 = np.asarray(p1[0]), p1[1]
                c2, r2 = np.asarray(p2[0]) - shift, p2[1]
                d = float(np.linalg.norm(c2 - c1))
                total += s1 * s2 * _ball_overlap(window.dim, r1, r2, d)
            else:
                exact = False
    if exact:
        return total, 0.0
    rng = np.random.default_rng(seed)
    bb = window.bounding_box()
    pts = rng.uniform(bb[:, 0], bb[:, 1], size=(mc_samples, window.dim))
    hits = (window.membership(pts) & window.membership(pts + shift)).astype(float)
    boxvol = float(np.prod(bb[:, 1] - bb[:, 0]))
    mean = hits.mean()
    stderr = hits.std(ddof=1) / math.sqrt(mc_samples)
    return mean * boxvol, stderr * boxvol


def _ball_overlap(dim: int, r1: float, r2: float, d: float) -> float:
    if d >= r1 + r2:
        return 0.0
    if dim == 1:
        lo, hi = max(-r1, d - r2), min(r1, d + r2)
        return max(0.0, hi - lo)
    if d <= abs(r1 - r2):
        r = min(r1, r2)
        return math.pi * r * r
    a1 = math.acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1))
    a2 = math.acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2))
    return (
        r1 * r1 * (a1 - math.sin(2 * a1) / 2)
        + r2 * r2 * (a2 - math.sin(2 * a2) / 2)
    )


def radialize(
    ac: EmpiricalAutocorrelation, group: PointGroup, tol: float = 1e-9
) -> EmpiricalAutocorrelation:
    """Merge atoms over K-orbits of the difference vectors.

    Orbit labels are the lexicographically minimal orbit elements; pairing
    against K-invariant test functions is preserved exactly.
    """
    if ac.natoms == 0:
        return replace(ac, radialized=True)
    reps = np.array([orbit_representative(group, z, tol) for z in ac.z])
    rounded = np.round(reps / tol) * tol
    uniq, inverse = np.unique(rounded, axis=0, return_inverse=True)
    coeffs = np.zeros(uniq.shape[0])
    np.add.at(coeffs, inverse, ac.coeffs)
    # carry exact representative values (first member of each class)
    rep_exact = np.zeros_like(uniq)
    for i in range(uniq.shape[0]):
        rep_exact[i] = reps[np.nonzero(inverse == i)[0][0]]
    return EmpiricalAutocorrelation(
        ac.cutoff, ac.volume, rep_exact, coeffs, None, radialized=True
    )


def pair_against_test_function(ac: EmpiricalAutocorrelation, f: TestFunction) -> float:
    """eta(f) = sum_z c(z) f(z); requires supp(f) inside the cutoff ball."""
    if f.support_radius() > ac.cutoff + 1e-9:
        raise SupportExceedsCutoffError(
            f"support radius {f.support_radius():.3g} exceeds cutoff {ac.cutoff:.3g}"
        )
    if ac.natoms == 0 or f.is_zero():
        return 0.0
    vals = f.eval(ac.z)
    total = complex(np.sum(ac.coeffs * vals))
    return float(total.real)


# ---------------------------------------------------------------------------
# good-approximation-sequence diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ApproxSequence:
    """Averaging family descriptor: boxes [-t,t]^n or balls of radius t."""

    kind: str  # "box" | "ball"
    dim: int
    scales: Tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("box", "ball"):
            raise ValueError("kind must be 'box' or 'ball'")
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])) or not self.scales:
            raise ValueError("scales must be nonempty and strictly increasing")
        if any(t <= 0 for t in self.scales):
            raise ValueError("scales must be positive")


def averaged_character_transform(seq: ApproxSequence, xi, t: float) -> float:
    """hat(beta_t)(xi) for the normalized indicator of F_t."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if seq.kind == "box":
        return float(np.prod(np.sinc(2.0 * xi * t)))
    rho = float(np.linalg.norm(xi))
    u = 2 * math.pi * rho * t
    if seq.dim == 1:
        return float(np.sinc(2 * rho * t))
    if seq.dim == 2:
        return 2 * j1(u) / u if u > 1e-12 else 1.0
    if seq.dim == 3:
        return 3 * (math.sin(u) - u * math.cos(u)) / u**3 if u > 1e-8 else 1.0
    raise NotImplementedError("ball transforms implemented for dim <= 3")


@dataclass(frozen=True)
class SequenceDiagnostic:
    values: Tuple[float, ...]  # |hat(beta_t)(xi)| per scale
    bounds: Tuple[float, ...]  # Fejer-type decay envelopes (boxes)
    passes: bool


def approx_sequence_diagnostic(
    seq: ApproxSequence, xi, threshold: Optional[float] = None
) -> SequenceDiagnostic:
    """Decay of |hat(beta_t)(xi)| along the scale list, with the closed
    1/(2 pi |xi_i| t) envelopes for boxes; xi = 0 is excluded."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.all(xi == 0):
        raise TrivialCharacterError("the trivial character is excluded from (GAS2)")
    values = tuple(abs(averaged_character_transform(seq, xi, t)) for t in seq.scales)
    bounds = []
    for t in seq.scales:
        if seq.kind == "box":
            nz = np.abs(xi[xi != 0])
            bounds.append(float(np.min(1.0 / (2 * math.pi * nz * t))))
        else:
            rho = float(np.linalg.norm(xi))
            bounds.append(min(1.0, (2 * math.pi * rho * t) ** (-(seq.dim + 1) / 2) * 4))
    if threshold is None:
        passes = all(v <= b + 1e-15 for v, b in zip(values, bounds))
    else:
        passes = max(values) <= threshold
    return SequenceDiagnostic(values, tuple(bounds), passes)


def estimator_stability(
    scheme: Scheme,
    window: Window,
    cutoff: float,
    scales: Sequence[float],
    build_model_set,
) -> Tuple[float, np.ndarray]:
    """Fit C with |c_t(z) - c_{2t}(z)| <= C / t over a scale doubling.

    ``build_model_set(t)`` must return a sample covering [-t-R, t+R].
    Returns (C, per-scale max deviations).
    """
    devs = []
    for t in scales:
        ac1 = empirical_autocorr(build_model_set(t), Region.interval(-t, t), cutoff)
        ac2 = empirical_autocorr(build_model_set(2 * t), Region.interval(-2 * t, 2 * t), cutoff)
        keys = set(map(tuple, ac1.int_coords)) | set(map(tuple, ac2.int_coords))
        dev = max(
            abs(ac1.coefficient(k) - ac2.coefficient(k)) for k in keys
        )
        devs.append(dev)
    devs = np.asarray(devs)
    C = float(np.max(devs * np.asarray(scales)))
    return C, devs
