"""Hot numeric kernels: lattice-box enumeration, pair sweeps, Monte Carlo.

Every kernel here exists twice: a numba ``@njit`` version and a pure-numpy
fallback with identical semantics.  Dispatch follows
:func:`quasidiff._backend.active_backend`; both implementations are exposed
so tests and the benchmark script can compare them directly.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import HAVE_NUMBA, use_numba

_EPS = 1e-9


# ---------------------------------------------------------------------------
# integer-point enumeration in a box:  { n in Z^d : lo <= B n <= hi }
#
# Depth-first odometer over integer coordinates in a fixed processing order.
# At each level the feasible interval for the current coordinate is obtained
# by interval arithmetic: every row i of B gives
#     lo[i] - p[i] - SU[l,i] <= B[i,l]*n_l <= hi[i] - p[i] - SL[l,i]
# where p is the partial sum of the fixed coordinates and SL/SU bound the
# contribution of the not-yet-fixed ones (from global per-coordinate ranges).
# ---------------------------------------------------------------------------


def _enum_prep(B: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Processing order, global integer ranges and suffix slack tables."""
    d = B.shape[0]
    Binv = np.linalg.inv(B)
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    c = Binv @ center
    r = np.abs(Binv) @ half
    glo_all = np.floor(c - r - _EPS).astype(np.int64)
    ghi_all = np.ceil(c + r + _EPS).astype(np.int64)
    order = np.argsort(ghi_all - glo_all, kind="stable").astype(np.int64)
    Bord = np.ascontiguousarray(B[:, order])
    glo = glo_all[order]
    ghi = ghi_all[order]
    SL = np.zeros((d, d))
    SU = np.zeros((d, d))
    for lev in range(d - 1, -1, -1):
        if lev < d - 1:
            contrib_lo = np.minimum(Bord[:, lev + 1] * glo[lev + 1], Bord[:, lev + 1] * ghi[lev + 1])
            contrib_hi = np.maximum(Bord[:, lev + 1] * glo[lev + 1], Bord[:, lev + 1] * ghi[lev + 1])
            SL[lev] = SL[lev + 1] + contrib_lo
            SU[lev] = SU[lev + 1] + contrib_hi
    return Bord, order, glo, ghi, SL, SU


def _level_bounds_py(Bord, lo, hi, P_l, SL_l, SU_l, glo_l, ghi_l):
    tlo, thi = float(glo_l), float(ghi_l)
    for i in range(Bord.shape[0]):
        denom = Bord[i]
        blo = lo[i] - P_l[i] - SU_l[i]
        bhi = hi[i] - P_l[i] - SL_l[i]
        if abs(denom) < 1e-13:
            if blo > _EPS or bhi < -_EPS:
                return 0, -1
        else:
            t1, t2 = blo / denom, bhi / denom
            if t1 > t2:
                t1, t2 = t2, t1
            tlo = max(tlo, t1)
            thi = min(thi, t2)
    return int(math.ceil(tlo - _EPS)), int(math.floor(thi + _EPS))


def enumerate_box_numpy(B, lo, hi, cap: int = 50_000_000) -> np.ndarray:
    """Reference implementation (recursive, python-level loops)."""
    d = B.shape[0]
    Bord, order, glo, ghi, SL, SU = _enum_prep(B, lo, hi)
    out = []
    n = np.zeros(d, dtype=np.int64)
    P = np.zeros((d + 1, d))

    def descend(level):
        nlo, nhi = _level_bounds_py(
            Bord[:, level], lo, hi, P[level], SL[level], SU[level], glo[level], ghi[level]
        )
        for v in range(nlo, nhi + 1):
            n[level] = v
            P[level + 1] = P[level] + Bord[:, level] * v
            if level == d - 1:
                out.append(n.copy())
                if len(out) > cap:
                    raise MemoryError("enumeration cap exceeded")
            else:
                descend(level + 1)

    descend(0)
    if not out:
        return np.zeros((0, d), dtype=np.int64)
    arr = np.array(out, dtype=np.int64)
    res = np.zeros_like(arr)
    res[:, order] = arr
    return res[np.lexsort(res.T[::-1])]


if HAVE_NUMBA:
    from numba import njit, prange

    @njit(cache=True)
    def _enum_box_nb(Bord, lo, hi, glo, ghi, SL, SU, cap):
        d = Bord.shape[1]
        out = np.empty((1024, d), dtype=np.int64)
        count = 0
        n = np.zeros(d, dtype=np.int64)
        lob = np.zeros(d, dtype=np.int64)
        hib = np.zeros(d, dtype=np.int64)
        P = np.zeros((d + 1, d))
        level = 0
        # bounds for level 0
        tlo, thi = float(glo[0]), float(ghi[0])
        for i in range(d):
            denom = Bord[i, 0]
            blo = lo[i] - SU[0, i]
            bhi = hi[i] - SL[0, i]
            if abs(denom) < 1e-13:
                if blo > _EPS or bhi < -_EPS:
                    thi = tlo - 1.0
            else:
                t1 = blo / denom
                t2 = bhi / denom
                if t1 > t2:
                    t1, t2 = t2, t1
                if t1 > tlo:
                    tlo = t1
                if t2 < thi:
                    thi = t2
        lob[0] = np.int64(math.ceil(tlo - _EPS))
        hib[0] = np.int64(math.floor(thi + _EPS))
        n[0] = lob[0]
        while level >= 0:
            if n[level] > hib[level]:
                level -= 1
                if level >= 0:
                    n[level] += 1
                continue
            for i in range(d):
                P[level + 1, i] = P[level, i] + Bord[i, level] * n[level]
            if level == d - 1:
                if count == out.shape[0]:
                    if 2 * out.shape[0] > cap:
                        return out[:0], -1
                    bigger = np.empty((2 * out.shape[0], d), dtype=np.int64)
                    bigger[:count] = out
                    out = bigger
                out[count] = n
                count += 1
                n[level] += 1
            else:
                level += 1
                tlo = float(glo[level])
                thi = float(ghi[level])
                for i in range(d):
                    denom = Bord[i, level]
                    blo = lo[i] - P[level, i] - SU[level, i]
                    bhi = hi[i] - P[level, i] - SL[level, i]
                    if abs(denom) < 1e-13:
                        if blo > _EPS or bhi < -_EPS:
                            thi = tlo - 1.0
                    else:
                        t1 = blo / denom
                        t2 = bhi / denom
                        if t1 > t2:
                            t1, t2 = t2, t1
                        if t1 > tlo:
                            tlo = t1
                        if t2 < thi:
                            thi = t2
                lob[level] = np.int64(math.ceil(tlo - _EPS))
                hib[level] = np.int64(math.floor(thi + _EPS))
                n[level] = lob[level]
        return out[:count], count

    def enumerate_box_numba(B, lo, hi, cap: int = 50_000_000) -> np.ndarray:
        d = B.shape[0]
        Bord, order, glo, ghi, SL, SU = _enum_prep(B, lo, hi)
        arr, count = _enum_box_nb(
            Bord,
            np.ascontiguousarray(lo, dtype=float),
            np.ascontiguousarray(hi, dtype=float),
            glo,
            ghi,
            SL,
            SU,
            cap,
        )
        if count < 0:
            raise MemoryError("enumeration cap exceeded")
        if count == 0:
            return np.zeros((0, d), dtype=np.int64)
        res = np.zeros_like(arr)
        res[:, order] = arr
        return res[np.lexsort(res.T[::-1])]

else:  # pragma: no cover
    enumerate_box_numba = None


def enumerate_box(B, lo, hi, cap: int = 50_000_000) -> np.ndarray:
    """All integer n with lo <= B@n <= hi, lexicographically sorted."""
    B = np.asarray(B, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi < lo):
        return np.zeros((0, B.shape[0]), dtype=np.int64)
    if use_numba():
        return enumerate_box_numba(B, lo, hi, cap)
    return enumerate_box_numpy(B, lo, hi, cap)


# ---------------------------------------------------------------------------
# ordered pair sweep:  emit (i, j) with i a source point and |p_j - p_i| <= R
# (includes j == i).  Points are sorted by the first coordinate and windows
# found by a moving left pointer, so the cost is sources x local neighbours.
# ---------------------------------------------------------------------------


def _pairs_sorted_numpy(pts, src_idx, R):
    x0 = pts[:, 0]
    left = np.searchsorted(x0, x0[src_idx] - R - 1e-12, side="left")
    right = np.searchsorted(x0, x0[src_idx] + R + 1e-12, side="right")
    I = []
    J = []
    R2 = R * R * (1 + 1e-12)
    for k, i in enumerate(src_idx):
        lo, hi = left[k], right[k]
        block = pts[lo:hi] - pts[i]
        d2 = np.einsum("ij,ij->i", block, block)
        sel = np.nonzero(d2 <= R2)[0] + lo
        J.append(sel)
        I.append(np.full(sel.shape, i, dtype=np.int64))
    if not I:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(I), np.concatenate(J)


if HAVE_NUMBA:

    @njit(cache=True)
    def _pairs_sorted_nb(pts, is_src, R):
        N = pts.shape[0]
        d = pts.shape[1]
        R2 = R * R * (1 + 1e-12)
        cap = max(1024, 8 * N)
        I = np.empty(cap, dtype=np.int64)
        J = np.empty(cap, dtype=np.int64)
        count = 0
        left = 0
        for i in range(N):
            if not is_src[i]:
                continue
            while pts[left, 0] < pts[i, 0] - R - 1e-12:
                left += 1
            j = left
            while j < N and pts[j, 0] <= pts[i, 0] + R + 1e-12:
                d2 = 0.0
                for t in range(d):
                    diff = pts[j, t] - pts[i, t]
                    d2 += diff * diff
                if d2 <= R2:
                    if count == cap:
                        cap *= 2
                        I2 = np.empty(cap, dtype=np.int64)
                        J2 = np.empty(cap, dtype=np.int64)
                        I2[:count] = I[:count]
                        J2[:count] = J[:count]
                        I, J = I2, J2
                    I[count] = i
                    J[count] = j
                    count += 1
                j += 1
        return I[:count], J[:count]


def pairs_within(points: np.ndarray, source_mask: np.ndarray, radius: float):
    """Ordered pairs (i, j), i restricted to ``source_mask``, |p_j - p_i| <= radius.

    Returns index arrays into the original point order.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    order = np.argsort(points[:, 0], kind="stable")
    pts = np.ascontiguousarray(points[order])
    mask = np.asarray(source_mask, dtype=bool)[order]
    if use_numba():
        I, J = _pairs_sorted_nb(pts, mask, float(radius))
    else:
        I, J = _pairs_sorted_numpy(pts, np.nonzero(mask)[0], float(radius))
    return order[I], order[J]


# ---------------------------------------------------------------------------
# counter-based uniforms (splitmix64): reproducible independent of threading
# ---------------------------------------------------------------------------

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64_uniform_numpy(seed: int, start: int, count: int, width: int) -> np.ndarray:
    """uniforms[k, w] for global sample indices start..start+count-1."""
    idx = np.arange(start, start + count, dtype=np.uint64)[:, None] * np.uint64(width)
    idx = idx + np.arange(width, dtype=np.uint64)[None, :]
    z = (np.uint64(seed) + (idx + np.uint64(1)) * _SM_GAMMA).astype(np.uint64)
    z ^= z >> np.uint64(30)
    z *= _SM_M1
    z ^= z >> np.uint64(27)
    z *= _SM_M2
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


if HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _sm64(seed, idx):
        z = seed + (idx + np.uint64(1)) * _SM_GAMMA
        z = z ^ (z >> np.uint64(30))
        z = z * _SM_M1
        z = z ^ (z >> np.uint64(27))
        z = z * _SM_M2
        z = z ^ (z >> np.uint64(31))
        return np.float64(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


# ---------------------------------------------------------------------------
# Monte Carlo periodization norm for the Heisenberg lattice-sum identity
#
# F = f (x) r with radial Gaussians f = exp(-af|q1|^2 - bf z1^2) on N1 and
# r = exp(-ar|q2|^2 - br z2^2) on N2.  Samples m are uniform in the
# fundamental box spanned by the 6 lattice generators; the periodization
#     P(m) = sum_{delta, xi} f((q1,z1)(d1,x1)) r((q2,z2)(d2,x2))
# runs over precomputed candidate lists for delta in Delta and xi in Xi.
# Group translation enters through beta(q, delta) in the central coordinate.
# ---------------------------------------------------------------------------

_EXP_CUT = 46.0  # exp(-46) ~ 1e-20: far below any reported tolerance

# Candidate lists are sorted by their first column; each sample scans only
# the windows |q1r + d1r| <= rq and |v1 + xi1| <= rz1 located by binary
# search.  Terms outside the windows fail the exponent cut anyway.


def _mc_heis_chunk_numpy(seed, start, count, Bfd, offset, dA, XI, af, bf, ar, br):
    u = splitmix64_uniform_numpy(seed, start, count, 6)
    m = u @ Bfd.T + offset
    q1r, q1i, z1 = m[:, 0], m[:, 1], m[:, 2]
    q2r, q2i, z2 = m[:, 3], m[:, 4], m[:, 5]
    P = np.zeros(count)
    for k in range(dA.shape[0]):
        d1r, d1i, d2r, d2i = dA[k]
        eq = -af * ((q1r + d1r) ** 2 + (q1i + d1i) ** 2) - ar * (
            (q2r + d2r) ** 2 + (q2i + d2i) ** 2
        )
        alive = eq > -_EXP_CUT
        if not np.any(alive):
            continue
        v1 = z1[alive] + q1r[alive] * d1i - q1i[alive] * d1r
        v2 = z2[alive] + q2r[alive] * d2i - q2i[alive] * d2r
        acc = np.zeros(v1.shape[0])
        for t in range(XI.shape[0]):
            e = eq[alive] - bf * (v1 + XI[t, 0]) ** 2 - br * (v2 + XI[t, 1]) ** 2
            sel = e > -_EXP_CUT
            acc[sel] += np.exp(e[sel])
        P[alive] += acc
    s = P * P
    return float(s.sum()), float((s * s).sum())


def mc_heis_periodization_numpy(
    seed, nsamples, Bfd, offset, dA, XI, af, bf, ar, br, chunk=8192
):
    total = 0.0
    total2 = 0.0
    done = 0
    while done < nsamples:
        c = min(chunk, nsamples - done)
        s, s2 = _mc_heis_chunk_numpy(seed, done, c, Bfd, offset, dA, XI, af, bf, ar, br)
        total += s
        total2 += s2
        done += c
    mean = total / nsamples
    var = max(total2 / nsamples - mean * mean, 0.0)
    stderr = math.sqrt(var / nsamples)
    vol = abs(np.linalg.det(Bfd))
    return mean * vol, stderr * vol


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _mc_heis_nb(seed, nsamples, Bfd, offset, dA, XI, af, bf, ar, br, rq, rz1, nchunks):
        chunk = (nsamples + nchunks - 1) // nchunks
        sums = np.zeros(nchunks)
        sums2 = np.zeros(nchunks)
        nA = dA.shape[0]
        nX = XI.shape[0]
        col0 = np.ascontiguousarray(dA[:, 0])
        xi0 = np.ascontiguousarray(XI[:, 0])
        for c in prange(nchunks):
            lo = c * chunk
            hi = min(lo + chunk, nsamples)
            s = 0.0
            s2 = 0.0
            for k in range(lo, hi):
                base = np.uint64(k) * np.uint64(6)
                u0 = _sm64(np.uint64(seed), base + np.uint64(0))
                u1 = _sm64(np.uint64(seed), base + np.uint64(1))
                u2 = _sm64(np.uint64(seed), base + np.uint64(2))
                u3 = _sm64(np.uint64(seed), base + np.uint64(3))
                u4 = _sm64(np.uint64(seed), base + np.uint64(4))
                u5 = _sm64(np.uint64(seed), base + np.uint64(5))
                q1r = offset[0] + Bfd[0, 0] * u0 + Bfd[0, 1] * u1 + Bfd[0, 2] * u2 + Bfd[0, 3] * u3 + Bfd[0, 4] * u4 + Bfd[0, 5] * u5
                q1i = offset[1] + Bfd[1, 0] * u0 + Bfd[1, 1] * u1 + Bfd[1, 2] * u2 + Bfd[1, 3] * u3 + Bfd[1, 4] * u4 + Bfd[1, 5] * u5
                z1 = offset[2] + Bfd[2, 0] * u0 + Bfd[2, 1] * u1 + Bfd[2, 2] * u2 + Bfd[2, 3] * u3 + Bfd[2, 4] * u4 + Bfd[2, 5] * u5
                q2r = offset[3] + Bfd[3, 0] * u0 + Bfd[3, 1] * u1 + Bfd[3, 2] * u2 + Bfd[3, 3] * u3 + Bfd[3, 4] * u4 + Bfd[3, 5] * u5
                q2i = offset[4] + Bfd[4, 0] * u0 + Bfd[4, 1] * u1 + Bfd[4, 2] * u2 + Bfd[4, 3] * u3 + Bfd[4, 4] * u4 + Bfd[4, 5] * u5
                z2 = offset[5] + Bfd[5, 0] * u0 + Bfd[5, 1] * u1 + Bfd[5, 2] * u2 + Bfd[5, 3] * u3 + Bfd[5, 4] * u4 + Bfd[5, 5] * u5
                P = 0.0
                a0 = np.searchsorted(col0, -q1r - rq)
                for a in range(a0, nA):
                    d0 = dA[a, 0]
                    if d0 > -q1r + rq:
                        break
                    w1r = q1r + d0
                    w1i = q1i + dA[a, 1]
                    w2r = q2r + dA[a, 2]
                    w2i = q2i + dA[a, 3]
                    eq = -af * (w1r * w1r + w1i * w1i) - ar * (w2r * w2r + w2i * w2i)
                    if eq <= -_EXP_CUT:
                        continue
                    v1 = z1 + q1r * dA[a, 1] - q1i * d0
                    v2 = z2 + q2r * dA[a, 3] - q2i * dA[a, 2]
                    t0 = np.searchsorted(xi0, -v1 - rz1)
                    for t in range(t0, nX):
                        x0v = XI[t, 0]
                        if x0v > -v1 + rz1:
                            break
                        e = eq - bf * (v1 + x0v) ** 2 - br * (v2 + XI[t, 1]) ** 2
                        if e > -_EXP_CUT:
                            P += math.exp(e)
                s += P * P
                s2 += P * P * P * P
            sums[c] = s
            sums2[c] = s2
        return sums, sums2

    def mc_heis_periodization_numba(
        seed, nsamples, Bfd, offset, dA, XI, af, bf, ar, br, nchunks=512
    ):
        rq = math.sqrt(_EXP_CUT / af)
        rz1 = math.sqrt(_EXP_CUT / bf)
        sums, sums2 = _mc_heis_nb(
            np.uint64(seed), nsamples, Bfd, offset, dA, XI, af, bf, ar, br, rq, rz1, nchunks
        )
        mean = float(sums.sum()) / nsamples
        var = max(float(sums2.sum()) / nsamples - mean * mean, 0.0)
        stderr = math.sqrt(var / nsamples)
        vol = abs(np.linalg.det(Bfd))
        return mean * vol, stderr * vol

else:  # pragma: no cover
    mc_heis_periodization_numba = None


def mc_heis_periodization(seed, nsamples, Bfd, offset, dA, XI, af, bf, ar, br):
    """Monte Carlo estimate of ||P_Gamma(f (x) r)||^2 with its standard error.

    The norm is the Lebesgue integral of |P|^2 over the fundamental box
    spanned by the columns of Bfd translated by ``offset``; dA and XI must
    be sorted by their first column.
    """
    Bfd = np.ascontiguousarray(Bfd, dtype=float)
    offset = np.ascontiguousarray(offset, dtype=float)
    dA = np.ascontiguousarray(dA, dtype=float)
    XI = np.ascontiguousarray(XI, dtype=float)
    if use_numba():
        return mc_heis_periodization_numba(seed, nsamples, Bfd, offset, dA, XI, af, bf, ar, br)
    return mc_heis_periodization_numpy(seed, nsamples, Bfd, offset, dA, XI, af, bf, ar, br)
