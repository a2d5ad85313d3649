"""Exact arithmetic in real quadratic fields Q(sqrt(s)).

Lattice bases for the worked schemes (the sqrt2 chain, its 2+2 product and
the Heisenberg Z[i]/Z[sqrt2] lattice) have entries of the form a + b*sqrt(s)
with rational a, b and squarefree s.  Carrying them exactly lets dual bases,
membership tests and spectral labels be computed without float drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence


def _is_squarefree(s: int) -> bool:
    if s < 2:
        return False
    d = 2
    while d * d <= s:
        if s % (d * d) == 0:
            return False
        d += 1
    return True


@dataclass(frozen=True)
class QSqrt:
    """Element a + b*sqrt(s) of Q(sqrt(s)), with a, b rational."""

    a: Fraction
    b: Fraction
    s: int

    def __post_init__(self):
        if not _is_squarefree(self.s):
            raise ValueError(f"s={self.s} must be a squarefree integer >= 2")

    @staticmethod
    def of(a, b=0, s: int = 2) -> "QSqrt":
        return QSqrt(Fraction(a), Fraction(b), s)

    def _check(self, other: "QSqrt"):
        if self.s != other.s:
            raise ValueError("mixed quadratic fields")

    def __add__(self, other: "QSqrt") -> "QSqrt":
        self._check(other)
        return QSqrt(self.a + other.a, self.b + other.b, self.s)

    def __sub__(self, other: "QSqrt") -> "QSqrt":
        self._check(other)
        return QSqrt(self.a - other.a, self.b - other.b, self.s)

    def __neg__(self) -> "QSqrt":
        return QSqrt(-self.a, -self.b, self.s)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return QSqrt(self.a * other, self.b * other, self.s)
        self._check(other)
        return QSqrt(
            self.a * other.a + self.s * self.b * other.b,
            self.a * other.b + self.b * other.a,
            self.s,
        )

    __rmul__ = __mul__

    def conj(self) -> "QSqrt":
        """Galois conjugate a - b*sqrt(s)."""
        return QSqrt(self.a, -self.b, self.s)

    def norm(self) -> Fraction:
        """Field norm a^2 - s*b^2."""
        return self.a * self.a - self.s * self.b * self.b

    def inverse(self) -> "QSqrt":
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("zero element of Q(sqrt(s))")
        return QSqrt(self.a / n, -self.b / n, self.s)

    def __truediv__(self, other: "QSqrt") -> "QSqrt":
        if isinstance(other, (int, Fraction)):
            return QSqrt(self.a / other, self.b / other, self.s)
        return self * other.inverse()

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * math.sqrt(self.s)

    def __repr__(self) -> str:
        return f"({self.a}+{self.b}*sqrt{self.s})"


def qmat_to_float(rows: Sequence[Sequence[QSqrt]]):
    import numpy as np

    return np.array([[float(x) for x in row] for row in rows], dtype=float)


def qmat_identity(n: int, s: int = 2):
    one = QSqrt.of(1, 0, s)
    zero = QSqrt.of(0, 0, s)
    return [[one if i == j else zero for j in range(n)] for i in range(n)]


def qmat_matmul(A, B):
    n, k, m = len(A), len(B), len(B[0])
    s = A[0][0].s
    out = [[QSqrt.of(0, 0, s) for _ in range(m)] for _ in range(n)]
    for i in range(n):
        for j in range(m):
            acc = QSqrt.of(0, 0, s)
            for t in range(k):
                acc = acc + A[i][t] * B[t][j]
            out[i][j] = acc
    return out


def qmat_transpose(A):
    return [list(row) for row in zip(*A)]


def qmat_inverse(A):
    """Exact inverse by Gauss-Jordan elimination over Q(sqrt(s))."""
    n = len(A)
    s = A[0][0].s
    work = [list(row) + list(idrow) for row, idrow in zip(A, qmat_identity(n, s))]
    for col in range(n):
        piv = next((r for r in range(col, n) if not work[r][col].is_zero()), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix over Q(sqrt(s))")
        work[col], work[piv] = work[piv], work[col]
        inv = work[col][col].inverse()
        work[col] = [x * inv for x in work[col]]
        for r in range(n):
            if r != col and not work[r][col].is_zero():
                factor = work[r][col]
                work[r] = [x - factor * y for x, y in zip(work[r], work[col])]
    return [row[n:] for row in work]


def qmat_from_triples(entries: Iterable[Iterable[tuple]], s: int = 2):
    """Build a QSqrt matrix from (a, b) pairs of rationals (ints/Fractions/strings)."""
    return [
        [QSqrt(Fraction(a), Fraction(b), s) for (a, b) in row] for row in entries
    ]
