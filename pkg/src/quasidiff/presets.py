"""Worked cut-and-project schemes used across tests, configs and the CLI."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .lattice import LatticeBasis
from .qexact import qmat_from_triples, qmat_to_float
from .scheme import Scheme


def integer_scheme(n_phys: int = 1, m_int: int = 1, scale: float = 1.0) -> Scheme:
    """(scale * Z)^(n+m) split into physical and internal parts.

    The physical projection of a rational lattice is not injective; the
    injectivity diagnostic is skipped knowingly (windows must stay inside
    one internal fundamental domain, which cut_and_project enforces).
    """
    d = n_phys + m_int
    basis = LatticeBasis(np.eye(d) * scale)
    return Scheme(
        n_phys,
        m_int,
        basis,
        name=f"z{d}" + (f"_x{scale}" if scale != 1 else ""),
        check_radius=0.0,
    )


def sqrt2_chain_scheme() -> Scheme:
    """Gamma = {(a + b sqrt2, a - b sqrt2) : a, b in Z} in R x R."""
    rows = [
        [(1, 0), (0, 1)],
        [(1, 0), (0, -1)],
    ]
    exact = qmat_from_triples(rows, s=2)
    basis = LatticeBasis(qmat_to_float(exact), exact=exact)
    return Scheme(1, 1, basis, name="sqrt2_chain")


def sqrt2_product_scheme() -> Scheme:
    """Two independent sqrt2 chains: physical R^2, internal R^2.

    Coordinates are ordered (x1, x2 | y1, y2) with (x1, y1) and (x2, y2)
    each a sqrt2 chain; the physical factor carries the D4 action.
    """
    Z = (0, 0)
    one = (1, 0)
    rt = (0, 1)
    mrt = (0, -1)
    rows = [
        [one, Z, rt, Z],
        [Z, one, Z, rt],
        [one, Z, mrt, Z],
        [Z, one, Z, mrt],
    ]
    exact = qmat_from_triples(rows, s=2)
    basis = LatticeBasis(qmat_to_float(exact), exact=exact)
    return Scheme(2, 2, basis, name="sqrt2_product")


def scaled_integer_lattice(scale: Fraction | float, dim: int) -> LatticeBasis:
    return LatticeBasis(np.eye(dim) * float(scale))
