"""Berezin integral, Pfaffian and the exponential of even elements."""
from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np

from .exterior import ZERO_TOL, DimensionError, GradedElement, wedge


class AntisymmetryError(ValueError):
    pass


class OddExponentError(ValueError):
    pass


def berezin_sign(r: int) -> int:
    """Sign fixed by ``T(e_1 ^ ... ^ e_r ^ a) = berezin_sign(r) * a``.

    Equivalently ``T(e_r ^ ... ^ e_1) = 1``.  With this choice the Thom form has
    unit fiber integral and ``T(exp(R))`` reproduces ``Pf(R)`` (see README).
    """
    return -1 if (r * (r - 1) // 2) % 2 else 1


def berezin_integral(a: GradedElement) -> GradedElement:
    """Project onto the coefficient of the top fiber monomial."""
    top = (1 << a.r) - 1
    masks = np.arange(a.c.size)
    sel = (masks & top) == top
    out = np.zeros(1 << a.p)
    out[masks[sel] >> a.r] = berezin_sign(a.r) * a.c[sel]
    return GradedElement(a.p, 0, out)


Entry = Union[float, GradedElement]


class AntisymmetricFormMatrix:
    """r x r antisymmetric matrix whose entries are even-degree forms."""

    def __init__(self, entries: Sequence[Sequence[Entry]], tol: float = ZERO_TOL):
        self.entries = [list(row) for row in entries]
        self.size = len(self.entries)
        if any(len(row) != self.size for row in self.entries):
            raise DimensionError("matrix must be square")
        self.validate(tol)

    def validate(self, tol: float = ZERO_TOL) -> None:
        for i in range(self.size):
            if _norm(self.entries[i][i]) > tol:
                raise AntisymmetryError(f"diagonal entry {i} is nonzero")
            for j in range(i + 1, self.size):
                if _norm(_add(self.entries[i][j], self.entries[j][i])) > tol:
                    raise AntisymmetryError(f"M[{i}][{j}] != -M[{j}][{i}]")

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]


def _norm(x: Entry) -> float:
    return x.norm() if isinstance(x, GradedElement) else abs(float(x))


def _add(x: Entry, y: Entry) -> Entry:
    return x + y


def _mul(x: Entry, y: Entry) -> Entry:
    if isinstance(x, GradedElement) and isinstance(y, GradedElement):
        return wedge(x, y)
    return x * y


def pfaffian(M) -> Entry:
    """Pfaffian by expansion over perfect matchings.

    Accepts an :class:`AntisymmetricFormMatrix`, a nested list, or a scalar
    numpy array.  Products use the wedge, which is commutative on the even
    entries allowed here.
    """
    if not isinstance(M, AntisymmetricFormMatrix):
        arr = M
        if isinstance(arr, np.ndarray):
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise DimensionError("Pfaffian needs a square matrix")
            scale = max(1.0, float(np.max(np.abs(arr), initial=0.0)))
            if np.max(np.abs(arr + arr.T), initial=0.0) > ZERO_TOL * scale:
                raise AntisymmetryError("matrix is not antisymmetric")
            arr = arr.tolist()
        M = AntisymmetricFormMatrix(arr)
    n = M.size
    if n % 2:
        raise DimensionError("Pfaffian of an odd-size matrix")
    for row in M.entries:
        for x in row:
            if isinstance(x, GradedElement) and not x.odd_part().is_zero():
                raise OddExponentError("Pfaffian entries must be even")
    return _pf(M.entries, tuple(range(n)))


def _pf(E, idx: tuple) -> Entry:
    if not idx:
        sample = E[0][1] if len(E) > 1 else 1.0
        if isinstance(sample, GradedElement):
            return GradedElement.scalar(sample.p, sample.r)
        return 1.0
    first, rest = idx[0], idx[1:]
    total = None
    for pos, j in enumerate(rest):
        term = _mul(E[first][j], _pf(E, rest[:pos] + rest[pos + 1:]))
        if pos % 2:
            term = -term
        total = term if total is None else total + term
    return total


def exp_even(a: GradedElement, tol: float = ZERO_TOL) -> GradedElement:
    """``exp`` of an even element via the terminating nilpotent series."""
    if not a.odd_part().is_zero(tol):
        raise OddExponentError("exponent has an odd-degree component")
    s = float(a.c[0])
    n = a.copy()
    n.c[0] = 0.0
    result = GradedElement.scalar(a.p, a.r)
    term = GradedElement.scalar(a.p, a.r)
    for j in range(1, (a.p + a.r) // 2 + 1):
        term = wedge(term, n) / j
        if term.is_zero(0.0):
            break
        result = result + term
    return result * math.exp(s)
