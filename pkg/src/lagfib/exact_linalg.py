"""Exact linear algebra over Q(i).

Matrices are sequences of rows (lists, tuples or 2-d object arrays) whose
entries are GaussQ / Fraction / int. When every entry is real the work is
done by fraction-free (Bareiss) elimination on Python ints, which is what
keeps the cubic-classification sweeps fast.
"""
from __future__ import annotations

from fractions import Fraction
from math import lcm

from .scalar import ONE, ZERO, GaussQ, as_exact


def _rows(M) -> list[list[GaussQ]]:
    return [[as_exact(x) for x in row] for row in M]


def _real_int_rows(rows):
    """Scale a real matrix to integers; None if some entry is not real."""
    den = 1
    for row in rows:
        for x in row:
            if x.im:
                return None
            den = lcm(den, x.re.denominator)
    return [[int(x.re * den) for x in row] for row in rows], den


def _bareiss(A, want_det=False):
    """Fraction-free row echelon form on an int matrix, in place.

    Returns (rank, det) where det is only meaningful for square input.
    """
    m = len(A)
    n = len(A[0]) if m else 0
    prev, r, sign = 1, 0, 1
    for c in range(n):
        piv = None
        for i in range(r, m):
            if A[i][c]:
                piv = i
                break
        if piv is None:
            if want_det:
                return r, 0
            continue
        if piv != r:
            A[r], A[piv] = A[piv], A[r]
            sign = -sign
        pr = A[r]
        prc = pr[c]
        for i in range(r + 1, m):
            row = A[i]
            ric = row[c]
            if ric:
                for j in range(c + 1, n):
                    row[j] = (row[j] * prc - ric * pr[j]) // prev
            else:
                for j in range(c + 1, n):
                    row[j] = (row[j] * prc) // prev
            row[c] = 0
        prev = prc
        r += 1
        if r == m:
            break
    det = sign * prev if (want_det and r == n == m) else 0
    return r, det


def int_rank(A: list[list[int]]) -> int:
    if not A or not A[0]:
        return 0
    return _bareiss([list(row) for row in A])[0]


def int_det(A: list[list[int]]) -> int:
    n = len(A)
    if n == 0:
        return 1
    return _bareiss([list(row) for row in A], want_det=True)[1]


def _gdiv(a, b):
    """Exact quotient of Gaussian integers given as (re, im) pairs."""
    n2 = b[0] * b[0] + b[1] * b[1]
    re = a[0] * b[0] + a[1] * b[1]
    im = a[1] * b[0] - a[0] * b[1]
    return (re // n2, im // n2)


def gauss_int_det(A) -> tuple[int, int]:
    """Determinant over Z[i] by Bareiss elimination; entries are (re, im) int pairs."""
    n = len(A)
    if n == 0:
        return (1, 0)
    A = [list(row) for row in A]
    prev = (1, 0)
    sign = 1
    for c in range(n):
        piv = next((i for i in range(c, n) if A[i][c] != (0, 0)), None)
        if piv is None:
            return (0, 0)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            sign = -sign
        pr, pc = A[c][c]
        for i in range(c + 1, n):
            row = A[i]
            qr, qc = row[c]
            for j in range(c + 1, n):
                xr, xi = row[j]
                yr, yi = A[c][j]
                num = (xr * pr - xi * pc - (qr * yr - qc * yi), xr * pc + xi * pr - (qr * yi + qc * yr))
                row[j] = _gdiv(num, prev)
            row[c] = (0, 0)
        prev = (pr, pc)
    return (sign * prev[0], sign * prev[1])


def rref(M):
    """Reduced row echelon form over Q(i). Returns (rows, pivot_columns)."""
    R = _rows(M)
    m = len(R)
    n = len(R[0]) if m else 0
    pivots = []
    r = 0
    for c in range(n):
        piv = None
        for i in range(r, m):
            if R[i][c]:
                piv = i
                break
        if piv is None:
            continue
        R[r], R[piv] = R[piv], R[r]
        inv = ONE / R[r][c]
        R[r] = [x * inv for x in R[r]]
        for i in range(m):
            if i != r and R[i][c]:
                f = R[i][c]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
        if r == m:
            break
    return R, pivots


def rank(M) -> int:
    rows = _rows(M)
    if not rows or not rows[0]:
        return 0
    ints = _real_int_rows(rows)
    if ints is not None:
        return _bareiss(ints[0])[0]
    return len(rref(rows)[1])


def det(M) -> GaussQ:
    rows = _rows(M)
    n = len(rows)
    if n == 0:
        return ONE
    if any(len(r) != n for r in rows):
        raise ValueError("det of a non-square matrix")
    ints = _real_int_rows(rows)
    if ints is not None:
        A, den = ints
        return GaussQ(Fraction(_bareiss(A, want_det=True)[1], den**n))
    out = ONE
    R = rows
    for c in range(n):
        piv = next((i for i in range(c, n) if R[i][c]), None)
        if piv is None:
            return ZERO
        if piv != c:
            R[c], R[piv] = R[piv], R[c]
            out = -out
        out = out * R[c][c]
        inv = ONE / R[c][c]
        for i in range(c + 1, n):
            if R[i][c]:
                f = R[i][c] * inv
                R[i] = [a - f * b for a, b in zip(R[i], R[c])]
    return out


def nullspace(M, ncols: int | None = None) -> list[list[GaussQ]]:
    """Basis of {v : M v = 0}, one vector per free column, in RREF-canonical form."""
    rows = _rows(M)
    n = len(rows[0]) if rows else ncols
    if n is None:
        raise ValueError("cannot infer column count of an empty matrix")
    if not rows:
        return [[ONE if i == j else ZERO for i in range(n)] for j in range(n)]
    R, pivots = rref(rows)
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fcol in free:
        v = [ZERO] * n
        v[fcol] = ONE
        for r, pc in enumerate(pivots):
            v[pc] = -R[r][fcol]
        basis.append(v)
    return basis


def row_space_basis(vectors) -> list[list[GaussQ]]:
    """Canonical (RREF) basis of the span of ``vectors``."""
    vecs = _rows(vectors)
    if not vecs:
        return []
    R, pivots = rref(vecs)
    return R[: len(pivots)]


def solve(A, b) -> list[GaussQ]:
    """Unique solution of a square nonsingular system A x = b."""
    rows = _rows(A)
    n = len(rows)
    aug = [row + [as_exact(bi)] for row, bi in zip(rows, b)]
    R, pivots = rref(aug)
    if pivots != list(range(n)):
        raise ZeroDivisionError("singular system")
    return [R[i][n] for i in range(n)]


def is_positive_definite(S) -> tuple[bool, int | None]:
    """Exact test for a real symmetric rational matrix via LDL^T pivots.

    Returns (verdict, index of the first non-positive pivot or None).
    """
    R = [[as_exact(x).re for x in row] for row in S]
    n = len(R)
    for c in range(n):
        if R[c][c] <= 0:
            return False, c
        p = R[c][c]
        for i in range(c + 1, n):
            if R[i][c]:
                f = R[i][c] / p
                for j in range(c, n):
                    R[i][j] -= f * R[c][j]
    return True, None
