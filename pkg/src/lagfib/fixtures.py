"""Constructed potentials, sections and cubics used by the self-test, the CLI demos and the tests."""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from .betti import Box, Section
from .period import Potential
from .poly import CubicForm, MVPoly
from .scalar import GaussQ

HALF_I = GaussQ(0, Fraction(1, 2))


def z(n: int, exact: bool = True):
    return MVPoly.variables(n, exact=exact)


def model_potential(n: int = 2) -> Potential:
    """g = (i/2) sum z_i^2: tau = i * identity, no variation."""
    zs = z(n)
    g = MVPoly.zero(n)
    for v in zs:
        g = g + v**2 * HALF_I
    return Potential(n, g)


def lossen_cubic() -> CubicForm:
    """X0^2 X2 + X1^2 X3 + X0 X1 X4: singular along X0 = X1 = 0 but not a cone."""
    one = GaussQ(1)
    return CubicForm.from_entries(5, [((0, 0, 2), one), ((1, 1, 3), one), ((0, 1, 4), one)])


def leaf_potential() -> Potential:
    """n = 5 potential with g''' singular along span(e2, e3, e4) at every point near 0.

    g = (i/2) sum z^2 + z2 (z0^2/2 + z0^2 z1/2) + z3 z1^2/2 + z4 z0 z1 + z0^4/24.
    g is affine in (z2, z3, z4) apart from the fixed quadratic, so g''' vanishes
    to second order on that plane; the three quadrics multiplying z2, z3, z4
    stay independent while 1 + z1 != 0, so the cubic is never a cone there.
    """
    z0, z1, z2, z3, z4 = z(5)
    g = model_potential(5).g
    g = g + z2 * (z0**2 / 2 + z0**2 * z1 / 2) + z3 * z1**2 / 2 + z4 * z0 * z1 + z0**4 / 24
    return Potential(5, g)


def quartic_leaf_potential() -> Potential:
    """(i/2) sum z^2 + z0^2 (z2^2 + z3 z4) + z1^2 z3^2 + z0 z1 z4^2.

    Its cubic is singular along span(e2, e3, e4) only on the slice z0 = z1 = 0,
    and is a non-cone there when z2 z3 z4 != 0.
    """
    z0, z1, z2, z3, z4 = z(5)
    g = model_potential(5).g + z0**2 * (z2**2 + z3 * z4) + z1**2 * z3**2 + z0 * z1 * z4**2
    return Potential(5, g)


def perturbed_leaf_potential() -> Potential:
    """leaf_potential plus z2^3, which breaks quadraticity along the leaf."""
    P = leaf_potential()
    return Potential(5, P.g + z(5)[2] ** 3)


def leaf_plane():
    zero, one = GaussQ(0), GaussQ(1)
    return [[one if j == i else zero for j in range(5)] for i in (2, 3, 4)]


def leaf_box(r: float = 0.05) -> Box:
    return Box.from_complex([[-r, r]] * 5, [[-r, r]] * 5)


def cubic_potential(n: int = 2) -> Potential:
    """(i/2) sum z^2 + sum z^3/6: nondegenerate variation everywhere near 0."""
    zs = z(n)
    g = model_potential(n).g
    for v in zs:
        g = g + v**3 / 6
    return Potential(n, g)


def quadratic_section(n: int, idx=(0,)) -> Section:
    """f = sum_{i in idx} z_i^2 / 2."""
    zs = z(n)
    f = MVPoly.zero(n)
    for i in idx:
        f = f + zs[i] ** 2 / 2
    return Section(f)


def irrational_section(P: Potential, c0: float = math.sqrt(2)) -> Section:
    """Frame-constant section with an irrational (float) first coordinate: no torsion anywhere."""
    c = [0.0] * (2 * P.n)
    c[0] = c0
    Pf = Potential(P.n, P.g.to_float())
    return Section.frame_constant(Pf, c)


def block_product(n1_irr: float = math.sqrt(2)):
    """Two elliptic blocks: torsion section on block 0, irrational constant on block 1.

    g = (i/2)(z0^2 + z1^2), f = z0^2/2 + sqrt(2) z1. a = (x0, sqrt2, y0, 0) is never rational.
    """
    P = model_potential(2)
    z0, z1 = z(2, exact=False)
    f = z0**2 / 2 + z1 * n1_irr
    return Potential(2, P.g.to_float()), Section(f)


def slice_box(n: int = 2) -> Box:
    """[0,1]^2 in z0, all other coordinates pinned at 0."""
    re = [[0.0, 1.0]] + [[0.0, 0.0]] * (n - 1)
    im = [[0.0, 1.0]] + [[0.0, 0.0]] * (n - 1)
    return Box.from_complex(re, im)


def monomials(n: int, degree: int):
    return [m for m in itertools.combinations_with_replacement(range(n), degree)]


def random_rational_cubic(rng: np.random.Generator, n: int, num: int = 5, den: int = 3) -> CubicForm:
    """Random cubic with a random number of monomials (so sparse, degenerate and conic draws occur)."""
    mons = monomials(n, 3)
    k = int(rng.integers(1, len(mons) + 1))
    idx = rng.choice(len(mons), k, replace=False)
    entries = []
    for i in idx:
        entries.append((mons[i], GaussQ(Fraction(int(rng.integers(-num, num + 1)), int(rng.integers(1, den + 1))))))
    return CubicForm.from_entries(n, entries)


def random_invertible_int(rng: np.random.Generator, n: int, lo: int = -3, hi: int = 3):
    from . import exact_linalg

    while True:
        A = [[int(x) for x in row] for row in rng.integers(lo, hi + 1, size=(n, n))]
        if exact_linalg.int_det(A):
            return A


def random_cone(rng: np.random.Generator, n: int) -> CubicForm:
    """A random cubic in the first n-1 variables composed with a random invertible integer substitution."""
    base = random_rational_cubic(rng, n - 1)
    T = np.empty((n, n, n), dtype=object)
    T[...] = GaussQ(0)
    T[: n - 1, : n - 1, : n - 1] = base.C
    A = random_invertible_int(rng, n)
    return CubicForm(T, exact=True, check=False).transform([[GaussQ(x) for x in row] for row in A])


def _small_coeff(rng: np.random.Generator, num: int = 4, den: int = 4) -> GaussQ:
    return GaussQ(Fraction(int(rng.integers(-num, num + 1)), int(rng.integers(1, den + 1))))


def _random_poly(rng: np.random.Generator, n: int, degrees, n_terms: int, scale: Fraction, vars_=None) -> MVPoly:
    vars_ = list(range(n)) if vars_ is None else list(vars_)
    p = MVPoly.zero(n)
    zs = z(n)
    for _ in range(n_terms):
        d = int(rng.choice(list(degrees)))
        term = MVPoly.constant(n, _small_coeff(rng) * scale)
        for _ in range(d):
            term = term * zs[int(rng.choice(vars_))]
        p = p + term
    return p


INSTANCE_KINDS = ("generic", "frame-constant", "block", "flat")


def random_instance(rng: np.random.Generator, kind: str, n: int | None = None):
    """A random (potential, section, point) triple of the given kind, exact coefficients, float point.

    generic: random cubic and quartic terms in g, random f (full Betti rank expected);
    frame-constant: f = sum c_i f_i with rational c (rank 0);
    block: variation and section confined to the first m < n variables (rank 2m at most);
    flat: g quadratic (tau constant), f random in a subset of variables.
    """
    n = int(rng.integers(1, 4)) if n is None else n
    g = model_potential(n).g
    if kind == "generic":
        g = g + _random_poly(rng, n, (3, 4), 3, Fraction(1, 2))
        P = Potential(n, g)
        s = Section(_random_poly(rng, n, (1, 2, 3), 4, Fraction(1)))
    elif kind == "frame-constant":
        g = g + _random_poly(rng, n, (3,), 2, Fraction(1, 2))
        P = Potential(n, g)
        s = Section.frame_constant(P, [_small_coeff(rng) for _ in range(2 * n)])
    elif kind == "block":
        m = int(rng.integers(1, n)) if n > 1 else 1
        g = g + _random_poly(rng, n, (3,), 2, Fraction(1, 2), range(m))
        P = Potential(n, g)
        s = Section(_random_poly(rng, n, (2, 3), 3, Fraction(1), range(m)))
    elif kind == "flat":
        m = int(rng.integers(1, n + 1))
        P = Potential(n, g)
        s = Section(_random_poly(rng, n, (1, 2, 3), 3, Fraction(1), range(m)))
    else:
        raise ValueError(f"unknown instance kind {kind!r}")
    b = 0.2 * (rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n))
    return P, s, b
