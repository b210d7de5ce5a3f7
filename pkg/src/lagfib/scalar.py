"""Exact Gaussian rationals.

``GaussQ`` is the coefficient type of exact-mode polynomials and matrices.
Float mode uses plain Python ``complex`` / numpy ``complex128``.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational

__all__ = ["GaussQ", "I", "ZERO", "ONE", "as_exact", "parse_rational", "format_rational"]


def parse_rational(text):
    """Parse ``"p/q"``, ``"p"`` or an int into a Fraction; floats are rejected."""
    if isinstance(text, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    if isinstance(text, str):
        return Fraction(text.strip())
    raise TypeError(f"expected a rational string, got {type(text).__name__}")


def format_rational(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


class GaussQ:
    """Element re + i*im of Q(i) with Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if type(re) is Fraction else Fraction(re)
        self.im = im if type(im) is Fraction else Fraction(im)

    @staticmethod
    def _coerce(other):
        if type(other) is GaussQ:
            return other
        if isinstance(other, (int, Rational)):
            return GaussQ(Fraction(other), 0)
        return None

    def __add__(self, other):
        o = GaussQ._coerce(other)
        if o is None:
            return NotImplemented
        return GaussQ(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = GaussQ._coerce(other)
        if o is None:
            return NotImplemented
        return GaussQ(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = GaussQ._coerce(other)
        if o is None:
            return NotImplemented
        return GaussQ(o.re - self.re, o.im - self.im)

    def __mul__(self, other):
        o = GaussQ._coerce(other)
        if o is None:
            return NotImplemented
        if not self.im and not o.im:
            return GaussQ(self.re * o.re, 0)
        return GaussQ(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = GaussQ._coerce(other)
        if o is None:
            return NotImplemented
        if not o.im:
            return GaussQ(self.re / o.re, self.im / o.re)
        d = o.re * o.re + o.im * o.im
        return GaussQ((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def __rtruediv__(self, other):
        o = GaussQ._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return GaussQ(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return ONE / self ** (-k)
        out, base = ONE, self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conjugate(self):
        return GaussQ(self.re, -self.im)

    def __eq__(self, other):
        o = GaussQ._coerce(other)
        if o is None:
            if isinstance(other, complex):
                return complex(self) == other
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im)) if self.im else hash(self.re)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if not self.im:
            return f"GaussQ({format_rational(self.re)})"
        return f"GaussQ({format_rational(self.re)}, {format_rational(self.im)})"

    def __str__(self):
        if not self.im:
            return format_rational(self.re)
        if not self.re:
            return f"{format_rational(self.im)}*i"
        return f"({format_rational(self.re)}+{format_rational(self.im)}*i)"


ZERO = GaussQ(0)
ONE = GaussQ(1)
I = GaussQ(0, 1)


def as_exact(x) -> GaussQ:
    """Convert an int/Fraction/GaussQ to GaussQ; floats and complex are refused."""
    if type(x) is GaussQ:
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(x, (int, Rational)):
        return GaussQ(Fraction(x))
    if isinstance(x, str):
        return GaussQ(parse_rational(x))
    raise TypeError(f"cannot use {type(x).__name__} as an exact scalar")
