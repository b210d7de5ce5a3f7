"""Sparse multivariate polynomials and symmetric forms.

Two scalar modes share one representation:

* exact: coefficients are :class:`~lagfib.scalar.GaussQ`;
* float: coefficients are Python ``complex``.

Indices are 0-based throughout the Python API and the JSON formats.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Number, Rational

import numpy as np

from . import exact_linalg, kernels
from .errors import DimensionError
from .scalar import ONE, ZERO, GaussQ, as_exact, format_rational, parse_rational

DEFAULT_RANK_TOL = 1e-8


def _is_exact_scalar(x) -> bool:
    return type(x) is GaussQ or (isinstance(x, (int, Rational)) and not isinstance(x, bool))


def _to_float(x) -> complex:
    return complex(x)


class MVPoly:
    """Polynomial in ``nvars`` variables stored as {exponent tuple: coefficient}.

    Instances are treated as immutable. Zero coefficients are never stored.
    """

    def __init__(self, nvars: int, terms=None, exact: bool | None = None):
        if nvars < 1:
            raise DimensionError("nvars must be positive")
        terms = dict(terms or {})
        if exact is None:
            exact = all(_is_exact_scalar(c) for c in terms.values())
        clean = {}
        for e, c in terms.items():
            e = tuple(int(k) for k in e)
            if len(e) != nvars or min(e, default=0) < 0:
                raise DimensionError(f"bad exponent vector {e} for {nvars} variables")
            if exact:
                c = as_exact(c)
            else:
                c = _to_float(c)
            if c:
                clean[e] = clean.get(e, ZERO if exact else 0j) + c
                if not clean[e]:
                    del clean[e]
        self.nvars = nvars
        self.terms = clean
        self.exact = exact

    # -- constructors -----------------------------------------------------
    @classmethod
    def variables(cls, n: int, exact: bool = True) -> tuple["MVPoly", ...]:
        one = ONE if exact else 1 + 0j
        return tuple(
            cls(n, {tuple(int(i == j) for i in range(n)): one}, exact) for j in range(n)
        )

    @classmethod
    def constant(cls, n: int, c=0, exact: bool | None = None) -> "MVPoly":
        return cls(n, {(0,) * n: c}, exact)

    @classmethod
    def zero(cls, n: int, exact: bool = True) -> "MVPoly":
        return cls(n, {}, exact)

    # -- arithmetic -------------------------------------------------------
    def _lift(self, other) -> "MVPoly":
        if isinstance(other, MVPoly):
            if other.nvars != self.nvars:
                raise DimensionError("polynomials in different numbers of variables")
            return other
        if isinstance(other, Number) or type(other) is GaussQ:
            return MVPoly.constant(self.nvars, other, exact=self.exact and _is_exact_scalar(other))
        return NotImplemented

    def _joint_mode(self, other: "MVPoly"):
        if self.exact and other.exact:
            return self, other, True
        return self.to_float(), other.to_float(), False

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        a, b, exact = self._joint_mode(other)
        terms = dict(a.terms)
        for e, c in b.terms.items():
            terms[e] = terms.get(e, ZERO if exact else 0j) + c
        return MVPoly(self.nvars, terms, exact)

    __radd__ = __add__

    def __neg__(self):
        return MVPoly(self.nvars, {e: -c for e, c in self.terms.items()}, self.exact)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        a, b, exact = self._joint_mode(other)
        terms: dict = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                terms[e] = terms.get(e, ZERO if exact else 0j) + c1 * c2
        return MVPoly(self.nvars, terms, exact)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, MVPoly):
            return NotImplemented
        if self.exact and _is_exact_scalar(other):
            inv = ONE / as_exact(other)
            return MVPoly(self.nvars, {e: c * inv for e, c in self.terms.items()}, True)
        return self.to_float() * (1.0 / complex(other))

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        out = MVPoly.constant(self.nvars, 1, exact=self.exact)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, MVPoly):
            return NotImplemented
        return self.nvars == other.nvars and self.exact == other.exact and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return f"MVPoly({self.nvars}, 0)"
        parts = []
        for e in sorted(self.terms, reverse=True):
            mono = "*".join(
                f"z{i}" if k == 1 else f"z{i}^{k}" for i, k in enumerate(e) if k
            )
            parts.append(f"{self.terms[e]}" + (f"*{mono}" if mono else ""))
        return f"MVPoly({self.nvars}, " + " + ".join(parts) + ")"

    # -- queries ----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def is_homogeneous(self, d: int) -> bool:
        return all(sum(e) == d for e in self.terms)

    def to_float(self) -> "MVPoly":
        if not self.exact:
            return self
        return MVPoly(self.nvars, {e: complex(c) for e, c in self.terms.items()}, False)

    def diff(self, i: int) -> "MVPoly":
        if not 0 <= i < self.nvars:
            raise DimensionError(f"variable index {i} out of range for {self.nvars} variables")
        terms = {}
        for e, c in self.terms.items():
            k = e[i]
            if k:
                e2 = e[:i] + (k - 1,) + e[i + 1 :]
                terms[e2] = c * k
        return MVPoly(self.nvars, terms, self.exact)

    def substitute_linear(self, A) -> "MVPoly":
        """Return p(A z) for an nvars x nvars matrix A (rows give the new z_i)."""
        n = self.nvars
        zs = MVPoly.variables(n, exact=self.exact)
        lin = []
        for i in range(n):
            acc = MVPoly.zero(n, exact=self.exact)
            for j in range(n):
                if A[i][j]:
                    acc = acc + zs[j] * A[i][j]
            lin.append(acc)
        out = MVPoly.zero(n, exact=self.exact)
        for e, c in self.terms.items():
            mono = MVPoly.constant(n, c, exact=self.exact)
            for i, k in enumerate(e):
                if k:
                    mono = mono * lin[i] ** k
            out = out + mono
        return out

    def __call__(self, z):
        return evaluate(self, z)

    # -- compiled form ----------------------------------------------------
    @cached_property
    def _arrays(self):
        exps = np.array(list(self.terms.keys()), dtype=np.int64).reshape(len(self.terms), self.nvars)
        coeffs = np.array([complex(c) for c in self.terms.values()], dtype=np.complex128)
        return exps, coeffs

    def eval_many(self, Z) -> np.ndarray:
        """Float evaluation at each row of ``Z`` (m, nvars)."""
        return PolyBundle([self]).eval(Z)[:, 0]

    # -- JSON -------------------------------------------------------------
    def to_json(self) -> dict:
        terms = []
        for e in sorted(self.terms):
            c = self.terms[e]
            if self.exact:
                terms.append({"exp": list(e), "re": format_rational(c.re), "im": format_rational(c.im)})
            else:
                terms.append({"exp": list(e), "re": c.real, "im": c.imag})
        return {"nvars": self.nvars, "terms": terms}

    @classmethod
    def from_json(cls, obj: dict) -> "MVPoly":
        try:
            n = obj["nvars"]
            raw = obj["terms"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"MVPoly JSON needs 'nvars' and 'terms': {exc}") from None
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ValueError("nvars must be a positive integer")
        kinds = set()
        terms = {}
        for t in raw:
            e = tuple(t["exp"])
            if len(e) != n or any(not isinstance(k, int) or isinstance(k, bool) or k < 0 for k in e):
                raise ValueError(f"bad exponent vector {t['exp']!r}")
            re, im = t.get("re"), t.get("im")
            if re is None and im is None:
                raise ValueError("term without coefficient")
            if re is None:
                re = "0" if isinstance(im, str) else 0.0
            if im is None:
                im = "0" if isinstance(re, str) else 0.0
            for part in (re, im):
                if isinstance(part, str):
                    kinds.add("exact")
                elif isinstance(part, (int, float)) and not isinstance(part, bool):
                    kinds.add("float")
                else:
                    raise ValueError(f"bad coefficient part {part!r}")
            if "exact" in kinds and "float" in kinds:
                raise ValueError("mixed exact and float coefficients")
            if isinstance(re, str):
                c = GaussQ(parse_rational(re), parse_rational(im))
            else:
                c = complex(float(re), float(im))
            terms[e] = terms.get(e, 0) + c
        exact = kinds != {"float"}
        return cls(n, terms, exact=exact)


def _point(z, n: int):
    """Normalize a point; returns (values, exact)."""
    if isinstance(z, np.ndarray) and z.dtype != object:
        vals = [complex(x) for x in z.ravel()]
        exact = False
    else:
        vals = list(z)
        exact = all(_is_exact_scalar(x) for x in vals)
        vals = [as_exact(x) for x in vals] if exact else [complex(x) for x in vals]
    if len(vals) != n:
        raise DimensionError(f"point has length {len(vals)}, expected {n}")
    return vals, exact


def evaluate(p: MVPoly, z):
    """Value of ``p`` at ``z``; exact result iff both p and z are exact."""
    vals, exact = _point(z, p.nvars)
    if exact and p.exact:
        acc = ZERO
        for e, c in p.terms.items():
            term = c
            for x, k in zip(vals, e):
                if k:
                    term = term * x**k
            acc = acc + term
        return acc
    acc = 0j
    for e, c in p.terms.items():
        term = complex(c)
        for x, k in zip(vals, e):
            if k:
                term *= complex(x) ** k
        acc += term
    return acc


def diff(p: MVPoly, i: int) -> MVPoly:
    return p.diff(i)


class PolyBundle:
    """Several polynomials in the same variables, evaluated together in float mode."""

    def __init__(self, polys):
        polys = list(polys)
        if not polys:
            raise ValueError("empty bundle")
        self.nvars = polys[0].nvars
        self.n_out = len(polys)
        exps, coeffs, out = [], [], []
        for k, p in enumerate(polys):
            if p.nvars != self.nvars:
                raise DimensionError("bundle polynomials must share their variables")
            e, c = p._arrays
            exps.append(e)
            coeffs.append(c)
            out.append(np.full(len(c), k, dtype=np.int64))
        self.exps = np.ascontiguousarray(np.concatenate(exps).reshape(-1, self.nvars))
        self.coeffs = np.concatenate(coeffs)
        self.out = np.concatenate(out)

    def eval(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=np.complex128))
        if Z.shape[1] != self.nvars:
            raise DimensionError(f"points have {Z.shape[1]} coordinates, expected {self.nvars}")
        return kernels.eval_bundle(self.exps, self.coeffs, self.out, self.n_out, Z)


# ---------------------------------------------------------------------------
# symmetric forms


def _as_array(data, exact: bool):
    if exact:
        arr = np.empty(np.shape(data), dtype=object)
        for idx in np.ndindex(arr.shape):
            arr[idx] = as_exact(np.asarray(data, dtype=object)[idx])
        return arr
    return np.asarray(data, dtype=np.complex128)


def _detect_exact(data) -> bool:
    arr = np.asarray(data, dtype=object) if not isinstance(data, np.ndarray) else data
    if arr.dtype != object:
        return False
    return all(_is_exact_scalar(x) for x in arr.ravel())


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """Symmetric n x n matrix; object dtype of GaussQ in exact mode, complex128 otherwise."""

    M: np.ndarray

    def __init__(self, M, exact: bool | None = None, check: bool = True):
        if exact is None:
            exact = _detect_exact(M)
        arr = _as_array(M, exact)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError("quadratic form needs a square matrix")
        object.__setattr__(self, "M", arr)
        if check and not self.is_symmetric():
            raise ValueError("matrix is not symmetric")

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def exact(self) -> bool:
        return self.M.dtype == object

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        if self.exact:
            return all(self.M[i, j] == self.M[j, i] for i in range(self.n) for j in range(i))
        scale = max(np.abs(self.M).max(initial=0.0), 1e-300)
        return bool(np.all(np.abs(self.M - self.M.T) <= rtol * scale))

    def to_float(self) -> "QuadraticForm":
        if not self.exact:
            return self
        return QuadraticForm(np.vectorize(complex, otypes=[np.complex128])(self.M), exact=False, check=False)

    def restrict(self, W) -> np.ndarray:
        """Gram matrix W Q W^T for a basis given as rows of W."""
        Wa = _as_array(W, self.exact) if len(W) else np.zeros((0, self.n), dtype=self.M.dtype)
        return Wa @ self.M @ Wa.T

    def __sub__(self, other: "QuadraticForm") -> "QuadraticForm":
        if self.exact and other.exact:
            return QuadraticForm(self.M - other.M, exact=True, check=False)
        return QuadraticForm(self.to_float().M - other.to_float().M, exact=False, check=False)

    def scaled(self, c) -> "QuadraticForm":
        if self.exact and _is_exact_scalar(c):
            return QuadraticForm(self.M * as_exact(c), exact=True, check=False)
        return QuadraticForm(self.to_float().M * complex(c), exact=False, check=False)

    @classmethod
    def identity(cls, n: int, exact: bool = True) -> "QuadraticForm":
        return cls([[ONE if i == j else ZERO for j in range(n)] for i in range(n)], exact=exact)

    @classmethod
    def zeros(cls, n: int, exact: bool = True) -> "QuadraticForm":
        return cls([[ZERO] * n for _ in range(n)], exact=exact)

    @classmethod
    def from_polynomial(cls, q: MVPoly) -> "QuadraticForm":
        """Hessian of a quadratic polynomial (constant matrix)."""
        return hessian_at(q, [ZERO] * q.nvars if q.exact else np.zeros(q.nvars))


@dataclass(frozen=True, eq=False)
class CubicForm:
    """Fully symmetric n x n x n tensor."""

    C: np.ndarray

    def __init__(self, C, exact: bool | None = None, check: bool = True):
        if exact is None:
            exact = _detect_exact(C)
        arr = _as_array(C, exact)
        if arr.ndim != 3 or not (arr.shape[0] == arr.shape[1] == arr.shape[2]):
            raise DimensionError("cubic form needs an n x n x n tensor")
        object.__setattr__(self, "C", arr)
        if check and not self.is_symmetric():
            raise ValueError("tensor is not fully symmetric")

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def exact(self) -> bool:
        return self.C.dtype == object

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        perms = [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
        if self.exact:
            return all(
                self.C[i, j, k] == self.C[p]
                for i, j, k in itertools.combinations_with_replacement(range(self.n), 3)
                for p in {tuple((i, j, k)[s] for s in perm) for perm in perms}
            )
        scale = max(np.abs(self.C).max(initial=0.0), 1e-300)
        return all(np.all(np.abs(self.C - self.C.transpose(p)) <= rtol * scale) for p in perms)

    def to_float(self) -> "CubicForm":
        if not self.exact:
            return self
        return CubicForm(np.vectorize(complex, otypes=[np.complex128])(self.C), exact=False, check=False)

    def transform(self, A) -> "CubicForm":
        """Substitution action: the form v -> C(Av, Av, Av)."""
        exact = self.exact and all(_is_exact_scalar(x) for row in A for x in row)
        T = self if exact else self.to_float()
        Aa = _as_array(A, exact)
        out = np.einsum("ijk,ia,jb,kc->abc", T.C, Aa, Aa, Aa, optimize=False)
        return CubicForm(out, exact=exact, check=False)

    def as_polynomial(self) -> MVPoly:
        """The cubic v -> sum C_ijk v_i v_j v_k."""
        terms: dict = {}
        zero = ZERO if self.exact else 0j
        for idx in itertools.product(range(self.n), repeat=3):
            c = self.C[idx]
            if c:
                e = [0] * self.n
                for i in idx:
                    e[i] += 1
                terms[tuple(e)] = terms.get(tuple(e), zero) + c
        return MVPoly(self.n, terms, self.exact)

    @classmethod
    def from_polynomial(cls, p: MVPoly) -> "CubicForm":
        """Third-derivative tensor of a cubic polynomial (so X1^3 gives C_000 = 6)."""
        if p.degree > 3:
            raise ValueError("from_polynomial expects a polynomial of degree <= 3")
        return third_tensor_at(p, [ZERO] * p.nvars if p.exact else np.zeros(p.nvars))

    @classmethod
    def from_entries(cls, n: int, entries, exact: bool = True) -> "CubicForm":
        """Average the listed (i, j, k) -> value entries over index permutations.

        Listing each monomial X_i X_j X_k once with its coefficient gives a tensor
        whose form C(v, v, v) equals the polynomial with those coefficients.
        """
        zero = ZERO if exact else 0j
        T = np.empty((n, n, n), dtype=object if exact else np.complex128)
        T[...] = zero
        for (i, j, k), val in entries:
            for idx in range(3):
                if not 0 <= (i, j, k)[idx] < n:
                    raise DimensionError(f"index {(i, j, k)} out of range for n={n}")
            T[i, j, k] = T[i, j, k] + val
        sym = np.empty_like(T)
        sym[...] = zero
        for perm in itertools.permutations(range(3)):
            sym = sym + T.transpose(perm)
        sym = sym * (GaussQ(Fraction(1, 6)) if exact else 1 / 6)
        return cls(sym, exact=exact, check=False)

    def to_json(self) -> dict:
        entries = []
        for i, j, k in itertools.combinations_with_replacement(range(self.n), 3):
            c = self.C[i, j, k]
            if c:
                mult = len(set(itertools.permutations((i, j, k))))
                val = c * mult
                if self.exact:
                    entries.append({"ijk": [i, j, k], "re": format_rational(val.re), "im": format_rational(val.im)})
                else:
                    entries.append({"ijk": [i, j, k], "re": val.real, "im": val.imag})
        return {"n": self.n, "entries": entries}

    @classmethod
    def from_json(cls, obj: dict) -> "CubicForm":
        try:
            n = obj["n"]
            raw = obj["entries"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"CubicForm JSON needs 'n' and 'entries': {exc}") from None
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ValueError("n must be a positive integer")
        kinds = set()
        entries = []
        for e in raw:
            ijk = e["ijk"]
            if len(ijk) != 3 or any(not isinstance(i, int) or isinstance(i, bool) for i in ijk):
                raise ValueError(f"bad index triple {ijk!r}")
            re, im = e.get("re"), e.get("im")
            if re is None:
                re = "0" if isinstance(im, str) or im is None else 0.0
            if im is None:
                im = "0" if isinstance(re, str) else 0.0
            if isinstance(re, str) and isinstance(im, str):
                kinds.add("exact")
                entries.append((tuple(ijk), GaussQ(parse_rational(re), parse_rational(im))))
            elif all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (re, im)):
                kinds.add("float")
                entries.append((tuple(ijk), complex(re, im)))
            else:
                raise ValueError("mixed exact and float parts in one entry")
        if len(kinds) > 1:
            raise ValueError("mixed exact and float coefficients")
        return cls.from_entries(n, entries, exact=kinds != {"float"})


# ---------------------------------------------------------------------------
# derivative tensors at a point


def _derivative_polys(p: MVPoly, order: int) -> dict:
    cache = p.__dict__.setdefault("_dcache", {})
    if order not in cache:
        n = p.nvars
        out = {}
        for idx in itertools.combinations_with_replacement(range(n), order):
            q = p
            for i in idx:
                q = q.diff(i)
            out[idx] = q
        cache[order] = out
    return cache[order]


def _tensor_at(p: MVPoly, b, order: int):
    vals, exact_b = _point(b, p.nvars)
    exact = exact_b and p.exact
    n = p.nvars
    polys = _derivative_polys(p, order)
    arr = np.empty((n,) * order, dtype=object if exact else np.complex128)
    for idx, q in polys.items():
        v = evaluate(q, vals) if exact else evaluate(q, [complex(x) for x in vals])
        for perm in set(itertools.permutations(idx)):
            arr[perm] = v
    return arr, exact


def hessian_at(p: MVPoly, b) -> QuadraticForm:
    arr, exact = _tensor_at(p, b, 2)
    return QuadraticForm(arr, exact=exact, check=False)


def third_tensor_at(p: MVPoly, b) -> CubicForm:
    arr, exact = _tensor_at(p, b, 3)
    return CubicForm(arr, exact=exact, check=False)


def contract(C: CubicForm, v) -> QuadraticForm:
    """Q_jk = sum_i v_i C_ijk."""
    vals, exact_v = _point(v, C.n)
    if exact_v and C.exact:
        va = np.empty(C.n, dtype=object)
        va[:] = vals
        return QuadraticForm(np.tensordot(va, C.C, axes=([0], [0])), exact=True, check=False)
    va = np.asarray([complex(x) for x in vals], dtype=np.complex128)
    return QuadraticForm(np.tensordot(va, C.to_float().C, axes=([0], [0])), exact=False, check=False)


def numeric_rank(M: np.ndarray, tol: float = DEFAULT_RANK_TOL, atol: float = 0.0) -> int:
    """Number of singular values above max(tol * s_max, atol)."""
    M = np.asarray(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return 0
    return int(np.sum(s > max(tol * smax, atol)))


def form_rank(Q: QuadraticForm, tol: float = DEFAULT_RANK_TOL) -> int:
    """Exact rank by elimination in exact mode; SVD rank relative to s_max otherwise."""
    if Q.exact:
        return exact_linalg.rank(Q.M.tolist())
    return numeric_rank(Q.M, tol)


def random_exact_poly(rng: np.random.Generator, n: int, degree: int, n_terms: int, num_range=5, den_range=4,
                      complex_coeffs: bool = False) -> MVPoly:
    """Random polynomial with small Gaussian-rational coefficients (for tests and fixtures)."""
    terms = {}
    for _ in range(n_terms):
        d = int(rng.integers(0, degree + 1))
        e = [0] * n
        for _ in range(d):
            e[int(rng.integers(0, n))] += 1
        re = Fraction(int(rng.integers(-num_range, num_range + 1)), int(rng.integers(1, den_range + 1)))
        im = Fraction(int(rng.integers(-num_range, num_range + 1)), int(rng.integers(1, den_range + 1))) if complex_coeffs else 0
        terms[tuple(e)] = terms.get(tuple(e), ZERO) + GaussQ(re, im)
    return MVPoly(n, terms, exact=True)

