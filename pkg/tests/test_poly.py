import itertools
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from lagfib.cubic import det_polynomial
from lagfib.errors import DimensionError, ModeError
from lagfib.poly import (
    CubicForm,
    MVPoly,
    QuadraticForm,
    contract,
    diff,
    evaluate,
    form_rank,
    hessian_at,
    numeric_rank,
    random_exact_poly,
    third_tensor_at,
)
from lagfib.scalar import GaussQ, I

seeds = st.integers(0, 2**32 - 1)


def zs(n, exact=True):
    return MVPoly.variables(n, exact=exact)


def sympy_of(p: MVPoly):
    xs = sympy.symbols(f"x0:{p.nvars}")
    expr = 0
    for e, c in p.terms.items():
        coef = sympy.Rational(c.re.numerator, c.re.denominator) + sympy.I * sympy.Rational(c.im.numerator, c.im.denominator)
        expr += coef * sympy.prod([x**k for x, k in zip(xs, e)])
    return expr, xs


def test_evaluate_examples():
    z1, z2 = zs(2)
    assert evaluate(z1**2 + z2 * I, [1, 2]) == GaussQ(1, 2)
    assert evaluate(MVPoly.zero(2), [3, 4]) == GaussQ(0)
    a, b, c = zs(3)
    assert evaluate(a * b * c, [2, 3, 5]) == GaussQ(30)
    assert evaluate((a * b * c).to_float(), np.array([2, 3, 5])) == pytest.approx(30)


def test_diff_examples():
    z1, z2 = zs(2)
    assert diff(z1**3 / 6, 0) == z1**2 / 2
    assert diff(z2, 0).is_zero


def test_no_zero_terms_and_exponent_lengths():
    z1, z2 = zs(2)
    p = z1 * z2 - z2 * z1 + z1
    assert all(c for c in p.terms.values())
    assert all(len(e) == 2 for e in p.terms)
    assert p == z1


def test_mode_mixing_and_dimension_errors():
    z1, = zs(1)
    w1, = zs(1, exact=False)
    # mixing promotes to float; exactness is never silently claimed
    assert not (z1 + w1).exact
    assert not (z1 * 0.5).exact
    assert (z1 * Fraction(1, 2)).exact
    with pytest.raises(ModeError):
        det_polynomial(CubicForm.from_polynomial(z1**3 * 0.5))
    with pytest.raises(DimensionError):
        _ = z1 + zs(2)[0]


@given(seeds)
def test_mixed_partials_commute(seed):
    p = random_exact_poly(np.random.default_rng(seed), 3, 5, 8, complex_coeffs=True)
    for i, j in itertools.permutations(range(3), 2):
        assert diff(diff(p, i), j) == diff(diff(p, j), i)


@given(seeds)
def test_evaluate_and_diff_match_sympy(seed):
    rng = np.random.default_rng(seed)
    p = random_exact_poly(rng, 3, 4, 6, complex_coeffs=True)
    expr, xs = sympy_of(p)
    pt = [GaussQ(Fraction(int(rng.integers(-5, 6)), 3), Fraction(int(rng.integers(-5, 6)), 2)) for _ in range(3)]
    sub = {x: sympy.Rational(v.re.numerator, v.re.denominator) + sympy.I * sympy.Rational(v.im.numerator, v.im.denominator)
           for x, v in zip(xs, pt)}
    got = evaluate(p, pt)
    want = sympy.expand(expr.subs(sub))
    assert sympy.Rational(got.re.numerator, got.re.denominator) == sympy.re(want)
    assert sympy.Rational(got.im.numerator, got.im.denominator) == sympy.im(want)
    d, _ = sympy_of(diff(p, 1))
    assert sympy.expand(d - sympy.diff(expr, xs[1])) == 0


def test_hessian_examples():
    z1, z2 = zs(2)
    H = hessian_at((z1**2 + z2**2) * GaussQ(0, Fraction(1, 2)), [3, 7]).M
    assert H.tolist() == [[I, GaussQ(0)], [GaussQ(0), I]]
    H = hessian_at(z1**2 * z2, [1, 1]).M
    assert H.tolist() == [[GaussQ(2), GaussQ(2)], [GaussQ(2), GaussQ(0)]]


@given(seeds)
def test_hessian_symmetric(seed):
    rng = np.random.default_rng(seed)
    p = random_exact_poly(rng, 3, 4, 8, complex_coeffs=True)
    b = [GaussQ(Fraction(int(x), 4)) for x in rng.integers(-4, 5, 3)]
    assert hessian_at(p, b).is_symmetric()


def test_third_tensor_examples():
    z1, z2, z3 = zs(3)
    C = third_tensor_at(z1**3 / 6, [0, 0, 0]).C
    assert C[0, 0, 0] == GaussQ(1)
    assert sum(1 for x in C.ravel() if x) == 1
    assert not any(third_tensor_at(z1 * z2 + z3**2 + z1, [1, 2, 3]).C.ravel())
    base = third_tensor_at(z1**2 * z3, [1, 2, 3]).C
    shifted = third_tensor_at(z1**2 * z3 + z2**2 * 5 + z1 * z3 - 7, [1, 2, 3]).C
    assert (base == shifted).all()


@given(seeds)
def test_cubic_tensor_symmetric(seed):
    rng = np.random.default_rng(seed)
    p = random_exact_poly(rng, 3, 5, 8, complex_coeffs=True)
    T = third_tensor_at(p, [GaussQ(1), GaussQ(0, 1), GaussQ(Fraction(1, 2))])
    assert T.is_symmetric()


@given(seeds)
def test_jets_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    p = random_exact_poly(rng, 3, 4, 8, complex_coeffs=True).to_float()
    b = 0.5 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
    h = 1e-4
    H = np.asarray(hessian_at(p, b).M, dtype=complex)
    C = np.asarray(third_tensor_at(p, b).C, dtype=complex)
    grad = lambda z: np.array([evaluate(diff(p, i), z) for i in range(3)])
    hess = lambda z: np.asarray(hessian_at(p, z).M, dtype=complex)
    Hfd = np.stack([(grad(b + h * e) - grad(b - h * e)) / (2 * h) for e in np.eye(3)], axis=1)
    Cfd = np.stack([(hess(b + h * e) - hess(b - h * e)) / (2 * h) for e in np.eye(3)], axis=2)
    scale = max(np.abs(H).max(), 1.0)
    assert np.abs(H - Hfd).max() / scale < 1e-6
    assert np.abs(C - Cfd).max() / max(np.abs(C).max(), 1.0) < 1e-6


def test_contract_examples():
    z1, z2 = zs(2)
    C = third_tensor_at(z1**3 / 6, [0, 0])
    Q = contract(C, [1, 0]).M
    assert Q.tolist() == [[GaussQ(1), GaussQ(0)], [GaussQ(0), GaussQ(0)]]
    assert not any(contract(C, [0, 0]).M.ravel())


@given(seeds)
def test_contract_linear(seed):
    rng = np.random.default_rng(seed)
    C = third_tensor_at(random_exact_poly(rng, 3, 3, 10, complex_coeffs=True), [0, 0, 0])
    u = [GaussQ(int(x), int(y)) for x, y in rng.integers(-4, 5, (3, 2))]
    v = [GaussQ(int(x), int(y)) for x, y in rng.integers(-4, 5, (3, 2))]
    lhs = contract(C, [a + b for a, b in zip(u, v)]).M
    rhs = contract(C, u).M + contract(C, v).M
    assert (lhs == rhs).all()


def test_form_rank_examples():
    assert form_rank(QuadraticForm.identity(5)) == 5
    assert form_rank(QuadraticForm.zeros(5)) == 0
    x = MVPoly.variables(5)
    Q = QuadraticForm.from_polynomial(x[0] * x[2] * 2 + x[1] * x[4])
    S = sympy.Matrix([[sympy.Rational(e.re.numerator, e.re.denominator) for e in row] for row in Q.M.tolist()])
    assert form_rank(Q) == S.rank() == 4


@given(seeds)
def test_float_rank_matches_exact(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    r = int(rng.integers(0, n + 1))
    A = rng.integers(-3, 4, (n, r))
    M = A @ np.diag(rng.integers(1, 4, r)) @ A.T
    Q = QuadraticForm([[GaussQ(int(x)) for x in row] for row in M])
    assert form_rank(Q) == form_rank(Q.to_float()) == numeric_rank(M.astype(float))


def test_cubic_form_json_symmetrizes():
    obj = {"n": 3, "entries": [{"ijk": [2, 0, 0], "re": "1", "im": "0"}]}
    C = CubicForm.from_json(obj)
    assert C.is_symmetric()
    assert CubicForm.from_json(C.to_json()).C.tolist() == C.C.tolist()
    x = MVPoly.variables(3)
    assert C.as_polynomial() == x[0] ** 2 * x[2]


def test_mvpoly_json_round_trip():
    z1, z2 = zs(2)
    p = z1**2 * GaussQ(Fraction(1, 3), -2) + z2
    assert MVPoly.from_json(p.to_json()) == p
    with pytest.raises(ValueError):
        MVPoly.from_json({"nvars": 2, "terms": [{"exp": [1], "re": "1"}]})
    with pytest.raises(ValueError):
        MVPoly.from_json({"nvars": 1, "terms": [{"exp": [1], "re": "1", "im": 0.5}]})
