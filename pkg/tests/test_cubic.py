from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from lagfib import exact_linalg
from lagfib.cubic import (
    all_partials_degenerate,
    classify,
    det_nonzero_witness,
    det_polynomial,
    is_cone,
    pencil_nondegenerate,
    pencil_witness,
    recover_plane,
    singular_plane,
    vanishes_doubly,
)
from lagfib.errors import ModeError, PreconditionError
from lagfib.fixtures import lossen_cubic, random_cone, random_invertible_int, random_rational_cubic
from lagfib.poly import CubicForm, MVPoly, QuadraticForm
from lagfib.scalar import GaussQ

seeds = st.integers(0, 2**32 - 1)


def cubic(n, text_terms):
    x = MVPoly.variables(n)
    return CubicForm.from_polynomial(sum((c * x[i] * x[j] * x[k] for c, i, j, k in text_terms), MVPoly.zero(n)))


def fermat(n=3):
    return cubic(n, [(1, i, i, i) for i in range(n)])


def axes(idx, n=5):
    return exact_linalg.row_space_basis([[GaussQ(1 if j == i else 0) for j in range(n)] for i in idx])


def sym(x: GaussQ):
    return sympy.Rational(x.re.numerator, x.re.denominator) + sympy.I * sympy.Rational(x.im.numerator, x.im.denominator)


def sympy_pencil(C: CubicForm):
    lam = sympy.symbols(f"l0:{C.n}")
    M = sympy.zeros(C.n, C.n)
    for i in range(C.n):
        for j in range(C.n):
            M[i, j] = sum(lam[k] * sym(C.C[k, i, j]) for k in range(C.n))
    return M, lam


def sympy_vertex_dim(C: CubicForm):
    n = C.n
    # v -> C(v, ., .) as an n^2 x n matrix
    A = sympy.Matrix([[sym(C.C[k, i, j]) for k in range(n)] for i in range(n) for j in range(n)])
    return n - A.rank()


def conj(A):
    return [[GaussQ(x) for x in row] for row in A]


# ---------------------------------------------------------------------------
# examples


def test_cone_examples():
    v = is_cone(cubic(3, [(1, 0, 0, 0)]))
    assert exact_linalg.row_space_basis(v) == axes([1, 2], 3)
    assert is_cone(fermat()) is None
    assert is_cone(lossen_cubic()) is None
    assert sympy_vertex_dim(lossen_cubic()) == 0


def test_det_polynomial_examples():
    l0, l1, l2 = MVPoly.variables(3)
    assert det_polynomial(fermat()) == l0 * l1 * l2 * 216
    assert det_polynomial(cubic(3, [(1, 0, 0, 1), (2, 1, 1, 1)])).is_zero
    assert det_polynomial(lossen_cubic()).is_zero


def test_all_partials_examples():
    assert not all_partials_degenerate(fermat())
    assert all_partials_degenerate(cubic(4, [(1, 0, 0, 0)]))
    assert all_partials_degenerate(lossen_cubic())
    assert det_nonzero_witness(fermat()) is not None
    assert det_nonzero_witness(lossen_cubic()) is None


def test_lossen_plane_exact_and_float():
    C = lossen_cubic()
    assert exact_linalg.row_space_basis(singular_plane(C)) == axes([2, 3, 4])
    W = np.asarray(singular_plane(C.to_float()), dtype=complex)
    # float plane spans the same space: its first two coordinates vanish
    assert W.shape == (3, 5) and np.abs(W[:, :2]).max() < 1e-10 and np.linalg.matrix_rank(W[:, 2:]) == 3


def test_plane_refused_for_cones_and_other_n():
    with pytest.raises(PreconditionError) as exc:
        recover_plane(cubic(5, [(1, 0, 0, 2)]))
    assert exc.value.module == "cubic_classify"
    with pytest.raises(PreconditionError):
        recover_plane(fermat(5))
    with pytest.raises(PreconditionError):
        recover_plane(fermat(4))


def test_vanishes_doubly_examples():
    C = lossen_cubic()
    assert vanishes_doubly(C, axes([2, 3, 4]))
    assert not vanishes_doubly(C, axes([0, 3, 4]))
    F3 = fermat()
    rng = np.random.default_rng(3)
    for _ in range(5):
        W = [[GaussQ(int(x)) for x in row] for row in rng.integers(-3, 4, (2, 3))]
        if exact_linalg.rank(W) == 2:
            assert not vanishes_doubly(F3, W)
    assert vanishes_doubly(F3, [])


def test_pencil_examples():
    x = MVPoly.variables(5)
    C = lossen_cubic()
    assert pencil_nondegenerate(QuadraticForm.identity(5), C)
    assert not pencil_nondegenerate(QuadraticForm.from_polynomial(x[0] * x[2]), C)
    cone = cubic(4, [(1, 0, 0, 1)])
    assert not pencil_nondegenerate(QuadraticForm.zeros(4), cone)
    assert pencil_witness(QuadraticForm.zeros(4), cone) is None
    with pytest.raises(ModeError):
        pencil_nondegenerate(QuadraticForm.identity(5).to_float(), C)


def test_classify_report_json():
    rep = classify(lossen_cubic())
    js = rep.to_json()
    assert js["is_cone"] is False and js["all_partials_degenerate"] is True
    assert js["singular_plane"][0]["re"] == ["0", "0", "1", "0", "0"]
    rep = classify(fermat().to_float())
    assert rep.to_json()["certificates"]["probabilistic"] is True and rep.det_poly is None


def test_larger_n_supported():
    C = cubic(6, [(1, 0, 0, 0), (1, 1, 1, 2), (1, 3, 4, 5)])
    assert is_cone(C) is None
    assert det_polynomial(C).is_homogeneous(6) or det_polynomial(C).is_zero
    with pytest.raises(PreconditionError):
        recover_plane(C)


# ---------------------------------------------------------------------------
# oracles and properties


@settings(max_examples=40)
@given(seeds, st.integers(2, 4))
def test_det_polynomial_matches_sympy(seed, n):
    C = random_rational_cubic(np.random.default_rng(seed), n)
    M, lam = sympy_pencil(C)
    expected = sympy.expand(M.det())
    D = det_polynomial(C)
    got = sum((sym(c) * sympy.prod([l**k for l, k in zip(lam, e)]) for e, c in D.terms.items()), sympy.Integer(0))
    assert sympy.expand(got - expected) == 0
    assert D.is_zero or D.is_homogeneous(n)
    assert all_partials_degenerate(C) == (expected == 0)


@given(seeds, st.integers(2, 4))
def test_cone_matches_sympy_nullspace(seed, n):
    C = random_rational_cubic(np.random.default_rng(seed), n)
    v = is_cone(C)
    dim = sympy_vertex_dim(C)
    assert (v is not None) == (dim > 0)
    if v is not None:
        assert len(v) == dim


@given(seeds, st.integers(2, 4))
def test_gordan_noether_small_n(seed, n):
    rng = np.random.default_rng(seed)
    for C in (random_rational_cubic(rng, n), random_cone(rng, n)):
        assert (is_cone(C) is not None) == all_partials_degenerate(C)


@settings(max_examples=40)
@given(seeds, st.integers(2, 5))
def test_cone_implies_zero_det_implies_degenerate(seed, n):
    C = random_cone(np.random.default_rng(seed), n)
    assert is_cone(C) is not None
    assert det_polynomial(C).is_zero
    assert all_partials_degenerate(C)


@given(seeds, st.integers(2, 4))
def test_equivariance(seed, n):
    rng = np.random.default_rng(seed)
    C = random_rational_cubic(rng, n) if seed % 2 else random_cone(rng, n)
    A = conj(random_invertible_int(rng, n))
    Ct = C.transform(A)
    assert (is_cone(C) is None) == (is_cone(Ct) is None)
    assert all_partials_degenerate(C) == all_partials_degenerate(Ct)
    Q0 = QuadraticForm([[GaussQ(int(x)) for x in row] for row in (lambda B: B + B.T)(rng.integers(-2, 3, (n, n)))])
    Aa = np.asarray(A, dtype=object)
    Q0t = QuadraticForm(Aa.T @ Q0.M @ Aa)
    assert pencil_nondegenerate(Q0, C) == pencil_nondegenerate(Q0t, Ct)


@settings(max_examples=25)
@given(seeds)
def test_lossen_conjugates_move_the_plane(seed):
    rng = np.random.default_rng(seed)
    A = conj(random_invertible_int(rng, 5))
    Ct = lossen_cubic().transform(A)
    W = singular_plane(Ct, seed=seed)
    moved = exact_linalg.row_space_basis([exact_linalg.solve(A, w) for w in axes([2, 3, 4])])
    assert exact_linalg.row_space_basis(W) == moved
    assert vanishes_doubly(Ct, W)


@given(seeds, st.integers(2, 4))
def test_float_verdicts_agree_with_exact(seed, n):
    C = random_rational_cubic(np.random.default_rng(seed), n)
    Cf = C.to_float()
    assert (is_cone(C) is None) == (is_cone(Cf) is None)
    assert all_partials_degenerate(C) == all_partials_degenerate(Cf)


def test_exact_only_operations_refuse_floats():
    with pytest.raises(ModeError):
        det_polynomial(fermat().to_float())
    with pytest.raises(ModeError):
        det_nonzero_witness(fermat().to_float())


def test_rational_entries_supported():
    C = cubic(3, [(Fraction(1, 3), 0, 0, 0), (Fraction(-5, 2), 1, 1, 2), (Fraction(7, 4), 0, 1, 2)])
    M, _ = sympy_pencil(C)
    assert all_partials_degenerate(C) == (sympy.expand(M.det()) == 0)
