from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lagfib.betti import (
    Box,
    NewtonConfig,
    Section,
    acz_consistency,
    assert_even,
    betti_batch,
    betti_coords,
    betti_jacobian,
    density_scan,
    jacobian_rank,
    phi_nu_map,
    phi_nu_rank,
    to_complex,
    to_real,
    torsion_search,
)
from lagfib.errors import DimensionError, InadmissibleFrame, LemmaViolation
from lagfib.fixtures import (
    INSTANCE_KINDS,
    block_product,
    cubic_potential,
    irrational_section,
    model_potential,
    quadratic_section,
    random_instance,
    slice_box,
    z,
)
from lagfib.foliation import probe_rank_constancy
from lagfib.period import Potential, period_frame
from lagfib.poly import random_exact_poly
from lagfib.scalar import GaussQ, I

seeds = st.integers(0, 2**32 - 1)
F = Fraction


def small_point(rng, n):
    return [GaussQ(F(int(x), 10), F(int(y), 10)) for x, y in rng.integers(-2, 3, (n, 2))]


# ---------------------------------------------------------------------------
# coordinates


def test_betti_coords_examples():
    P = model_potential(2)
    z1, z2 = z(2)
    b = [GaussQ(F(3, 10), F(2, 5)), GaussQ(F(-1, 2), F(1, 3))]
    assert list(betti_coords(P, Section(z1), b).a) == [1, 0, 0, 0]
    assert list(betti_coords(P, Section(z1 * I), b).a) == [0, 0, 1, 0]
    assert list(betti_coords(P, Section(z1**2 / 2), b).a) == [F(3, 10), 0, F(2, 5), 0]


def test_betti_coords_float_matches_exact():
    P = cubic_potential(2)
    s = quadratic_section(2, (0, 1))
    b = [GaussQ(F(1, 10), F(1, 5)), GaussQ(F(-1, 7), F(1, 9))]
    exact = np.array([float(x) for x in betti_coords(P, s, b).a])
    fl = betti_coords(Potential(2, P.g.to_float()), Section(s.f.to_float()), np.array([complex(x) for x in b])).a
    assert np.allclose(exact, fl, atol=1e-14)


@given(seeds, st.sampled_from(INSTANCE_KINDS))
def test_solution_reconstructs_differential(seed, kind):
    P, s, b = random_instance(np.random.default_rng(seed), kind)
    X = to_real(b)[None, :]
    a, _, _, ok = betti_batch(P, s, X, with_jacobian=False)
    if not ok[0]:
        return
    fr = period_frame(Potential(P.n, P.g.to_float()), b)
    Fd = np.asarray(fr.frame_differentials, dtype=complex)
    fgrad, _ = s.jets(b[None, :])
    assert np.abs(a[0] @ Fd - fgrad[0]).max() < 1e-10 * max(1.0, np.abs(fgrad).max())


def test_inadmissible_point_refused():
    z1, _ = z(2)
    P = Potential(2, model_potential(2).g + z1**3)
    with pytest.raises(InadmissibleFrame) as exc:
        betti_coords(P, quadratic_section(2), [GaussQ(0, -1), 0])
    assert exc.value.module == "betti"
    with pytest.raises(DimensionError):
        betti_coords(P, quadratic_section(3), [0, 0])


# ---------------------------------------------------------------------------
# Jacobian


def test_frame_constant_is_constant():
    P = cubic_potential(2)
    c = [F(1, 3), F(-2), F(5, 7), F(1, 2)]
    s = Section.frame_constant(P, [GaussQ(x) for x in c])
    b = [GaussQ(F(1, 10), F(1, 20)), GaussQ(F(-1, 10), F(1, 30))]
    st_ = betti_jacobian(P, s, b)
    assert list(betti_coords(P, s, b).a) == c
    assert st_.rank == 0 and not any(st_.J.ravel())


@given(seeds)
def test_frame_constant_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    P = Potential(n, model_potential(n).g + random_exact_poly(rng, n, 4, 5) * F(1, 4))
    c = [GaussQ(F(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))) for _ in range(2 * n)]
    s = Section.frame_constant(P, c)
    b = small_point(rng, n)
    try:
        st_ = betti_jacobian(P, s, b)
    except InadmissibleFrame:
        return
    assert list(st_.a) == [x.re for x in c]
    assert not any(st_.J.ravel())


@given(seeds)
def test_quadratic_shift_with_compensation(seed):
    # g -> g + q and f -> f + sum c_{n+i} dq/dz_i keeps a frame-constant section frame-constant
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    P = Potential(n, model_potential(n).g + random_exact_poly(rng, n, 3, 4) * F(1, 4))
    q = random_exact_poly(rng, n, 2, 5, complex_coeffs=True) * F(1, 8)
    c = [GaussQ(F(int(rng.integers(-5, 6)), 3)) for _ in range(2 * n)]
    s = Section.frame_constant(P, c)
    P2 = Potential(n, P.g + q)
    f2 = s.f
    for i in range(n):
        f2 = f2 + q.diff(i) * c[n + i]
    b = small_point(rng, n)
    try:
        a1 = betti_coords(P, s, b).a
        a2 = betti_coords(P2, Section(f2), b).a
    except InadmissibleFrame:
        return
    assert list(a1) == list(a2) == [x.re for x in c]


def test_hand_jacobian():
    P = model_potential(2)
    st_ = betti_jacobian(P, quadratic_section(2), [GaussQ(F(1, 3), F(1, 4)), GaussQ(0)])
    expected = np.zeros((4, 4), dtype=object)
    expected[0, 0] = expected[2, 2] = 1
    assert (st_.J == expected).all() and st_.rank == 2 and st_.rank_even_ok


@given(seeds, st.sampled_from(INSTANCE_KINDS))
def test_analytic_matches_finite_difference(seed, kind):
    P, s, b = random_instance(np.random.default_rng(seed), kind)
    Pf, sf = Potential(P.n, P.g.to_float()), Section(s.f.to_float())
    try:
        Ja = betti_jacobian(Pf, sf, b).J
        Jf = betti_jacobian(Pf, sf, b, method="finite-difference").J
    except InadmissibleFrame:
        return
    assert np.linalg.norm(Ja - Jf) <= 1e-6 * max(np.linalg.norm(Ja), 1e-3)


def test_exact_and_float_jacobian_agree():
    P = cubic_potential(2)
    s = Section(z(2)[0] ** 3 / 3 + z(2)[0] * z(2)[1])
    b = [GaussQ(F(1, 10), F(1, 5)), GaussQ(F(-1, 7), F(1, 9))]
    Je = np.asarray(betti_jacobian(P, s, b).J, dtype=float)
    Jf = betti_jacobian(Potential(2, P.g.to_float()), Section(s.f.to_float()),
                        np.array([complex(x) for x in b])).J
    assert np.abs(Je - Jf).max() < 1e-12


@given(seeds, st.sampled_from(INSTANCE_KINDS))
def test_rank_even_where_locally_constant(seed, kind):
    P, s, b = random_instance(np.random.default_rng(seed), kind)
    X = to_real(b)
    _, _, _, ok = betti_batch(P, s, X[None, :], with_jacobian=False)
    if not ok[0]:
        return
    r0, around = probe_rank_constancy(P, s, X, 1e-3, 1e-8)
    if all(r == r0 for r in around):
        assert r0 % 2 == 0
        assert_even(r0)


def test_assert_even_raises():
    with pytest.raises(LemmaViolation):
        assert_even(3)


def test_jacobian_rank_scale():
    J = np.diag([1.0, 1e-12, 0, 0])
    assert jacobian_rank(J, 0.0) == 1
    assert jacobian_rank(np.zeros((2, 2)), 0.0) == 0
    # a tiny Jacobian made of cancelling large terms counts as zero
    assert jacobian_rank(np.diag([1e-10, 0]), 1.0) == 0


# ---------------------------------------------------------------------------
# torsion


def test_slice_torsion_matches_lattice():
    res = torsion_search(model_potential(2), quadratic_section(2), slice_box(), 4)
    got = sorted((round(h.b[0].real * 4), round(h.b[0].imag * 4)) for h in res)
    assert got == sorted((k, l) for k in range(5) for l in range(5))
    for h in res:
        assert h.residual <= 1e-12 and h.N == 4
        a = betti_coords(model_potential(2), quadratic_section(2), np.array(h.b)).a
        assert np.abs(a - np.array(h.p) / 4).max() <= 1e-12
        assert abs(h.b[1]) == 0


def test_no_torsion_for_irrational_constant():
    P = model_potential(2)
    box = Box.from_complex([[0, 1], [0, 1]], [[0, 1], [0, 1]])
    s = irrational_section(P)
    for N in range(1, 9):
        assert len(torsion_search(Potential(2, P.g.to_float()), s, box, N)) == 0


def test_no_torsion_for_block_product():
    P, s = block_product()
    box = Box.from_complex([[0, 0.5], [0, 0.1]], [[0, 0.5], [0, 0.1]])
    for N in (1, 2, 3, 5, 8):
        assert len(torsion_search(P, s, box, N)) == 0


def test_torsion_refuses_inadmissible_box():
    z1, _ = z(2)
    P = Potential(2, model_potential(2).g + z1**3)
    box = Box.from_complex([[0, 0.5], [0, 0]], [[-1, 0], [0, 0]])
    with pytest.raises(InadmissibleFrame):
        torsion_search(P, quadratic_section(2), box, 2)


def test_torsion_explicit_grid_and_dedup():
    res = torsion_search(model_potential(2), quadratic_section(2), slice_box(), 2, grid=[9, 1, 9, 1],
                         newton_cfg=NewtonConfig())
    assert len(res) == 9 and res.grid == (9, 1, 9, 1)
    with pytest.raises(DimensionError):
        torsion_search(model_potential(2), quadratic_section(2), slice_box(), 2, grid=[3, 3])


# ---------------------------------------------------------------------------
# density


def test_density_examples():
    rows = density_scan(model_potential(2), quadratic_section(2), slice_box(), [1, 2, 4, 8, 16], 0.1, samples=500)
    cov = [r.coverage for r in rows]
    assert cov == sorted(cov) and cov[-1] == 1.0
    P = model_potential(2)
    rows = density_scan(Potential(2, P.g.to_float()), irrational_section(P), slice_box(), [1, 4], 0.1, samples=100)
    assert all(r.coverage == 0.0 and r.hit_count == 0 for r in rows)


# ---------------------------------------------------------------------------
# transversality harness and phi_nu


def test_acz_examples():
    box = Box.from_complex([[-0.1, 0.1]] * 2, [[-0.1, 0.1]] * 2)
    rep = acz_consistency(cubic_potential(2), quadratic_section(2, (0, 1)), box, samples=16)
    assert rep.verdict == "CONSISTENT" and rep.max_betti_rank == 4
    rep = acz_consistency(model_potential(2), quadratic_section(2), box, samples=16)
    assert rep.verdict == "CONSISTENT" and rep.max_nabla_rank == 0
    # nondegenerate non-cone cubic everywhere but a rank-0 section: flagged
    P = cubic_potential(2)
    s = Section.frame_constant(P, [GaussQ(1), GaussQ(0), GaussQ(0), GaussQ(F(1, 2))])
    assert acz_consistency(P, s, box, samples=16).verdict == "VIOLATION-WITNESS"


def test_phi_nu_examples():
    P = model_potential(3)
    s = quadratic_section(3)
    rng = np.random.default_rng(0)
    for _ in range(5):
        lam = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        assert phi_nu_rank(P, s, [0, 0, 0], lam) == 4
    z1, z2, z3 = z(3)
    Pc = Potential(3, model_potential(3).g + z1**3 / 6)
    sid = Section((z1**2 + z2**2 + z3**2) / 2)
    assert phi_nu_rank(Pc, sid, [0, 0, 0], [0, 0, 0]) == 6
    with pytest.raises(DimensionError):
        phi_nu_rank(P, s, [0, 0, 0], [1, 2])


@given(seeds)
def test_phi_nu_rank_matches_holomorphic_jacobian(seed):
    rng = np.random.default_rng(seed)
    P, s, b = random_instance(rng, "generic", n=2)
    Pf, sf = Potential(2, P.g.to_float()), Section(s.f.to_float())
    lam = 0.3 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    h = 1e-6
    base = np.concatenate([b, lam])
    cols = []
    for k in range(4):
        e = np.zeros(4, dtype=complex)
        e[k] = h
        p, m = base + e, base - e
        cols.append((phi_nu_map(Pf, sf, p[:2], p[2:]) - phi_nu_map(Pf, sf, m[:2], m[2:])) / (2 * h))
    Jc = np.stack(cols, axis=1)
    s_vals = np.linalg.svd(Jc, compute_uv=False)
    fd_rank = int(np.sum(s_vals > 1e-6 * s_vals[0]))
    assert fd_rank == phi_nu_rank(Pf, sf, b, lam, tol=1e-6)


# ---------------------------------------------------------------------------
# boxes


def test_box_roundtrip_and_grid():
    box = Box.from_complex([[0, 1], [0, 0]], [[-1, 1], [2, 2]])
    assert Box.from_json(box.to_json()) == box
    G = box.grid([3, 5, 2, 7])
    assert G.shape == (3 * 2, 4)
    assert box.contains(G).all()
    assert not box.contains(np.array([[2.0, 0, 0, 2]]))[0]
    X = box.sample(np.random.default_rng(1), 50)
    assert box.contains(X).all()
    assert np.allclose(to_real(to_complex(X)), X)
    with pytest.raises(ValueError):
        Box.from_json({"re": [[0, 1]]})
