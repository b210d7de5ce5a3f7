from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagfib import exact_linalg
from lagfib.betti import Section, phi_nu_rank
from lagfib.errors import PreconditionError
from lagfib.fixtures import (
    cubic_potential,
    leaf_plane,
    leaf_potential,
    model_potential,
    perturbed_leaf_potential,
    quadratic_section,
    quartic_leaf_potential,
    random_invertible_int,
    z,
)
from lagfib.foliation import (
    fiber_trace,
    leaf_checks,
    leaf_subspace,
    section_leaf_compat,
    subspace_angle,
)
from lagfib.period import Potential
from lagfib.scalar import GaussQ

F = Fraction
seeds = st.integers(0, 2**32 - 1)


def leaf_point():
    return [GaussQ(F(1, 10), F(1, 20)), GaussQ(F(-1, 30)), GaussQ(F(1, 7)), GaussQ(0, F(1, 9)), GaussQ(F(1, 11))]


def slice_point(u=F(1, 5), v=F(1, 3), w=F(1, 4)):
    return [GaussQ(0), GaussQ(0), GaussQ(u), GaussQ(v), GaussQ(w)]


# ---------------------------------------------------------------------------
# fiber traces


def test_model_fiber_is_a_vertical_line():
    b0 = np.array([0.3 + 0.4j, 0.1j])
    tr = fiber_trace(model_potential(2), quadratic_section(2), b0, steps=60)
    assert tr.rank == 2 and tr.kernel_dim == 2
    # a = (x, 0, y, 0): the fiber through b0 is {z_1 = const}
    assert np.abs(tr.points[:, 0] - b0[0]).max() < 1e-9
    assert np.abs(tr.points[:, 1] - b0[1]).max() > 1e-3
    assert tr.affine_residual < 1e-8 and tr.holo_residual < 1e-8
    assert tr.max_fiber_residual < 1e-10


def test_rank_zero_section_accepted():
    P = cubic_potential(2)
    s = Section.frame_constant(P, [GaussQ(1), GaussQ(0), GaussQ(F(1, 2)), GaussQ(0)])
    tr = fiber_trace(P, s, np.array([0.05 + 0.02j, -0.03j]), steps=30)
    assert tr.rank == 0 and tr.kernel_dim == 4
    assert tr.affine_residual < 1e-8 and tr.holo_residual < 1e-8


def test_full_rank_refused():
    with pytest.raises(PreconditionError) as exc:
        fiber_trace(cubic_potential(2), quadratic_section(2, (0, 1)), np.array([0.1 + 0.1j, 0.05j]))
    assert exc.value.module == "foliation"


def test_non_constant_rank_refused():
    z5 = z(5)
    with pytest.raises(PreconditionError) as exc:
        fiber_trace(leaf_potential(), Section(z5[2] ** 2 / 2), np.array([0.02, 0.01j, 0.03, 0.0, 0.01]))
    assert "locally constant" in exc.value.precondition


@settings(max_examples=10)
@given(seeds)
def test_fiber_membership_affine_and_complex(seed):
    z5 = z(5)
    b0 = np.array([0.02 + 0.01j, -0.01j, 0.03, 0.01 + 0.02j, -0.02])
    tr = fiber_trace(leaf_potential(), Section(z5[0] ** 2 / 2 + z5[0] * z5[1]), b0, steps=40, seed=seed)
    assert tr.rank == 8
    assert tr.max_fiber_residual < 1e-10
    assert tr.affine_residual < 1e-6 and tr.holo_residual < 1e-6


def test_trace_serializes():
    tr = fiber_trace(model_potential(2), quadratic_section(2), np.array([0.3 + 0.4j, 0.1j]), steps=5)
    lines = tr.to_csv().splitlines()
    assert len(lines) == 7 and lines[0].startswith("re_z0,re_z1,im_z0")
    js = tr.to_json()
    assert js["steps"] == 5 and len(js["points"]["re"]) == 6


# ---------------------------------------------------------------------------
# leaves


def test_quartic_potential_leaf_on_slice():
    Q = quartic_leaf_potential()
    for u, v, w in [(F(1, 5), F(1, 3), F(1, 4)), (F(-1, 2), F(2, 7), F(1, 9))]:
        W = leaf_subspace(Q, slice_point(u, v, w))
        assert exact_linalg.row_space_basis(W) == leaf_plane()
        assert exact_linalg.rank(W) == 3


@settings(max_examples=10)
@given(seeds)
def test_conjugated_potential_gives_conjugated_plane(seed):
    rng = np.random.default_rng(seed)
    A = [[GaussQ(x) for x in row] for row in random_invertible_int(rng, 5)]
    L = leaf_potential()
    P = Potential(5, L.g.substitute_linear(A))
    b = leaf_point()
    # g~(z) = g(Az): the point A^{-1} b maps to b and the plane pulls back by A^{-1}
    bt = exact_linalg.solve(A, b)
    try:
        W = leaf_subspace(P, bt)
    except PreconditionError:
        return  # conjugation can break admissibility
    moved = exact_linalg.row_space_basis([exact_linalg.solve(A, w) for w in leaf_plane()])
    assert exact_linalg.row_space_basis(W) == moved


def test_leaf_refused_where_cubic_is_a_cone():
    with pytest.raises(PreconditionError):
        leaf_subspace(model_potential(5), [0] * 5)
    with pytest.raises(PreconditionError):
        leaf_subspace(model_potential(3), [0] * 3)


def test_leaf_checks_pass_and_fail():
    rep = leaf_checks(leaf_potential(), leaf_point())
    assert rep.passed and rep.verdict == "PASS"
    assert max(rep.constancy_residual, rep.quadraticity_residual, rep.affine_partials_residual) < 1e-8
    bad = leaf_checks(perturbed_leaf_potential(), leaf_point(), W=leaf_plane())
    assert bad.verdict == "FAIL"
    # g''' restricted to the plane picks up d^3(z_2^3)/dz_2^3 = 6
    assert bad.quadraticity_residual == pytest.approx(6.0, rel=1e-9)
    empty = leaf_checks(leaf_potential(), leaf_point(), probes=0)
    assert empty.passed and empty.probes_used == 0
    assert empty.constancy_residual == empty.quadraticity_residual == empty.affine_partials_residual == 0.0


def test_subspace_angle():
    e = np.eye(5)
    assert subspace_angle(e[2:], e[2:][::-1]) == pytest.approx(0.0, abs=1e-12)
    assert subspace_angle(e[2:], e[[0, 3, 4]]) == pytest.approx(np.pi / 2)
    assert subspace_angle(e[2:], e[3:]) == pytest.approx(np.pi / 2)


# ---------------------------------------------------------------------------
# section compatibility


def test_compat_examples():
    L, b = leaf_potential(), leaf_point()
    z0, z1, z2, z3, z4 = z(5)
    good = section_leaf_compat(L, Section(z0**2 / 2 + z0 * z1 + z1**2 * 3), b)
    assert good.verdict == "compatible" and good.pencil_degenerate
    assert section_leaf_compat(L, Section(z2**2 / 2), b).verdict == "incompatible"
    lin = section_leaf_compat(L, Section(z0 * 2 + z3 - z4 * GaussQ(0, 1)), b)
    assert lin.verdict == "compatible"


def test_compatible_sections_have_degenerate_phi_nu():
    L, b = leaf_potential(), leaf_point()
    z0, z1, *_ = z(5)
    s = Section(z0**2 / 2 + z0 * z1)
    assert section_leaf_compat(L, s, b).verdict == "compatible"
    rng = np.random.default_rng(7)
    bf = np.array([complex(x) for x in b])
    for _ in range(32):
        lam = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        assert phi_nu_rank(L, s, bf, lam) < 10
