"""Release criteria, runnable from the CLI (self-test) and from pytest.

Each criterion takes a Context (seed, scale, expected values) and returns
(passed, observed). Observed values are plain data so the report serializes
deterministically; wall-clock timings only influence pass/fail and are not
written into the report.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import exact_linalg, jsonio
from .betti import (
    Box,
    Section,
    betti_batch,
    betti_jacobian,
    density_scan,
    phi_nu_rank,
    to_real,
    torsion_search,
)
from .cubic import all_partials_degenerate, classify, is_cone, pencil_nondegenerate
from .elliptic import EllipticFamily, torsion_enumerate
from .fixtures import (
    INSTANCE_KINDS,
    block_product,
    irrational_section,
    leaf_plane,
    leaf_potential,
    lossen_cubic,
    model_potential,
    perturbed_leaf_potential,
    quadratic_section,
    quartic_leaf_potential,
    random_cone,
    random_instance,
    random_invertible_int,
    random_rational_cubic,
    slice_box,
    z,
)
from .foliation import fiber_trace, leaf_checks, leaf_subspace, probe_rank_constancy, section_leaf_compat
from .period import Potential, nabla_bar, period_frame
from .poly import MVPoly, hessian_at, third_tensor_at
from .scalar import GaussQ, I


@dataclass(frozen=True)
class Context:
    seed: int = 0
    quick: bool = False
    expected: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Criterion:
    key: str
    title: str
    groups: tuple
    run: object
    expected: dict


# ---------------------------------------------------------------------------
# 1. cubics with all partials degenerate are cones for n <= 4


def crit_gordan_noether(ctx: Context):
    e = ctx.expected
    n_rand = e["random"] if not ctx.quick else 150
    n_cone = e["cones"] if not ctx.quick else 30
    rng = np.random.default_rng(ctx.seed)
    t0 = time.perf_counter()
    per_n = {}
    total_mismatch = 0
    for n in e["dims"]:
        cones = degenerate = mismatch = 0
        for _ in range(n_rand):
            C = random_rational_cubic(rng, n)
            c = is_cone(C) is not None
            a = all_partials_degenerate(C)
            cones += c
            degenerate += a
            mismatch += c != a
        built = 0
        for _ in range(n_cone):
            C = random_cone(rng, n)
            c = is_cone(C) is not None
            a = all_partials_degenerate(C)
            built += c and a
            mismatch += c != a or not c
        per_n[str(n)] = {"random": n_rand, "random_cones": cones, "random_degenerate": degenerate,
                         "constructed_cones_confirmed": built, "mismatches": mismatch}
        total_mismatch += mismatch
    elapsed = time.perf_counter() - t0
    ok = total_mismatch == 0 and elapsed < e["max_seconds"]
    return ok, {"per_n": per_n, "mismatches": total_mismatch, "within_time": elapsed < e["max_seconds"]}


# ---------------------------------------------------------------------------
# 2. the n = 5 witness singular along a plane


def _span_of_axes(idx, n=5):
    return exact_linalg.row_space_basis([[GaussQ(1 if j == i else 0) for j in range(n)] for i in idx])


def _canon(W):
    return None if W is None else exact_linalg.row_space_basis(W)


def crit_lossen(ctx: Context):
    e = ctx.expected
    C = lossen_cubic()
    rep = classify(C)
    target = _span_of_axes(e["plane_axes"])
    base_ok = (not rep.is_cone) and rep.all_partials_degenerate and _canon(rep.singular_plane) == target
    rng = np.random.default_rng(ctx.seed)
    n_conj = e["conjugations"]
    good = 0
    for _ in range(n_conj):
        A = random_invertible_int(rng, 5)
        Aq = [[GaussQ(x) for x in row] for row in A]
        Ct = C.transform(Aq)
        r = classify(Ct, seed=ctx.seed, with_det_poly=False)
        moved = exact_linalg.row_space_basis([exact_linalg.solve(Aq, w) for w in target])
        good += (not r.is_cone) and r.all_partials_degenerate and _canon(r.singular_plane) == moved
    ok = base_ok and good == n_conj
    return ok, {"not_cone": not rep.is_cone, "all_partials_degenerate": rep.all_partials_degenerate,
                "plane_matches": _canon(rep.singular_plane) == target, "equivariant_conjugations": good,
                "conjugations": n_conj}


# ---------------------------------------------------------------------------
# 3. Betti ranks are even where locally constant


def crit_even_rank(ctx: Context):
    e = ctx.expected
    need = e["instances"] if not ctx.quick else 24
    rng = np.random.default_rng(ctx.seed)
    ranks: dict = {}
    odd = 0
    counted = tried = 0
    while counted < need and tried < 20 * need:
        kind = INSTANCE_KINDS[tried % len(INSTANCE_KINDS)]
        tried += 1
        P, s, b = random_instance(rng, kind)
        X = to_real(b)
        _, _, _, ok = betti_batch(P, s, X[None, :], with_jacobian=False)
        if not ok[0]:
            continue
        r0, around = probe_rank_constancy(P, s, X, e["probe_radius"], e["rank_tol"])
        if any(r != r0 for r in around):
            continue
        counted += 1
        ranks[str(r0)] = ranks.get(str(r0), 0) + 1
        odd += r0 % 2
    ranks = {k: ranks[k] for k in sorted(ranks, key=int)}
    return (odd == 0 and counted >= need), {"instances": counted, "odd_ranks": odd, "rank_histogram": ranks}


# ---------------------------------------------------------------------------
# 4. analytic vs finite-difference Jacobians


def _hodge_fd(P: Potential, b: np.ndarray, k: int, h: float) -> np.ndarray:
    e = np.zeros(P.n, dtype=complex)
    e[k] = h
    Hp = np.asarray(period_frame(P, b + e).hodge_frame, dtype=complex)
    Hm = np.asarray(period_frame(P, b - e).hodge_frame, dtype=complex)
    return (Hp - Hm) / (2 * h)


def crit_jacobian(ctx: Context):
    e = ctx.expected
    need = e["instances"] if not ctx.quick else 10
    rng = np.random.default_rng(ctx.seed + 1)
    worst_j = worst_n = 0.0
    done = tried = 0
    while done < need and tried < 20 * need:
        tried += 1
        P, s, b = random_instance(rng, "generic")
        Pf = Potential(P.n, P.g.to_float())
        sf = Section(s.f.to_float())
        X = to_real(b)
        _, _, _, ok = betti_batch(Pf, sf, X[None, :], with_jacobian=False)
        if not ok[0]:
            continue
        Ja = betti_jacobian(Pf, sf, b).J
        Jf = betti_jacobian(Pf, sf, b, method="finite-difference").J
        na = np.linalg.norm(Ja)
        if na == 0:
            continue
        worst_j = max(worst_j, float(np.linalg.norm(Ja - Jf) / na))
        for k in range(P.n):
            fd = _hodge_fd(Pf, b, k, 1e-5)
            ek = [1 if j == k else 0 for j in range(P.n)]
            an = -np.asarray(nabla_bar(Pf, b, ek).M, dtype=complex)
            ref = max(np.linalg.norm(an), np.linalg.norm(fd), 1.0)
            worst_n = max(worst_n, float(np.linalg.norm(fd[:, : P.n] - an) / ref),
                          float(np.linalg.norm(fd[:, P.n :]) / ref))
        done += 1
    tol = e["rel_tol"]
    return (done >= need and worst_j < tol and worst_n < tol), {
        "instances": done, "jacobian_rel_err_below_tol": worst_j < tol, "nabla_rel_err_below_tol": worst_n < tol,
        "jacobian_rel_err_exponent": _exponent(worst_j), "nabla_rel_err_exponent": _exponent(worst_n)}


def _exponent(x: float) -> int:
    """Decimal exponent of a small error, coarse enough to be stable across runs."""
    return -999 if x == 0 else int(math.floor(math.log10(x)))


# ---------------------------------------------------------------------------
# 5. elliptic toy: exact torsion sets and quadratic growth


def tau_b_family() -> EllipticFamily:
    (b,) = MVPoly.variables(1)
    return EllipticFamily(b, MVPoly.constant(1, I), Box.from_complex([[-1, 1]], [[0.5, 1.5]]))


def hit_set_formula(N: int):
    """Hits of tau(b) = b, s = i: y = N/m, x = -k y / N inside [-1,1] x [1/2,3/2]."""
    from fractions import Fraction

    out = set()
    for m in range(1, 4 * N + 1):
        y = Fraction(N, m)
        if not Fraction(1, 2) <= y <= Fraction(3, 2):
            continue
        kmax = int(N / y) + 1
        for k in range(-kmax, kmax + 1):
            x = -k * y / N
            if -1 <= x <= 1:
                out.add(complex(x, y))
    return sorted(out, key=lambda c: (c.real, c.imag))


def crit_elliptic(ctx: Context):
    from .elliptic import same_point_set

    e = ctx.expected
    fam = tau_b_family()
    t0 = time.perf_counter()
    matched = {}
    for N in e["orders"]:
        r = torsion_enumerate(fam, N)
        matched[str(N)] = bool(r.oracle_match) and same_point_set(r.hits, hit_set_formula(N))
    counts = {}
    for N in sorted(set(e["ratio_orders"]) | {2 * N for N in e["ratio_orders"]}):
        counts[N] = len(torsion_enumerate(fam, N).hits)
    elapsed = time.perf_counter() - t0
    ratios = {str(N): counts[2 * N] / counts[N] for N in e["ratio_orders"]}
    ratio_ok = all(abs(r - e["ratio_target"]) <= e["ratio_tol"] * e["ratio_target"] for r in ratios.values())
    ok = all(matched.values()) and ratio_ok and elapsed < e["max_seconds"]
    return ok, {"set_matches": matched, "counts": {str(k): v for k, v in counts.items()}, "ratios": ratios,
                "within_time": elapsed < e["max_seconds"]}


# ---------------------------------------------------------------------------
# 6. density of torsion points


def crit_density(ctx: Context):
    e = ctx.expected
    rows = density_scan(model_potential(2), quadratic_section(2), slice_box(), e["orders"], e["epsilon"],
                        samples=e["samples"] if not ctx.quick else 500, seed=ctx.seed)
    cov = [r.coverage for r in rows]
    monotone = all(a <= b for a, b in zip(cov, cov[1:]))
    full = rows[-1].coverage == 1.0
    return monotone and full, {"coverage": {str(r.N): r.coverage for r in rows},
                               "hit_count": {str(r.N): r.hit_count for r in rows}, "monotone": monotone}


# ---------------------------------------------------------------------------
# 7. sections without torsion


def crit_no_torsion(ctx: Context):
    e = ctx.expected
    top = e["max_order"] if not ctx.quick else 8
    P = model_potential(2)
    Pf = Potential(2, P.g.to_float())
    s_irr = irrational_section(P)
    box4 = Box.from_complex([[0, 1], [0, 1]], [[0, 1], [0, 1]])
    Pb, sb = block_product()
    box_b = Box.from_complex([[0, 0.5], [0, 0.1]], [[0, 0.5], [0, 0.1]])
    fam = EllipticFamily(MVPoly.constant(1, 1j), MVPoly.constant(1, complex(math.sqrt(2), math.sqrt(3))),
                         Box.from_complex([[-1, 1]], [[-1, 1]]))
    hits = {"constant_irrational": 0, "block_product": 0, "elliptic_constant": 0}
    for N in range(1, top + 1):
        hits["constant_irrational"] += len(torsion_search(Pf, s_irr, box4, N))
        hits["block_product"] += len(torsion_search(Pb, sb, box_b, N))
        r = torsion_enumerate(fam, N)
        hits["elliptic_constant"] += len(r.hits) + (1 if r.everywhere else 0)
    return all(v == 0 for v in hits.values()), {"max_order": top, "hits": hits}


# ---------------------------------------------------------------------------
# 8. Betti fibers are affine and complex


def fiber_instances():
    z3 = z(3)
    P3 = Potential(3, model_potential(3).g + z3[0] ** 3 / 6)
    z5 = z(5)
    return [
        ("model_n2", model_potential(2), quadratic_section(2), np.array([0.3 + 0.4j, 0.1j])),
        ("block_n3", P3, Section(z3[0] ** 2 / 2 + z3[1] ** 2 / 2), np.array([0.1 + 0.1j, 0.2j, 0.1])),
        ("leaf_n5", leaf_potential(), Section(z5[0] ** 2 / 2 + z5[0] * z5[1]),
         np.array([0.02 + 0.01j, -0.01j, 0.03, 0.01 + 0.02j, -0.02])),
    ]


def crit_fibers(ctx: Context):
    e = ctx.expected
    steps = e["steps"] if not ctx.quick else 40
    out = {}
    ok = True
    for name, P, s, b in fiber_instances():
        tr = fiber_trace(P, s, b, steps=steps, seed=ctx.seed)
        good = tr.affine_residual < e["tol"] and tr.holo_residual < e["tol"] and tr.max_fiber_residual < 1e-10
        out[name] = {"rank": tr.rank, "kernel_dim": tr.kernel_dim, "affine_ok": tr.affine_residual < e["tol"],
                     "holo_ok": tr.holo_residual < e["tol"], "points": int(tr.points.shape[0])}
        ok &= good
    return ok, out


# ---------------------------------------------------------------------------
# 9. the n = 5 pencil and the leaf checks


def leaf_point():
    from fractions import Fraction as F

    return [GaussQ(F(1, 10), F(1, 20)), GaussQ(F(-1, 30)), GaussQ(F(1, 7)), GaussQ(0, F(1, 9)), GaussQ(F(1, 11))]


def crit_pencil(ctx: Context):
    e = ctx.expected
    L = leaf_potential()
    b = leaf_point()
    z0, z1, z2, _, _ = z(5)
    s_good = Section(z0**2 / 2 + z0 * z1)
    s_bad = Section(z2**2 / 2)
    W = leaf_subspace(L, b)
    Cb = third_tensor_at(L.g, b)
    pencil_good = pencil_nondegenerate(hessian_at(s_good.f, b), Cb)
    pencil_bad = pencil_nondegenerate(hessian_at(s_bad.f, b), Cb)
    rng = np.random.default_rng(ctx.seed)
    bf = np.array([complex(x) for x in b])
    max_phi = 0
    for _ in range(e["lambdas"]):
        lam = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        max_phi = max(max_phi, phi_nu_rank(L, s_good, bf, lam))
    compat = section_leaf_compat(L, s_good, b, W=W).verdict
    incompat = section_leaf_compat(L, s_bad, b, W=W).verdict
    rep = leaf_checks(L, b, probes=e["probes"], seed=ctx.seed)
    rep_bad = leaf_checks(perturbed_leaf_potential(), b, probes=e["probes"], seed=ctx.seed, W=leaf_plane())
    # the quartic potential is only singular along the plane on the slice z0 = z1 = 0
    from fractions import Fraction as F

    Q = quartic_leaf_potential()
    quartic_plane = leaf_subspace(Q, [0, 0, GaussQ(F(1, 5)), GaussQ(F(1, 3)), GaussQ(F(1, 4))]) == leaf_plane()
    ok = (W == leaf_plane() and not pencil_good and pencil_bad and max_phi < 10 and compat == "compatible"
          and incompat == "incompatible" and rep.passed and rep.quadraticity_residual < e["tol"]
          and rep.affine_partials_residual < e["tol"] and rep.constancy_residual < e["tol"]
          and not rep_bad.passed and quartic_plane)
    return ok, {"leaf_plane": W == leaf_plane(), "pencil_nondegenerate_compatible": pencil_good,
                "pencil_nondegenerate_z2sq": pencil_bad, "max_phi_nu_rank": max_phi, "compat": compat,
                "incompat": incompat, "leaf_checks": rep.verdict, "perturbed_leaf_checks": rep_bad.verdict,
                "perturbed_quadraticity": rep_bad.quadraticity_residual, "quartic_slice_plane": quartic_plane}


# ---------------------------------------------------------------------------
# 10. determinism


def crit_determinism(ctx: Context):
    keys = [c.key for c in CRITERIA if c.key != "determinism"]
    a = report_text(run_criteria(keys, seed=ctx.seed, quick=True))
    b = report_text(run_criteria(keys, seed=ctx.seed, quick=True))
    return a == b, {"identical": a == b, "criteria": len(keys), "bytes": len(a.encode())}


CRITERIA = [
    Criterion("gordan_noether", "cubics with all partials degenerate are cones (n = 2, 3, 4)", ("cubic",),
              crit_gordan_noether, {"dims": [2, 3, 4], "random": 10_000, "cones": 1_000, "max_seconds": 300}),
    Criterion("lossen_witness", "n = 5 witness singular along a plane, equivariantly recovered", ("cubic",),
              crit_lossen, {"plane_axes": [2, 3, 4], "conjugations": 20}),
    Criterion("even_rank", "Betti rank is even where locally constant", ("betti",),
              crit_even_rank, {"instances": 100, "probe_radius": 1e-3, "rank_tol": 1e-8}),
    Criterion("jacobian_crosscheck", "analytic Jacobians agree with finite differences", ("betti", "period"),
              crit_jacobian, {"instances": 50, "rel_tol": 1e-6}),
    Criterion("elliptic_exactness", "elliptic torsion sets match closed form; counts grow like N^2",
              ("elliptic",), crit_elliptic,
              {"orders": [4, 8, 16], "ratio_orders": [8, 16, 32], "ratio_target": 4.0, "ratio_tol": 0.15,
               "max_seconds": 10}),
    Criterion("density", "torsion points become epsilon-dense", ("betti",),
              crit_density, {"orders": [1, 2, 4, 8, 16], "epsilon": 0.1, "samples": 2000}),
    Criterion("no_torsion", "irrational constant and block sections have no torsion", ("betti", "elliptic"),
              crit_no_torsion, {"max_order": 64}),
    Criterion("fibers_affine_complex", "Betti fibers are affine in flat coordinates and complex", ("foliation",),
              crit_fibers, {"steps": 200, "tol": 1e-6}),
    Criterion("pencil_n5", "n = 5 leaf plane, degenerate pencil and leaf checks", ("foliation", "cubic"),
              crit_pencil, {"lambdas": 32, "probes": 16, "tol": 1e-8}),
    Criterion("determinism", "self-test reports are byte-identical", ("determinism",),
              crit_determinism, {}),
]


@dataclass(frozen=True)
class Result:
    key: str
    title: str
    passed: bool
    observed: dict
    error: str | None = None


def select(filter_: str | None):
    if not filter_:
        return [c.key for c in CRITERIA]
    f = filter_.lower()
    return [c.key for c in CRITERIA if f in c.key or any(f in g for g in c.groups)]


def run_criteria(keys, seed: int = 0, quick: bool = False, overrides: dict | None = None) -> list[Result]:
    out = []
    for c in CRITERIA:
        if c.key not in keys:
            continue
        expected = dict(c.expected)
        if overrides and c.key in overrides:
            expected.update(overrides[c.key])
        try:
            passed, observed = c.run(Context(seed, quick, expected))
            out.append(Result(c.key, c.title, bool(passed), observed))
        except Exception as exc:  # a crash is a named failure, not an aborted run
            out.append(Result(c.key, c.title, False, {}, f"{type(exc).__name__}: {exc}"))
    return out


def report_json(results: list[Result]) -> dict:
    return {
        "passed": all(r.passed for r in results),
        "criteria": [
            {"key": r.key, "title": r.title, "passed": r.passed, "observed": r.observed, "error": r.error}
            for r in results
        ],
    }


def report_text(results: list[Result]) -> str:
    lines = []
    for r in results:
        lines.append(f"{'PASS' if r.passed else 'FAIL'} {r.key}: {r.title}")
        if r.error:
            lines.append(f"    error: {r.error}")
    lines.append(jsonio.dumps(report_json(results)))
    return "\n".join(lines)


def self_test(filter_: str | None = None, seed: int = 0, quick: bool = False, overrides: dict | None = None):
    return run_criteria(select(filter_), seed=seed, quick=quick, overrides=overrides)
