"""Fibers of the Betti map and the three-dimensional leaves of rank-deficient quintic potentials.

Where the Betti Jacobian has constant rank 2n - 2k, its fibers are 2k-dimensional.
fiber_trace walks one fiber by predictor-corrector continuation and measures two
things on the walk: how far the real flat coordinates x = (Re z, Re g_1..Re g_n)
stray from an affine 2k-space, and how much the holomorphic functions
sum_i u_i f_i vary for u in the image of the Jacobian (those functions have
differentials annihilating the fiber, because d(sum a_i df_i) = 0).

For n = 5 the leaf direction at b is the plane along which g'''(b) is singular.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .betti import Section, betti_batch, jacobian_rank, to_complex, to_real
from .cubic import pencil_nondegenerate, recover_plane
from .errors import ConvergenceError, InadmissibleFrame, LemmaViolation, PreconditionError
from .period import Potential, admissible_mask, check_riemann, period_frame
from .poly import DEFAULT_RANK_TOL, _point, hessian_at, numeric_rank, third_tensor_at
from .scalar import GaussQ

log = logging.getLogger(__name__)

MODULE = "foliation"
DEFAULT_STEPS = 200
DEFAULT_STEP = 1e-2
CORRECTOR_TOL = 1e-10
CORRECTOR_ITERS = 30
LEAF_TOL = 1e-8
CONSTANCY_TOL = 1e-6


# ---------------------------------------------------------------------------
# fiber tracing


@dataclass
class FiberTrace:
    points: np.ndarray  # (m, n) complex
    a0: np.ndarray
    rank: int
    kernel_dim: int
    flat: np.ndarray  # (m, 2n) real flat coordinates
    fiber_residuals: np.ndarray  # max |a(b_k) - a0| per point
    holo_variation: np.ndarray  # per point
    affine_residual: float
    holo_residual: float
    step_size: float

    @property
    def max_fiber_residual(self) -> float:
        return float(self.fiber_residuals.max(initial=0.0))

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "kernel_dim": self.kernel_dim,
            "steps": int(self.points.shape[0] - 1),
            "step_size": self.step_size,
            "a0": [float(x) for x in self.a0],
            "affine_residual": self.affine_residual,
            "holo_residual": self.holo_residual,
            "max_fiber_residual": self.max_fiber_residual,
            "points": {
                "re": [[float(v) for v in row] for row in self.points.real],
                "im": [[float(v) for v in row] for row in self.points.imag],
            },
        }

    def to_csv(self) -> str:
        n = self.points.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"re_z{i}" for i in range(n)] + [f"im_z{i}" for i in range(n)]
                   + [f"x{i}" for i in range(2 * n)] + ["fiber_residual", "holo_variation"])
        for z, x, fr, hv in zip(self.points, self.flat, self.fiber_residuals, self.holo_variation):
            w.writerow([repr(float(v)) for v in z.real] + [repr(float(v)) for v in z.imag]
                       + [repr(float(v)) for v in x] + [repr(float(fr)), repr(float(hv))])
        return buf.getvalue()


def _float_point(b, n: int) -> np.ndarray:
    vals, _ = _point(b, n)
    return np.asarray([complex(v) for v in vals])


def probe_rank_constancy(P: Potential, s: Section, X0: np.ndarray, radius: float, tol: float):
    """Betti ranks at X0 and at the 4n axis perturbations X0 +- radius e_k."""
    m = X0.size
    pts = [X0]
    for k in range(m):
        e = np.zeros(m)
        e[k] = radius
        pts += [X0 + e, X0 - e]
    _, J, scale, ok = betti_batch(P, s, np.array(pts))
    ranks = [jacobian_rank(J[i], scale[i], tol) if ok[i] else -1 for i in range(len(pts))]
    return ranks[0], ranks[1:]


def flat_coordinates(P: Potential, Z: np.ndarray) -> np.ndarray:
    grad, _, _ = P.jets(Z)
    return np.concatenate([Z.real, grad.real], axis=1)


def _holomorphic_values(P: Potential, Z: np.ndarray) -> np.ndarray:
    grad, _, _ = P.jets(Z)
    return np.concatenate([Z, grad], axis=1)


def _correct(P: Potential, s: Section, Y: np.ndarray, a0: np.ndarray, tol: float):
    for _ in range(CORRECTOR_ITERS):
        a, J, _, ok = betti_batch(P, s, Y[None, :])
        if not ok[0]:
            raise ConvergenceError("trace left the admissible region", MODULE)
        res = float(np.abs(a[0] - a0).max())
        if res <= tol:
            return Y, res
        Y = Y - np.linalg.pinv(J[0], rcond=1e-10) @ (a[0] - a0)
    raise ConvergenceError(f"corrector did not reach {tol:g} (residual {res:.3g})", MODULE)


def fiber_trace(P: Potential, s: Section, b0, steps: int = DEFAULT_STEPS, step_size: float = DEFAULT_STEP,
                corrector_tol: float = CORRECTOR_TOL, seed: int = 0, tol: float = DEFAULT_RANK_TOL) -> FiberTrace:
    """Walk the Betti fiber through b0 with random kernel directions and Newton correction."""
    n = P.n
    z0 = _float_point(b0, n)
    X0 = to_real(z0)
    a0, J0, sc0, ok = betti_batch(P, s, X0[None, :])
    if not ok[0]:
        raise InadmissibleFrame("inadmissible frame at b0", module=MODULE)
    r0, around = probe_rank_constancy(P, s, X0, 10 * step_size, tol)
    if r0 == 2 * n:
        raise PreconditionError("Betti rank is maximal at b0; the fiber is a point", MODULE, "Betti rank < 2n")
    if any(r != r0 for r in around):
        raise PreconditionError(f"Betti rank not locally constant at b0 (rank {r0}, neighbours {sorted(set(around))})",
                                MODULE, "locally constant Betti rank")
    a0 = a0[0]
    U, _, _ = np.linalg.svd(J0[0])
    image = U[:, :r0]
    rng = np.random.default_rng(seed)
    X = X0
    pts = [X0]
    fres = [0.0]
    for _ in range(steps):
        _, J, _, _ = betti_batch(P, s, X[None, :])
        _, _, vh = np.linalg.svd(J[0])
        K = vh[r0:]
        d = K.T @ rng.standard_normal(K.shape[0])
        d /= np.linalg.norm(d)
        X, res = _correct(P, s, X + step_size * d, a0, corrector_tol)
        pts.append(X)
        fres.append(res)
    Xs = np.array(pts)
    Z = to_complex(Xs)
    flat = flat_coordinates(P, Z)
    dim = 2 * n - r0
    sv = np.linalg.svd(flat - flat.mean(axis=0), compute_uv=False)
    affine = float(sv[dim]) if dim < sv.size else 0.0
    H = _holomorphic_values(P, Z) @ image
    var = np.abs(H - H[0]).max(axis=1) if r0 else np.zeros(len(Z))
    return FiberTrace(Z, a0, r0, dim, flat, np.array(fres), var, affine, float(var.max(initial=0.0)), step_size)


# ---------------------------------------------------------------------------
# leaves for n = 5


def _require_n5(P: Potential):
    if P.n != 5:
        raise PreconditionError(f"leaf decomposition needs n = 5, got n = {P.n}", MODULE, "n = 5")


def leaf_subspace(P: Potential, b, seed: int = 0) -> list:
    """The 3-plane along which g'''(b) is singular, as a basis (exact when b and g are)."""
    _require_n5(P)
    rep = check_riemann(period_frame(P, b))
    if not rep.admissible:
        raise InadmissibleFrame(f"inadmissible frame at b: {rep.reason}", module=MODULE)
    rec = recover_plane(third_tensor_at(P.g, b), seed=seed)
    if rec.plane is None:
        raise PreconditionError(f"no singular plane at b: {rec.diagnostic}", MODULE, "singular plane recovered")
    return rec.plane


def _orthonormal(W) -> np.ndarray:
    A = np.asarray([[complex(x) for x in w] for w in W]).T
    q, _ = np.linalg.qr(A)
    return q


def subspace_angle(W1, W2) -> float:
    """Largest principal angle between span(W1) and span(W2); pi/2 if the dimensions differ."""
    if len(W1) != len(W2):
        return math.pi / 2
    if len(W1) == 0:
        return 0.0
    Q1, Q2 = _orthonormal(W1), _orthonormal(W2)
    R = Q2 - Q1 @ (Q1.conj().T @ Q2)
    return float(math.asin(min(1.0, np.linalg.norm(R, 2))))


@dataclass
class LeafReport:
    b: tuple
    W: list
    constancy_residual: float
    quadraticity_residual: float
    affine_partials_residual: float
    probes_used: int
    probes_skipped: int
    tol: float
    diagnostics: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (self.constancy_residual < CONSTANCY_TOL and self.quadraticity_residual < self.tol
                and self.affine_partials_residual < self.tol)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_json(self) -> dict:
        Wf = np.asarray([[complex(x) for x in w] for w in self.W])
        return {
            "verdict": self.verdict,
            "b": {"re": [float(complex(x).real) for x in self.b], "im": [float(complex(x).imag) for x in self.b]},
            "W": {"re": [[float(v) for v in row] for row in Wf.real], "im": [[float(v) for v in row] for row in Wf.imag]},
            "constancy_residual": self.constancy_residual,
            "quadraticity_residual": self.quadraticity_residual,
            "affine_partials_residual": self.affine_partials_residual,
            "probes_used": self.probes_used,
            "probes_skipped": self.probes_skipped,
            "tol": self.tol,
            "diagnostics": list(self.diagnostics),
        }


def leaf_checks(P: Potential, b, probes=16, scale: float = 1e-2, seed: int = 0, tol: float = LEAF_TOL,
                W=None) -> LeafReport:
    """Compare the leaf data at probe points b' = b + sum t_j w_j with the data at b.

    probes is a count of seeded random probes or an explicit list of complex
    coefficient triples t. W defaults to leaf_subspace(P, b); passing it lets a
    perturbed potential be measured against a reference plane.
    """
    _require_n5(P)
    if W is None:
        W = leaf_subspace(P, b, seed)
    z0 = _float_point(b, 5)
    Q = _orthonormal(W)  # 5 x 3, columns orthonormal
    if isinstance(probes, int):
        rng = np.random.default_rng(seed)
        T = scale * (rng.uniform(-1, 1, (probes, Q.shape[1])) + 1j * rng.uniform(-1, 1, (probes, Q.shape[1])))
    else:
        T = np.asarray(probes, dtype=np.complex128).reshape(-1, Q.shape[1])
    Wf = np.asarray([[complex(x) for x in w] for w in W])
    diags: list = []
    if T.shape[0] == 0:
        return LeafReport(tuple(z0), W, 0.0, 0.0, 0.0, 0, 0, tol, diags)
    Zp = z0[None, :] + T @ Wf
    _, hess, third = P.jets(Zp)
    ok = admissible_mask(hess)
    skipped = int((~ok).sum())
    if skipped:
        log.warning("%d leaf probes left the admissible region and were skipped", skipped)
        diags.append(f"{skipped} probes skipped (inadmissible)")
    const = quad = aff = 0.0
    for zp, C in zip(Zp[ok], third[ok]):
        # g_i restricted to the leaf has Hessian C(e_i, ., .) on W; the W-W-W block is g''' on W
        Ci = np.einsum("ijk,ja,kb->iab", C, Q, Q)
        aff = max(aff, float(np.abs(Ci).max()))
        quad = max(quad, float(np.abs(np.einsum("ic,iab->cab", Q, Ci).reshape(-1)).max()))
        try:
            Wp = recover_plane(third_tensor_at(P.g, zp), seed=seed).plane
        except PreconditionError as exc:
            Wp = None
            reason = str(exc)
        else:
            reason = "no plane recovered"
        if Wp is None:
            const = math.pi / 2
            if reason not in diags:
                diags.append(reason)
        else:
            const = max(const, subspace_angle(Wf, Wp))
    return LeafReport(tuple(z0), W, const, quad, aff, int(ok.sum()), skipped, tol, diags)


@dataclass
class CompatReport:
    verdict: str  # "compatible" or "incompatible"
    restriction_residual: float
    pencil_degenerate: bool | None

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "restriction_residual": self.restriction_residual,
            "pencil_degenerate": self.pencil_degenerate,
        }


def section_leaf_compat(P: Potential, s: Section, b, tol: float = LEAF_TOL, seed: int = 0, W=None) -> CompatReport:
    """Does f'' vanish on the leaf plane? If so, the pencil mu f'' - g'''(lambda) must be degenerate."""
    _require_n5(P)
    if W is None:
        W = leaf_subspace(P, b, seed)
    F2 = hessian_at(s.f, b)
    C = third_tensor_at(P.g, b)
    exact = F2.exact and C.exact and all(isinstance(x, GaussQ) for w in W for x in w)
    if exact:
        G = F2.restrict(W)
        resid = max((abs(complex(x)) for x in G.ravel()), default=0.0)
        compatible = not any(x for x in G.ravel())
    else:
        Wf = np.asarray([[complex(x) for x in w] for w in W])
        G = Wf @ F2.to_float().M @ Wf.T
        resid = float(np.abs(G).max(initial=0.0))
        compatible = resid <= tol * max(1.0, float(np.abs(F2.to_float().M).max(initial=0.0)))
    if not compatible:
        return CompatReport("incompatible", resid, None)
    if exact:
        degenerate = not pencil_nondegenerate(F2, C)
    else:
        rng = np.random.default_rng(seed)
        Cf = C.to_float().C
        M2 = F2.to_float().M
        degenerate = all(
            numeric_rank(mu * M2 - np.tensordot(lam, Cf, axes=([0], [0]))) < 5
            for mu, lam in ((complex(*rng.standard_normal(2)), rng.standard_normal(5) + 1j * rng.standard_normal(5))
                            for _ in range(32))
        )
    if not degenerate:
        raise LemmaViolation("f'' vanishes on the leaf plane but the pencil is nondegenerate")
    return CompatReport("compatible", resid, True)
