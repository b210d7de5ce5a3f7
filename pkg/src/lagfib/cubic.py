"""Classification of cubic forms.

Every verdict that says "identically zero" is made in exact arithmetic. The
determinant of contract(C, lambda) is homogeneous of degree n in lambda, and
as a polynomial in the dehomogenized variables it has degree at most n in
each of them, so it vanishes identically iff it vanishes on the integer grid
{0..n}^(n-1). The same argument covers the pencil det(mu Q0 - contract(C, lambda)).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

import numpy as np

from . import exact_linalg
from .errors import DimensionError, ModeError, PreconditionError
from .poly import CubicForm, MVPoly, QuadraticForm, contract, numeric_rank
from .scalar import ONE, ZERO, GaussQ, format_rational

FLOAT_SAMPLES = 32
PLANE_DRAWS = 12
PLANE_RETRIES = 3
FLOAT_TOL = 1e-8


# ---------------------------------------------------------------------------
# integer fast path


def _int_tensor(C: CubicForm, extra_den: int = 1):
    """C scaled to integers as nested lists of (re, im) pairs, plus the scale factor."""
    den = extra_den
    for x in C.C.ravel():
        den = lcm(den, x.re.denominator, x.im.denominator)
    n = C.n
    T = [[[(int(C.C[i, j, k].re * den), int(C.C[i, j, k].im * den)) for k in range(n)] for j in range(n)]
         for i in range(n)]
    return T, den


def _is_real(T) -> bool:
    return all(x[1] == 0 for S in T for row in S for x in row)


def _int_contract(Ci, lam):
    """contract(C, lam) for integer lam on the scaled tensor, as (re, im) pairs."""
    n = len(Ci)
    nz = [(l, Ci[i]) for i, l in enumerate(lam) if l]
    return [[(sum(l * S[j][k][0] for l, S in nz), sum(l * S[j][k][1] for l, S in nz)) for k in range(n)]
            for j in range(n)]


def _nonzero_det(M, real: bool) -> bool:
    if real:
        return bool(exact_linalg.int_det([[x[0] for x in row] for row in M]))
    return exact_linalg.gauss_int_det(M) != (0, 0)


def _grid(n_free: int, side: int):
    return itertools.product(range(side), repeat=n_free)


def _contract_exact(C: CubicForm, lam) -> np.ndarray:
    return contract(C, [GaussQ(x) for x in lam]).M


# ---------------------------------------------------------------------------
# cones


def _contraction_matrix(C: CubicForm):
    """Rows indexed by j <= k, column i holds C_ijk: the linear map v -> contract(C, v)."""
    pairs = list(itertools.combinations_with_replacement(range(C.n), 2))
    return [[C.C[i, j, k] for i in range(C.n)] for j, k in pairs]


def is_cone(C: CubicForm, tol: float = FLOAT_TOL):
    """Basis of the vertex space {v : contract(C, v) = 0}; None when C is not a cone."""
    n = C.n
    if C.exact:
        basis = exact_linalg.nullspace(_contraction_matrix(C), ncols=n)
        return basis or None
    A = np.asarray(_contraction_matrix(C), dtype=np.complex128)
    r = numeric_rank(A, tol)
    if r == n:
        return None
    _, _, vh = np.linalg.svd(A)
    return [row.conj() for row in vh[r:]]


# ---------------------------------------------------------------------------
# determinant polynomial


def _require_exact(C: CubicForm, what: str):
    if not C.exact:
        raise ModeError(f"{what} needs exact coefficients")


def det_nonzero_witness(C: CubicForm):
    """A grid point lambda with det(contract(C, lambda)) != 0, or None if D is identically zero."""
    _require_exact(C, "determinant identity test")
    n = C.n
    Ci, _ = _int_tensor(C)
    real = _is_real(Ci)
    for tail in _grid(n - 1, n + 1):
        lam = (1,) + tail
        if _nonzero_det(_int_contract(Ci, lam), real):
            return lam
    return None


def _vandermonde_inverse(side: int) -> np.ndarray:
    V = [[GaussQ(Fraction(x) ** k) for k in range(side)] for x in range(side)]
    cols = []
    for j in range(side):
        e = [ONE if i == j else ZERO for i in range(side)]
        cols.append(exact_linalg.solve(V, e))
    inv = np.empty((side, side), dtype=object)
    for j, col in enumerate(cols):
        for i, x in enumerate(col):
            inv[i, j] = x
    return inv


def det_polynomial(C: CubicForm) -> MVPoly:
    """D(lambda) = det(contract(C, lambda)) by exact interpolation on the grid {0..n}^(n-1)."""
    _require_exact(C, "det_polynomial")
    n = C.n
    side = n + 1
    Ci, den = _int_tensor(C)
    real = _is_real(Ci)
    scale = Fraction(1, den**n)
    vals = np.empty((side,) * (n - 1), dtype=object)
    for tail in _grid(n - 1, side):
        M = _int_contract(Ci, (1,) + tail)
        if real:
            vals[tail] = GaussQ(exact_linalg.int_det([[x[0] for x in row] for row in M]) * scale)
        else:
            re, im = exact_linalg.gauss_int_det(M)
            vals[tail] = GaussQ(re * scale, im * scale)
    coef = vals
    Vinv = _vandermonde_inverse(side)
    for axis in range(n - 1):
        coef = np.moveaxis(np.tensordot(Vinv, coef, axes=([1], [axis])), 0, axis)
    terms = {}
    for tail in _grid(n - 1, side):
        c = coef[tail]
        if c:
            d = sum(tail)
            if d > n:
                raise ArithmeticError("interpolated determinant exceeds degree n")
            terms[(n - d,) + tail] = c
    return MVPoly(n, terms, exact=True)


def all_partials_degenerate(C: CubicForm, samples: int = FLOAT_SAMPLES, seed: int = 0,
                            tol: float = FLOAT_TOL) -> bool:
    """Exact: D identically zero. Float: every sampled contract(C, lambda) is rank deficient."""
    if C.exact:
        return det_nonzero_witness(C) is None
    rng = np.random.default_rng(seed)
    T = C.C
    for _ in range(samples):
        lam = rng.standard_normal(C.n) + 1j * rng.standard_normal(C.n)
        if numeric_rank(np.tensordot(lam, T, axes=([0], [0])), tol) == C.n:
            return False
    return True


# ---------------------------------------------------------------------------
# singular planes


def vanishes_doubly(C: CubicForm, W, tol: float = FLOAT_TOL) -> bool:
    """Every partial-derivative quadric contract(C, e_i) restricts to zero on span(W)."""
    if len(W) == 0:
        return True
    if any(len(w) != C.n for w in W):
        raise DimensionError("subspace vectors have the wrong length")
    exact = C.exact and all(isinstance(x, (GaussQ, int, Fraction)) for w in W for x in w)
    if exact:
        Wa = np.empty((len(W), C.n), dtype=object)
        for r, w in enumerate(W):
            Wa[r] = [GaussQ(x) if not isinstance(x, GaussQ) else x for x in w]
        for i in range(C.n):
            G = Wa @ C.C[i] @ Wa.T
            if any(x for x in G.ravel()):
                return False
        return True
    Wf = np.asarray([[complex(x) for x in w] for w in W])
    Cf = C.to_float().C
    scale = max(np.abs(Cf).max(initial=0.0), 1e-300) * max(np.abs(Wf).max(), 1e-300) ** 2
    G = np.einsum("aj,ijk,bk->iab", Wf, Cf, Wf)
    return bool(np.abs(G).max() <= tol * scale)


@dataclass
class PlaneRecovery:
    plane: list | None
    candidates: list
    kernel_vectors: list
    draws: int
    diagnostic: str | None = None


def _exact_kernel_vector(Q: np.ndarray):
    rows = Q.tolist()
    if exact_linalg.rank(rows) != 4:
        return None
    ns = exact_linalg.nullspace(rows, ncols=5)
    return ns[0]


def _float_kernel_vector(Q: np.ndarray, tol: float):
    s = np.linalg.svd(Q, compute_uv=False)
    if not (s[3] > tol * s[0] and s[4] <= tol * s[0]):
        return None
    _, _, vh = np.linalg.svd(Q)
    return vh[-1].conj()


def _candidates_exact(C: CubicForm, vecs):
    found = []
    for trio in itertools.combinations(vecs, 3):
        if exact_linalg.rank(trio) != 3:
            continue
        basis = exact_linalg.row_space_basis(trio)
        if vanishes_doubly(C, basis) and basis not in found:
            found.append(basis)
    return found


def recover_plane(C: CubicForm, k: int = PLANE_DRAWS, retries: int = PLANE_RETRIES, seed: int = 0,
                  tol: float = FLOAT_TOL) -> PlaneRecovery:
    """Span of kernel vectors of sampled rank-4 contractions, verified to be singular for C."""
    if C.n != 5:
        raise PreconditionError("singular-plane recovery is only defined for n = 5", "cubic_classify", "n = 5")
    if is_cone(C, tol) is not None:
        raise PreconditionError("C is a cone", "cubic_classify", "not a cone")
    if not all_partials_degenerate(C, seed=seed, tol=tol):
        raise PreconditionError("some partial derivative quadric is nondegenerate", "cubic_classify",
                                "all partials degenerate")
    rng = np.random.default_rng(seed)
    vecs = []
    draws = 0
    dim = 0
    for _ in range(retries + 1):
        for _ in range(k):
            draws += 1
            if C.exact:
                lam = [int(x) for x in rng.integers(-9, 10, size=5)]
                v = _exact_kernel_vector(_contract_exact(C, lam))
            else:
                lam = rng.standard_normal(5) + 1j * rng.standard_normal(5)
                v = _float_kernel_vector(np.tensordot(lam, C.C, axes=([0], [0])), tol)
            if v is not None:
                vecs.append(v)
        if vecs:
            dim = exact_linalg.rank(vecs) if C.exact else numeric_rank(np.array(vecs), tol)
        if dim >= 3:
            break
    if dim < 3:
        return PlaneRecovery(None, [], vecs, draws, f"kernel vectors span only {dim} dimensions")
    if C.exact:
        if dim == 3:
            basis = exact_linalg.row_space_basis(vecs)
            cands = [basis] if vanishes_doubly(C, basis) else []
        else:
            cands = _candidates_exact(C, vecs)
    else:
        if dim != 3:
            return PlaneRecovery(None, [], vecs, draws, f"kernel vectors span {dim} dimensions (no spectral gap at 3)")
        _, _, vh = np.linalg.svd(np.array(vecs))
        basis = [row.conj() for row in vh[:3]]
        cands = [basis] if vanishes_doubly(C, basis, tol) else []
    if len(cands) == 1:
        return PlaneRecovery(cands[0], cands, vecs, draws)
    if not cands:
        return PlaneRecovery(None, [], vecs, draws, "span of kernel vectors is not singular for C")
    return PlaneRecovery(None, cands, vecs, draws, f"{len(cands)} candidate planes; span fit is ambiguous")


def singular_plane(C: CubicForm, k: int = PLANE_DRAWS, retries: int = PLANE_RETRIES, seed: int = 0):
    """Basis of the 3-space along which C is singular (n = 5 non-cones with degenerate partials)."""
    return recover_plane(C, k, retries, seed).plane


# ---------------------------------------------------------------------------
# pencils


def pencil_witness(Q0: QuadraticForm, C: CubicForm):
    """A grid point lambda with det(Q0 - contract(C, lambda)) != 0, or None."""
    if not (Q0.exact and C.exact):
        raise ModeError("pencil_nondegenerate needs exact coefficients")
    if Q0.n != C.n:
        raise DimensionError("quadric and cubic have different dimensions")
    n = C.n
    qden = 1
    for x in Q0.M.ravel():
        qden = lcm(qden, x.re.denominator, x.im.denominator)
    Ci, den = _int_tensor(C, qden)
    Qi = [[(int(Q0.M[j, k].re * den), int(Q0.M[j, k].im * den)) for k in range(n)] for j in range(n)]
    real = _is_real(Ci) and all(x[1] == 0 for row in Qi for x in row)
    for lam in _grid(n, n + 1):
        K = _int_contract(Ci, lam)
        M = [[(Qi[j][k][0] - K[j][k][0], Qi[j][k][1] - K[j][k][1]) for k in range(n)] for j in range(n)]
        if _nonzero_det(M, real):
            return lam
    return None


def pencil_nondegenerate(Q0: QuadraticForm, C: CubicForm) -> bool:
    """det(mu Q0 - contract(C, lambda)) is not the zero polynomial in (mu, lambda)."""
    return pencil_witness(Q0, C) is not None


# ---------------------------------------------------------------------------
# report


def _vec_json(v) -> dict:
    if all(isinstance(x, GaussQ) for x in v):
        return {"re": [format_rational(x.re) for x in v], "im": [format_rational(x.im) for x in v]}
    return {"re": [float(complex(x).real) for x in v], "im": [float(complex(x).imag) for x in v]}


@dataclass
class ClassificationReport:
    n: int
    exact: bool
    is_cone: bool
    vertex: list | None
    all_partials_degenerate: bool
    det_poly: MVPoly | None
    singular_plane: list | None = None
    certificates: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "mode": "exact" if self.exact else "float",
            "is_cone": self.is_cone,
            "vertex": [_vec_json(v) for v in self.vertex] if self.vertex else [],
            "all_partials_degenerate": self.all_partials_degenerate,
            "det_poly": self.det_poly.to_json() if self.det_poly is not None else None,
            "singular_plane": [_vec_json(v) for v in self.singular_plane] if self.singular_plane else None,
            "certificates": self.certificates,
        }


def classify(C: CubicForm, seed: int = 0, with_det_poly: bool = True) -> ClassificationReport:
    vertex = is_cone(C)
    cert: dict = {}
    if C.exact:
        wit = det_nonzero_witness(C)
        apd = wit is None
        cert["det_nonzero_at"] = list(wit) if wit is not None else None
        dpoly = det_polynomial(C) if with_det_poly else None
    else:
        apd = all_partials_degenerate(C, seed=seed)
        cert["probabilistic"] = True
        cert["lambda_samples"] = FLOAT_SAMPLES
        dpoly = None
    plane = None
    if C.n == 5 and vertex is None and apd:
        rec = recover_plane(C, seed=seed)
        plane = rec.plane
        cert["plane_draws"] = rec.draws
        cert["plane_kernel_vectors"] = len(rec.kernel_vectors)
        cert["plane_candidates"] = [[_vec_json(v) for v in cand] for cand in rec.candidates]
        if rec.diagnostic:
            cert["plane_diagnostic"] = rec.diagnostic
    return ClassificationReport(C.n, C.exact, vertex is not None, vertex, apd, dpoly, plane, cert)
