"""Period data of a Donagi-Markman potential at a base point.

For a potential g in n variables the flat frame at b consists of the 2n
holomorphic differentials dz_1..dz_n, dg_1..dg_n (g_i = dg/dz_i), so the
period matrix is tau = Hess g(b). The Hodge frame e'_i = e_{n+i} - sum_j
tau_ij e_j spans H_{1,0} inside the fixed frame e_1..e_2n, and the
infinitesimal variation along v is the contraction of the third-derivative
tensor with v.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import exact_linalg
from .errors import DimensionError
from .poly import (
    CubicForm,
    MVPoly,
    PolyBundle,
    QuadraticForm,
    _point,
    contract,
    evaluate,
    hessian_at,
    third_tensor_at,
)
from .scalar import ONE, ZERO, GaussQ, format_rational, parse_rational

DEFAULT_RIEMANN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Potential:
    n: int
    g: MVPoly

    def __post_init__(self):
        if self.g.nvars != self.n:
            raise DimensionError(f"potential in {self.g.nvars} variables, expected n={self.n}")

    @cached_property
    def gradient(self) -> tuple[MVPoly, ...]:
        return tuple(self.g.diff(i) for i in range(self.n))

    @cached_property
    def _jet_bundle(self) -> PolyBundle:
        n = self.n
        grads = list(self.gradient)
        hess = [grads[i].diff(j) for i in range(n) for j in range(n)]
        third = [h.diff(k) for h in hess for k in range(n)]
        return PolyBundle(grads + hess + third)

    def jets(self, Z):
        """Float gradient (m,n), Hessian (m,n,n) and third derivatives (m,n,n,n) at rows of Z."""
        n = self.n
        vals = self._jet_bundle.eval(Z)
        m = vals.shape[0]
        grad = vals[:, :n]
        hess = vals[:, n : n + n * n].reshape(m, n, n)
        third = vals[:, n + n * n :].reshape(m, n, n, n)
        return grad, hess, third

    def substitute_linear(self, A) -> "Potential":
        return Potential(self.n, self.g.substitute_linear(A))

    def to_json(self) -> dict:
        return {"n": self.n, "g": self.g.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "Potential":
        try:
            n, g = obj["n"], obj["g"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"Potential JSON needs 'n' and 'g': {exc}") from None
        return cls(n, MVPoly.from_json(g))


@dataclass(frozen=True, eq=False)
class PeriodFrame:
    b: tuple
    tau: QuadraticForm
    frame_differentials: np.ndarray  # (2n, n): row i is df_i in the dz basis
    hodge_frame: np.ndarray  # (n, 2n): row i is e'_i in the e basis
    flat_values: tuple  # f_{n+i}(b) = g_i(b)

    @property
    def n(self) -> int:
        return self.tau.n

    @property
    def exact(self) -> bool:
        return self.tau.exact

    def real_frame_matrix(self) -> np.ndarray:
        """2n x 2n real matrix whose column i stacks (Re df_i, Im df_i)."""
        F = np.asarray(self.frame_differentials, dtype=np.complex128)
        return np.vstack([F.real.T, F.imag.T])


def period_frame(P: Potential, b) -> PeriodFrame:
    vals, exact_b = _point(b, P.n)
    tau = hessian_at(P.g, vals)
    n = P.n
    exact = tau.exact
    dtype = object if exact else np.complex128
    one, zero = (ONE, ZERO) if exact else (1 + 0j, 0j)
    F = np.empty((2 * n, n), dtype=dtype)
    F[...] = zero
    for i in range(n):
        F[i, i] = one
    F[n:, :] = tau.M
    H = np.empty((n, 2 * n), dtype=dtype)
    H[...] = zero
    H[:, :n] = -tau.M
    for i in range(n):
        H[i, n + i] = one
    flat = tuple(evaluate(gi, vals) if exact else complex(evaluate(gi, vals)) for gi in P.gradient)
    return PeriodFrame(tuple(vals), tau, F, H, flat)


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    reason: str | None
    min_eig_im_tau: float

    def __bool__(self):
        return self.admissible

    def to_json(self) -> dict:
        return {"admissible": self.admissible, "reason": self.reason, "min_eig_im_tau": self.min_eig_im_tau}


def check_riemann(fr: PeriodFrame, tol: float = DEFAULT_RIEMANN_TOL) -> AdmissibilityReport:
    """tau symmetric and Im tau positive definite.

    Exact frames are decided by exact LDL^T pivots; float frames by a
    pivoted Cholesky whose pivot threshold is tol * max diagonal.
    """
    tau = fr.tau
    im_f = np.asarray(tau.to_float().M).imag
    im_f = (im_f + im_f.T) / 2
    min_eig = float(np.linalg.eigvalsh(im_f)[0]) if fr.n else 0.0
    if not tau.is_symmetric():
        return AdmissibilityReport(False, "tau is not symmetric", min_eig)
    if tau.exact:
        im = [[GaussQ(x.im) for x in row] for row in tau.M.tolist()]
        ok, idx = exact_linalg.is_positive_definite(im)
        if not ok:
            return AdmissibilityReport(False, f"Im tau not positive definite (pivot {idx})", min_eig)
        return AdmissibilityReport(True, None, min_eig)
    ok, idx = _pivoted_cholesky_pd(im_f, tol)
    if not ok:
        return AdmissibilityReport(False, f"Im tau not positive definite (pivot {idx})", min_eig)
    return AdmissibilityReport(True, None, min_eig)


def _pivoted_cholesky_pd(S: np.ndarray, tol: float):
    A = np.array(S, dtype=float)
    n = A.shape[0]
    if n == 0:
        return True, None
    thresh = tol * max(np.max(np.abs(np.diag(A))), np.finfo(float).tiny)
    perm = list(range(n))
    for k in range(n):
        j = k + int(np.argmax(np.diag(A)[k:]))
        if A[j, j] <= thresh:
            return False, perm[j]
        if j != k:
            A[[k, j]] = A[[j, k]]
            A[:, [k, j]] = A[:, [j, k]]
            perm[k], perm[j] = perm[j], perm[k]
        A[k, k] = np.sqrt(A[k, k])
        A[k + 1 :, k] /= A[k, k]
        A[k + 1 :, k + 1 :] -= np.outer(A[k + 1 :, k], A[k + 1 :, k])
    return True, None


def admissible_mask(hess: np.ndarray, tol: float = DEFAULT_RIEMANN_TOL) -> np.ndarray:
    """Vectorized admissibility for a stack of float period matrices (m, n, n)."""
    im = hess.imag
    im = (im + np.swapaxes(im, 1, 2)) / 2
    eig = np.linalg.eigvalsh(im)
    scale = np.maximum(np.abs(np.diagonal(im, axis1=1, axis2=2)).max(axis=1), np.finfo(float).tiny)
    return eig[:, 0] > tol * scale


def nabla_bar(P: Potential, b, v) -> QuadraticForm:
    """Matrix of the infinitesimal variation along v: contraction of g''' at b with v."""
    if len(v) != P.n:
        raise DimensionError(f"direction has length {len(v)}, expected {P.n}")
    return contract(third_tensor_at(P.g, b), v)


def cubic_at(P: Potential, b) -> CubicForm:
    return third_tensor_at(P.g, b)


def parse_point(obj, n: int):
    """Base point JSON {"re": [...], "im": [...]}; string entries give an exact point."""
    if obj is None:
        return [ZERO] * n
    re, im = obj.get("re", [0] * n), obj.get("im", [0] * n)
    if len(re) != n or len(im) != n:
        raise ValueError(f"base point needs {n} real and imaginary parts")
    if all(isinstance(x, (str, int)) and not isinstance(x, bool) for x in list(re) + list(im)):
        return [GaussQ(parse_rational(x), parse_rational(y)) for x, y in zip(re, im)]
    return np.array([complex(float(x), float(y)) for x, y in zip(re, im)])


def point_to_json(b) -> dict:
    if isinstance(b, np.ndarray) and b.dtype != object:
        return {"re": [float(x.real) for x in b], "im": [float(x.imag) for x in b]}
    vals = list(b)
    if all(isinstance(x, GaussQ) for x in vals):
        return {"re": [format_rational(x.re) for x in vals], "im": [format_rational(x.im) for x in vals]}
    return {"re": [float(complex(x).real) for x in vals], "im": [float(complex(x).imag) for x in vals]}
