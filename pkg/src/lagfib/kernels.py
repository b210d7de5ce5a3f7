"""Hot numeric kernels with a numba path and a pure-numpy path.

The numpy path is used when numba is missing or when the environment
variable ``LAGFIB_NO_NUMBA`` is set to a non-empty value other than ``0``.
``set_backend`` switches at runtime (benchmarks and parity tests use it).
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_flag = os.environ.get("LAGFIB_NO_NUMBA", "")
_backend = "numba" if HAVE_NUMBA and _flag in ("", "0") else "numpy"


def backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


# ---------------------------------------------------------------------------
# polynomial bundle evaluation
#
# A bundle is a concatenation of the terms of several polynomials in the same
# variables: exps (T, n) int64, coeffs (T,) complex128, out (T,) int64 naming
# which output slot each term belongs to.


def _eval_bundle_np(exps, coeffs, out, n_out, Z):
    m = Z.shape[0]
    if exps.shape[0] == 0:
        return np.zeros((m, n_out), dtype=np.complex128)
    mono = np.ones((m, exps.shape[0]), dtype=np.complex128)
    for j in range(exps.shape[1]):
        e = exps[:, j]
        if np.any(e):
            mono *= Z[:, j, None] ** e[None, :]
    assemble = np.zeros((exps.shape[0], n_out), dtype=np.complex128)
    assemble[np.arange(exps.shape[0]), out] = coeffs
    return mono @ assemble


if HAVE_NUMBA:

    @njit(cache=True)
    def _eval_bundle_nb(exps, coeffs, out, n_out, Z):
        m, n = Z.shape
        T = exps.shape[0]
        res = np.zeros((m, n_out), dtype=np.complex128)
        if T == 0:
            return res
        maxdeg = 0
        for t in range(T):
            for j in range(n):
                if exps[t, j] > maxdeg:
                    maxdeg = exps[t, j]
        pw = np.empty((n, maxdeg + 1), dtype=np.complex128)
        for r in range(m):
            for j in range(n):
                pw[j, 0] = 1.0
                for d in range(1, maxdeg + 1):
                    pw[j, d] = pw[j, d - 1] * Z[r, j]
            for t in range(T):
                v = coeffs[t]
                for j in range(n):
                    e = exps[t, j]
                    if e != 0:
                        v *= pw[j, e]
                res[r, out[t]] += v
        return res

    @njit(cache=True)
    def _min_dist_nb(P, H):
        m, d = P.shape
        h = H.shape[0]
        res = np.full(m, np.inf)
        for r in range(m):
            best = np.inf
            for k in range(h):
                s = 0.0
                for j in range(d):
                    diff = P[r, j] - H[k, j]
                    s += diff * diff
                    if s >= best:
                        break
                if s < best:
                    best = s
            res[r] = np.sqrt(best)
        return res


def eval_bundle(exps, coeffs, out, n_out, Z) -> np.ndarray:
    """Evaluate every output polynomial of a bundle at the rows of ``Z`` (m, n)."""
    Z = np.ascontiguousarray(Z, dtype=np.complex128)
    if _backend == "numba":
        return _eval_bundle_nb(exps, coeffs, out, n_out, Z)
    return _eval_bundle_np(exps, coeffs, out, n_out, Z)


def _min_dist_np(P, H, chunk=4096):
    res = np.empty(P.shape[0])
    for s in range(0, P.shape[0], chunk):
        block = P[s : s + chunk]
        d2 = ((block[:, None, :] - H[None, :, :]) ** 2).sum(axis=2)
        res[s : s + chunk] = np.sqrt(d2.min(axis=1))
    return res


def min_distance(P, H) -> np.ndarray:
    """Euclidean distance from each row of ``P`` to the nearest row of ``H``."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    H = np.ascontiguousarray(H, dtype=np.float64)
    if H.shape[0] == 0:
        return np.full(P.shape[0], np.inf)
    if _backend == "numba":
        return _min_dist_nb(P, H)
    return _min_dist_np(P, H)
