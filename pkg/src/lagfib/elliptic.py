"""One-dimensional families of elliptic curves, solved in closed form.

The fiber over b is C / (Z + tau(b) Z) and a section lifts to s(b); its Betti
coordinates are the real pair with s = beta_1 + beta_2 tau. This module does
not reuse the general Betti solver, so it can serve as an oracle for it on
one-dimensional block potentials (g'' = tau, f' = s).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import exact_linalg, kernels, pointsets
from .betti import Box
from .errors import DimensionError, InadmissibleFrame, LemmaViolation, PreconditionError
from .poly import DEFAULT_RANK_TOL, MVPoly, PolyBundle, _point, evaluate
from .scalar import GaussQ, as_exact

MODULE = "elliptic_toy"


@dataclass(frozen=True, eq=False)
class EllipticFamily:
    tau: MVPoly
    s: MVPoly
    box: Box

    def __post_init__(self):
        if self.tau.nvars != 1 or self.s.nvars != 1 or self.box.n != 1:
            raise DimensionError("elliptic families live over a one-dimensional base")

    @property
    def exact(self) -> bool:
        return self.tau.exact and self.s.exact

    def _bundle(self) -> PolyBundle:
        b = self.__dict__.get("_pb")
        if b is None:
            b = PolyBundle([self.tau, self.tau.diff(0), self.s, self.s.diff(0)])
            object.__setattr__(self, "_pb", b)
        return b

    def values(self, X: np.ndarray):
        """tau, tau', s, s' at real points X (m, 2)."""
        Z = (X[:, 0] + 1j * X[:, 1])[:, None]
        v = self._bundle().eval(Z)
        return v[:, 0], v[:, 1], v[:, 2], v[:, 3]

    def verify(self, samples: int = 33) -> float:
        """Minimum of Im tau on a verification grid; must be positive."""
        X = self.box.grid([samples, samples])
        t, _, _, _ = self.values(X)
        return float(t.imag.min())

    def to_json(self) -> dict:
        return {"tau": self.tau.to_json(), "s": self.s.to_json(), "box": self.box.to_json()}

    @classmethod
    def from_json(cls, obj) -> "EllipticFamily":
        try:
            tau, s, box = obj["tau"], obj["s"], obj["box"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"family JSON needs 'tau', 's' and 'box': {exc}") from None
        return cls(MVPoly.from_json(tau), MVPoly.from_json(s), Box.from_json(box))


def _in_box(box: Box, b: complex, slack: float = 1e-9) -> bool:
    return bool(box.contains(np.array([[b.real, b.imag]]), slack)[0])


def betti_elliptic(fam: EllipticFamily, b):
    """(beta_1, beta_2) with s(b) = beta_1 + beta_2 tau(b); exact when the family and b are."""
    vals, exact = _point(b if isinstance(b, (list, tuple, np.ndarray)) else [b], 1)
    if not _in_box(fam.box, complex(vals[0])):
        raise PreconditionError("b lies outside the family's domain", MODULE, "b in domain")
    if exact and fam.exact:
        t, sv = evaluate(fam.tau, vals), evaluate(fam.s, vals)
        if t.im <= 0:
            raise InadmissibleFrame("Im tau <= 0 at b", module=MODULE)
        b2 = sv.im / t.im
        return sv.re - b2 * t.re, b2
    t, sv = complex(evaluate(fam.tau, vals)), complex(evaluate(fam.s, vals))
    if t.imag <= 0:
        raise InadmissibleFrame("Im tau <= 0 at b", module=MODULE)
    b2 = sv.imag / t.imag
    return sv.real - b2 * t.real, b2


def beta_batch(fam: EllipticFamily, X: np.ndarray):
    """beta (m, 2), its real Jacobian (m, 2, 2) in (Re b, Im b), the reference scale, and Im tau > 0 mask."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t, dt, sv, ds = fam.values(X)
    ok = t.imag > 0
    it = np.where(ok, t.imag, 1.0)
    b2 = sv.imag / it
    b1 = sv.real - b2 * t.real
    # derivatives of real and imaginary parts along x and y (Cauchy-Riemann)
    J = np.empty((X.shape[0], 2, 2))
    for col, (d_re_s, d_im_s, d_re_t, d_im_t) in enumerate(
        [(ds.real, ds.imag, dt.real, dt.imag), (-ds.imag, ds.real, -dt.imag, dt.real)]
    ):
        db2 = (d_im_s * it - sv.imag * d_im_t) / it**2
        J[:, 1, col] = db2
        J[:, 0, col] = d_re_s - db2 * t.real - b2 * d_re_t
    minv = np.sqrt(1 + t.real**2 + it**2) / it  # Frobenius bound on the inverse of [[1, Re t], [0, Im t]]
    scale = minv * (np.abs(ds) + np.abs(b2) * np.abs(dt))
    beta = np.stack([b1, b2], axis=1)
    beta[~ok] = np.nan
    return beta, J, scale, ok


def _rank2(J: np.ndarray, scale: float, tol: float) -> int:
    s = np.linalg.svd(J, compute_uv=False)
    ref = max(s[0], scale)
    if ref == 0.0:
        return 0
    return int(np.sum(s > tol * ref))


def rank_dichotomy(fam: EllipticFamily, b, tol: float = DEFAULT_RANK_TOL) -> int:
    """Rank of the real Jacobian of b -> beta(b); only 0 and 2 can occur."""
    betti_elliptic(fam, b)  # domain and positivity gates
    z0 = complex(b if not isinstance(b, (list, tuple, np.ndarray)) else b[0])
    _, J, scale, _ = beta_batch(fam, np.array([[z0.real, z0.imag]]))
    r = _rank2(J[0], scale[0], tol)
    if r == 1:
        raise LemmaViolation(f"Betti Jacobian of rank 1 at b = {z0}: its kernel is not a complex line")
    return r


def rank_map(fam: EllipticFamily, counts=(21, 21), tol: float = DEFAULT_RANK_TOL):
    """Rows (Re b, Im b, beta_1, beta_2, rank) on a grid over the domain."""
    X = fam.box.grid(counts)
    beta, J, scale, ok = beta_batch(fam, X)
    if not ok.all():
        raise InadmissibleFrame("Im tau <= 0 inside the domain", module=MODULE)
    rows = []
    for x, bt, Jk, sc in zip(X, beta, J, scale):
        r = _rank2(Jk, sc, tol)
        if r == 1:
            raise LemmaViolation(f"Betti Jacobian of rank 1 at b = {complex(*x)}")
        rows.append((float(x[0]), float(x[1]), float(bt[0]), float(bt[1]), r))
    return rows


def rank_map_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re_b", "im_b", "beta1", "beta2", "rank"])
    for r in rows:
        w.writerow([repr(r[0]), repr(r[1]), repr(r[2]), repr(r[3]), r[4]])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# torsion


@dataclass
class EllipticTorsion:
    N: int
    hits: list  # complex points, sorted
    p: list  # integer pairs with beta = p / N
    everywhere: bool = False
    n_seeds: int = 0
    n_failed: int = 0
    oracle: list | None = None
    oracle_match: bool | None = None

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "everywhere": self.everywhere,
            "count": len(self.hits),
            "hits": [{"b_re": h.real, "b_im": h.imag, "p": list(p)} for h, p in zip(self.hits, self.p)],
            "oracle_count": None if self.oracle is None else len(self.oracle),
            "oracle_match": self.oracle_match,
        }


def _affine_parts(p: MVPoly):
    """(slope, intercept) when p has degree <= 1, else None."""
    if p.degree > 1:
        return None
    zero = GaussQ(0) if p.exact else 0j
    return p.terms.get((1,), zero), p.terms.get((0,), zero)


def _frac(x: float) -> Fraction:
    return Fraction(x)


def closed_form_hits(fam: EllipticFamily, N: int):
    """All torsion points of order N in the domain for (tau affine, s constant) or (tau constant, s affine).

    Returns a sorted list of exact GaussQ points (exact families) or complex
    points, or None when the family is not of either shape or beta is constant.
    """
    ta, sa = _affine_parts(fam.tau), _affine_parts(fam.s)
    if ta is None or sa is None:
        return None
    exact = fam.exact
    conv = (lambda v: as_exact(v)) if exact else complex
    (tp, tq), (sp, sq) = (tuple(conv(x) for x in ta)), (tuple(conv(x) for x in sa))
    lo, hi = fam.box.lo, fam.box.hi
    corners = [complex(x, y) for x in (lo[0], hi[0]) for y in (lo[1], hi[1])]
    if exact:
        corners = [GaussQ(_frac(c.real), _frac(c.imag)) for c in corners]
        box_lo = [_frac(v) for v in lo]
        box_hi = [_frac(v) for v in hi]
    else:
        box_lo, box_hi = list(lo), list(hi)

    def re(x):
        return x.re if exact else x.real

    def im(x):
        return x.im if exact else x.imag

    def inside(b):
        return box_lo[0] <= re(b) <= box_hi[0] and box_lo[1] <= im(b) <= box_hi[1]

    def k_range(a, b):
        lo_, hi_ = min(a, b), max(a, b)
        return range(math.floor(lo_ * N) - 1, math.ceil(hi_ * N) + 2)

    out = []
    if tp and not sp:
        c = sq
        if not im(c):
            return None  # beta_2 = 0 and beta constant
        taus = [tp * b + tq for b in corners]
        b2s = [im(c) / im(t) for t in taus]
        for k2 in k_range(min(b2s), max(b2s)):
            if k2 == 0:
                continue
            beta2 = Fraction(k2, N) if exact else k2 / N
            b1s = [re(c) - beta2 * re(t) for t in taus]
            for k1 in k_range(min(b1s), max(b1s)):
                beta1 = Fraction(k1, N) if exact else k1 / N
                b = ((c - beta1) / beta2 - tq) / tp
                if inside(b):
                    out.append(b)
    elif sp and not tp:
        t0 = tq
        if im(t0) <= 0:
            raise InadmissibleFrame("Im tau <= 0", module=MODULE)
        svals = [sp * b + sq for b in corners]
        b2s = [im(v) / im(t0) for v in svals]
        for k2 in k_range(min(b2s), max(b2s)):
            beta2 = Fraction(k2, N) if exact else k2 / N
            b1s = [re(v) - beta2 * re(t0) for v in svals]
            for k1 in k_range(min(b1s), max(b1s)):
                beta1 = Fraction(k1, N) if exact else k1 / N
                b = (t0 * beta2 + beta1 - sq) / sp
                if inside(b):
                    out.append(b)
    else:
        return None
    uniq = sorted(set(out), key=lambda b: (re(b), im(b)))
    return uniq


def _auto_counts(fam: EllipticFamily, N: int, max_seeds: int) -> tuple:
    probe = fam.box.grid([17, 17])
    _, J, _, ok = beta_batch(fam, probe)
    if not ok.all():
        raise InadmissibleFrame("Im tau <= 0 inside the domain", module=MODULE)
    L = np.abs(J).max(axis=(0, 1)) * 1.25
    counts = []
    for w, Lk in zip(fam.box.widths, L):
        counts.append(1 if w == 0 else max(2, int(math.ceil(w * 2 * N * Lk)) + 1))
    total = math.prod(counts)
    if total > max_seeds:
        shrink = math.sqrt(max_seeds / total)
        counts = [max(2, int(c * shrink)) if c > 1 else 1 for c in counts]
    return tuple(counts)


def _newton2(fam: EllipticFamily, X: np.ndarray, target: np.ndarray, tol: float, max_iter: int):
    X = X.copy()
    beta, J, _, ok = beta_batch(fam, X)
    res = np.where(ok, np.abs(beta - target).max(axis=1), np.inf)
    alive = ok.copy()
    iters = np.zeros(X.shape[0], dtype=int)
    for _ in range(max_iter):
        act = alive & (res > tol)
        if not act.any():
            break
        idx = np.flatnonzero(act)
        Jk = J[idx]
        det = Jk[:, 0, 0] * Jk[:, 1, 1] - Jk[:, 0, 1] * Jk[:, 1, 0]
        bad = np.abs(det) < 1e-300
        alive[idx[bad]] = False
        idx, Jk, det = idx[~bad], Jk[~bad], det[~bad]
        r = beta[idx] - target[idx]
        step = -np.stack([Jk[:, 1, 1] * r[:, 0] - Jk[:, 0, 1] * r[:, 1],
                          -Jk[:, 1, 0] * r[:, 0] + Jk[:, 0, 0] * r[:, 1]], axis=1) / det[:, None]
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(30):
            sub = idx[pending]
            if sub.size == 0:
                break
            trial = X[sub] + step[pending]
            tb, tJ, _, tok = beta_batch(fam, trial)
            tres = np.where(tok, np.abs(tb - target[sub]).max(axis=1), np.inf)
            acc = tres < res[sub]
            a = sub[acc]
            X[a], beta[a], J[a], res[a] = trial[acc], tb[acc], tJ[acc], tres[acc]
            iters[a] += 1
            pidx = np.flatnonzero(pending)
            pending[pidx[acc]] = False
            step[pending] *= 0.5
        alive[idx[pending]] = False
    return X, res, alive & (res <= tol)


def torsion_enumerate(fam: EllipticFamily, N: int, grid="auto", tol: float = 1e-12, max_iter: int = 50,
                      dedup_radius: float = 1e-8, max_seeds: int = 1_000_000) -> EllipticTorsion:
    """Points of the domain where beta lies in (1/N) Z^2, by grid-seeded Newton; cross-checked in closed form."""
    if N < 1:
        raise ValueError("order N must be positive")
    probe = fam.box.grid([9, 9])
    beta, J, scale, ok = beta_batch(fam, probe)
    if not ok.all():
        raise InadmissibleFrame("Im tau <= 0 inside the domain", module=MODULE)
    if all(_rank2(Jk, sc, DEFAULT_RANK_TOL) == 0 for Jk, sc in zip(J, scale)):
        # beta is locally constant, hence constant on the (connected) domain
        c = beta[0] * N
        every = bool(np.all(np.abs(c - np.rint(c)) <= tol * N))
        return EllipticTorsion(N, [], [], everywhere=every)
    counts = _auto_counts(fam, N, max_seeds) if grid in ("auto", None) else (
        (int(grid), int(grid)) if isinstance(grid, int) else tuple(int(g) for g in grid))
    seeds = fam.box.grid(counts)
    b0, _, _, _ = beta_batch(fam, seeds)
    P = np.rint(b0 * N)
    X, res, conv = _newton2(fam, seeds, P / N, tol, max_iter)
    keep = conv & fam.box.contains(X)
    idx = np.flatnonzero(keep)
    hits, ps = [], []
    if idx.size:
        for k in pointsets.dedup(X[idx], dedup_radius):
            i = idx[k]
            hits.append(complex(X[i, 0], X[i, 1]))
            ps.append((int(P[i, 0]), int(P[i, 1])))
    order = sorted(range(len(hits)), key=lambda k: (round(hits[k].real, 9), round(hits[k].imag, 9)))
    hits, ps = [hits[k] for k in order], [ps[k] for k in order]
    out = EllipticTorsion(N, hits, ps, n_seeds=len(seeds), n_failed=int((~conv).sum()))
    oracle = closed_form_hits(fam, N)
    if oracle is not None:
        out.oracle = oracle
        out.oracle_match = same_point_set(hits, [complex(b) for b in oracle], dedup_radius)
    return out


def same_point_set(A, B, radius: float = 1e-8) -> bool:
    a = np.array([[z.real, z.imag] for z in A]).reshape(-1, 2)
    b = np.array([[z.real, z.imag] for z in B]).reshape(-1, 2)
    return pointsets.same_set(a, b, radius)


@dataclass(frozen=True)
class EllipticDensityRow:
    N: int
    epsilon: float
    coverage: float
    hit_count: int


def elliptic_density(fam: EllipticFamily, N_list, epsilon: float, samples: int = 2000, seed: int = 0):
    rng = np.random.default_rng(seed)
    pts = fam.box.sample(rng, samples)
    acc = np.zeros((0, 2))
    rows = []
    for N in sorted(set(int(x) for x in N_list)):
        res = torsion_enumerate(fam, N)
        if res.everywhere:
            rows.append(EllipticDensityRow(N, epsilon, 1.0, -1))
            continue
        new = np.array([[h.real, h.imag] for h in res.hits]).reshape(-1, 2)
        if new.size:
            allp = np.vstack([acc, new])
            acc = allp[sorted(pointsets.dedup(allp, 1e-9))]
        cov = float(np.mean(kernels.min_distance(pts, acc) <= epsilon))
        rows.append(EllipticDensityRow(N, float(epsilon), cov, int(acc.shape[0])))
    return rows


# ---------------------------------------------------------------------------
# monodromy


@dataclass(frozen=True)
class MonodromyProblem:
    generators: tuple

    def __post_init__(self):
        if not self.generators:
            raise ValueError("need at least one generator")
        d = len(self.generators[0])
        for g in self.generators:
            if len(g) != d or any(len(row) != d for row in g):
                raise DimensionError("generators must be square matrices of one size")
            if exact_linalg.int_det([[int(x) for x in row] for row in g]) == 0:
                raise ValueError("generators must be invertible over the rationals")

    @property
    def d(self) -> int:
        return len(self.generators[0])

    @classmethod
    def from_json(cls, obj) -> "MonodromyProblem":
        try:
            gens = obj["generators"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"monodromy JSON needs 'generators': {exc}") from None
        for g in gens:
            for row in g:
                if any(not isinstance(x, int) or isinstance(x, bool) for x in row):
                    raise ValueError("generator entries must be integers")
        return cls(tuple(tuple(tuple(row) for row in g) for g in gens))


def invariant_subspace(mp: MonodromyProblem) -> list[list[Fraction]]:
    """Rational basis of the common fixed space of the generators."""
    rows = []
    for g in mp.generators:
        for i in range(mp.d):
            rows.append([g[i][j] - (1 if i == j else 0) for j in range(mp.d)])
    basis = exact_linalg.nullspace(rows, ncols=mp.d)
    return [[x.re for x in v] for v in basis]


def _near_rational(x: float, D: int, tol: float) -> bool:
    f = Fraction(x).limit_denominator(D)
    return abs(float(f) - x) <= tol


@dataclass(frozen=True)
class QuasiRationalReport:
    verdict: str  # PASS | CONSISTENT | NEAR-VIOLATION
    detail: str

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "detail": self.detail}


def quasi_rational_check(mp: MonodromyProblem, v, D: int, tol: float = 1e-9) -> QuasiRationalReport:
    """One-sided check: with no invariants, rho(gamma) v - v rational for all gamma forces v rational.

    PASS: v is rational (exactly, or within tol at denominator <= D), so the
    forward direction holds trivially. CONSISTENT: some rho(gamma) v - v is not
    near a rational of denominator <= D. NEAR-VIOLATION: every difference is
    near-rational while v is not; floats cannot certify irrationality, so this
    is never reported as a counterexample.
    """
    if invariant_subspace(mp):
        raise PreconditionError("the representation has nonzero invariants", MODULE, "no invariant vectors")
    if len(v) != mp.d:
        raise DimensionError(f"vector has length {len(v)}, expected {mp.d}")
    if all(isinstance(x, (int, Fraction, str)) and not isinstance(x, bool) for x in v):
        return QuasiRationalReport("PASS", "v is rational")
    vf = np.asarray([float(x) for x in v])
    if all(_near_rational(x, D, tol) for x in vf):
        return QuasiRationalReport("PASS", f"v is within {tol:g} of a rational vector with denominator <= {D}")
    for k, g in enumerate(mp.generators):
        w = np.asarray(g, dtype=float) @ vf - vf
        if not all(_near_rational(x, D, tol) for x in w):
            return QuasiRationalReport("CONSISTENT", f"rho(g{k}) v - v is not near a rational vector (D <= {D})")
    return QuasiRationalReport("NEAR-VIOLATION", f"every rho(g) v - v is near-rational (D <= {D}) but v is not")
