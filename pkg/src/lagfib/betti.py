"""Betti coordinates of a section and everything built on them.

A section is an exact holomorphic 1-form df on the base. At an admissible
point b the real vector a(b) is the unique solution of

    df(b) = sum_i a_i df_i(b),

where df_1..df_n = dz_1..dz_n and df_{n+i} = dg_i. Written out in real and
imaginary parts this is the 2n x 2n system [[I, Re tau], [0, Im tau]] a =
[Re grad f, Im grad f]. Real base coordinates are ordered (Re z, Im z).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import exact_linalg, kernels, pointsets
from .errors import DimensionError, InadmissibleFrame, LemmaViolation, SingularSystem
from .period import Potential, admissible_mask, check_riemann, period_frame
from .poly import (
    DEFAULT_RANK_TOL,
    MVPoly,
    PolyBundle,
    _point,
    contract,
    form_rank,
    hessian_at,
    numeric_rank,
    third_tensor_at,
)
from .scalar import GaussQ

log = logging.getLogger(__name__)

COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class Section:
    """The section whose lift is the exact form df."""

    f: MVPoly

    @property
    def n(self) -> int:
        return self.f.nvars

    @cached_property
    def _bundle(self) -> PolyBundle:
        n = self.n
        grads = [self.f.diff(i) for i in range(n)]
        hess = [grads[i].diff(j) for i in range(n) for j in range(n)]
        return PolyBundle(grads + hess)

    def jets(self, Z):
        n = self.n
        vals = self._bundle.eval(Z)
        return vals[:, :n], vals[:, n:].reshape(-1, n, n)

    @classmethod
    def frame_constant(cls, P: Potential, c) -> "Section":
        """f = sum c_i f_i with f_i = z_i (i < n) and f_{n+i} = g_i."""
        n = P.n
        if len(c) != 2 * n:
            raise DimensionError(f"need {2 * n} constants")
        zs = MVPoly.variables(n, exact=P.g.exact)
        f = MVPoly.zero(n, exact=P.g.exact)
        for i in range(n):
            f = f + zs[i] * c[i] + P.gradient[i] * c[n + i]
        return cls(f)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in the real base coordinates (Re z_1..Re z_n, Im z_1..Im z_n)."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) % 2:
            raise DimensionError("box needs 2n lower and upper bounds")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError("box has lo > hi")

    @property
    def n(self) -> int:
        return len(self.lo) // 2

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.hi, float) - np.asarray(self.lo, float)

    @classmethod
    def from_complex(cls, re, im) -> "Box":
        """From per-variable [lo, hi] ranges of the real and imaginary parts."""
        lo = tuple(float(r[0]) for r in re) + tuple(float(r[0]) for r in im)
        hi = tuple(float(r[1]) for r in re) + tuple(float(r[1]) for r in im)
        return cls(lo, hi)

    def contains(self, X: np.ndarray, slack: float = 1e-9) -> np.ndarray:
        w = np.maximum(self.widths, 1.0) * slack
        return np.all((X >= np.asarray(self.lo) - w) & (X <= np.asarray(self.hi) + w), axis=-1)

    def grid(self, counts) -> np.ndarray:
        axes = []
        for lo, hi, c in zip(self.lo, self.hi, counts):
            axes.append(np.array([lo]) if hi == lo else np.linspace(lo, hi, max(int(c), 2)))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        return lo + rng.random((m, lo.size)) * (hi - lo)

    def to_json(self) -> dict:
        n = self.n
        return {
            "re": [[self.lo[i], self.hi[i]] for i in range(n)],
            "im": [[self.lo[n + i], self.hi[n + i]] for i in range(n)],
        }

    @classmethod
    def from_json(cls, obj) -> "Box":
        try:
            return cls.from_complex(obj["re"], obj["im"])
        except (KeyError, TypeError, IndexError) as exc:
            raise ValueError(f"box JSON needs 're' and 'im' range lists: {exc}") from None


def to_complex(X: np.ndarray) -> np.ndarray:
    n = X.shape[-1] // 2
    return X[..., :n] + 1j * X[..., n:]


def to_real(Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.complex128)
    return np.concatenate([Z.real, Z.imag], axis=-1)


# ---------------------------------------------------------------------------
# batched float evaluation


def _system(hess: np.ndarray) -> np.ndarray:
    m, n, _ = hess.shape
    M = np.zeros((m, 2 * n, 2 * n))
    M[:, :n, :n] = np.eye(n)
    M[:, :n, n:] = hess.real
    M[:, n:, n:] = hess.imag
    return M


def betti_batch(P: Potential, s: Section, X: np.ndarray, with_jacobian: bool = True):
    """a (m, 2n), J (m, 2n, 2n), per-point scale, admissible mask at real points X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = P.n
    Z = to_complex(X)
    _, hess, third = P.jets(Z)
    fgrad, fhess = s.jets(Z)
    ok = admissible_mask(hess)
    M = _system(hess)
    r = np.concatenate([fgrad.real, fgrad.imag], axis=1)
    a = np.full((X.shape[0], 2 * n), np.nan)
    if ok.any():
        a[ok] = np.linalg.solve(M[ok], r[ok][..., None])[..., 0]
    if not with_jacobian:
        return a, None, None, ok
    J = np.full((X.shape[0], 2 * n, 2 * n), np.nan)
    scale = np.zeros(X.shape[0])
    if ok.any():
        a_hi = a[ok][:, n:]
        # w[:, :, k] = d(grad f)/dz_k - (d tau/dz_k) a_hi
        W = fhess[ok] - np.einsum("mijk,mj->mik", third[ok], a_hi)
        rhs = np.concatenate(
            [np.concatenate([W.real, -W.imag], axis=2), np.concatenate([W.imag, W.real], axis=2)], axis=1
        )
        Minv = np.linalg.inv(M[ok])
        J[ok] = Minv @ rhs
        size = np.abs(fhess[ok]).max(axis=(1, 2)) + np.abs(third[ok]).max(axis=(1, 2, 3)) * np.abs(a_hi).max(axis=1)
        scale[ok] = np.linalg.norm(Minv, ord=2, axis=(1, 2)) * size
    return a, J, scale, ok


def jacobian_rank(J: np.ndarray, scale: float, tol: float = DEFAULT_RANK_TOL) -> int:
    """SVD rank relative to the larger of s_max and the size of the cancelling terms."""
    s = np.linalg.svd(J, compute_uv=False)
    ref = max(s[0] if s.size else 0.0, scale)
    if ref == 0.0:
        return 0
    return int(np.sum(s > tol * ref))


# ---------------------------------------------------------------------------
# single-point operations


@dataclass(frozen=True, eq=False)
class BettiState:
    b: tuple
    a: np.ndarray
    J: np.ndarray | None = None
    rank: int | None = None
    rank_even_ok: bool | None = None
    cond: float | None = None

    def to_json(self) -> dict:
        out = {"a": [float(x) for x in self.a]}
        if self.rank is not None:
            out["rank"] = self.rank
            out["rank_even_ok"] = self.rank_even_ok
        if self.cond is not None:
            out["cond"] = self.cond
        return out


def _exact_inputs(P: Potential, s: Section, b):
    vals, exact_b = _point(b, P.n)
    return vals, exact_b and P.g.exact and s.f.exact


def _require_admissible(P: Potential, vals):
    rep = check_riemann(period_frame(P, vals))
    if not rep.admissible:
        raise InadmissibleFrame(f"inadmissible frame at b: {rep.reason}", module="betti")
    return rep


def _exact_system(P: Potential, s: Section, vals):
    n = P.n
    tau = hessian_at(P.g, vals).M
    grad = [s.f.diff(i)(vals) for i in range(n)]
    M = [[GaussQ(0)] * (2 * n) for _ in range(2 * n)]
    for i in range(n):
        M[i][i] = GaussQ(1)
        for j in range(n):
            M[i][n + j] = GaussQ(tau[i, j].re)
            M[n + i][n + j] = GaussQ(tau[i, j].im)
    r = [GaussQ(g.re) for g in grad] + [GaussQ(g.im) for g in grad]
    return M, r, tau


def betti_coords(P: Potential, s: Section, b) -> BettiState:
    """Solve df(b) = sum a_i df_i(b) for the real vector a."""
    if s.n != P.n:
        raise DimensionError("section and potential have different dimensions")
    vals, exact = _exact_inputs(P, s, b)
    _require_admissible(P, vals)
    if exact:
        M, r, _ = _exact_system(P, s, vals)
        a = exact_linalg.solve(M, r)
        arr = np.empty(len(a), dtype=object)
        arr[:] = [x.re for x in a]
        return BettiState(tuple(vals), arr)
    X = to_real(np.asarray([complex(v) for v in vals]))[None, :]
    Z = to_complex(X)
    _, hess, _ = P.jets(Z)
    M = _system(hess)[0]
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystem(f"Betti system is singular (condition number {cond:.3g})", cond)
    a, _, _, _ = betti_batch(P, s, X, with_jacobian=False)
    return BettiState(tuple(vals), a[0], cond=cond)


def betti_jacobian(P: Potential, s: Section, b, method: str = "analytic", tol: float = DEFAULT_RANK_TOL,
                   h: float = 1e-5) -> BettiState:
    """Jacobian of b -> a(b) in the real coordinates (Re z, Im z), with its rank."""
    if method not in ("analytic", "finite-difference"):
        raise ValueError(f"unknown method {method!r}")
    vals, exact = _exact_inputs(P, s, b)
    _require_admissible(P, vals)
    n = P.n
    if exact and method == "analytic":
        M, r, _ = _exact_system(P, s, vals)
        a = [x.re for x in exact_linalg.solve(M, r)]
        C = third_tensor_at(P.g, vals).C
        Hf = hessian_at(s.f, vals).M
        cols = []
        for k in range(n):
            w = [Hf[i, k] - sum((C[i, j, k] * a[n + j] for j in range(n)), GaussQ(0)) for i in range(n)]
            cols.append([GaussQ(x.re) for x in w] + [GaussQ(x.im) for x in w])
        for k in range(n):
            w = [Hf[i, k] - sum((C[i, j, k] * a[n + j] for j in range(n)), GaussQ(0)) for i in range(n)]
            cols.append([GaussQ(-x.im) for x in w] + [GaussQ(x.re) for x in w])
        Jcols = [exact_linalg.solve(M, col) for col in cols]
        J = np.empty((2 * n, 2 * n), dtype=object)
        for k, col in enumerate(Jcols):
            for i, x in enumerate(col):
                J[i, k] = x.re
        rank = exact_linalg.rank(J.tolist())
        arr = np.empty(2 * n, dtype=object)
        arr[:] = a
        return BettiState(tuple(vals), arr, J, rank, rank % 2 == 0)
    X = to_real(np.asarray([complex(v) for v in vals]))[None, :]
    if method == "analytic":
        a, J, scale, _ = betti_batch(P, s, X)
        J0, sc = J[0], float(scale[0])
    else:
        a, _, _, _ = betti_batch(P, s, X, with_jacobian=False)
        pts = []
        for k in range(2 * n):
            e = np.zeros(2 * n)
            e[k] = h
            pts += [X[0] + e, X[0] - e]
        av, _, _, ok = betti_batch(P, s, np.array(pts), with_jacobian=False)
        if not ok.all():
            raise InadmissibleFrame("finite-difference stencil leaves the admissible region", module="betti")
        J0 = np.stack([(av[2 * k] - av[2 * k + 1]) / (2 * h) for k in range(2 * n)], axis=1)
        sc = float(np.abs(J0).max())
    rank = jacobian_rank(J0, sc, tol)
    return BettiState(tuple(vals), a[0], J0, rank, rank % 2 == 0)


# ---------------------------------------------------------------------------
# torsion search


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-12
    max_iter: int = 50
    max_halvings: int = 30
    dedup_radius: float | None = None  # default: half the seed-grid spacing
    rcond: float = 1e-10


@dataclass(frozen=True)
class TorsionHit:
    b: tuple  # complex coordinates
    N: int
    p: tuple
    residual: float
    newton_iters: int

    def to_json(self) -> dict:
        return {
            "b_re": [float(z.real) for z in self.b],
            "b_im": [float(z.imag) for z in self.b],
            "N": self.N,
            "p": list(self.p),
            "residual": float(self.residual),
        }


@dataclass
class TorsionResult:
    hits: list
    n_seeds: int
    n_failed: int
    grid: tuple = ()

    def __iter__(self):
        return iter(self.hits)

    def __len__(self):
        return len(self.hits)


def newton_batch(P: Potential, s: Section, X0: np.ndarray, targets: np.ndarray, cfg: NewtonConfig):
    """Vectorized damped Gauss-Newton on a(b) = targets; pinv handles rank-deficient Jacobians.

    Returns (X, residual, iterations, converged).
    """
    X = np.array(X0, dtype=float)
    m = X.shape[0]
    res = np.full(m, np.inf)
    iters = np.zeros(m, dtype=int)
    done = np.zeros(m, dtype=bool)
    dead = np.zeros(m, dtype=bool)
    a, J, _, ok = betti_batch(P, s, X)
    dead |= ~ok
    res[ok] = np.abs(a[ok] - targets[ok]).max(axis=1)
    for it in range(cfg.max_iter + 1):
        done |= (res <= cfg.tol) & ~dead
        active = ~done & ~dead
        if not active.any() or it == cfg.max_iter:
            break
        idx = np.flatnonzero(active)
        r = a[idx] - targets[idx]
        step = -np.einsum("mij,mj->mi", np.linalg.pinv(J[idx], rcond=cfg.rcond), r)
        # the linear model cannot reduce the residual: the target is off the image of a
        lin = np.abs(r + np.einsum("mij,mj->mi", J[idx], step)).max(axis=1)
        stuck = (np.linalg.norm(step, axis=1) <= 1e-15 * (1 + np.linalg.norm(X[idx], axis=1))) | (
            lin > 0.9 * res[idx])
        dead[idx[stuck]] = True
        idx, step = idx[~stuck], step[~stuck]
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(cfg.max_halvings + 1):
            sub = idx[pending]
            if sub.size == 0:
                break
            trial = X[sub] + step[pending]
            ta, tJ, _, tok = betti_batch(P, s, trial)
            tres = np.full(sub.size, np.inf)
            tres[tok] = np.abs(ta[tok] - targets[sub][tok]).max(axis=1)
            accept = tres < res[sub]
            acc = sub[accept]
            X[acc], a[acc], J[acc], res[acc] = trial[accept], ta[accept], tJ[accept], tres[accept]
            iters[acc] += 1
            pend_idx = np.flatnonzero(pending)
            pending[pend_idx[accept]] = False
            step[pending] *= 0.5
        dead[idx[pending]] = True
    return X, res, iters, done


def auto_grid(P: Potential, s: Section, box: Box, N: int, max_seeds: int = 200_000) -> tuple:
    """Seed counts per real axis fine enough that rounding a(seed) * N reaches every hit.

    With L_k = max |J_ik| over a probe grid and m active axes, spacing
    1 / (1.25 m N L_k) along axis k keeps |a(seed) - a(hit)| below 1 / (2N)
    for the seed nearest to each hit.
    """
    probe = box.grid([5] * len(box.lo))
    _, J, _, ok = betti_batch(P, s, probe)
    if not ok.any():
        raise InadmissibleFrame("no admissible point in the box", module="betti")
    L = np.nanmax(np.abs(J[ok]), axis=(0, 1))
    widths = box.widths
    active = [k for k in range(len(L)) if widths[k] > 0 and L[k] > 0]
    m = max(len(active), 1)
    counts = [1 if w == 0 else 2 for w in widths]
    for k in active:
        counts[k] = max(2, int(math.ceil(widths[k] * 1.25 * m * N * L[k])) + 1)
    total = math.prod(counts)
    if total > max_seeds:
        big = [k for k in active if counts[k] > 2]
        shrink = (max_seeds / total) ** (1 / max(len(big), 1))
        for k in big:
            counts[k] = max(2, int(counts[k] * shrink))
        log.warning("seed grid capped at %d points; hits may be missed", math.prod(counts))
    return tuple(counts)


def _grid_counts(box: Box, grid) -> tuple:
    if isinstance(grid, int):
        return tuple(1 if w == 0 else grid for w in box.widths)
    counts = tuple(int(g) for g in grid)
    if len(counts) != len(box.lo):
        raise DimensionError("grid needs one count per real axis")
    return counts


def _check_box_admissible(P: Potential, box: Box, seeds: np.ndarray):
    _, hess, _ = P.jets(to_complex(seeds))
    ok = admissible_mask(hess)
    if not ok.all():
        bad = seeds[np.flatnonzero(~ok)[0]]
        raise InadmissibleFrame(f"inadmissible frame at seed {bad.tolist()}", module="betti")


def torsion_search(P: Potential, s: Section, box: Box, N: int, grid="auto",
                   newton_cfg: NewtonConfig = NewtonConfig()) -> TorsionResult:
    """Points of the box where a(b) lies in (1/N) Z^{2n}, found by Newton from grid seeds."""
    if box.n != P.n or s.n != P.n:
        raise DimensionError("box, section and potential dimensions differ")
    if N < 1:
        raise ValueError("order N must be positive")
    counts = auto_grid(P, s, box, N) if grid == "auto" or grid is None else _grid_counts(box, grid)
    seeds = box.grid(counts)
    _check_box_admissible(P, box, seeds)
    a0, _, _, _ = betti_batch(P, s, seeds, with_jacobian=False)
    p = np.rint(a0 * N)
    targets = p / N
    X, res, iters, conv = newton_batch(P, s, seeds, targets, newton_cfg)
    inside = conv & box.contains(X)
    radius = newton_cfg.dedup_radius
    if radius is None:
        spacings = [w / (c - 1) for w, c in zip(box.widths, counts) if c > 1 and w > 0]
        radius = 0.5 * min(spacings) if spacings else 1e-8
    idx = np.flatnonzero(inside)
    hits = []
    if idx.size:
        cand = X[idx]
        for k in pointsets.dedup(cand, radius):
            i = idx[k]
            b = tuple(complex(z) for z in to_complex(X[i]))
            check = betti_coords(P, s, np.array(b))
            r = float(np.abs(check.a - targets[i]).max())
            if r > newton_cfg.tol:
                continue
            hits.append(TorsionHit(b, N, tuple(int(x) for x in p[i]), r, int(iters[i])))
    hits.sort(key=lambda h: tuple(round(z.real, 9) for z in h.b) + tuple(round(z.imag, 9) for z in h.b))
    return TorsionResult(hits, len(seeds), int((~conv).sum()), counts)


@dataclass(frozen=True)
class DensityRow:
    N: int
    epsilon: float
    coverage: float
    hit_count: int


def density_scan(P: Potential, s: Section, box: Box, N_list, epsilon: float, samples: int = 2000,
                 seed: int = 0, grid="auto", newton_cfg: NewtonConfig = NewtonConfig()) -> list[DensityRow]:
    """Fraction of uniform box samples within epsilon of a hit of order <= N (accumulated over N_list)."""
    rng = np.random.default_rng(seed)
    pts = box.sample(rng, samples)
    acc = np.zeros((0, 2 * P.n))
    rows = []
    for N in sorted(set(int(x) for x in N_list)):
        res = torsion_search(P, s, box, N, grid, newton_cfg)
        new = np.array([to_real(np.array(h.b)) for h in res.hits]).reshape(-1, 2 * P.n)
        if new.size:
            allp = np.vstack([acc, new])
            keep = pointsets.dedup(allp, 1e-9)
            acc = allp[sorted(keep)]
        d = kernels.min_distance(pts, acc)
        rows.append(DensityRow(N, float(epsilon), float(np.mean(d <= epsilon)), int(acc.shape[0])))
    return rows


# ---------------------------------------------------------------------------
# finite transversality checks


@dataclass(frozen=True)
class ACZReport:
    verdict: str  # "CONSISTENT" or "VIOLATION-WITNESS"
    max_betti_rank: int
    max_nabla_rank: int
    n: int
    samples: int
    lambdas_per_point: int
    odd_rank_points: int = 0

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_betti_rank": self.max_betti_rank,
            "max_nabla_rank": self.max_nabla_rank,
            "n": self.n,
            "samples": self.samples,
            "lambdas_per_point": self.lambdas_per_point,
            "odd_rank_points": self.odd_rank_points,
        }


def acz_consistency(P: Potential, s: Section, box: Box, samples: int = 64, n_lambda: int = 8, seed: int = 0,
                    tol: float = DEFAULT_RANK_TOL) -> ACZReport:
    """Falsification harness: full Betti rank somewhere, or every sampled nabla_lambda degenerate."""
    rng = np.random.default_rng(seed)
    pts = box.sample(rng, samples)
    _, J, scale, ok = betti_batch(P, s, pts)
    if not ok.all():
        raise InadmissibleFrame("box leaves the admissible region", module="betti")
    n = P.n
    _, _, third = P.jets(to_complex(pts))
    max_betti = 0
    max_nabla = 0
    odd = 0
    for k in range(samples):
        r = jacobian_rank(J[k], scale[k], tol)
        odd += r % 2
        max_betti = max(max_betti, r)
        lam = rng.standard_normal((n_lambda, n)) + 1j * rng.standard_normal((n_lambda, n))
        for l in lam:
            Q = np.tensordot(l, third[k], axes=([0], [0]))
            max_nabla = max(max_nabla, numeric_rank(Q, tol))
    verdict = "CONSISTENT" if (max_betti == 2 * n or max_nabla < n) else "VIOLATION-WITNESS"
    return ACZReport(verdict, max_betti, max_nabla, n, samples, n_lambda, odd)


def phi_nu_map(P: Potential, s: Section, b, lam) -> np.ndarray:
    """(b, lambda) -> sum_i df/dz_i e_i + sum_i lambda_i e'_i as a vector of C^{2n}."""
    Z = np.asarray([complex(x) for x in b])[None, :]
    fgrad, _ = s.jets(Z)
    _, hess, _ = P.jets(Z)
    lam = np.asarray(lam, dtype=np.complex128)
    low = fgrad[0] - lam @ hess[0]
    return np.concatenate([low, lam])


def phi_nu_rank(P: Potential, s: Section, b, lam, tol: float = DEFAULT_RANK_TOL) -> int:
    """Rank of the differential of phi_nu_map at (b, lambda): n + rank(f'' - g'''(lambda))."""
    if len(lam) != P.n:
        raise DimensionError(f"lambda has length {len(lam)}, expected {P.n}")
    vals, _ = _point(b, P.n)
    F2 = hessian_at(s.f, vals)
    Q = F2 - contract(third_tensor_at(P.g, vals), lam)
    return P.n + form_rank(Q, tol)


def assert_even(rank: int):
    if rank % 2:
        raise LemmaViolation(f"odd Betti rank {rank}: kernel of the Betti differential is not complex")
