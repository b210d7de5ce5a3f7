"""Command-line entry point: lagfib <command> --input problem.json [--output report.json].

Exit codes: 0 success, 2 precondition refusal (diagnostic JSON on stderr),
1 parse / configuration / mode errors and lemma violations.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import acceptance, jsonio
from .betti import (
    Box,
    NewtonConfig,
    Section,
    acz_consistency,
    betti_coords,
    betti_jacobian,
    density_scan,
    torsion_search,
)
from .cubic import classify
from .elliptic import EllipticFamily, elliptic_density, rank_map, rank_map_csv, torsion_enumerate
from .errors import DimensionError, LemmaViolation, ModeError, PreconditionError
from .foliation import fiber_trace, leaf_checks, section_leaf_compat
from .period import Potential, check_riemann, parse_point, period_frame, point_to_json
from .poly import DEFAULT_RANK_TOL, CubicForm, MVPoly, third_tensor_at
from .scalar import GaussQ, format_rational

log = logging.getLogger("lagfib")

NUMERIC_MODES = ("exact", "float")
ELLIPTIC_MODES = ("enumerate", "rank-map", "density")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# input handling


class Problem:
    """Parsed problem JSON {"n", "g", "f", "box", "b0"} with the requested arithmetic mode applied."""

    def __init__(self, obj, mode: str | None):
        if not isinstance(obj, dict):
            raise ValueError("problem JSON must be an object")
        try:
            n = int(obj["n"])
            g = MVPoly.from_json(obj["g"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"problem JSON needs 'n' and 'g': {exc}") from None
        f = MVPoly.from_json(obj["f"]) if obj.get("f") is not None else None
        b0 = parse_point(obj.get("b0"), n)
        if mode == "exact":
            exact_b = not (isinstance(b0, np.ndarray) and b0.dtype != object)
            if not (g.exact and (f is None or f.exact) and exact_b):
                raise ModeError("exact mode needs rational coefficients and a rational base point")
        elif mode == "float":
            g = g.to_float()
            f = f.to_float() if f is not None else None
            b0 = np.array([complex(x) for x in b0])
        self.n = n
        self.P = Potential(n, g)
        self.s = Section(f) if f is not None else None
        if self.s is not None and self.s.n != n:
            raise DimensionError(f"section in {self.s.n} variables, expected n={n}")
        self.box = Box.from_json(obj["box"]) if obj.get("box") is not None else None
        if self.box is not None and self.box.n != n:
            raise DimensionError(f"box has {self.box.n} complex axes, expected n={n}")
        self.b0 = b0

    def need_section(self) -> Section:
        if self.s is None:
            raise ValueError("this command needs a section 'f' in the problem JSON")
        return self.s

    def need_box(self) -> Box:
        if self.box is None:
            raise ValueError("this command needs a 'box' in the problem JSON")
        return self.box


def _read(args):
    if not args.input:
        raise ConfigError("--input is required")
    return jsonio.load(args.input)


def _numeric_mode(args):
    if args.mode is not None and args.mode not in NUMERIC_MODES:
        raise ConfigError(f"--mode must be one of {', '.join(NUMERIC_MODES)} for {args.command}")
    return args.mode


def _orders(text: str | None, default):
    if text is None:
        return default
    try:
        vals = [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--order expects integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise ConfigError("--order values must be positive")
    return vals


def _single_order(args, default: int) -> int:
    vals = _orders(args.order, [default])
    if len(vals) != 1:
        raise ConfigError(f"{args.command} takes a single --order")
    return vals[0]


def _grid(text: str | None):
    if text is None or text == "auto":
        return "auto"
    try:
        vals = [int(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"--grid expects 'auto', an integer or a comma list, got {text!r}") from None
    if any(v < 1 for v in vals):
        raise ConfigError("--grid counts must be positive")
    return vals[0] if len(vals) == 1 else vals


def _newton(args) -> NewtonConfig:
    return NewtonConfig(tol=args.tol_newton) if args.tol_newton is not None else NewtonConfig()


def _rank_tol(args) -> float:
    return args.tol_rank if args.tol_rank is not None else DEFAULT_RANK_TOL


def _matrix_json(M) -> dict:
    rows = M.tolist() if hasattr(M, "tolist") else M
    if all(isinstance(x, GaussQ) for row in rows for x in row):
        return {"re": [[format_rational(x.re) for x in row] for row in rows],
                "im": [[format_rational(x.im) for x in row] for row in rows]}
    return {"re": [[float(complex(x).real) for x in row] for row in rows],
            "im": [[float(complex(x).imag) for x in row] for row in rows]}


def _write_csv(path: str | None, text: str):
    if path:
        jsonio.atomic_write(path, text)


# ---------------------------------------------------------------------------
# commands


def cmd_classify_cubic(args):
    mode = _numeric_mode(args)
    C = CubicForm.from_json(_read(args))
    if mode == "float":
        C = C.to_float()
    elif mode == "exact" and not C.exact:
        raise ModeError("exact mode needs rational cubic entries")
    return classify(C, seed=args.seed).to_json()


def cmd_analyze_potential(args):
    pr = Problem(_read(args), _numeric_mode(args))
    fr = period_frame(pr.P, pr.b0)
    adm = check_riemann(fr)
    out = {"n": pr.n, "b": point_to_json(pr.b0), "tau": _matrix_json(fr.tau.M), "admissibility": adm.to_json()}
    out["cubic"] = classify(third_tensor_at(pr.P.g, pr.b0), seed=args.seed, with_det_poly=False).to_json()
    if pr.s is not None and adm.admissible:
        st = betti_coords(pr.P, pr.s, pr.b0)
        jac = betti_jacobian(pr.P, pr.s, pr.b0, tol=_rank_tol(args))
        out["betti"] = {"a": [float(x) for x in st.a], "rank": jac.rank, "rank_even_ok": jac.rank_even_ok,
                        "jacobian": [[float(x) for x in row] for row in np.asarray(jac.J)]}
    return out


def cmd_torsion_search(args):
    pr = Problem(_read(args), _numeric_mode(args))
    N = _single_order(args, 4)
    res = torsion_search(pr.P, pr.need_section(), pr.need_box(), N, _grid(args.grid), _newton(args))
    return {"N": N, "grid": list(res.grid), "n_seeds": res.n_seeds, "n_failed": res.n_failed,
            "count": len(res.hits), "hits": [h.to_json() for h in res.hits]}


def _density_csv(rows) -> str:
    lines = ["N,epsilon,coverage,hit_count"]
    lines += [f"{r.N},{r.epsilon!r},{r.coverage!r},{r.hit_count}" for r in rows]
    return "\n".join(lines) + "\n"


def cmd_density_scan(args):
    pr = Problem(_read(args), _numeric_mode(args))
    orders = _orders(args.order, [1, 2, 4, 8, 16])
    rows = density_scan(pr.P, pr.need_section(), pr.need_box(), orders, args.epsilon, samples=args.samples or 2000,
                        seed=args.seed, grid=_grid(args.grid), newton_cfg=_newton(args))
    _write_csv(args.csv, _density_csv(rows))
    return {"epsilon": args.epsilon, "samples": args.samples or 2000, "seed": args.seed,
            "rows": [{"N": r.N, "epsilon": r.epsilon, "coverage": r.coverage, "hit_count": r.hit_count}
                     for r in rows]}


def cmd_foliation_report(args):
    pr = Problem(_read(args), _numeric_mode(args))
    tol = args.tol_rank if args.tol_rank is not None else 1e-8
    out: dict = {"n": pr.n, "b": point_to_json(pr.b0)}
    if pr.n == 5:
        out["leaf"] = leaf_checks(pr.P, pr.b0, seed=args.seed, tol=tol).to_json()
        if pr.s is not None:
            out["compat"] = section_leaf_compat(pr.P, pr.s, pr.b0, tol=tol, seed=args.seed).to_json()
    if pr.s is not None:
        steps = args.steps if args.steps is not None else 200
        tr = fiber_trace(pr.P, pr.s, pr.b0, steps=steps, seed=args.seed)
        out["trace"] = tr.to_json()
        _write_csv(args.csv, tr.to_csv())
    if "leaf" not in out and "trace" not in out:
        raise ValueError("foliation-report needs n = 5 or a section 'f'")
    return out


def cmd_elliptic_demo(args):
    mode = args.mode or "enumerate"
    if mode not in ELLIPTIC_MODES:
        raise ConfigError(f"--mode must be one of {', '.join(ELLIPTIC_MODES)} for elliptic-demo")
    fam = EllipticFamily.from_json(_read(args))
    if mode == "enumerate":
        N = _single_order(args, 4)
        tol = args.tol_newton if args.tol_newton is not None else 1e-12
        return torsion_enumerate(fam, N, grid=_grid(args.grid), tol=tol).to_json()
    if mode == "rank-map":
        g = _grid(args.grid)
        counts = (21, 21) if g == "auto" else ((g, g) if isinstance(g, int) else tuple(g))
        rows = rank_map(fam, counts, tol=_rank_tol(args))
        _write_csv(args.csv, rank_map_csv(rows))
        hist: dict = {}
        for r in rows:
            hist[str(r[4])] = hist.get(str(r[4]), 0) + 1
        return {"mode": "rank-map", "grid": list(counts), "rank_histogram": {k: hist[k] for k in sorted(hist)}}
    orders = _orders(args.order, [1, 2, 4, 8, 16])
    rows = elliptic_density(fam, orders, args.epsilon, samples=args.samples or 2000, seed=args.seed)
    _write_csv(args.csv, _density_csv(rows))
    return {"mode": "density", "rows": [{"N": r.N, "epsilon": r.epsilon, "coverage": r.coverage,
                                         "hit_count": r.hit_count} for r in rows]}


def cmd_acz_check(args):
    pr = Problem(_read(args), _numeric_mode(args))
    rep = acz_consistency(pr.P, pr.need_section(), pr.need_box(), samples=args.samples or 64, seed=args.seed,
                          tol=_rank_tol(args))
    return rep.to_json()


def cmd_self_test(args):
    if args.mode is not None:
        raise ConfigError("self-test takes no --mode")
    results = acceptance.self_test(args.filter, seed=args.seed, quick=args.quick)
    if not results:
        raise ConfigError(f"--filter {args.filter!r} matches no criterion")
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.key}: {r.title}", file=sys.stderr)
    return acceptance.report_json(results)


COMMANDS = {
    "classify-cubic": cmd_classify_cubic,
    "analyze-potential": cmd_analyze_potential,
    "torsion-search": cmd_torsion_search,
    "density-scan": cmd_density_scan,
    "foliation-report": cmd_foliation_report,
    "elliptic-demo": cmd_elliptic_demo,
    "acz-check": cmd_acz_check,
    "self-test": cmd_self_test,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lagfib", description="Betti maps, torsion points and cubic forms of local Lagrangian fibrations.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--input", "-i")
    p.add_argument("--output", "-o", default="-")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode")
    p.add_argument("--tol-rank", type=float)
    p.add_argument("--tol-newton", type=float)
    p.add_argument("--order", help="order N, or a comma list for density scans")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--grid", help="'auto', one count per axis, or a comma list")
    p.add_argument("--steps", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--filter", help="self-test: run criteria whose key or group contains this text")
    p.add_argument("--csv", help="also write the bulk table (trace, density, rank map) here")
    p.add_argument("--quick", action="store_true", help="self-test: reduced sample counts")
    p.add_argument("--verbose", "-v", action="store_true")
    return p


def _fail(code: int, payload: dict) -> int:
    sys.stderr.write(jsonio.dumps(payload))
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        return _fail(1, {"error": "config", "message": str(exc)})
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed < 0 or args.seed >= 2**64:
        return _fail(1, {"error": "config", "message": "--seed must be a 64-bit unsigned integer"})
    try:
        report = COMMANDS[args.command](args)
    except PreconditionError as exc:
        return _fail(2, exc.to_dict())
    except ConfigError as exc:
        return _fail(1, {"error": "config", "message": str(exc)})
    except ModeError as exc:
        return _fail(1, {"error": "mode", "message": str(exc)})
    except LemmaViolation as exc:
        return _fail(1, {"error": "lemma violation", "message": str(exc)})
    except (ValueError, KeyError, TypeError) as exc:
        return _fail(1, {"error": "input", "message": str(exc)})
    jsonio.atomic_write(args.output, jsonio.dumps(report))
    if args.command == "self-test" and not report["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
