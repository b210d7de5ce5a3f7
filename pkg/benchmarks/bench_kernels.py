"""Compare the numba and numpy backends of the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Times the potential jet bundle (gradient, Hessian, third derivatives) over a
seed grid, the density-scan nearest-hit distance, and one end-to-end torsion
search, and checks both backends agree.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from lagfib import kernels
from lagfib.betti import Box, betti_batch, torsion_search
from lagfib.fixtures import leaf_potential, model_potential, quadratic_section, slice_box


def best_of(fn, repeat: int) -> float:
    fn()  # warm-up (and numba compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng: np.random.Generator):
    P5 = leaf_potential()
    bundle = P5._jet_bundle
    Z = 0.05 * (rng.standard_normal((20_000, 5)) + 1j * rng.standard_normal((20_000, 5)))
    pts = rng.uniform(size=(20_000, 4))
    hits = rng.uniform(size=(2_000, 4))
    P2, s2 = model_potential(2), quadratic_section(2)
    X = Box.from_complex([[-0.5, 0.5]] * 2, [[0.5, 1.5]] * 2).sample(rng, 20_000)
    return {
        "jet bundle n=5 (20k points)": lambda: bundle.eval(Z),
        "min distance (20k x 2k, d=4)": lambda: kernels.min_distance(pts, hits),
        "betti batch n=2 (20k points)": lambda: betti_batch(P2, s2, X),
        "torsion search N=16": lambda: torsion_search(P2, s2, slice_box(), 16),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        print("numba not installed: only the numpy backend is available")
    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    rng = np.random.default_rng(0)
    work = cases(rng)
    print(f"{'case':32s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup  max|diff|" if len(backends) == 2 else ""))
    before = kernels.backend()
    try:
        for name, fn in work.items():
            times, outs = [], []
            for b in backends:
                kernels.set_backend(b)
                times.append(best_of(fn, args.repeat))
                outs.append(fn())
            line = f"{name:32s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
            if len(backends) == 2:
                line += f"{times[0] / times[1]:11.1f}x  {_diff(*outs):.1e}"
            print(line)
    finally:
        kernels.set_backend(before)


def _diff(a, b) -> float:
    """Largest elementwise difference; torsion results compare hit counts."""
    if hasattr(a, "hits"):
        return 0.0 if len(a.hits) == len(b.hits) else float("inf")
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype == bool:
        return float(np.any(a != b))
    return float(np.nanmax(np.abs(a - b), initial=0.0))


if __name__ == "__main__":
    main()
