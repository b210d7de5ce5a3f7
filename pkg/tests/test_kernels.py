import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagfib import kernels
from lagfib.poly import PolyBundle, evaluate, random_exact_poly

seeds = st.integers(0, 2**32 - 1)
needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def restore_backend():
    old = kernels.backend()
    yield
    kernels.set_backend(old)


def both(fn):
    out = {}
    for name in ("numpy", "numba"):
        kernels.set_backend(name)
        out[name] = fn()
    return out["numpy"], out["numba"]


@needs_numba
@settings(max_examples=25)
@given(seeds)
def test_bundle_backends_agree(seed):
    rng = np.random.default_rng(seed)
    polys = [random_exact_poly(rng, 3, 4, 8, complex_coeffs=True).to_float() for _ in range(3)]
    pb = PolyBundle(polys)
    Z = rng.standard_normal((50, 3)) + 1j * rng.standard_normal((50, 3))
    old = kernels.backend()
    try:
        a, b = both(lambda: pb.eval(Z))
    finally:
        kernels.set_backend(old)
    assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(a).max())
    # oracle: term-by-term evaluation
    ref = np.array([[complex(evaluate(p, z)) for p in polys] for z in Z[:5]])
    assert np.abs(a[:5] - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())


@needs_numba
@settings(max_examples=25)
@given(seeds)
def test_min_distance_backends_agree(seed):
    rng = np.random.default_rng(seed)
    P, H = rng.random((200, 2)), rng.random((int(rng.integers(1, 40)), 2))
    old = kernels.backend()
    try:
        a, b = both(lambda: kernels.min_distance(P, H))
    finally:
        kernels.set_backend(old)
    assert np.abs(a - b).max() <= 1e-15
    ref = np.sqrt(((P[:, None] - H[None]) ** 2).sum(-1)).min(1)
    assert np.abs(a - ref).max() <= 1e-15


def test_min_distance_empty_targets():
    assert np.isinf(kernels.min_distance(np.zeros((3, 2)), np.zeros((0, 2)))).all()


def test_unknown_backend(restore_backend):
    with pytest.raises(ValueError):
        kernels.set_backend("cuda")


@pytest.mark.parametrize("flag, expected", [("1", "numpy"), ("", "numba" if kernels.HAVE_NUMBA else "numpy")])
def test_environment_switch(flag, expected):
    env = dict(os.environ, LAGFIB_NO_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from lagfib import kernels; print(kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
