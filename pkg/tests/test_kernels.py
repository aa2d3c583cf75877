import os
import subprocess
import sys

import numpy as np
import pytest

from twistlab import kernels

needs_numba = pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba not installed")


def inputs(rng, B=40, N=11):
    X = np.abs(rng.standard_normal((B, N)))
    X[rng.random(X.shape) < 0.3] = 0.0
    X[:5] = np.round(X[:5])  # plenty of ties
    return X


@needs_numba
def test_schreier_parity(rng):
    X = inputs(rng)
    assert np.allclose(kernels.numba_impl.schreier_batch(X), kernels.numpy_impl.schreier_batch(X))
    for row in X:
        a = kernels.numba_impl.schreier_argmax(row)
        b = kernels.numpy_impl.schreier_argmax(row)
        assert row[a].sum() == pytest.approx(row[b].sum())


@needs_numba
def test_schlumprecht_parity(rng):
    for row in inputs(rng, B=10, N=9):
        ta, ia = kernels.numba_impl.schlumprecht_table(row, 1e-12, 200)
        tb, ib = kernels.numpy_impl.schlumprecht_table(row, 1e-12, 200)
        assert ia >= 0 and ib >= 0
        assert np.allclose(ta, tb, rtol=1e-10, atol=1e-14)


@needs_numba
def test_rank_and_residual_parity(rng):
    X = inputs(rng)
    w = rng.uniform(0.2, 3.0, X.shape[1])
    assert np.array_equal(kernels.numba_impl.rank_batch(X, w), kernels.numpy_impl.rank_batch(X, w))
    om = rng.standard_normal((30, 11))
    lam = rng.standard_normal((30, 11))
    V = rng.standard_normal(11)
    for p in (1.0, 2.0, 3.5, np.inf):
        a = kernels.numba_impl.lp_residual_norms(om, lam, V, w, p)
        b = kernels.numpy_impl.lp_residual_norms(om, lam, V, w, p)
        assert np.allclose(a, b, rtol=1e-12)


def test_env_flag_selects_numpy():
    code = "from twistlab import kernels; print(kernels.backend())"
    env = dict(os.environ, TWISTLAB_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "numpy"


def test_dispatch_matches_active_backend(rng):
    X = inputs(rng)
    impl = kernels.numba_impl if kernels.backend() == "numba" else kernels.numpy_impl
    assert np.array_equal(kernels.schreier_batch(X), impl.schreier_batch(X))
