import itertools
import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linprog

from twistlab.measure import AtomSpace
from twistlab.spaces import (CapExceeded, LorentzNorm, LpNorm, LpSumL2Blocks, PConcavification,
                             PConvexification, SchlumprechtNorm, SchreierDualNorm, SchreierNorm,
                             from_descriptor, norm_lorentz, norm_lp, norm_schreier,
                             norm_schreier_dual, parse_norm)


# -- brute-force oracles ------------------------------------------------------

def admissible_sets(N):
    """0-based index sets A with |A| <= min(A) + 1 (the 1-based rule |A| <= min A)."""
    out = []
    for m in range(N):
        rest = range(m + 1, N)
        for k in range(0, min(m, N - m - 1) + 1):
            for tail in itertools.combinations(rest, k):
                out.append((m,) + tail)
    return out


def schreier_oracle(x):
    a = np.abs(x)
    return max(a[list(A)].sum() for A in admissible_sets(a.size))


def schreier_dual_oracle(x):
    """Full-enumeration LP: max <|x|, y> over y >= 0 with sum_A y <= 1 for every admissible A."""
    c = np.abs(x)
    sets = admissible_sets(c.size)
    A = np.zeros((len(sets), c.size))
    for i, s in enumerate(sets):
        A[i, list(s)] = 1.0
    res = linprog(-c, A_ub=A, b_ub=np.ones(len(sets)), bounds=(0, None), method="highs")
    return -res.fun


def schlumprecht_oracle(x):
    """Direct recursion over the decomposition tree of successive intervals."""
    a = np.abs(np.asarray(x, dtype=float))
    N = a.size

    @lru_cache(maxsize=None)
    def F(lo, hi):
        best = float(a[lo:hi].max()) if hi > lo else 0.0

        # every choice of l >= 2 successive nonempty intervals inside [lo, hi)
        def chains(start, acc):
            for s in range(start, hi):
                for t in range(s + 1, hi + 1):
                    yield acc + [(s, t)]
                    yield from chains(t, acc + [(s, t)])

        for ch in chains(lo, []):
            if len(ch) >= 2:
                v = sum(F(s, t) for s, t in ch) / math.log2(len(ch) + 1)
                best = max(best, v)
        return best

    return F(0, N)


def lorentz_oracle(x, w, p, q):
    a = np.abs(x)
    order = sorted(range(a.size), key=lambda i: -a[i])
    T, prev, total = 0.0, 0.0, 0.0
    for i in order:
        T += w[i]
        total += a[i] ** q * (T ** (q / p) - prev ** (q / p))
        prev = T
    return total ** (1 / q)


# -- L_p ------------------------------------------------------------------------

def test_lp_values_and_batches():
    S = AtomSpace(np.array([1.0, 2.0, 0.5]))
    nm = LpNorm(S, 2.0)
    x = np.array([1.0, -1.0, 2.0])
    assert nm(x) == pytest.approx(math.sqrt(1 + 2 + 2))
    assert LpNorm(S, math.inf)(x) == 2.0
    assert isinstance(nm(x), float)
    assert nm(np.stack([x, 2 * x])).tolist() == pytest.approx([nm(x), 2 * nm(x)])
    assert norm_lp(S, 1.0, x) == pytest.approx(1 + 2 + 1)
    assert LpNorm(S, 0.5).quasi_triangle_constant == pytest.approx(2.0)


def test_lp_gradient_and_norming(rng):
    S = AtomSpace(rng.uniform(0.5, 2, 6))
    for p in (1.5, 2.0, 3.0):
        nm = LpNorm(S, p)
        x = rng.standard_normal(6)
        g = nm.gradient(x)
        h = 1e-6
        fd = np.array([(nm(x + h * e) - nm(x - h * e)) / (2 * h) for e in np.eye(6)])
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-8)
        y = nm.norming_functional(x)
        assert np.sum(S.weights * x * y) == pytest.approx(nm(x))
        assert nm.dual()(y) == pytest.approx(1.0)


# -- Lorentz ----------------------------------------------------------------------

@pytest.mark.parametrize("p,q", [(2, 1), (1, 2), (3, 2), (1.5, 4), (2, 2)])
def test_lorentz_matches_formula(rng, p, q):
    w = rng.uniform(0.2, 3.0, 9)
    S = AtomSpace(w)
    nm = LorentzNorm(S, p, q)
    for _ in range(20):
        x = rng.standard_normal(9)
        x[rng.random(9) < 0.3] = 0
        assert nm(x) == pytest.approx(lorentz_oracle(x, w, p, q), rel=1e-12)
    assert norm_lorentz(S, p, q, x) == pytest.approx(nm(x))


def test_lorentz_pp_is_lp(rng):
    S = AtomSpace(rng.uniform(0.2, 3.0, 7))
    x = rng.standard_normal(7)
    assert LorentzNorm(S, 3.0, 3.0)(x) == pytest.approx(LpNorm(S, 3.0)(x), rel=1e-12)


# -- Schreier ----------------------------------------------------------------------

def test_schreier_small_examples():
    S = AtomSpace.counting(10)
    e = np.eye(10)
    assert norm_schreier(e[0], S) == 1.0
    assert norm_schreier(e[3:7].sum(axis=0), S) == 4.0
    assert norm_schreier(np.array([1.0, 1.0]), AtomSpace.counting(2)) == 1.0


def test_schreier_exhaustive(rng):
    for N in range(1, 11):
        S = AtomSpace.counting(N)
        nm = SchreierNorm(S)
        X = rng.standard_normal((15, N)) * rng.exponential(size=(15, N))
        X[rng.random(X.shape) < 0.25] = 0
        assert np.allclose(nm(X), [schreier_oracle(x) for x in X], rtol=1e-13)
        for x in X[:3]:
            A = nm.argmax_set(x)
            assert np.abs(x[A]).sum() == pytest.approx(nm(x))
            assert len(A) <= A.min() + 1


def test_schreier_needs_unit_weights():
    with pytest.raises(ValueError):
        SchreierNorm(AtomSpace.uniform(4))


# -- Schreier dual -------------------------------------------------------------------

def test_schreier_dual_against_full_lp(rng):
    for N in (3, 6, 9):
        S = AtomSpace.counting(N)
        nm = SchreierDualNorm(S)
        X = rng.standard_normal((12, N))
        X[rng.random(X.shape) < 0.2] = 0
        ref = [schreier_dual_oracle(x) for x in X]
        assert np.allclose(nm(X), ref, rtol=1e-8)
        # single-vector path too, on a fresh pool
        assert SchreierDualNorm(S)(X[0]) == pytest.approx(ref[0], rel=1e-8)


def test_schreier_dual_examples():
    S = AtomSpace.counting(8)
    nm = SchreierDualNorm(S)
    x = np.zeros(8)
    x[:3] = 1
    v = norm_schreier_dual(x, S)
    assert 1 <= v <= 3 and v == pytest.approx(schreier_dual_oracle(x))
    assert nm(np.eye(8)[0]) == pytest.approx(1.0)


def test_schreier_dual_cap():
    with pytest.raises(CapExceeded):
        SchreierDualNorm(AtomSpace.counting(20))
    SchreierDualNorm(AtomSpace.counting(20), cap=20)


def test_schreier_dual_pairing(rng):
    """<x, y> <= ||x||_S ||y||_S* and the LP maximizer attains the dual norm."""
    S = AtomSpace.counting(7)
    sd, sc = SchreierDualNorm(S), SchreierNorm(S)
    for _ in range(10):
        x = rng.standard_normal(7)
        val, y, _ = sd.solve(x)
        assert sc(y) <= 1 + 1e-9
        assert np.abs(x) @ y == pytest.approx(val)
        z = rng.standard_normal(7)
        assert abs(z @ x) <= sc(z) * sd(x) + 1e-9


# -- Schlumprecht -----------------------------------------------------------------------

def test_schlumprecht_against_tree(rng):
    for N in (1, 2, 4, 6, 8):
        S = AtomSpace.counting(N)
        nm = SchlumprechtNorm(S)
        for _ in range(4 if N == 8 else 8):
            x = rng.standard_normal(N)
            x[rng.random(N) < 0.2] = 0
            if not np.any(x):
                x[0] = 1.0
            v = nm(x)
            assert v >= np.abs(x).max() - 1e-15
            assert v == pytest.approx(schlumprecht_oracle(x), rel=1e-9)


def test_schlumprecht_known_value():
    # two equal atoms: max(1, 2/log2 3)
    nm = SchlumprechtNorm(AtomSpace.counting(2))
    assert nm(np.ones(2)) == pytest.approx(2 / math.log2(3))


# -- constructions ---------------------------------------------------------------------

def test_pconvexification(rng):
    S = AtomSpace.counting(9)
    base = SchreierNorm(S)
    nm = PConvexification(base, 2.0)
    x = rng.standard_normal(9)
    assert nm(x) == pytest.approx(base(np.abs(x) ** 2) ** 0.5)
    lp = PConvexification(LpNorm(S, 1.0), 3.0)
    assert lp(x) == pytest.approx(LpNorm(S, 3.0)(x))
    cc = PConcavification(LpNorm(S, 2.0), 2.0)
    assert cc(x) == pytest.approx(LpNorm(S, 1.0)(x))


def test_blocks(rng):
    S = AtomSpace.counting(9)
    nm = LpSumL2Blocks(S, 1.5, [2, 3, 4])
    x = rng.standard_normal(9)
    b = [np.linalg.norm(x[0:2]), np.linalg.norm(x[2:5]), np.linalg.norm(x[5:9])]
    assert nm(x) == pytest.approx(sum(v ** 1.5 for v in b) ** (1 / 1.5))
    y = np.zeros(9)
    y[2:5] = x[2:5]
    assert nm(y) == np.linalg.norm(x[2:5])  # single block: exact
    with pytest.raises(ValueError):
        LpSumL2Blocks(S, 2.0, [4, 4])


def test_descriptors_roundtrip():
    S = AtomSpace.counting(12)
    for text in ("lp:2", "lp:inf", "lorentz:2,1", "schreier", "schreier_dual", "schlumprecht",
                 "pconv:2:schreier", "blocks:1.5:4,4,4"):
        nm = from_descriptor(parse_norm(text), S)
        again = from_descriptor(nm.descriptor(), S)
        x = np.linspace(-1, 2, 12)
        assert again(x) == pytest.approx(nm(x))
    with pytest.raises(ValueError):
        parse_norm("banana")


# -- property tests ----------------------------------------------------------------------

NORMS = [("lp1", lambda S: LpNorm(S, 1.0)), ("lp3", lambda S: LpNorm(S, 3.0)),
         ("lor21", lambda S: LorentzNorm(S, 2.0, 1.0)), ("lor12", lambda S: LorentzNorm(S, 1.0, 2.0)),
         ("schreier", SchreierNorm), ("schlum", SchlumprechtNorm),
         ("pconv", lambda S: PConvexification(SchreierNorm(S), 2.0))]

vec = arrays(np.float64, 6, elements=st.floats(-100, 100, allow_subnormal=False))


@pytest.mark.parametrize("name,make", NORMS)
@settings(max_examples=60, deadline=None)
@given(x=vec, y=vec, c=st.floats(-50, 50, allow_subnormal=False))
def test_norm_axioms_hypothesis(name, make, x, y, c):
    nm = make(AtomSpace.counting(6))
    nx = nm(x)
    assert nx >= 0
    assert nm(c * x) == pytest.approx(abs(c) * nx, rel=1e-9, abs=1e-12)
    assert nm(x + y) <= nm.quasi_triangle_constant * (nx + nm(y)) * (1 + 1e-9) + 1e-12
    assert nm(0.5 * x) <= nx + 1e-12
