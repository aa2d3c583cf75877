import math

import numpy as np
import pytest

from twistlab.centralizers import (BlockDerivation, DiagonalMultiplier, KaltonPeck,
                                   LorentzDerivation, ScaledKP, ZeroMap)
from twistlab.diagnostics import (DistanceConfig, SamplerConfig, Strategy, analytic_parameter,
                                  canonical_families, centralizer_constant, duality_check,
                                  estimate_chain_check, kp_lp_track, kp_nabla_closed_form, nabla,
                                  param_table, parameter_M, parameter_m, pconvex_schreier_track,
                                  psi_lower_track, psi_upper_scan, quasi_linearity_constant,
                                  schreier_half_track, sign_deviations, sign_patterns,
                                  triviality_distance)
from twistlab.diagnostics.distance import random_family
from twistlab.measure import AtomSpace, DisjointFamily
from twistlab.spaces import LorentzNorm, LpNorm, SchlumprechtNorm, SchreierDualNorm, SchreierNorm


# -- nabla ------------------------------------------------------------------------------

def test_sign_patterns_enumerate_everything():
    P = sign_patterns(3)
    assert P.shape == (8, 3)
    assert len({tuple(r) for r in P}) == 8
    assert np.array_equal(sign_patterns(3, 2, 5), P[2:5])


@pytest.mark.parametrize("p", [1.0, 2.0, 4.0])
def test_kp_nabla_identity_per_pattern(p):
    for n in (2, 4, 8):
        S = AtomSpace.counting(n)
        nm = LpNorm(S, p)
        fam = DisjointFamily.atoms(S, range(n), normalize=nm)
        target = p ** -1 * n ** (1 / p) * math.log(n)
        assert kp_nabla_closed_form(p, n) == pytest.approx(target)
        dev = sign_deviations(KaltonPeck(nm), nm, fam.as_array(), sign_patterns(n))
        assert np.allclose(dev, target, atol=1e-12)


def test_nabla_monte_carlo_agrees_with_exact(rng):
    S = AtomSpace(rng.uniform(0.5, 2.0, 12))
    nm = LpNorm(S, 1.5)
    K = KaltonPeck(nm)
    for n in (3, 7, 12):
        fam = random_family(S, n, rng)
        ex = nabla(K, nm, fam, mode="exact")
        mc = nabla(K, nm, fam, mode="monte_carlo", samples=4096, seed=3)
        assert abs(ex.value - mc.value) <= 3 * mc.stderr + 1e-12


def test_nabla_modes_and_errors():
    S = AtomSpace.counting(24)
    nm = LpNorm(S, 2.0)
    fam = DisjointFamily.atoms(S, range(24), normalize=nm)
    with pytest.raises(ValueError):
        nabla(KaltonPeck(nm), nm, fam, mode="monte_carlo")
    r = nabla(KaltonPeck(nm), nm, fam, samples=256, seed=1)
    assert r.mode == "monte_carlo" and r.seed == 1
    assert r.value == pytest.approx(kp_nabla_closed_form(2.0, 24))
    assert nabla(ZeroMap(S), nm, fam, samples=64, seed=0).value == 0.0


def test_nabla_zero_coefficients_drop_out():
    S = AtomSpace.counting(4)
    nm = LpNorm(S, 2.0)
    fam = DisjointFamily.atoms(S, range(4), normalize=nm)
    a = nabla(KaltonPeck(nm), nm, fam, coeffs=[1, 0, 1, 0])
    sub = DisjointFamily.atoms(S, [0, 2], normalize=nm)
    assert a.n == 2
    assert a.value == pytest.approx(nabla(KaltonPeck(nm), nm, sub).value)


# -- constants ---------------------------------------------------------------------------

def test_constants_linear_maps_vanish(rng):
    S = AtomSpace.counting(10)
    nm = LpNorm(S, 2.0)
    cfg = SamplerConfig(samples=500, seed=1)
    assert quasi_linearity_constant(ZeroMap(S), nm, cfg) == 0.0
    h = rng.standard_normal(10)
    assert quasi_linearity_constant(DiagonalMultiplier(S, h), nm, cfg) < 1e-12
    assert centralizer_constant(DiagonalMultiplier(S, h), nm, cfg) < 1e-12


def test_kp_constant_bound_and_seed():
    S = AtomSpace.counting(16)
    nm = LpNorm(S, 2.0)
    cfg = SamplerConfig(samples=3000, seed=4)
    c1 = centralizer_constant(KaltonPeck(nm), nm, cfg)
    assert c1 <= 2 / math.e + 1e-9
    assert c1 == centralizer_constant(KaltonPeck(nm), nm, cfg)
    q, ratios = quasi_linearity_constant(KaltonPeck(nm), nm, cfg, return_ratios=True)
    assert q == ratios.max() and ratios.shape == (3000,)


# -- parameters ---------------------------------------------------------------------------

def test_lp_parameters_exact():
    S = AtomSpace.counting(16)
    for p in (1.0, 2.5, math.inf):
        nm = LpNorm(S, p)
        for n in (1, 3, 16):
            t = 1.0 if math.isinf(p) else n ** (1 / p)
            assert parameter_M(nm, n).value == pytest.approx(t, abs=1e-10)
            assert parameter_m(nm, n).value == pytest.approx(t, abs=1e-10)


def test_witness_reproduces_value():
    S = AtomSpace.counting(14)
    nm = SchreierNorm(S)
    r = parameter_M(nm, 5)
    U = r.witness.as_array()
    assert np.all(nm(U) <= 1 + 1e-12)
    assert nm(U.sum(axis=0)) == r.value
    with pytest.raises(ValueError):
        parameter_M(nm, 15)


def test_param_table_monotone_and_ordered():
    S = AtomSpace.counting(12)
    t = param_table(LorentzNorm(S, 2.0, 1.0), range(1, 7), Strategy(search_budget=60))
    assert all(a <= b for a, b in zip(t.M, t.M[1:]))
    assert all(m <= M for m, M in zip(t.m, t.M))


def test_schlumprecht_uses_successive_families():
    S = AtomSpace.counting(10)
    nm = SchlumprechtNorm(S)
    r = parameter_M(nm, 4, Strategy(search_budget=40))
    assert r.witness.successive


def test_duality_lp():
    S = AtomSpace.counting(10)
    for p in (1.5, 3.0):
        nm = LpNorm(S, p)
        for n in (2, 7):
            d = duality_check(nm, nm.dual(), n, Strategy(search_budget=40))
            assert d.certified and d.ratio == pytest.approx(1.0, abs=1e-9)


def test_duality_schreier_small():
    S = AtomSpace.counting(10)
    for n in (1, 3, 5):
        d = duality_check(SchreierNorm(S), SchreierDualNorm(S), n, Strategy(search_budget=30))
        assert d.ratio >= 1 - 1e-9


# -- distance ---------------------------------------------------------------------------

def test_distance_trivial_maps(rng):
    S = AtomSpace.counting(8)
    nm = LpNorm(S, 2.0)
    fam = random_family(S, 4, rng)
    cfg = DistanceConfig(iters=100, rounds=1)
    assert triviality_distance(ZeroMap(S), nm, fam, cfg).lower_probe == 0.0
    est = triviality_distance(DiagonalMultiplier(S, rng.standard_normal(8)), nm, fam, cfg)
    assert est.lower_probe < 1e-9


def test_distance_block_family_inside_one_block():
    S = AtomSpace.counting(10)
    B = BlockDerivation(S, 1.0, 2.5, 0.5, [6, 4])
    fam = DisjointFamily.atoms(S, [6, 7, 9], normalize=B.norm)
    assert triviality_distance(B, B.norm, fam).lower_probe <= 1e-8
    assert psi_upper_scan(B, B.norm, 3, budget=2).value <= 1e-8


def test_distance_scale_invariance():
    S = AtomSpace.counting(8)
    nm = LpNorm(S, 2.0)
    K = KaltonPeck(nm)
    U = DisjointFamily.atoms(S, range(8), normalize=nm).as_array()
    cfg = DistanceConfig(iters=150, rounds=2, seed=2)
    a = triviality_distance(K, nm, DisjointFamily.from_array(S, U), cfg).lower_probe
    scaled = U * np.array([1, 3, 0.2, 7, 1, 1, 0.5, 2])[:, None]
    b = triviality_distance(K, nm, DisjointFamily.from_array(S, scaled), cfg).lower_probe
    assert a == pytest.approx(b, rel=1e-9)


def test_kp_scan_positive():
    S = AtomSpace.counting(32)
    nm = LpNorm(S, 2.0)
    r = psi_upper_scan(KaltonPeck(nm), nm, 16, budget=3, seed=0)
    assert r.value >= 0.1
    assert r.witness.n == 16 and len(r.values) == len(r.labels)
    with pytest.raises(ValueError):
        psi_upper_scan(KaltonPeck(nm), nm, 4, budget=0)


def test_canonical_families_are_valid():
    S = AtomSpace.counting(12)
    for fam in canonical_families(LpNorm(S, 2.0), 4):
        assert fam.n == 4


# -- tracks and chain --------------------------------------------------------------------

def test_closed_form_tracks():
    n, p = 1000, 2.0
    assert kp_lp_track(n, p) == pytest.approx(math.log(n) - 6)
    assert schreier_half_track(n) == pytest.approx(abs(math.log(n) - math.log(math.log(n))) - 6)
    assert pconvex_schreier_track(n, 3.0) == pytest.approx(
        math.log(n) ** (2 / 3) / 3 - 1 / max(1 / 3, 2 / 3))
    g = psi_lower_track(n, 1.0, n ** 0.5, n ** 0.5, 0.5, n, scale=2.0)
    assert g == pytest.approx((math.log(n) - 6) / 2)
    with pytest.raises(ValueError):
        psi_lower_track(n, 1, 1, 1, 0.0, n)
    # min form is never larger than the general max form
    assert psi_lower_track(n, 1, 1, 1, 0.2, n, denominator="min") <= psi_lower_track(n, 1, 1, 1, 0.2, n)


def test_analytic_parameters():
    assert analytic_parameter("lp", p=2)(16) == 4.0
    assert analytic_parameter("lorentz", p=3, q=2)(8) == pytest.approx(8 ** 0.5)
    assert analytic_parameter("schreier_dual", base=2)(8) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        analytic_parameter("nope")


def test_chain_kp_from_l1_linf_cancels():
    S = AtomSpace.counting(8)
    nm = LpNorm(S, 2.0)
    fam = DisjointFamily.atoms(S, range(8), normalize=nm)
    rep = estimate_chain_check(ScaledKP(nm, -2.0), nm, lambda n: n, lambda n: 1.0, fam, 0.5)
    assert rep.left < 1e-12 and rep.right > 0 and not rep.violated
    one = DisjointFamily.atoms(S, [3], normalize=nm)
    assert estimate_chain_check(ScaledKP(nm, -2.0), nm, 1.0, 1.0, one, 0.5).left < 1e-12


def test_chain_lorentz_random_families(rng):
    S = AtomSpace.counting(20)
    L = LorentzDerivation(S, 1.5, 1, 3, 2, 0.5)
    nm = L.norm
    M0 = analytic_parameter("lorentz", p=1.5, q=1)
    M1 = analytic_parameter("lorentz", p=3, q=2)
    Mt = analytic_parameter("lorentz", p=L.p, q=L.q)
    for _ in range(15):
        n = int(rng.integers(2, 7))
        U = nm.normalize(random_family(S, n, rng).as_array())
        rep = estimate_chain_check(L, nm, M0, M1, DisjointFamily.from_array(S, U), 0.5, M_theta=Mt)
        assert not rep.violated
