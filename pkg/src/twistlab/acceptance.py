"""The acceptance battery: ten numbered checks with fixed tolerances and seeds."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .centralizers import (BlockDerivation, DiagonalMultiplier, Kappa, KaltonPeck,
                           LorentzDerivation, Lozanovskii, ScaledKP, lozanovskii_decompose,
                           derivation_from_decomposition)
from .diagnostics import (DistanceConfig, SamplerConfig, Strategy, analytic_parameter,
                          centralizer_constant, duality_check, kp_lp_track, kp_nabla_closed_form,
                          nabla, parameter_M, parameter_m, pconvex_schreier_track,
                          psi_lower_track, psi_upper_scan, schreier_half_track, sign_deviations,
                          sign_patterns, triviality_distance)
from .measure import AtomSpace, DisjointFamily
from .spaces import (LorentzNorm, LpNorm, LpSumL2Blocks, PConcavification, PConvexification,
                     SchlumprechtNorm, SchreierDualNorm, SchreierNorm)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    runtime: float = 0.0
    limit: float | None = None

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        lim = f" (limit {self.limit:g}s)" if self.limit else ""
        return f"[{status}] {self.number:2d}. {self.name}: {self.runtime:.2f}s{lim}"

    def to_dict(self):
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "runtime": self.runtime, "limit": self.limit, "detail": self.detail}


def _timed(number, name, limit):
    def wrap(fn):
        def run(*args, **kw):
            t0 = time.perf_counter()
            ok, detail = fn(*args, **kw)
            dt = time.perf_counter() - t0
            within = limit is None or dt < limit
            if not within:
                detail["runtime_exceeded"] = True
            return CriterionResult(number, name, bool(ok and within), detail, dt, limit)
        run.__name__ = fn.__name__
        run.number = number
        return run
    return wrap


@_timed(1, "nabla identity for Kalton-Peck on l_p", 1.0)
def criterion_1():
    worst_avg = worst_pattern = 0.0
    for p in (1.0, 2.0, 4.0):
        for n in (2, 4, 8, 16):
            space = AtomSpace.counting(n)
            norm = LpNorm(space, p)
            K = KaltonPeck(norm)
            fam = DisjointFamily.atoms(space, range(n), normalize=norm)
            target = kp_nabla_closed_form(p, n)
            r = nabla(K, norm, fam, mode="exact")
            worst_avg = max(worst_avg, abs(r.value - target))
            dev = sign_deviations(K, norm, fam.as_array(), sign_patterns(n))
            worst_pattern = max(worst_pattern, float(np.abs(dev - target).max()))
    ok = worst_avg <= 1e-9 and worst_pattern <= 1e-9
    return ok, {"max_abs_error_average": worst_avg, "max_abs_error_per_pattern": worst_pattern,
                "tolerance": 1e-9}


@_timed(2, "Kalton-Peck centralizer constant on l_2^32", 5.0)
def criterion_2():
    space = AtomSpace.counting(32)
    norm = LpNorm(space, 2.0)
    c = centralizer_constant(KaltonPeck(norm), norm, SamplerConfig(samples=10_000, seed=0))
    bound = 2.0 / math.e + 0.01
    return c <= bound, {"empirical": c, "bound": bound, "samples": 10_000, "seed": 0}


@_timed(3, "growth parameters M and m", 60.0)
def criterion_3():
    detail = {}
    ok = True
    space = AtomSpace.counting(32)
    err = 0.0
    for p in (1.0, 1.5, 2.0, 3.0, 4.0):
        norm = LpNorm(space, p)
        for n in range(1, 33):
            t = n ** (1.0 / p)
            err = max(err, abs(parameter_M(norm, n).value - t), abs(parameter_m(norm, n).value - t))
    detail["lp_max_abs_error"] = err
    ok &= err <= 1e-10

    sch = SchreierNorm(AtomSpace.counting(20))
    Ms = [parameter_M(sch, n).value for n in range(1, 11)]
    detail["schreier_M"] = Ms
    ok &= all(M == n for n, M in zip(range(1, 11), Ms))

    sd = SchreierDualNorm(AtomSpace.counting(16))
    ratios = {n: parameter_M(sd, n).value / math.log2(n) for n in (4, 8, 12)}
    detail["schreier_dual_M_over_log2n"] = ratios
    ok &= all(0.25 <= r <= 4.0 for r in ratios.values())

    mesh = AtomSpace.geometric_mesh(16, 16, 16.0)
    lor = {}
    for p, q in ((2.0, 1.0), (1.0, 2.0), (3.0, 2.0)):
        norm = LorentzNorm(mesh, p, q)
        r = [parameter_M(norm, n).value / n ** (1.0 / min(p, q)) for n in range(1, 17)]
        lor[f"{p:g},{q:g}"] = [min(r), max(r)]
        ok &= 0.5 <= min(r) and max(r) <= 2.0
    detail["lorentz_ratio_range"] = lor
    return ok, detail


@_timed(4, "duality m(n) M*(n) >= n", None)
def criterion_4():
    space = AtomSpace.counting(32)
    err = 0.0
    for p in (1.0, 1.5, 2.0, 3.0):
        norm = LpNorm(space, p)
        dual = norm.dual()
        for n in range(1, 33):
            prod = parameter_m(norm, n).value * parameter_M(dual, n).value
            err = max(err, abs(prod - n))
    S = AtomSpace.counting(16)
    sch, sd = SchreierNorm(S), SchreierDualNorm(S)
    ratios = [duality_check(sch, sd, n).ratio for n in range(1, 11)]
    ok = err <= 1e-9 and min(ratios) >= 1 - 1e-9
    return ok, {"lp_max_abs_error": err, "schreier_ratios": ratios}


@_timed(5, "Lozanovskii decomposer on (L_1, L_inf)", 30.0)
def criterion_5():
    rng = np.random.default_rng(5)
    space = AtomSpace.counting(64)
    n0, n1 = LpNorm(space, 1.0), LpNorm(space, math.inf)
    ps = (1.5, 2.0, 3.0, 4.0)
    worst_val = worst_der = 0.0
    for k in range(100):
        p = ps[k % len(ps)]
        theta = 1.0 - 1.0 / p
        x = rng.uniform(0.1, 1.0, 64)
        dec = lozanovskii_decompose(n0, n1, theta, x)
        norm = LpNorm(space, p)
        worst_val = max(worst_val, abs(dec.achieved_value - norm(x)) / norm(x))
        omega = derivation_from_decomposition(dec, x)
        target = -p * KaltonPeck(norm)(x)
        worst_der = max(worst_der, float(np.max(np.abs(omega - target) / np.abs(target))))
    ok = worst_val <= 1e-6 and worst_der <= 1e-3
    return ok, {"max_rel_value_error": worst_val, "max_rel_pointwise_derivation_error": worst_der,
                "vectors": 100, "seed": 5, "closed_form": "-p K_p"}


@_timed(6, "Lorentz derivation degenerations", None)
def criterion_6():
    rng = np.random.default_rng(6)
    space = AtomSpace(rng.uniform(0.2, 3.0, 24))
    X = rng.standard_normal((200, 24))
    zero_ok = True
    for (p, q) in ((2, 1), (Fraction(3, 2), 3), (4, Fraction(5, 2))):
        for th in (Fraction(1, 3), Fraction(1, 2), Fraction(4, 5)):
            L = LorentzDerivation(space, p, q, p, q, th)
            zero_ok &= L.coef_exact == (0, 0) and not np.any(L(X))
    kp_ok = True
    for (p0, p1, q) in ((1, 3, 2), (Fraction(3, 2), 5, 1), (2, Fraction(7, 3), Fraction(5, 4))):
        for th in (Fraction(1, 4), Fraction(2, 3)):
            L = LorentzDerivation(space, p0, q, p1, q, th)
            kp_ok &= L.coef_exact[0] == 0 and L.coef_exact[1] != 0
    return zero_ok and kp_ok, {"coincident_endpoints_zero": bool(zero_ok),
                               "equal_q_kp_coefficient_zero": bool(kp_ok)}


@_timed(7, "block derivation vanishes inside a block", None)
def criterion_7():
    rng = np.random.default_rng(7)
    sizes = [5, 7, 4]
    space = AtomSpace.counting(sum(sizes))
    B = BlockDerivation(space, 1.0, 3.0, 0.4, sizes)
    exact = True
    worst = 0.0
    for bi, (s, k) in enumerate(zip(B.norm.starts, sizes)):
        X = np.zeros((100, space.n_atoms))
        X[:, s:s + k] = rng.standard_normal((100, k))
        exact &= not np.any(B(X))
        for n in range(1, k + 1):
            atoms = rng.choice(np.arange(s, s + k), size=n, replace=False)
            fam = DisjointFamily.atoms(space, sorted(atoms), normalize=B.norm)
            est = triviality_distance(B, B.norm, fam, DistanceConfig(seed=bi))
            worst = max(worst, est.lower_probe)
    return exact and worst <= 1e-8, {"omega_exactly_zero": bool(exact), "max_distance": worst}


@_timed(8, "triviality distance window for K_2, n = 64", 60.0)
def criterion_8():
    space = AtomSpace.counting(64)
    norm = LpNorm(space, 2.0)
    fam = DisjointFamily.atoms(space, range(64), normalize=norm)
    est = triviality_distance(KaltonPeck(norm), norm, fam, DistanceConfig(seed=0))
    lo = max(0.0, math.log(64) / 4 - 2)
    hi = math.log(64) / 2 + 0.5
    return lo <= est.lower_probe <= hi, {"estimate": est.lower_probe, "window": [lo, hi],
                                         "flagged": est.flagged,
                                         "history": est.solver_trace["history"]}


@_timed(9, "psi lower tracks and upper scan", 300.0)
def criterion_9():
    ns = [4, 16, 100, 4096, 10 ** 6]
    err = 0.0
    for n in ns:
        for p in (1.5, 2.0, 3.0, 4.0):
            th = 1.0 - 1.0 / p
            # Kalton-Peck on L_p from (L_1, L_inf)
            v = psi_lower_track(n, 1.0, n ** (1 / p), n ** (1 / p), th, n, denominator="min")
            err = max(err, abs(v - (math.log(n) - 3 / min(th, 1 - th))), abs(v - kp_lp_track(n, p)))
            # Kalton-Peck on the p-convexified Schreier space from (l_inf, S) at 1/p
            q = p / (p - 1)
            m = analytic_parameter("schreier_m")(n) ** (1 / p)
            v = psi_lower_track(1.0, n, m, n ** (1 / p), 1 / p, n, scale=p)
            ref = abs(math.log(n)) ** (1 / q) / p - (3 / p) / max(1 / p, 1 / q)
            err = max(err, abs(v - ref), abs(v - pconvex_schreier_track(n, p)))
        # Schreier couple at theta = 1/2, natural logs throughout
        v = psi_lower_track(n, math.log(n), math.sqrt(n), math.sqrt(n), 0.5, n)
        ref = abs(math.log(n) - math.log(math.log(n))) - 6
        err = max(err, abs(v - ref), abs(v - schreier_half_track(n)))
    formulas_ok = err <= 1e-12

    scans = {}
    scan_ok = True
    for n in (16, 32):
        space = AtomSpace.counting(2 * n)
        norm = LpNorm(space, 2.0)
        r = psi_upper_scan(KaltonPeck(norm), norm, n, budget=20, seed=1)
        tracks = {"literal": kp_lp_track(n, 2.0),
                  "general": psi_lower_track(n, 1.0, math.sqrt(n), math.sqrt(n), 0.5, n, scale=2.0)}
        for t in tracks.values():
            if t > 0:
                scan_ok &= min(r.values) >= t
        scans[n] = {"upper": r.value, "min_value": min(r.values), "tracks": tracks,
                    "track_positive": any(t > 0 for t in tracks.values())}
    return formulas_ok and scan_ok, {"formula_max_abs_error": err, "scans": scans, "seed": 1}


# property battery ----------------------------------------------------------

_REL = 1e-8


def _norm_cases(rng):
    w8 = AtomSpace(rng.uniform(0.3, 2.5, 8))
    w12 = AtomSpace(rng.uniform(0.3, 2.5, 12))
    c8, c12 = AtomSpace.counting(8), AtomSpace.counting(12)
    return [
        ("lp:0.5", LpNorm(w12, 0.5)), ("lp:1", LpNorm(w12, 1.0)), ("lp:2", LpNorm(w12, 2.0)),
        ("lp:3", LpNorm(w12, 3.0)), ("lp:inf", LpNorm(w12, math.inf)),
        ("lorentz:2,1", LorentzNorm(w12, 2.0, 1.0)), ("lorentz:1,2", LorentzNorm(w12, 1.0, 2.0)),
        ("lorentz:3,2", LorentzNorm(w12, 3.0, 2.0)), ("lorentz:1.5,4", LorentzNorm(w12, 1.5, 4.0)),
        ("schreier", SchreierNorm(c12)), ("schreier_dual", SchreierDualNorm(c8)),
        ("schlumprecht", SchlumprechtNorm(c8)),
        ("pconv:2:schreier", PConvexification(SchreierNorm(c12), 2.0)),
        ("pconcav:2:lp:1", PConcavification(LpNorm(w8, 1.0), 2.0)),
        ("blocks:1.5:4,5,3", LpSumL2Blocks(c12, 1.5, [4, 5, 3])),
    ]


def _sparse_normal(rng, shape, sparsity=0.3):
    X = rng.standard_normal(shape) * rng.exponential(size=shape)
    X[rng.random(shape) < sparsity] = 0.0
    return X


def norm_axioms(norm, cases, rng):
    """Violation counts for homogeneity, monotonicity and the quasi-triangle inequality."""
    N = norm.space.n_atoms
    X = _sparse_normal(rng, (cases, N))
    Y = _sparse_normal(rng, (cases, N))
    c = rng.choice([-1.0, 1.0], size=(cases, 1)) * np.exp(rng.uniform(-4, 4, (cases, 1)))
    nx, ny = norm(X), norm(Y)
    hom = np.abs(norm(c * X) - np.abs(c[:, 0]) * nx) > _REL * np.abs(c[:, 0]) * nx + 1e-300
    # |Z| <= |X| pointwise, with random sign flips
    Z = X * rng.uniform(0, 1, X.shape) * rng.choice([-1.0, 1.0], X.shape)
    mono = norm(Z) > nx * (1 + _REL)
    C = norm.quasi_triangle_constant
    tri = norm(X + Y) > C * (nx + ny) * (1 + _REL)
    return {"homogeneity": int(hom.sum()), "monotonicity": int(mono.sum()),
            "quasi_triangle": int(tri.sum())}


def _centralizer_cases(rng):
    w = AtomSpace(rng.uniform(0.3, 2.5, 12))
    c12 = AtomSpace.counting(12)
    lp2 = LpNorm(w, 2.0)
    return [
        ("kp:lp2", KaltonPeck(lp2)), ("kp:schreier", KaltonPeck(SchreierNorm(c12))),
        ("kappa", Kappa(w)), ("lorentz:1.5,1,3,2,0.5", LorentzDerivation(w, 1.5, 1, 3, 2, 0.5)),
        ("block:1,3,0.4:4,5,3", BlockDerivation(c12, 1.0, 3.0, 0.4, [4, 5, 3])),
        ("scaled_kp:-2", ScaledKP(lp2, -2.0)),
    ]


def centralizer_properties(omega, cases, rng, rel=1e-9):
    N = omega.space.n_atoms
    X = _sparse_normal(rng, (cases, N))
    c = rng.choice([-1.0, 1.0], size=(cases, 1)) * np.exp(rng.uniform(-4, 4, (cases, 1)))
    O = omega(X)
    contr = np.any((O != 0) & (X == 0), axis=1)
    scale = np.abs(c) * (np.abs(O).max(axis=1, keepdims=True) + np.abs(X).max(axis=1, keepdims=True))
    hom = np.any(np.abs(omega(c * X) - c * O) > rel * scale, axis=1)
    return {"contractivity": int(contr.sum()), "homogeneity": int(hom.sum())}


def nabla_subadditivity(pairs, norm, cases, rng, max_n=5):
    """``nabla(Omega + Psi) <= nabla(Omega) + nabla(Psi)`` on random disjoint families."""
    N = norm.space.n_atoms
    violations = 0
    checked_against_library = False
    per_n = np.bincount(rng.integers(1, max_n + 1, cases), minlength=max_n + 1)
    for n in range(1, max_n + 1):
        k = int(per_n[n])
        if k == 0:
            continue
        # random disjoint families: atom owner in -1..n-1 with every member nonempty
        owner = rng.integers(-1, n, (k, N))
        owner[:, :n] = np.arange(n)
        owner = rng.permuted(owner, axis=1)
        B = np.where(owner[:, None, :] == np.arange(n)[None, :, None],
                     rng.standard_normal((k, 1, N)), 0.0)
        S = sign_patterns(n)
        Yall = np.einsum("sn,knN->ksN", S, B).reshape(-1, N)
        pick = rng.integers(0, len(pairs), k)
        for j in range(len(pairs)):
            rows = np.flatnonzero(pick == j)
            if rows.size == 0:
                continue
            om, ps = pairs[j]
            Bj = B[rows].reshape(-1, N)
            Yj = Yall.reshape(k, -1, N)[rows].reshape(-1, N)

            def dev(f):
                OB = f(Bj).reshape(rows.size, n, N)
                D = f(Yj).reshape(rows.size, -1, N) - np.einsum("sn,knN->ksN", S, OB)
                return norm(D.reshape(-1, N)).reshape(rows.size, -1).mean(axis=1)

            a, b = dev(om), dev(ps)
            ab = dev(lambda X: om(X) + ps(X))
            violations += int(np.sum(ab > (a + b) * (1 + 1e-12) + 1e-12))
            if not checked_against_library:
                fam = DisjointFamily.from_array(norm.space, B[rows[0]])
                ref = nabla(om, norm, fam, mode="exact").value
                if abs(ref - a[0]) > 1e-9 * max(1.0, ref):
                    raise AssertionError("vectorized sign average disagrees with nabla()")
                checked_against_library = True
    return violations


@_timed(10, "property battery", 120.0)
def criterion_10(cases: int = 10_000, lozanovskii_cases: int = 500):
    rng = np.random.default_rng(10)
    detail = {"cases_per_property": cases, "norms": {}, "centralizers": {}}
    total = 0
    for name, norm in _norm_cases(rng):
        v = norm_axioms(norm, cases, rng)
        detail["norms"][name] = v
        total += sum(v.values())
    for name, om in _centralizer_cases(rng):
        v = centralizer_properties(om, cases, rng)
        detail["centralizers"][name] = v
        total += sum(v.values())
    # the factorization solver is slow, so it runs on fewer cases
    s8 = AtomSpace.counting(8)
    loz = Lozanovskii(LpNorm(s8, 1.0), LpNorm(s8, 3.0), 0.5)
    v = centralizer_properties(loz, lozanovskii_cases, rng, rel=1e-5)
    detail["centralizers"][f"lozanovskii(l1,l3) [{lozanovskii_cases} cases]"] = v
    total += sum(v.values())

    w = AtomSpace(rng.uniform(0.3, 2.5, 8))
    lp2 = LpNorm(w, 2.0)
    pool = [KaltonPeck(lp2), Kappa(w), ScaledKP(lp2, -1.5), DiagonalMultiplier(w, rng.standard_normal(8)),
            LorentzDerivation(w, 1.5, 1, 3, 2, 0.5)]
    pairs = [(pool[i], pool[j]) for i in range(len(pool)) for j in range(len(pool))]
    sub = {}
    for name, norm in (("lp:2", lp2), ("lp:1", LpNorm(w, 1.0))):
        sub[name] = nabla_subadditivity(pairs, norm, cases, rng)
        total += sub[name]
    detail["nabla_subadditivity"] = sub
    detail["total_violations"] = total
    return total == 0, detail


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def run_all(only=None, echo=None):
    """Run the battery (or the numbered subset ``only``) and return the results."""
    out = []
    for c in CRITERIA:
        if only and c.number not in only:
            continue
        r = c()
        if echo:
            echo(r.line())
        out.append(r)
    return out
