"""Distance from a centralizer to support-respecting linear maps on a disjoint span.

For a family ``u_1..u_n`` the candidate linear maps are ``L(u_i) = v_i``
with ``supp v_i`` inside ``supp u_i``.  Since the supports are disjoint,
all ``v_i`` pack into one vector ``V`` and ``L(sum l_i u_i)`` is the
pointwise product of ``V`` with the atom-level coefficient vector.  The
fit minimizes, over ``V``, the largest normalized residual
``||Omega(y) - L(y)||`` across a finite probe set of unit vectors ``y``
of the span.  That objective is convex in ``V``; it is driven down by
normalized subgradient steps, and the probe set is enlarged between
rounds by hill-climbing for worse coefficient vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..measure import DisjointFamily, KVec
from ..spaces import LpNorm
from .nabla import sign_patterns


@dataclass
class DistanceConfig:
    iters: int = 400
    rounds: int = 4
    random_probes: int = 64
    sign_pattern_cap: int = 12
    climb_starts: int = 8
    climb_steps: int = 60
    seed: int = 0
    flag_growth: float = 0.05


@dataclass
class DistanceEstimate:
    family: DisjointFamily
    lower_probe: float
    fitted_images: list
    solver_trace: dict = field(default_factory=dict)
    flagged: bool = False

    def to_dict(self):
        return {"lower_probe": self.lower_probe, "flagged": self.flagged,
                "solver_trace": self.solver_trace,
                "fitted_images": [v.values.tolist() for v in self.fitted_images],
                "family": self.family.to_dict()}


class _Problem:
    """Probe bookkeeping for one family."""

    def __init__(self, omega, norm, family):
        self.omega, self.norm = omega, norm
        U = family.as_array()
        self.scales = np.atleast_1d(norm(U))
        self.U = U / self.scales[:, None]
        self.n, self.N = self.U.shape
        nz = self.U != 0
        self.owner = np.where(nz.any(axis=0), np.argmax(nz, axis=0), -1)
        self.mask = self.owner >= 0
        self.fast_p = norm.p if isinstance(norm, LpNorm) else None
        self.lam = np.zeros((0, self.n))
        self.omg = np.zeros((0, self.N))
        self.lam_atoms = np.zeros((0, self.N))

    def atom_coeffs(self, lam):
        A = np.zeros((lam.shape[0], self.N))
        A[:, self.mask] = lam[:, self.owner[self.mask]]
        return A

    def normalize(self, lam):
        Y = lam @ self.U
        nr = np.atleast_1d(self.norm(Y))
        keep = nr > 0
        return lam[keep] / nr[keep, None]

    def add(self, lam):
        lam = self.normalize(np.atleast_2d(lam))
        if lam.shape[0] == 0:
            return
        Y = lam @ self.U
        self.lam = np.vstack([self.lam, lam])
        self.omg = np.vstack([self.omg, self.omega(Y)])
        self.lam_atoms = np.vstack([self.lam_atoms, self.atom_coeffs(lam)])

    def residuals(self, V, lam_atoms=None, omg=None):
        lam_atoms = self.lam_atoms if lam_atoms is None else lam_atoms
        omg = self.omg if omg is None else omg
        if self.fast_p is not None:
            return kernels.lp_residual_norms(omg, lam_atoms, V, self.norm.space.weights, self.fast_p)
        return np.atleast_1d(self.norm(omg - lam_atoms * V[None, :]))

    def value_at(self, lam, V):
        """Normalized residual of arbitrary coefficient rows (not stored)."""
        lam = np.atleast_2d(lam)
        Y = lam @ self.U
        nr = np.atleast_1d(self.norm(Y))
        out = np.zeros(lam.shape[0])
        ok = nr > 0
        if ok.any():
            Yn = Y[ok] / nr[ok, None]
            A = self.atom_coeffs(lam[ok] / nr[ok, None])
            out[ok] = self.residuals(V, A, self.omega(Yn))
        return out


def _initial_probes(prob, cfg, rng):
    n = prob.n
    probes = [np.eye(n), np.ones((1, n))]
    if n <= cfg.sign_pattern_cap and n > 1:
        # eps and -eps give the same residual norm for odd maps
        probes.append(sign_patterns(n, 0, 2 ** (n - 1)))
    if cfg.random_probes:
        probes.append(rng.standard_normal((cfg.random_probes, n)))
    return np.vstack(probes)


def _subgradient(prob, V, iters):
    best_V, best_f = V.copy(), float(prob.residuals(V).max())
    if best_f == 0.0:
        return best_V, best_f
    # step scale: a fraction of the current objective, in norm units
    scale = 0.5 * best_f
    for k in range(iters):
        r = prob.residuals(V)
        j = int(np.argmax(r))
        f = float(r[j])
        if f < best_f:
            best_f, best_V = f, V.copy()
        if f == 0.0:
            break
        R = prob.omg[j] - prob.lam_atoms[j] * V
        g = -prob.lam_atoms[j] * prob.norm.gradient(R)
        g[~prob.mask] = 0.0
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            break
        V = V - (scale / math.sqrt(k + 1.0)) * g / gn
    r = prob.residuals(V)
    if r.max() < best_f:
        best_f, best_V = float(r.max()), V.copy()
    return best_V, best_f


def _climb(prob, V, cfg, rng):
    """Hill-climb coefficient vectors to increase the normalized residual."""
    r = prob.residuals(V)
    top = np.argsort(-r)[: cfg.climb_starts // 2]
    starts = np.vstack([prob.lam[top], rng.standard_normal((cfg.climb_starts - top.size, prob.n))])
    found = []
    for lam in starts:
        cur = float(prob.value_at(lam, V)[0])
        step = 0.5
        for _ in range(cfg.climb_steps):
            # batch of perturbations, keep the best
            trial = lam[None, :] + step * rng.standard_normal((8, prob.n)) * (np.abs(lam).max() + 1e-12)
            vals = prob.value_at(trial, V)
            j = int(np.argmax(vals))
            if vals[j] > cur:
                lam, cur = trial[j], float(vals[j])
            else:
                step *= 0.7
        found.append(lam)
    return np.array(found)


def triviality_distance(omega, norm, family: DisjointFamily, solver_cfg: DistanceConfig | None = None) -> DistanceEstimate:
    cfg = solver_cfg or DistanceConfig()
    rng = np.random.default_rng(cfg.seed)
    prob = _Problem(omega, norm, family)
    prob.add(_initial_probes(prob, cfg, rng))

    # v_i = Omega(u_i) to start
    V = np.zeros(prob.N)
    OU = omega(prob.U)
    for i in range(prob.n):
        on = prob.owner == i
        V[on] = OU[i, on]

    history = []
    growth = 0.0
    f = float(prob.residuals(V).max())
    for rnd in range(cfg.rounds + 1):
        V, f = _subgradient(prob, V, cfg.iters)
        history.append(f)
        if rnd == cfg.rounds or f == 0.0:
            break
        prob.add(_climb(prob, V, cfg, rng))
        f_aug = float(prob.residuals(V).max())
        growth = (f_aug - f) / f if f > 0 else 0.0
        history.append(f_aug)
    # final re-check against the full probe set
    f = float(prob.residuals(V).max())
    images = []
    for i in range(prob.n):
        v = np.where(prob.owner == i, V, 0.0) * prob.scales[i]
        images.append(KVec(norm.space, v))
    flagged = growth > cfg.flag_growth
    trace = {"rounds": cfg.rounds, "iters_per_round": cfg.iters, "probes": int(prob.lam.shape[0]),
             "history": [float(h) for h in history], "final_gap": float(growth),
             "seed": cfg.seed}
    return DistanceEstimate(family, f, images, trace, flagged)


def canonical_families(norm, n):
    """Single-atom and equal-block families used as deterministic scan candidates."""
    space = norm.space
    N = space.n_atoms
    fams = [DisjointFamily.atoms(space, range(n), normalize=norm)]
    starts = getattr(norm, "starts", None)
    if starts is not None:
        for s, size in zip(starts, norm.block_sizes):
            if size >= n and s != 0:
                fams.append(DisjointFamily.atoms(space, range(s, s + n), normalize=norm))
    L = N // n
    if L >= 2:
        R = np.zeros((n, N))
        for k in range(n):
            R[k, k * L:(k + 1) * L] = 1.0
        fams.append(DisjointFamily.from_array(space, R, successive=True))
    return fams


def random_family(space, n, rng, signed=True):
    N = space.n_atoms
    size = int(rng.integers(n, N + 1))
    chosen = rng.choice(N, size=size, replace=False)
    owner = np.concatenate([np.arange(n), rng.integers(0, n, size=size - n)])
    R = np.zeros((n, N))
    vals = rng.exponential(size=size)
    if signed:
        vals *= rng.choice([-1.0, 1.0], size=size)
    R[owner, chosen] = vals
    return DisjointFamily.from_array(space, R)


@dataclass
class ScanResult:
    value: float
    witness: DisjointFamily
    values: list
    labels: list

    def to_dict(self):
        return {"value": self.value, "values": self.values, "labels": self.labels,
                "witness": self.witness.to_dict()}


def psi_upper_scan(omega, norm, n: int, budget: int = 20, seed: int = 0,
                   solver_cfg: DistanceConfig | None = None) -> ScanResult:
    """Smallest fitted distance over canonical plus ``budget`` random families.

    Any single family bounds the modulus from above, so the minimum does too.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    cfg = solver_cfg or DistanceConfig(seed=seed)
    rng = np.random.default_rng(seed)
    fams = [(f, "canonical") for f in canonical_families(norm, n)]
    fams += [(random_family(norm.space, n, rng), f"random#{k}") for k in range(budget)]
    values, labels = [], []
    best = None
    for fam, label in fams:
        est = triviality_distance(omega, norm, fam, cfg)
        values.append(est.lower_probe)
        labels.append(label)
        if best is None or est.lower_probe < best[0]:
            best = (est.lower_probe, fam)
    return ScanResult(best[0], best[1], values, labels)
