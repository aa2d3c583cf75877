"""Closed-form centralizers, Lozanovskii derivations and the twisted quasi-norm.

A centralizer here is a homogeneous map on the vectors of one atom space.
Calling it on a KVec returns a KVec; calling it on an ``(..., N)`` array
maps every row.  ``Omega(0) = 0`` for every implemented map.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .measure import AtomSpace, KVec, rank_function, values_of, xlog_ratio
from .spaces import (KotheNorm, LorentzNorm, LpNorm, LpSumL2Blocks,
                     PConcavification, PConvexification)

log = logging.getLogger(__name__)

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


class SolverFailure(RuntimeError):
    """Raised when an iterative solver stops early; ``best`` holds its last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class Centralizer:
    kind = "abstract"
    contractive = True

    def __init__(self, space: AtomSpace):
        self.space = space

    @property
    def params(self) -> dict:
        return {}

    def descriptor(self) -> dict:
        return {"kind": self.kind, "params": self.params}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def _apply(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        v = values_of(x)
        X = v.reshape(-1, v.shape[-1])
        out = self._apply(X).reshape(v.shape)
        if isinstance(x, KVec):
            return KVec(x.space, out)
        return out


class ZeroMap(Centralizer):
    kind = "zero"

    def _apply(self, X):
        return np.zeros_like(X)


class DiagonalMultiplier(Centralizer):
    """The linear map ``x -> h x``; trivial, useful as a control."""

    kind = "multiplier"

    def __init__(self, space, h):
        super().__init__(space)
        self.h = np.asarray(values_of(h), dtype=np.float64)

    @property
    def params(self):
        return {"h": self.h.tolist()}

    def _apply(self, X):
        return X * self.h


class KaltonPeck(Centralizer):
    """``x log(|x| / ||x||)`` with ``||.||`` taken from the supplied norm."""

    kind = "kalton_peck"

    def __init__(self, norm: KotheNorm, factor: float = 1.0):
        super().__init__(norm.space)
        self.norm = norm
        self.factor = float(factor)

    @property
    def params(self):
        d = {"norm": self.norm.descriptor()}
        if self.factor != 1.0:
            d["factor"] = self.factor
        return d

    def _apply(self, X):
        n = self.norm._eval(X)
        out = xlog_ratio(X, np.abs(X), np.where(n > 0, n, 1.0)[:, None])
        return self.factor * out if self.factor != 1.0 else out


class ScaledKP(KaltonPeck):
    kind = "scaled_kp"

    @property
    def params(self):
        return {"norm": self.norm.descriptor(), "factor": self.factor}


class Kappa(Centralizer):
    """Kalton's map ``x r_x`` built on the rank function."""

    kind = "kappa"

    def _apply(self, X):
        return X * rank_function(X, self.space)


def interpolated_exponents(p0, q0, p1, q1, theta):
    """Exact ``(p, q)`` with ``1/p = (1-t)/p0 + t/p1`` and the same for ``q``."""
    p0, q0, p1, q1, t = (Fraction(v) for v in (p0, q0, p1, q1, theta))
    p = 1 / ((1 - t) / p0 + t / p1)
    q = 1 / ((1 - t) / q0 + t / q1)
    return p, q


def lorentz_coefficients(p0, q0, p1, q1, theta):
    """Exact ``(a, b)`` with ``Omega = a K + b kappa`` for the Lorentz couple."""
    p, q = interpolated_exponents(p0, q0, p1, q1, theta)
    p0, q0, p1, q1 = (Fraction(v) for v in (p0, q0, p1, q1))
    a = q * (1 / q1 - 1 / q0)
    b = q / p * (1 / q0 - 1 / q1) - (1 / p0 - 1 / p1)
    return a, b


class LorentzDerivation(Centralizer):
    """Derivation of ``(L_{p0,q0}, L_{p1,q1})_theta = L_{p,q}``."""

    kind = "lorentz_derivation"

    def __init__(self, space, p0, q0, p1, q1, theta):
        super().__init__(space)
        for v in (p0, q0, p1, q1):
            if not 0 < float(v) < math.inf:
                raise ValueError("Lorentz indices must lie in (0, inf)")
        if not 0 < float(theta) < 1:
            raise ValueError("theta must lie in (0, 1)")
        self.p0, self.q0, self.p1, self.q1, self.theta = p0, q0, p1, q1, theta
        p, q = interpolated_exponents(p0, q0, p1, q1, theta)
        self.p, self.q = float(p), float(q)
        self.coef_exact = lorentz_coefficients(p0, q0, p1, q1, theta)
        self.coef_kp, self.coef_kappa = (float(c) for c in self.coef_exact)
        self.norm = LorentzNorm(space, self.p, self.q)
        self._kp = KaltonPeck(self.norm)
        self._kappa = Kappa(space)

    @property
    def params(self):
        return {"p0": self.p0, "q0": self.q0, "p1": self.p1, "q1": self.q1,
                "theta": self.theta}

    def _apply(self, X):
        out = np.zeros_like(X)
        if self.coef_kp != 0:
            out += self.coef_kp * self._kp._apply(X)
        if self.coef_kappa != 0:
            out += self.coef_kappa * self._kappa._apply(X)
        return out


class BlockDerivation(Centralizer):
    """Derivation of ``(l_{p0}(+l_2^k), l_{p1}(+l_2^k))_theta = l_p(+l_2^k)``.

    ``Omega(x)^k = (p/p1 - p/p0) log(||x^k||_2 / ||x||) x^k`` with
    ``1/p = (1-theta)/p0 + theta/p1``; ``p0 = inf`` is allowed.
    """

    kind = "block_derivation"

    def __init__(self, space, p0, p1, theta, block_sizes):
        super().__init__(space)
        if not 0 < float(theta) < 1:
            raise ValueError("theta must lie in (0, 1)")
        self.p0, self.p1, self.theta = float(p0), float(p1), float(theta)
        inv0 = 0.0 if math.isinf(self.p0) else 1.0 / self.p0
        inv1 = 0.0 if math.isinf(self.p1) else 1.0 / self.p1
        inv_p = (1 - self.theta) * inv0 + self.theta * inv1
        if inv_p <= 0:
            raise ValueError("both endpoints cannot be l_inf sums")
        self.p = 1.0 / inv_p
        self.coef = self.p * inv1 - self.p * inv0
        self.norm = LpSumL2Blocks(space, self.p, block_sizes)

    @property
    def params(self):
        return {"p0": self.p0, "p1": self.p1, "theta": self.theta,
                "block_sizes": list(self.norm.block_sizes)}

    def _apply(self, X):
        if self.coef == 0:
            return np.zeros_like(X)
        b = self.norm.block_norms(X)
        n = self.norm._eval(X)
        bn = b[:, self.norm.block_of]
        return self.coef * xlog_ratio(X, bn, np.where(n > 0, n, 1.0)[:, None])


# ---------------------------------------------------------------------------
# Lozanovskii factorization
# ---------------------------------------------------------------------------

@dataclass
class SolverConfig:
    tol: float = 1e-8
    max_iters: int = 500
    line_tol: float = 1e-11


@dataclass
class Decomposition:
    """``|x| = a0^{1-theta} a1^theta`` with ``||a0||_0 = ||a1||_1 = achieved_value``."""

    a0: KVec
    a1: KVec
    achieved_value: float
    theta: float
    s: np.ndarray = field(repr=False)
    iterations: int = 0
    converged: bool = True
    epsilon: float = 0.0
    warning: str | None = None

    def to_dict(self):
        return {"a0": self.a0.values.tolist(), "a1": self.a1.values.tolist(),
                "achieved_value": self.achieved_value, "theta": self.theta,
                "iterations": self.iterations, "converged": self.converged,
                "epsilon": self.epsilon, "warning": self.warning}


def _log_convex(norm: KotheNorm) -> bool:
    if isinstance(norm, (LpNorm, LorentzNorm, LpSumL2Blocks)):
        return True
    if isinstance(norm, (PConvexification, PConcavification)):
        return _log_convex(norm.base)
    return False


def _line_min(phi, t0, f0, h, tol):
    """Bracket a minimum of ``phi`` near ``t0`` and shrink it by golden section."""
    fp = phi(t0 + h)
    if fp < f0:
        d = 1.0
    else:
        fm = phi(t0 - h)
        if fm < f0:
            d, fp = -1.0, fm
        else:
            lo, hi = t0 - h, t0 + h
            d = 0.0
    if d != 0.0:
        a, fa = t0, f0
        b, fb = t0 + d * h, fp
        step = h
        for _ in range(200):
            step *= 2.0
            c = b + d * step
            fc = phi(c)
            if fc >= fb:
                break
            a, fa, b, fb = b, fb, c, fc
        else:
            return b, fb
        lo, hi = (a, c) if d > 0 else (c, a)
    x1 = hi - _GOLD * (hi - lo)
    x2 = lo + _GOLD * (hi - lo)
    f1, f2 = phi(x1), phi(x2)
    while hi - lo > tol * (1.0 + abs(lo) + abs(hi)):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLD * (hi - lo)
            f1 = phi(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLD * (hi - lo)
            f2 = phi(x2)
    t, ft = (x1, f1) if f1 <= f2 else (x2, f2)
    if ft > f0:
        return t0, f0
    return t, ft


def lozanovskii_decompose(norm0: KotheNorm, norm1: KotheNorm, theta: float, x,
                          solver_cfg: SolverConfig | None = None) -> Decomposition:
    """Near-optimal factorization ``|x| = a0^{1-theta} a1^theta``.

    Minimizes ``(1-theta) log ||a0||_0 + theta log ||a1||_1`` over
    ``a0 = |x| e^{-theta s}``, ``a1 = |x| e^{(1-theta) s}`` by coordinate
    descent on ``s`` (one golden-section line search per atom of the
    support), then shifts ``s`` by a constant so both factors carry the
    same norm.  The shift leaves the objective unchanged.
    """
    cfg = solver_cfg or SolverConfig()
    theta = float(theta)
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    space = norm0.space
    xv = values_of(x)
    ax = np.abs(xv)
    supp = np.flatnonzero(ax)
    if supp.size == 0:
        raise ValueError("cannot decompose the zero vector")
    warning = None
    if not (_log_convex(norm0) and _log_convex(norm1)):
        warning = "objective not known to be convex; result is best effort"
        log.warning("Lozanovskii solver: %s", warning)

    s = np.zeros(ax.shape[0])
    buf = np.empty((2, ax.shape[0]))

    def objective(sv):
        buf[0] = ax * np.exp(-theta * sv)
        buf[1] = ax * np.exp((1 - theta) * sv)
        n0 = norm0._eval(buf[0:1])[0]
        n1 = norm1._eval(buf[1:2])[0]
        return (1 - theta) * math.log(n0) + theta * math.log(n1)

    J = objective(s)
    steps = np.full(ax.shape[0], 0.5)
    improvement = math.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        J_start = J
        for i in supp:
            si = s[i]

            def phi(t, i=i):
                s[i] = t
                return objective(s)

            t, J = _line_min(phi, si, J, steps[i], cfg.line_tol)
            s[i] = t
            steps[i] = min(1.0, max(1e-4, 4.0 * abs(t - si)))
        improvement = J_start - J
        if improvement <= cfg.tol:
            break
    else:
        best = _finish(norm0, norm1, theta, ax, s, space, J, it, False, improvement, warning)
        raise SolverFailure("Lozanovskii coordinate descent did not converge", best)
    return _finish(norm0, norm1, theta, ax, s, space, J, it, True, improvement, warning)


def _finish(norm0, norm1, theta, ax, s, space, J, it, converged, eps, warning):
    on = ax != 0
    a0 = ax * np.exp(-theta * s)
    a1 = ax * np.exp((1 - theta) * s)
    n0, n1 = norm0(a0), norm1(a1)
    t = math.log(n0 / n1)
    s = np.where(on, s + t, 0.0)
    a0 = ax * np.exp(-theta * s)
    a1 = ax * np.exp((1 - theta) * s)
    return Decomposition(KVec(space, a0), KVec(space, a1), float(math.exp(J)), theta,
                         s, it, converged, float(max(eps, 0.0)), warning)


def derivation_from_decomposition(dec: Decomposition, x):
    """``x log(a1 / a0)``."""
    return xlog_ratio(x, dec.a1, dec.a0)


class Lozanovskii(Centralizer):
    """Interpolation derivation computed from a numerical factorization."""

    kind = "lozanovskii"

    def __init__(self, norm0: KotheNorm, norm1: KotheNorm, theta: float,
                 solver_cfg: SolverConfig | None = None):
        super().__init__(norm0.space)
        self.norm0, self.norm1, self.theta = norm0, norm1, float(theta)
        self.solver_cfg = solver_cfg or SolverConfig()

    @property
    def params(self):
        return {"norm0": self.norm0.descriptor(), "norm1": self.norm1.descriptor(),
                "theta": self.theta}

    def decompose(self, x) -> Decomposition:
        return lozanovskii_decompose(self.norm0, self.norm1, self.theta, x, self.solver_cfg)

    def _apply(self, X):
        out = np.zeros_like(X)
        for j, row in enumerate(X):
            if np.any(row):
                out[j] = derivation_from_decomposition(self.decompose(row), row)
        return out


def twisted_norm(norm: KotheNorm, omega, w, x) -> float:
    """``||x|| + ||w - Omega x||`` on the twisted sum."""
    xv, wv = values_of(x), values_of(w)
    return norm(xv) + norm(wv - values_of(omega(xv)))


# ---------------------------------------------------------------------------
# functional forms and descriptors
# ---------------------------------------------------------------------------

def kalton_peck(norm: KotheNorm, x):
    return KaltonPeck(norm)(x)


def kalton_kappa(x, space: AtomSpace | None = None):
    space = x.space if isinstance(x, KVec) else space
    return Kappa(space)(x)


def lorentz_derivation(p0, q0, p1, q1, theta, x, space=None):
    space = x.space if isinstance(x, KVec) else space
    return LorentzDerivation(space, p0, q0, p1, q1, theta)(x)


def block_derivation(p0, p1, theta, block_sizes, x, space=None):
    space = x.space if isinstance(x, KVec) else space
    return BlockDerivation(space, p0, p1, theta, block_sizes)(x)


def from_descriptor(desc: dict, space: AtomSpace, norm: KotheNorm | None = None) -> Centralizer:
    """Build a centralizer from ``{"kind": ..., "params": {...}}``.

    ``norm`` supplies the ambient norm for the Kalton-Peck family when the
    descriptor does not carry one.
    """
    from .spaces import from_descriptor as norm_from

    kind = desc["kind"]
    params = dict(desc.get("params", {}))

    def _norm():
        if "norm" in params:
            return norm_from(params["norm"], space)
        if norm is None:
            raise ValueError(f"{kind} needs an ambient norm")
        return norm

    if kind == "zero":
        return ZeroMap(space)
    if kind == "multiplier":
        return DiagonalMultiplier(space, params["h"])
    if kind == "kalton_peck":
        return KaltonPeck(_norm(), params.get("factor", 1.0))
    if kind == "scaled_kp":
        return ScaledKP(_norm(), params["factor"])
    if kind == "kappa":
        return Kappa(space)
    if kind == "lorentz_derivation":
        return LorentzDerivation(space, *(params[k] for k in ("p0", "q0", "p1", "q1", "theta")))
    if kind == "block_derivation":
        return BlockDerivation(space, params["p0"], params["p1"], params["theta"],
                               params["block_sizes"])
    if kind == "lozanovskii":
        return Lozanovskii(norm_from(params["norm0"], space), norm_from(params["norm1"], space),
                           params["theta"])
    raise ValueError(f"unknown centralizer kind {kind!r}")


def parse_centralizer(text: str) -> dict:
    """Short CLI form to descriptor.

    ``kp``, ``kp:3`` (scaled), ``kappa``, ``zero``,
    ``lorentz:p0,q0,p1,q1,theta``, ``block:p0,p1,theta:4,4,8``.
    """
    head, _, rest = text.partition(":")
    head = head.strip().lower()
    if head in ("kp", "kalton_peck"):
        if rest:
            return {"kind": "scaled_kp", "params": {"factor": float(rest)}}
        return {"kind": "kalton_peck", "params": {}}
    if head in ("kappa", "zero"):
        return {"kind": head, "params": {}}
    if head in ("lorentz", "lorentz_derivation"):
        p0, q0, p1, q1, th = (float(v) for v in rest.split(","))
        return {"kind": "lorentz_derivation",
                "params": {"p0": p0, "q0": q0, "p1": p1, "q1": q1, "theta": th}}
    if head in ("block", "block_derivation"):
        nums, _, sizes = rest.partition(":")
        p0, p1, th = nums.split(",")
        return {"kind": "block_derivation",
                "params": {"p0": float(p0), "p1": float(p1), "theta": float(th),
                           "block_sizes": [int(s) for s in sizes.split(",")]}}
    raise ValueError(f"cannot parse centralizer {text!r}")
