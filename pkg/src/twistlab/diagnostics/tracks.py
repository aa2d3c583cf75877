"""Lower bounds for the modulus psi and the estimate chain behind them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..measure import DisjointFamily


def _at(f, n):
    return float(f(n)) if callable(f) else float(f)


def psi_lower_track(M0, M1, m_theta, M_theta, theta: float, n: int, scale: float = 1.0,
                    denominator: str = "max") -> float:
    """``|log(M0/M1)| m_theta/M_theta - 3/max(theta, 1-theta)``, divided by ``scale``.

    Parameters may be numbers or callables of ``n``.  ``scale`` gives the
    track for ``Omega_theta / scale``; the p-convex Kalton-Peck bound uses
    ``scale = p``.  ``denominator="min"`` swaps in ``min(theta, 1-theta)``,
    the form of the closed-form Kalton-Peck track; it never exceeds the
    ``max`` form and is kept for comparison.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if denominator not in ("max", "min"):
        raise ValueError("denominator must be 'max' or 'min'")
    pick = max if denominator == "max" else min
    lead = abs(math.log(_at(M0, n) / _at(M1, n))) * _at(m_theta, n) / _at(M_theta, n)
    return (lead - 3.0 / pick(theta, 1.0 - theta)) / scale


def kp_lp_track(n: int, p: float) -> float:
    """Kalton-Peck on ``L_p`` from ``(L_1, L_inf)`` at ``theta = 1/p'``: ``log n - 3/min(theta, 1-theta)``."""
    theta = 1.0 - 1.0 / p
    return math.log(n) - 3.0 / min(theta, 1.0 - theta)


def schreier_half_track(n: int) -> float:
    """Schreier couple at ``theta = 1/2``: ``|log n - log log n| - 6``."""
    return abs(math.log(n) - math.log(math.log(n))) - 6.0


def pconvex_schreier_track(n: int, p: float) -> float:
    """Kalton-Peck on the p-convexified Schreier space: ``(1/p)|log n|^{1/p'} - (3/p)/max(1/p, 1/p')``."""
    q = p / (p - 1.0)
    return abs(math.log(n)) ** (1.0 / q) / p - (3.0 / p) / max(1.0 / p, 1.0 / q)


def analytic_parameter(name: str, **kw):
    """Closed-form ``n -> M(n)`` used as parameter input to the tracks."""
    if name == "lp":
        p = float(kw["p"])
        return lambda n: 1.0 if math.isinf(p) else n ** (1.0 / p)
    if name == "lorentz":
        r = min(float(kw["p"]), float(kw["q"]))
        return lambda n: n ** (1.0 / r)
    if name == "schreier":
        return lambda n: float(n)
    if name == "schreier_dual":
        base = kw.get("base", 2.0)
        return lambda n: math.log(n) / math.log(base)
    if name == "schreier_m":
        return lambda n: n / math.log(n)
    raise ValueError(f"no analytic parameter named {name!r}")


@dataclass
class ChainReport:
    n: int
    left: float
    right: float
    slack: float
    violated: bool
    log_ratio: float

    def to_dict(self):
        return dict(self.__dict__)


def estimate_chain_check(omega_theta, norm_theta, M0, M1, family: DisjointFamily,
                         theta: float, M_theta=None, tol: float = 1e-9) -> ChainReport:
    """Compare ``||Omega(sum u) - sum Omega(u) - log(M0/M1) sum u||`` with ``3 M_theta/max(theta, 1-theta)``.

    ``M_theta`` defaults to the measured parameter of ``norm_theta``.
    """
    U = family.as_array()
    n = U.shape[0]
    if np.any(np.atleast_1d(norm_theta(U)) > 1 + 1e-12):
        raise ValueError("family members must lie in the unit ball")
    if M_theta is None:
        from .params import parameter_M
        M_theta = parameter_M(norm_theta, n).value
    S = U.sum(axis=0)
    lr = math.log(_at(M0, n) / _at(M1, n))
    D = omega_theta(S) - omega_theta(U).sum(axis=0) - lr * S
    left = float(norm_theta(D))
    right = 3.0 * _at(M_theta, n) / max(theta, 1.0 - theta)
    slack = right - left
    return ChainReport(n, left, right, slack, slack < -tol * max(1.0, right), lr)
