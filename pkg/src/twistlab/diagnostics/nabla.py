"""Sign averages of the deviation ``Omega(sum +-b_k) - sum +-Omega(b_k)``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..measure import DisjointFamily, values_of


@dataclass(frozen=True)
class NablaResult:
    value: float
    mode: str
    n: int
    samples: int
    seed: int | None = None
    stderr: float = 0.0

    def to_dict(self):
        return {"value": self.value, "mode": self.mode, "n": self.n,
                "samples": self.samples, "seed": self.seed, "stderr": self.stderr}


def _members(family, coeffs):
    if isinstance(family, DisjointFamily):
        B = family.as_array()
    else:
        B = np.atleast_2d(np.asarray([values_of(u) for u in family], dtype=np.float64))
    if coeffs is not None:
        lam = np.asarray(coeffs, dtype=np.float64)
        if lam.shape != (B.shape[0],):
            raise ValueError("need one coefficient per family member")
        B = lam[:, None] * B
    # zero-coefficient members drop out of the sequence
    return B[np.any(B != 0, axis=1)]


def sign_patterns(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows ``start..stop-1`` of the ``2^n`` sign patterns, as +-1 floats."""
    stop = 2 ** n if stop is None else stop
    codes = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(n, dtype=np.int64)[None, :]) & 1
    return 1.0 - 2.0 * bits


def sign_deviations(omega, norm, B: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """``||Omega(eps.B) - eps.Omega(B)||`` for every sign row ``eps``."""
    OB = omega(B)
    Y = signs @ B
    D = omega(Y) - signs @ OB
    return np.atleast_1d(norm(D))


def nabla(omega, norm, family, coeffs=None, mode: str = "auto", exact_cap: int = 20,
          samples: int = 4096, seed: int | None = None, chunk: int = 1 << 14) -> NablaResult:
    """Average deviation over signs.

    ``mode="auto"`` enumerates all ``2^n`` patterns when ``n <= exact_cap``
    and samples ``samples`` uniform patterns otherwise; sampling needs a
    seed.
    """
    B = _members(family, coeffs)
    n = B.shape[0]
    if n == 0:
        raise ValueError("empty family")
    if mode == "auto":
        mode = "exact" if n <= exact_cap else "monte_carlo"
    if mode == "exact":
        if n > exact_cap:
            raise ValueError(f"exact enumeration capped at n={exact_cap}")
        total, count = 0.0, 2 ** n
        for lo in range(0, count, chunk):
            total += sign_deviations(omega, norm, B, sign_patterns(n, lo, min(count, lo + chunk))).sum()
        return NablaResult(total / count, "exact", n, count)
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if seed is None:
        raise ValueError("Monte-Carlo estimation needs an explicit seed")
    rng = np.random.default_rng(seed)
    vals = []
    for lo in range(0, samples, chunk):
        k = min(chunk, samples - lo)
        eps = rng.choice(np.array([-1.0, 1.0]), size=(k, n))
        vals.append(sign_deviations(omega, norm, B, eps))
    vals = np.concatenate(vals)
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
    return NablaResult(float(vals.mean()), "monte_carlo", n, int(vals.size), seed, se)


def kp_nabla_closed_form(p: float, n: int) -> float:
    """``p^{-1} n^{1/p} log n``: the deviation of ``K_p`` on n normalized disjoint vectors."""
    return n ** (1.0 / p) * math.log(n) / p
