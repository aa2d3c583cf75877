"""Empirical quasi-linearity and centralizer constants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SamplerConfig:
    """Random test inputs.

    Vectors have i.i.d. signed exponential coordinates; a random subset of
    coordinates is zeroed so supports vary.  ``near_parallel`` is the
    fraction of pairs built as ``y = c x + small noise``.
    """

    samples: int = 10_000
    seed: int = 0
    near_parallel: float = 0.25
    sparsity: float = 0.3


def _signed_exponential(rng, shape, sparsity):
    X = rng.exponential(size=shape) * rng.choice([-1.0, 1.0], size=shape)
    X[rng.random(shape) < sparsity] = 0.0
    # keep at least one nonzero per row
    empty = ~np.any(X, axis=-1)
    X[empty, 0] = 1.0
    return X


def sample_pairs(N: int, cfg: SamplerConfig):
    rng = np.random.default_rng(cfg.seed)
    X = _signed_exponential(rng, (cfg.samples, N), cfg.sparsity)
    Y = _signed_exponential(rng, (cfg.samples, N), cfg.sparsity)
    k = int(round(cfg.near_parallel * cfg.samples))
    if k:
        c = rng.choice([-1.0, 1.0], size=(k, 1)) * rng.uniform(0.2, 5.0, size=(k, 1))
        Y[:k] = c * X[:k] + 1e-3 * rng.standard_normal((k, N)) * (X[:k] != 0)
    return X, Y


def quasi_linearity_constant(omega, norm, sampler_cfg: SamplerConfig | None = None,
                             return_ratios: bool = False):
    """Largest ``||Omega(x+y) - Omega x - Omega y|| / (||x|| + ||y||)`` seen."""
    cfg = sampler_cfg or SamplerConfig()
    X, Y = sample_pairs(norm.space.n_atoms, cfg)
    num = norm(omega(X + Y) - omega(X) - omega(Y))
    den = norm(X) + norm(Y)
    ratios = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    best = float(ratios.max())
    return (best, ratios) if return_ratios else best


def sample_multipliers(N: int, cfg: SamplerConfig):
    """Pairs ``(f, x)`` with ``f`` in the unit ball of ``L_inf``.

    ``f`` cycles through four families: uniform on ``[-1, 1]``, sign
    patterns, indicators of random sets, and ``u^k`` with ``u`` uniform
    (small values, where ``t log t`` is extremal).
    """
    rng = np.random.default_rng(cfg.seed)
    S = cfg.samples
    F = np.empty((S, N))
    kind = np.arange(S) % 4
    F[kind == 0] = rng.uniform(-1.0, 1.0, size=((kind == 0).sum(), N))
    F[kind == 1] = rng.choice([-1.0, 1.0], size=((kind == 1).sum(), N))
    F[kind == 2] = (rng.random(((kind == 2).sum(), N)) < 0.5).astype(float)
    m = (kind == 3).sum()
    F[kind == 3] = rng.random((m, N)) ** rng.integers(1, 6, size=(m, 1))
    F *= rng.uniform(0.1, 1.0, size=(S, 1))
    X = _signed_exponential(rng, (S, N), cfg.sparsity)
    return F, X


def centralizer_constant(omega, norm, sampler_cfg: SamplerConfig | None = None,
                         return_ratios: bool = False):
    """Largest ``||Omega(fx) - f Omega(x)|| / (||f||_inf ||x||)`` seen."""
    cfg = sampler_cfg or SamplerConfig()
    F, X = sample_multipliers(norm.space.n_atoms, cfg)
    num = norm(omega(F * X) - F * omega(X))
    den = np.abs(F).max(axis=1) * norm(X)
    ratios = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    best = float(ratios.max())
    return (best, ratios) if return_ratios else best
