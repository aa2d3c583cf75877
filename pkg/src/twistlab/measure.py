"""Finite weighted atomic measure spaces and the vectors living on them."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels


class DomainError(ValueError):
    """A logarithm was requested at an atom where it is undefined."""


class SpaceMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AtomSpace:
    """Atoms ``0..N-1`` in index order, atom ``i`` carrying mass ``weights[i]``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).ravel()
        if w.size < 1:
            raise ValueError("an AtomSpace needs at least one atom")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("atom weights must be finite and strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def counting(cls, n: int) -> "AtomSpace":
        """Unit weights: the sequence-space model."""
        return cls(np.ones(n))

    @classmethod
    def uniform(cls, n: int) -> "AtomSpace":
        """Weights ``1/n``: an ``n``-cell discretization of ``[0, 1]``."""
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def geometric_mesh(cls, levels: int, per_level: int, ratio: float) -> "AtomSpace":
        """``per_level`` equal atoms of mass ``ratio**j`` for each level ``j``.

        A stepwise model of ``[0, inf)`` that contains both long runs of
        equal cells and lacunary (geometrically growing) cells.
        """
        w = np.repeat(float(ratio) ** np.arange(levels), per_level)
        return cls(w)

    @property
    def n_atoms(self) -> int:
        return self.weights.shape[0]

    @property
    def is_counting(self) -> bool:
        return bool(np.all(self.weights == 1.0))

    def __len__(self):
        return self.n_atoms

    def __eq__(self, other):
        if not isinstance(other, AtomSpace):
            return NotImplemented
        return self is other or np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())

    def vector(self, values) -> "KVec":
        return KVec(self, values)

    def zeros(self) -> "KVec":
        return KVec(self, np.zeros(self.n_atoms))

    def indicator(self, atoms) -> "KVec":
        v = np.zeros(self.n_atoms)
        v[list(atoms)] = 1.0
        return KVec(self, v)

    def unit(self, i: int) -> "KVec":
        return self.indicator([i])


@dataclass(frozen=True, eq=False)
class KVec:
    """A real function on an :class:`AtomSpace`, one value per atom."""

    space: AtomSpace
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if v.shape[0] != self.space.n_atoms:
            raise ValueError(
                f"expected {self.space.n_atoms} values, got {v.shape[0]}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.values.shape[0]

    def __repr__(self):
        return f"KVec({np.array2string(self.values, precision=6)})"

    def _lift(self, other):
        if isinstance(other, KVec):
            if other.space != self.space:
                raise SpaceMismatch("vectors live on different atom spaces")
            return other.values
        return other

    def __add__(self, other):
        return KVec(self.space, self.values + self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return KVec(self.space, self.values - self._lift(other))

    def __rsub__(self, other):
        return KVec(self.space, self._lift(other) - self.values)

    def __mul__(self, other):
        return KVec(self.space, self.values * self._lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return KVec(self.space, -self.values)

    def __abs__(self):
        return KVec(self.space, np.abs(self.values))

    def support(self) -> frozenset:
        return support(self)

    def to_dict(self) -> dict:
        return {"weights": self.space.weights.tolist(), "values": self.values.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, space: AtomSpace | None = None) -> "KVec":
        w = AtomSpace(d["weights"])
        if space is not None:
            if space != w:
                raise SpaceMismatch("serialized weights do not match the given space")
            w = space
        return cls(w, d["values"])

    @classmethod
    def from_json(cls, text: str, space: AtomSpace | None = None) -> "KVec":
        return cls.from_dict(json.loads(text), space)


def values_of(x) -> np.ndarray:
    """Raw value array of a KVec, or ``x`` itself as a float array."""
    if isinstance(x, KVec):
        return x.values
    return np.asarray(x, dtype=np.float64)


def support(x) -> frozenset:
    """Atoms where ``x`` is exactly nonzero."""
    return frozenset(np.flatnonzero(values_of(x)).tolist())


def are_disjoint(xs) -> bool:
    xs = list(xs)
    spaces = [x.space for x in xs if isinstance(x, KVec)]
    if spaces and any(s != spaces[0] for s in spaces):
        raise SpaceMismatch("vectors live on different atom spaces")
    seen = np.zeros(0, dtype=bool)
    for x in xs:
        nz = values_of(x) != 0
        if seen.size == 0:
            seen = nz.copy()
            continue
        if np.any(seen & nz):
            return False
        seen |= nz
    return True


@dataclass(frozen=True, eq=False)
class DisjointFamily:
    """Pairwise disjointly supported nonzero vectors on one space.

    ``successive`` marks families whose supports are ordered intervals:
    every atom of ``members[k]`` precedes every atom of ``members[k+1]``.
    """

    members: tuple
    successive: bool = False

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("a DisjointFamily needs at least one member")
        if not all(isinstance(u, KVec) for u in members):
            raise TypeError("members must be KVec instances")
        space = members[0].space
        if any(u.space != space for u in members):
            raise SpaceMismatch("members live on different atom spaces")
        if any(not np.any(u.values) for u in members):
            raise ValueError("family members must be nonzero")
        if not are_disjoint(members):
            raise ValueError("family members must have disjoint supports")
        if self.successive:
            for a, b in zip(members, members[1:]):
                if max(a.support()) >= min(b.support()):
                    raise ValueError("members are not successive")
        object.__setattr__(self, "members", members)

    @classmethod
    def from_array(cls, space: AtomSpace, rows, successive: bool = False):
        return cls(tuple(KVec(space, r) for r in np.atleast_2d(rows)), successive)

    @classmethod
    def atoms(cls, space: AtomSpace, idx, normalize=None):
        """Single-atom family ``e_i / ||e_i||`` (or raw ``e_i`` if no norm given)."""
        idx = list(idx)
        rows = np.zeros((len(idx), space.n_atoms))
        for k, i in enumerate(idx):
            rows[k, i] = 1.0
        if normalize is not None:
            rows /= normalize(rows)[:, None]
        succ = all(a < b for a, b in zip(idx, idx[1:]))
        return cls.from_array(space, rows, successive=succ)

    @property
    def space(self) -> AtomSpace:
        return self.members[0].space

    @property
    def n(self) -> int:
        return len(self.members)

    def __len__(self):
        return self.n

    def as_array(self) -> np.ndarray:
        return np.stack([u.values for u in self.members])

    def supports(self) -> list:
        return [u.support() for u in self.members]

    def to_dict(self) -> dict:
        return {"weights": self.space.weights.tolist(),
                "members": [u.values.tolist() for u in self.members],
                "successive": self.successive}


def decreasing_rearrangement(x, space: AtomSpace | None = None):
    """Pairs ``(x*_k, T_k)``: sorted ``|x|`` with running atom mass.

    Ties keep atom order.  ``space`` is needed only when ``x`` is a raw
    array.
    """
    space = x.space if isinstance(x, KVec) else space
    if space is None:
        raise TypeError("an AtomSpace is required for raw arrays")
    a = np.abs(values_of(x))
    order = np.argsort(-a, kind="stable")
    T = np.cumsum(space.weights[order])
    return [(float(a[i]), float(t)) for i, t in zip(order, T)]


def rank_function(x, space: AtomSpace | None = None):
    """``r_x(t)``: mass of atoms with larger ``|x|``, plus ties up to ``t``.

    Accepts a KVec (returns a KVec) or a raw ``(..., N)`` array together
    with ``space`` (returns an array of the same shape).
    """
    if isinstance(x, KVec):
        r = kernels.rank_batch(np.abs(x.values)[None, :], x.space.weights)[0]
        return KVec(x.space, r)
    if space is None:
        raise TypeError("an AtomSpace is required for raw arrays")
    a = np.abs(np.asarray(x, dtype=np.float64))
    flat = a.reshape(-1, a.shape[-1])
    return kernels.rank_batch(flat, space.weights).reshape(a.shape)


def xlog_ratio(x, num, den):
    """``x * log(num / den)`` on the support of ``x``, zero elsewhere.

    Broadcasts over leading axes.  Raises :class:`DomainError` if ``num``
    or ``den`` vanish (or go negative) where ``x`` does not.
    """
    xv = values_of(x)
    nv = np.broadcast_to(values_of(num), xv.shape)
    dv = np.broadcast_to(values_of(den), xv.shape)
    on = xv != 0
    if np.any(on & ~((nv > 0) & (dv > 0))):
        raise DomainError("log ratio undefined on the support of x")
    out = np.zeros(xv.shape)
    out[on] = xv[on] * np.log(nv[on] / dv[on])
    if isinstance(x, KVec):
        return KVec(x.space, out)
    return out
