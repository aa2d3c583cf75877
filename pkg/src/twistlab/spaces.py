"""Norm oracles for the Köthe lattices used as examples.

Every norm is bound to an :class:`AtomSpace` and evaluates either a single
vector (KVec or 1-d array, returning a float) or a batch of vectors laid
out along the last axis (returning an array of norms).
"""

from __future__ import annotations

import logging
import math
import threading
from itertools import accumulate

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import kernels
from .measure import AtomSpace, KVec, values_of

log = logging.getLogger(__name__)


class CapExceeded(ValueError):
    """Input too large for an exact combinatorial oracle."""


class NumericFailure(RuntimeError):
    pass


def _as_batch(x):
    v = values_of(x)
    return v.reshape(-1, v.shape[-1]), v.shape[:-1]


class KotheNorm:
    """Base class: a lattice (quasi-)norm on the vectors of ``space``."""

    kind = "abstract"
    rearrangement_invariant = False
    successive_only_params = False

    def __init__(self, space: AtomSpace):
        self.space = space

    @property
    def quasi_triangle_constant(self) -> float:
        return 1.0

    @property
    def params(self) -> dict:
        return {}

    def descriptor(self) -> dict:
        return {"kind": self.kind, "params": self.params}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def _eval(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        X, lead = _as_batch(x)
        if X.shape[1] != self.space.n_atoms:
            raise ValueError("vector length does not match the atom space")
        out = self._eval(X)
        if lead == ():
            return float(out[0])
        return out.reshape(lead)

    def normalize(self, x):
        """``x / ||x||`` along the last axis; zero rows stay zero."""
        v = values_of(x)
        n = np.atleast_1d(self(v))
        n = np.where(n > 0, n, 1.0)
        out = v / n.reshape(v.shape[:-1] + (1,))
        return KVec(x.space, out) if isinstance(x, KVec) else out

    def gradient(self, x) -> np.ndarray:
        """A (sub)gradient of the norm at ``x``; central differences by default."""
        v = values_of(x).astype(np.float64)
        g = np.zeros_like(v)
        idx = np.flatnonzero(v) if np.any(v) else np.arange(v.size)
        h = 1e-7 * max(1.0, float(np.max(np.abs(v))))
        P = np.repeat(v[None, :], 2 * idx.size, axis=0)
        P[np.arange(idx.size), idx] += h
        P[idx.size + np.arange(idx.size), idx] -= h
        vals = self._eval(P)
        g[idx] = (vals[: idx.size] - vals[idx.size:]) / (2 * h)
        return g

    def norming_functional(self, x):
        """Dual-ball element ``y`` with ``<y, x> = ||x||``, or ``None``."""
        return None

    def dual(self):
        return None


class LpNorm(KotheNorm):
    kind = "lp"
    rearrangement_invariant = True

    def __init__(self, space, p):
        super().__init__(space)
        p = float(p)
        if not p > 0:
            raise ValueError("p must be positive")
        self.p = p

    @property
    def params(self):
        return {"p": "inf" if math.isinf(self.p) else self.p}

    @property
    def quasi_triangle_constant(self):
        return 1.0 if self.p >= 1 else 2.0 ** (1.0 / self.p - 1.0)

    def _eval(self, X):
        A = np.abs(X)
        if math.isinf(self.p):
            return A.max(axis=1)
        if self.p == 2.0:
            return np.sqrt((A * A) @ self.space.weights)
        return ((A ** self.p) @ self.space.weights) ** (1.0 / self.p)

    def gradient(self, x):
        v = values_of(x)
        nrm = self(v)
        if nrm == 0:
            return np.zeros_like(v)
        if math.isinf(self.p):
            g = np.zeros_like(v)
            i = int(np.argmax(np.abs(v)))
            g[i] = np.sign(v[i])
            return g
        w = self.space.weights
        return w * np.abs(v) ** (self.p - 1) * np.sign(v) / nrm ** (self.p - 1)

    def norming_functional(self, x):
        v = values_of(x)
        nrm = self(v)
        if nrm == 0 or self.p < 1:
            return None
        # the pairing is weighted: <y, x> = sum w_i y_i x_i
        if math.isinf(self.p):
            y = np.zeros_like(v)
            i = int(np.argmax(np.abs(v)))
            y[i] = np.sign(v[i]) / self.space.weights[i]
            return y
        return np.sign(v) * (np.abs(v) / nrm) ** (self.p - 1)

    def dual(self):
        if self.p < 1:
            return None
        if self.p == 1:
            return LpNorm(self.space, math.inf)
        if math.isinf(self.p):
            return LpNorm(self.space, 1.0)
        return LpNorm(self.space, self.p / (self.p - 1))


class LorentzNorm(KotheNorm):
    """``(sum_k (x*_k)^q (T_k^{q/p} - T_{k-1}^{q/p}))^{1/q}``."""

    kind = "lorentz"
    rearrangement_invariant = True

    def __init__(self, space, p, q):
        super().__init__(space)
        self.p, self.q = float(p), float(q)
        if not (0 < self.p < math.inf and 0 < self.q < math.inf):
            raise ValueError("Lorentz indices must lie in (0, inf)")

    @property
    def params(self):
        return {"p": self.p, "q": self.q}

    @property
    def quasi_triangle_constant(self):
        p, q = self.p, self.q
        if p == q:
            return 1.0 if p >= 1 else 2.0 ** (1.0 / p - 1.0)
        if 1 <= q <= p:
            return 1.0
        # (x+y)* <= D_2 x* + D_2 y*, ||D_2 f|| = 2^{1/p} ||f||
        return 2.0 ** (1.0 / p) * max(1.0, 2.0 ** (1.0 / q - 1.0))

    def _eval(self, X):
        A = np.abs(X)
        order = np.argsort(-A, axis=1, kind="stable")
        xs = np.take_along_axis(A, order, axis=1)
        T = np.cumsum(self.space.weights[order], axis=1)
        Tq = T ** (self.q / self.p)
        dT = np.diff(Tq, axis=1, prepend=0.0)
        return ((xs ** self.q) * dT).sum(axis=1) ** (1.0 / self.q)


class SchreierNorm(KotheNorm):
    """``sup_A sum_{i in A} |x_i|`` over admissible ``A`` (``|A| <= min A``)."""

    kind = "schreier"

    def __init__(self, space):
        if not space.is_counting:
            raise ValueError("the Schreier norm needs unit weights")
        super().__init__(space)

    def _eval(self, X):
        return kernels.schreier_batch(np.abs(X))

    def argmax_set(self, x) -> np.ndarray:
        """0-based atoms of an admissible set attaining the norm."""
        return kernels.schreier_argmax(np.abs(values_of(x)))

    def norming_functional(self, x):
        v = values_of(x)
        if not np.any(v):
            return None
        y = np.zeros_like(v)
        A = self.argmax_set(v)
        y[A] = np.sign(v[A])
        return y

    def dual(self):
        return SchreierDualNorm(self.space)


class SchreierDualNorm(KotheNorm):
    """Dual of the Schreier norm via LP with constraint generation."""

    kind = "schreier_dual"

    def __init__(self, space, cap=16, tol=1e-9, max_rounds=10_000):
        if not space.is_counting:
            raise ValueError("the Schreier dual norm needs unit weights")
        if space.n_atoms > cap:
            raise CapExceeded(f"{space.n_atoms} atoms exceeds the cap of {cap}")
        super().__init__(space)
        self.cap, self.tol, self.max_rounds = cap, tol, max_rounds
        self._primal = SchreierNorm(space)
        self._pool = set()
        self._pool_matrix = np.zeros((0, space.n_atoms))
        # the pool is shared state; serialize solves on one instance
        self._lock = threading.RLock()

    @property
    def params(self):
        return {"cap": self.cap}

    def solve(self, x):
        """Return ``(value, y, rounds)`` with ``y >= 0`` in the Schreier ball.

        Admissible-set constraints found by the separation step are valid
        for every input, so they are pooled across calls.
        """
        with self._lock:
            return self._solve(x)

    def _solve(self, x):
        c = np.abs(values_of(x))
        N = c.shape[0]
        supp = np.flatnonzero(c)
        if supp.size == 0:
            return 0.0, np.zeros(N), 0
        for rounds in range(1, self.max_rounds + 1):
            rows = self._pool_matrix[:, supp]
            rows = rows[rows.any(axis=1)]
            res = linprog(-c[supp], A_ub=rows if rows.size else None,
                          b_ub=np.ones(rows.shape[0]) if rows.size else None,
                          bounds=(0.0, 1.0), method="highs")
            if res.status != 0:
                raise NumericFailure(f"LP failed: {res.message}")
            y = np.zeros(N)
            y[supp] = np.clip(res.x, 0.0, None)
            A = self._primal.argmax_set(y)
            key = tuple(int(i) for i in A)
            # a pooled set can only reappear through LP feasibility tolerance
            if y[A].sum() <= 1.0 + self.tol or key in self._pool:
                return float(c @ y), y, rounds
            self._add_constraint(key)
        raise NumericFailure("constraint generation did not terminate")

    def _add_constraint(self, key):
        self._pool.add(key)
        row = np.zeros((1, self.space.n_atoms))
        row[0, list(key)] = 1.0
        self._pool_matrix = np.vstack([self._pool_matrix, row])

    def _eval(self, X):
        if X.shape[0] == 1:
            return np.array([self.solve(X[0])[0]])
        out = np.empty(X.shape[0])
        for a in range(0, X.shape[0], self.batch):
            with self._lock:
                out[a:a + self.batch] = self._solve_batch(np.abs(X[a:a + self.batch]))
        return out

    batch = 256

    def _solve_batch(self, C):
        """All rows of ``C`` as one block-diagonal LP, re-solving rows that still separate."""
        B, N = C.shape
        vals = np.zeros(B)
        todo = np.flatnonzero(C.any(axis=1))
        for _ in range(self.max_rounds):
            if todo.size == 0:
                return vals
            P = self._pool_matrix
            known = set(self._pool)
            blocks = [P if P.shape[0] else np.zeros((0, N)) for _ in todo]
            A = sparse.block_diag(blocks, format="csr") if P.shape[0] else None
            # atoms off the support carry zero cost, so fix them at 0
            ub = (C[todo] > 0).astype(float).ravel()
            res = linprog(-C[todo].ravel(), A_ub=A,
                          b_ub=np.ones(A.shape[0]) if A is not None else None,
                          bounds=np.column_stack([np.zeros_like(ub), ub]), method="highs")
            if res.status != 0:
                raise NumericFailure(f"LP failed: {res.message}")
            Y = np.clip(res.x.reshape(todo.size, N), 0.0, None)
            again = []
            for j, i in enumerate(todo):
                y = Y[j]
                S = self._primal.argmax_set(y)
                key = tuple(int(k) for k in S)
                if y[S].sum() <= 1.0 + self.tol or key in known:
                    vals[i] = float(C[i] @ y)
                else:
                    if key not in self._pool:
                        self._add_constraint(key)
                    again.append(i)
            todo = np.array(again, dtype=int)
        raise NumericFailure("constraint generation did not terminate")

    def norming_functional(self, x):
        v = values_of(x)
        if not np.any(v):
            return None
        return np.sign(v) * self.solve(v)[1]

    def dual(self):
        return self._primal


class SchlumprechtNorm(KotheNorm):
    """Implicit Schlumprecht norm, solved by monotone fixed-point iteration."""

    kind = "schlumprecht"
    successive_only_params = True

    def __init__(self, space, cap=64, tol=1e-10, max_iter=200):
        if not space.is_counting:
            raise ValueError("the Schlumprecht norm needs unit weights")
        super().__init__(space)
        self.cap, self.tol, self.max_iter = cap, tol, max_iter

    @property
    def params(self):
        return {"cap": self.cap}

    def _row(self, row):
        nz = np.abs(row[row != 0])
        if nz.size == 0:
            return 0.0
        if nz.size > self.cap:
            raise CapExceeded(f"support of {nz.size} atoms exceeds the cap of {self.cap}")
        table, iters = kernels.schlumprecht_table(nz, self.tol, self.max_iter)
        if iters < 0:
            raise NumericFailure("Schlumprecht iteration did not converge")
        return float(table[0, -1])

    def _eval(self, X):
        return np.array([self._row(r) for r in X])


class PConvexification(KotheNorm):
    """``base(|x|^p)^{1/p}`` for ``p > 1``."""

    kind = "pconvexification"

    def __init__(self, base: KotheNorm, p):
        super().__init__(base.space)
        p = float(p)
        if not p > 1:
            raise ValueError("p-convexification needs p > 1")
        self.base, self.p = base, p
        self.rearrangement_invariant = base.rearrangement_invariant
        self.successive_only_params = base.successive_only_params

    @property
    def params(self):
        return {"base": self.base.descriptor(), "p": self.p}

    @property
    def quasi_triangle_constant(self):
        C = self.base.quasi_triangle_constant
        return 1.0 if C == 1.0 else 2.0 ** (1 - 1 / self.p) * C ** (1 / self.p)

    def _eval(self, X):
        return self.base._eval(np.abs(X) ** self.p) ** (1.0 / self.p)


class PConcavification(KotheNorm):
    """``base(|x|^{1/p})^p`` for ``p > 1`` (the space ``X^p``)."""

    kind = "pconcavification"

    def __init__(self, base: KotheNorm, p):
        super().__init__(base.space)
        p = float(p)
        if not p > 1:
            raise ValueError("p-concavification needs p > 1")
        self.base, self.p = base, p
        self.rearrangement_invariant = base.rearrangement_invariant
        self.successive_only_params = base.successive_only_params

    @property
    def params(self):
        return {"base": self.base.descriptor(), "p": self.p}

    @property
    def quasi_triangle_constant(self):
        return self.base.quasi_triangle_constant ** self.p * 2.0 ** (self.p - 1)

    def _eval(self, X):
        return self.base._eval(np.abs(X) ** (1.0 / self.p)) ** self.p


class LpSumL2Blocks(KotheNorm):
    """``(sum_k ||x^k||_2^p)^{1/p}`` over consecutive blocks ``x^k``."""

    kind = "lp_sum_l2"

    def __init__(self, space, p, block_sizes):
        super().__init__(space)
        sizes = [int(b) for b in block_sizes]
        if any(b < 1 for b in sizes) or sum(sizes) != space.n_atoms:
            raise ValueError("block sizes must partition the atoms")
        p = float(p)
        if not p > 0:
            raise ValueError("p must be positive")
        self.p, self.block_sizes = p, tuple(sizes)
        self.starts = np.array([0] + list(accumulate(sizes))[:-1])
        self.block_of = np.repeat(np.arange(len(sizes)), sizes)

    @property
    def params(self):
        return {"p": "inf" if math.isinf(self.p) else self.p,
                "block_sizes": list(self.block_sizes)}

    @property
    def quasi_triangle_constant(self):
        return 1.0 if self.p >= 1 else 2.0 ** (1.0 / self.p - 1.0)

    def block_norms(self, X):
        """``||x^k||_2`` for every block, shape ``(..., n_blocks)``."""
        X = np.asarray(X, dtype=np.float64)
        sq = X * X * self.space.weights
        return np.sqrt(np.add.reduceat(sq, self.starts, axis=-1))

    def _eval(self, X):
        b = self.block_norms(X)
        top = b.max(axis=1)
        if math.isinf(self.p):
            return top
        # factor out the largest block so a single-block vector keeps its exact norm
        safe = np.where(top > 0, top, 1.0)
        return top * ((b / safe[:, None]) ** self.p).sum(axis=1) ** (1.0 / self.p)

    def gradient(self, x):
        v = values_of(x)
        nrm = self(v)
        if nrm == 0:
            return np.zeros_like(v)
        b = self.block_norms(v)[self.block_of]
        w = self.space.weights
        if math.isinf(self.p):
            k = int(np.argmax(self.block_norms(v)))
            g = np.where(self.block_of == k, w * v / np.where(b > 0, b, 1.0), 0.0)
            return g
        bb = np.where(b > 0, b, 1.0)
        return nrm ** (1 - self.p) * bb ** (self.p - 2) * w * v


# ---------------------------------------------------------------------------
# functional forms and descriptors
# ---------------------------------------------------------------------------

def norm_lp(space, p, x):
    return LpNorm(space, p)(x)


def norm_lorentz(space, p, q, x):
    return LorentzNorm(space, p, q)(x)


def norm_schreier(x, space=None):
    space = x.space if isinstance(x, KVec) else space or AtomSpace.counting(len(x))
    return SchreierNorm(space)(x)


def norm_schreier_dual(x, space=None, cap=16):
    space = x.space if isinstance(x, KVec) else space or AtomSpace.counting(len(x))
    return SchreierDualNorm(space, cap=cap)(x)


def norm_schlumprecht(x, space=None, cap=64):
    space = x.space if isinstance(x, KVec) else space or AtomSpace.counting(len(x))
    return SchlumprechtNorm(space, cap=cap)(x)


def norm_pconvexification(base, p, x):
    return PConvexification(base, p)(x)


def norm_lp_sum_l2_blocks(space, p, block_sizes, x):
    return LpSumL2Blocks(space, p, block_sizes)(x)


def _num(v):
    if isinstance(v, str) and v.lower() in ("inf", "infinity", "oo"):
        return math.inf
    return float(v)


def from_descriptor(desc: dict, space: AtomSpace) -> KotheNorm:
    """Build a norm from ``{"kind": ..., "params": {...}}``."""
    kind = desc["kind"]
    params = dict(desc.get("params", {}))
    if kind == "lp":
        return LpNorm(space, _num(params["p"]))
    if kind == "lorentz":
        return LorentzNorm(space, _num(params["p"]), _num(params["q"]))
    if kind == "schreier":
        return SchreierNorm(space)
    if kind == "schreier_dual":
        return SchreierDualNorm(space, cap=int(params.get("cap", 16)))
    if kind == "schlumprecht":
        return SchlumprechtNorm(space, cap=int(params.get("cap", 64)))
    if kind == "pconvexification":
        return PConvexification(from_descriptor(params["base"], space), _num(params["p"]))
    if kind == "pconcavification":
        return PConcavification(from_descriptor(params["base"], space), _num(params["p"]))
    if kind == "lp_sum_l2":
        return LpSumL2Blocks(space, _num(params["p"]), params["block_sizes"])
    raise ValueError(f"unknown norm kind {kind!r}")


def parse_norm(text: str) -> dict:
    """Short CLI form to descriptor.

    ``lp:2``, ``lp:inf``, ``lorentz:2,1``, ``schreier``, ``schreier_dual``,
    ``schlumprecht``, ``pconv:2:schreier``, ``blocks:1.5:4,4,8``.
    """
    head, _, rest = text.partition(":")
    head = head.strip().lower()
    if head in ("lp", "l"):
        return {"kind": "lp", "params": {"p": rest or "2"}}
    if head == "lorentz":
        p, q = rest.split(",")
        return {"kind": "lorentz", "params": {"p": float(p), "q": float(q)}}
    if head in ("schreier", "schreier_dual", "schlumprecht"):
        return {"kind": head, "params": {}}
    if head in ("pconv", "pconvexification", "pconcav", "pconcavification"):
        p, _, base = rest.partition(":")
        kind = "pconvexification" if head.startswith("pconv") else "pconcavification"
        return {"kind": kind, "params": {"p": float(p), "base": parse_norm(base)}}
    if head in ("blocks", "lp_sum_l2"):
        p, _, sizes = rest.partition(":")
        return {"kind": "lp_sum_l2",
                "params": {"p": p, "block_sizes": [int(s) for s in sizes.split(",")]}}
    raise ValueError(f"cannot parse norm {text!r}")
