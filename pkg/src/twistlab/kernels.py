"""Inner loops shared by the norm oracles.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with the same signature.  The module-level names point at the
numba versions unless ``TWISTLAB_DISABLE_NUMBA=1`` is set in the
environment (or numba cannot be imported).  Both implementations stay
importable as :data:`numba_impl` and :data:`numpy_impl` so tests and the
benchmark can compare them directly.
"""

import math
import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("TWISTLAB_DISABLE_NUMBA", "0") != "1"


# ---------------------------------------------------------------------------
# pure numpy
# ---------------------------------------------------------------------------

def _np_schreier_batch(absx):
    """Schreier norm of each row of a nonnegative (B, N) array."""
    absx = np.asarray(absx, dtype=np.float64)
    B, N = absx.shape
    best = np.zeros(B)
    for m in range(1, N + 1):
        tail = absx[:, m - 1:]
        k = min(m, tail.shape[1])
        if k == tail.shape[1]:
            s = tail.sum(axis=1)
        else:
            s = -np.partition(-tail, k - 1, axis=1)[:, :k].sum(axis=1)
        np.maximum(best, s, out=best)
    return best


def _np_schreier_argmax(absx):
    """Indices of a maximizing admissible set for one nonnegative vector."""
    absx = np.asarray(absx, dtype=np.float64)
    N = absx.shape[0]
    best, best_m = -1.0, 1
    for m in range(1, N + 1):
        tail = absx[m - 1:]
        k = min(m, tail.shape[0])
        s = np.sort(tail)[::-1][:k].sum()
        if s > best:
            best, best_m = s, m
    tail = absx[best_m - 1:]
    k = min(best_m, tail.shape[0])
    order = np.argsort(-tail, kind="stable")[:k]
    return np.sort(order + best_m - 1)


def _np_interval_max(absx):
    N = absx.shape[0]
    F = np.zeros((N, N))
    for a in range(N):
        F[a, a:] = np.maximum.accumulate(absx[a:])
    return F


def _np_schlumprecht_table(absx, tol, max_iter):
    """Schlumprecht norms of all sub-intervals ``absx[a:b+1]``.

    Returns ``(table, iterations)``; ``iterations == -1`` flags that the
    fixed-point iteration did not settle within ``max_iter`` sweeps.
    """
    absx = np.asarray(absx, dtype=np.float64)
    N = absx.shape[0]
    sup = _np_interval_max(absx)
    F = sup.copy()
    upper = np.triu(np.ones((N, N), dtype=bool))
    for it in range(1, max_iter + 1):
        best = sup.copy()
        # D[a, b]: best sum over a partition of [a, b] into l intervals
        D = np.where(upper, F, -np.inf)
        for l in range(2, N + 1):
            Dn = np.full((N, N), -np.inf)
            for c in range(N - 1):
                # left part [a, c] with l-1 pieces, right part [c+1, b]
                cand = D[:, c][:, None] + F[c + 1, :][None, :]
                cand[:, : c + 1] = -np.inf
                np.maximum(Dn, cand, out=Dn)
            D = Dn
            if not np.isfinite(D).any():
                break
            np.maximum(best, np.where(np.isfinite(D), D, 0.0) / math.log2(l + 1), out=best)
        best = np.where(upper, best, 0.0)
        delta = np.max(np.abs(best - F))
        F = best
        if delta <= tol:
            return F, it
    return F, -1


def _np_rank_batch(absx, weights):
    order = np.argsort(-absx, axis=-1, kind="stable")
    cum = np.cumsum(weights[order], axis=-1)
    out = np.empty_like(cum)
    np.put_along_axis(out, order, cum, axis=-1)
    return out


def _np_lp_residual_norms(omega, lam, V, weights, p):
    """``||omega_j - lam_j * V||_p`` for every probe row j."""
    R = omega - lam * V[None, :]
    if math.isinf(p):
        return np.abs(R).max(axis=1)
    return (np.abs(R) ** p @ weights) ** (1.0 / p)


numpy_impl = SimpleNamespace(
    schreier_batch=_np_schreier_batch,
    schreier_argmax=_np_schreier_argmax,
    schlumprecht_table=_np_schlumprecht_table,
    rank_batch=_np_rank_batch,
    lp_residual_norms=_np_lp_residual_norms,
)


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------

if HAS_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)

    @_jit
    def _nb_schreier_row(row):
        # sweep m = N..1 keeping the m largest entries of row[m-1:] in a min-heap;
        # the allowed count only shrinks, so a popped entry never comes back
        N = row.shape[0]
        heap = np.empty(N)
        size = 0
        s = 0.0
        best = 0.0
        for m in range(N, 0, -1):
            # push row[m-1]
            v = row[m - 1]
            i = size
            heap[i] = v
            size += 1
            while i > 0:
                parent = (i - 1) // 2
                if heap[parent] <= heap[i]:
                    break
                heap[parent], heap[i] = heap[i], heap[parent]
                i = parent
            s += v
            while size > m:
                s -= heap[0]
                size -= 1
                heap[0] = heap[size]
                i = 0
                while True:
                    lft = 2 * i + 1
                    if lft >= size:
                        break
                    c = lft
                    if lft + 1 < size and heap[lft + 1] < heap[lft]:
                        c = lft + 1
                    if heap[i] <= heap[c]:
                        break
                    heap[i], heap[c] = heap[c], heap[i]
                    i = c
            if s > best:
                best = s
        return best

    @_jit
    def _nb_schreier_batch(absx):
        B = absx.shape[0]
        out = np.empty(B)
        for b in range(B):
            out[b] = _nb_schreier_row(absx[b])
        return out

    @_jit
    def _nb_schreier_argmax(absx):
        N = absx.shape[0]
        best = -1.0
        best_m = 1
        for m in range(1, N + 1):
            tail = np.sort(absx[m - 1:])
            k = min(m, tail.shape[0])
            s = 0.0
            for j in range(tail.shape[0] - k, tail.shape[0]):
                s += tail[j]
            if s > best:
                best = s
                best_m = m
        tail = absx[best_m - 1:]
        k = min(best_m, tail.shape[0])
        order = np.argsort(-tail, kind="mergesort")[:k]
        return np.sort(order + best_m - 1)

    @_jit
    def _nb_schlumprecht_table(absx, tol, max_iter):
        N = absx.shape[0]
        sup = np.zeros((N, N))
        for a in range(N):
            m = 0.0
            for b in range(a, N):
                if absx[b] > m:
                    m = absx[b]
                sup[a, b] = m
        F = sup.copy()
        D = np.empty((N, N))
        Dn = np.empty((N, N))
        best = np.empty((N, N))
        for it in range(1, max_iter + 1):
            for a in range(N):
                for b in range(N):
                    best[a, b] = sup[a, b]
                    D[a, b] = F[a, b] if b >= a else -np.inf
            for l in range(2, N + 1):
                inv = 1.0 / math.log2(l + 1)
                any_finite = False
                for a in range(N):
                    for b in range(N):
                        Dn[a, b] = -np.inf
                    # need at least l atoms: b >= a + l - 1
                    for b in range(a + l - 1, N):
                        v = -np.inf
                        for c in range(a + l - 2, b):
                            cand = D[a, c] + F[c + 1, b]
                            if cand > v:
                                v = cand
                        Dn[a, b] = v
                        if v > -np.inf:
                            any_finite = True
                            if v * inv > best[a, b]:
                                best[a, b] = v * inv
                if not any_finite:
                    break
                for a in range(N):
                    for b in range(N):
                        D[a, b] = Dn[a, b]
            delta = 0.0
            for a in range(N):
                for b in range(a, N):
                    d = abs(best[a, b] - F[a, b])
                    if d > delta:
                        delta = d
                    F[a, b] = best[a, b]
            if delta <= tol:
                return F, it
        return F, -1

    @_jit
    def _nb_rank_batch(absx, weights):
        B, N = absx.shape
        out = np.empty((B, N))
        for b in range(B):
            order = np.argsort(-absx[b], kind="mergesort")
            acc = 0.0
            for j in range(N):
                acc += weights[order[j]]
                out[b, order[j]] = acc
        return out

    @_jit
    def _nb_lp_residual_norms(omega, lam, V, weights, p):
        P, N = omega.shape
        out = np.empty(P)
        if math.isinf(p):
            for j in range(P):
                s = 0.0
                for i in range(N):
                    r = abs(omega[j, i] - lam[j, i] * V[i])
                    if r > s:
                        s = r
                out[j] = s
            return out
        for j in range(P):
            s = 0.0
            if p == 2.0:
                for i in range(N):
                    r = omega[j, i] - lam[j, i] * V[i]
                    s += weights[i] * r * r
                out[j] = math.sqrt(s)
            else:
                for i in range(N):
                    s += weights[i] * abs(omega[j, i] - lam[j, i] * V[i]) ** p
                out[j] = s ** (1.0 / p)
        return out

    numba_impl = SimpleNamespace(
        schreier_batch=_nb_schreier_batch,
        schreier_argmax=_nb_schreier_argmax,
        schlumprecht_table=_nb_schlumprecht_table,
        rank_batch=_nb_rank_batch,
        lp_residual_norms=_nb_lp_residual_norms,
    )
else:  # pragma: no cover
    numba_impl = numpy_impl

_active = numba_impl if USE_NUMBA else numpy_impl


def backend():
    return "numba" if USE_NUMBA else "numpy"


def schreier_batch(absx):
    return _active.schreier_batch(np.ascontiguousarray(absx, dtype=np.float64))


def schreier_argmax(absx):
    return _active.schreier_argmax(np.ascontiguousarray(absx, dtype=np.float64))


def schlumprecht_table(absx, tol=1e-10, max_iter=200):
    return _active.schlumprecht_table(
        np.ascontiguousarray(absx, dtype=np.float64), float(tol), int(max_iter))


def rank_batch(absx, weights):
    return _active.rank_batch(np.ascontiguousarray(absx, dtype=np.float64),
                              np.ascontiguousarray(weights, dtype=np.float64))


def lp_residual_norms(omega, lam, V, weights, p):
    return _active.lp_residual_norms(
        np.ascontiguousarray(omega, dtype=np.float64),
        np.ascontiguousarray(lam, dtype=np.float64),
        np.ascontiguousarray(V, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64), float(p))
