"""Compiled inner loops for symmetric tridiagonal matrices.

Matrices are passed as ``(d, e)``: the diagonal (length m) and the
off-diagonal (length m - 1).  ``e2`` denotes the squared off-diagonal.
"""

import numpy as np
from numba import njit

# Zero pivots are replaced by +PIVMIN, i.e. the shift is nudged down by an
# infinitesimal amount, so counts stay "strictly below".
PIVMIN = 1e-300


@njit(cache=True, nogil=True)
def sturm_count(d, e2, lam):
    m = d.shape[0]
    if m == 0:
        return 0
    count = 0
    q = d[0] - lam
    if abs(q) < PIVMIN:
        q = PIVMIN
    if q < 0.0:
        count += 1
    for i in range(1, m):
        q = (d[i] - lam) - e2[i - 1] / q
        if abs(q) < PIVMIN:
            q = PIVMIN
        if q < 0.0:
            count += 1
    return count


@njit(cache=True, nogil=True)
def gershgorin(d, e):
    m = d.shape[0]
    lo = np.inf
    hi = -np.inf
    for i in range(m):
        r = 0.0
        if i > 0:
            r += abs(e[i - 1])
        if i < m - 1:
            r += abs(e[i])
        lo = min(lo, d[i] - r)
        hi = max(hi, d[i] + r)
    return lo, hi


@njit(cache=True, nogil=True)
def sturm_counts(d, e2, shifts, counts):
    """Counts for several shifts in one pass over the matrix.

    The recurrences for different shifts are independent, so their divisions
    overlap instead of waiting on each other.
    """
    m = d.shape[0]
    nb = shifts.shape[0]
    q = np.empty(nb)
    for b in range(nb):
        t = d[0] - shifts[b]
        if abs(t) < PIVMIN:
            t = PIVMIN
        q[b] = t
        counts[b] = 1 if t < 0.0 else 0
    for i in range(1, m):
        di = d[i]
        ei = e2[i - 1]
        for b in range(nb):
            t = (di - shifts[b]) - ei / q[b]
            t = t if abs(t) >= PIVMIN else PIVMIN
            counts[b] += t < 0.0
            q[b] = t


BATCH = 16


@njit(cache=True, nogil=True)
def _converged(lo, hi, tol):
    width = hi - lo
    scale = max(abs(lo), abs(hi))
    mid = 0.5 * (lo + hi)
    return (width <= 2.0 * tol or width <= 4.0 * 2.220446049250313e-16 * scale
            or mid <= lo or mid >= hi)


@njit(cache=True, nogil=True)
def _bisect_window(d, e2, lo0, hi0, first, last, tol):
    """Eigenvalues with (0-based) indices first..last-1, all inside [lo0, hi0).

    Eigenvalues are refined in batches of BATCH by multisection; every count
    also tightens the brackets of the other eigenvalues.
    """
    nev = last - first
    out = np.empty(nev)
    lower = np.full(nev, lo0)
    upper = np.full(nev, hi0)
    mids = np.empty(BATCH)
    counts = np.zeros(BATCH, dtype=np.int64)
    done = np.zeros(BATCH, dtype=np.bool_)
    for start in range(0, nev, BATCH):
        stop = min(start + BATCH, nev)
        nb = stop - start
        while True:
            active = 0
            for b in range(nb):
                j = start + b
                done[b] = _converged(lower[j], upper[j], tol)
                if not done[b]:
                    active += 1
                    mids[b] = 0.5 * (lower[j] + upper[j])
                else:
                    mids[b] = lower[j]
            if active == 0:
                break
            sturm_counts(d, e2, mids[:nb], counts[:nb])
            for b in range(nb):
                if done[b]:
                    continue
                mid = mids[b]
                c = counts[b]
                # indices below c - first lie under mid, the rest above; the
                # bracket arrays stay sorted, so each sweep stops early
                split = min(max(c - first, start), nev)
                for i in range(split - 1, start - 1, -1):
                    if upper[i] <= mid:
                        break
                    upper[i] = mid
                for i in range(split, nev):
                    if lower[i] >= mid:
                        break
                    lower[i] = mid
        for b in range(nb):
            j = start + b
            out[j] = 0.5 * (lower[j] + upper[j])
    return out


@njit(cache=True, nogil=True)
def eigenvalues_below(d, e, lam, tol):
    m = d.shape[0]
    e2 = e * e
    nev = sturm_count(d, e2, lam)
    if nev == 0:
        return np.empty(0)
    lo, hi = gershgorin(d, e)
    lo = lo - 1e-14 * max(abs(lo), 1.0)
    return _bisect_window(d, e2, lo, min(lam, hi + 1.0), 0, nev, tol)


@njit(cache=True, nogil=True)
def kth_eigenvalue(d, e, k, tol):
    e2 = e * e
    lo, hi = gershgorin(d, e)
    pad = 1e-14 * max(abs(lo), abs(hi), 1.0)
    return _bisect_window(d, e2, lo - pad, hi + pad, k, k + 1, tol)[0]


@njit(cache=True, nogil=True)
def _factor_shifted(d, e, sigma, guard):
    """LU with partial pivoting of T - sigma I (LAPACK dgttrf layout)."""
    m = d.shape[0]
    dd = d - sigma
    dl = e.copy()
    du = e.copy()
    du2 = np.zeros(max(m - 2, 0))
    swap = np.zeros(max(m - 1, 0), dtype=np.bool_)
    for i in range(m - 1):
        if abs(dd[i]) >= abs(dl[i]):
            if dd[i] == 0.0:
                dd[i] = guard
            fact = dl[i] / dd[i]
            dl[i] = fact
            dd[i + 1] -= fact * du[i]
        else:
            swap[i] = True
            fact = dd[i] / dl[i]
            dd[i] = dl[i]
            dl[i] = fact
            temp = du[i]
            du[i] = dd[i + 1]
            dd[i + 1] = temp - fact * dd[i + 1]
            if i < m - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
    for i in range(m):
        if dd[i] == 0.0:
            dd[i] = guard
    return dd, dl, du, du2, swap


@njit(cache=True, nogil=True)
def _solve_factored(dd, dl, du, du2, swap, b):
    m = dd.shape[0]
    x = b.copy()
    for i in range(m - 1):
        if swap[i]:
            temp = x[i]
            x[i] = x[i + 1]
            x[i + 1] = temp - dl[i] * x[i]
        else:
            x[i + 1] -= dl[i] * x[i]
    x[m - 1] /= dd[m - 1]
    if m > 1:
        x[m - 2] = (x[m - 2] - du[m - 2] * x[m - 1]) / dd[m - 2]
    for i in range(m - 3, -1, -1):
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / dd[i]
    return x


@njit(cache=True, nogil=True)
def _residual(d, e, sigma, v):
    m = d.shape[0]
    s = 0.0
    for i in range(m):
        r = (d[i] - sigma) * v[i]
        if i > 0:
            r += e[i - 1] * v[i - 1]
        if i < m - 1:
            r += e[i] * v[i + 1]
        s += r * r
    return np.sqrt(s)


@njit(cache=True, nogil=True)
def _fix_sign(v):
    vmax = np.max(np.abs(v))
    for i in range(v.shape[0]):
        if abs(v[i]) > 1e-12 * vmax:
            if v[i] < 0.0:
                v *= -1.0
            break


_RESTART = 6


@njit(cache=True, nogil=True)
def _restart_vector(m, attempt):
    """Deterministic start without symmetry: golden-ratio sequence in [-1/2, 1)."""
    x = np.empty(m)
    a = 0.6180339887498949 * attempt
    for i in range(m):
        t = (i + 1) * 0.6180339887498949 + a
        x[i] = t - np.floor(t) + 0.5 * (i == 0) - 0.5
    return x


@njit(cache=True, nogil=True)
def inverse_iteration(d, e, shifts, cluster_gap, maxit):
    """Unit eigenvectors for ascending ``shifts`` by shifted inverse iteration.

    Returns ``(vectors, status)`` where ``vectors[j]`` belongs to shifts[j]
    and ``status[j]`` is the number of iterations used, or -1 if the residual
    bound was not reached within ``maxit`` iterations.
    """
    m = d.shape[0]
    nev = shifts.shape[0]
    vecs = np.zeros((nev, m))
    status = np.zeros(nev, dtype=np.int64)
    norm = 0.0
    for i in range(m):
        norm = max(norm, abs(d[i]))
    emax = 0.0
    for i in range(m - 1):
        emax = max(emax, abs(e[i]))
    bound = 1e-8 * (norm + 2.0 * emax)
    guard = 2.220446049250313e-16 * max(norm + 2.0 * emax, 1e-300)
    cluster_start = 0
    for j in range(nev):
        sigma = shifts[j]
        if j == 0 or shifts[j] - shifts[j - 1] > cluster_gap:
            cluster_start = j
        dd, dl, du, du2, swap = _factor_shifted(d, e, sigma, guard)
        x = np.ones(m)
        for it in range(maxit + 1):
            if it > 0 and it % _RESTART == 0:
                # the start may be orthogonal to the target (decoupled blocks)
                x = _restart_vector(m, it // _RESTART)
            for p in range(cluster_start, j):
                x -= np.dot(vecs[p], x) * vecs[p]
            nrm = np.sqrt(np.dot(x, x))
            if nrm == 0.0:
                x = _restart_vector(m, it + 1)
                for p in range(cluster_start, j):
                    x -= np.dot(vecs[p], x) * vecs[p]
                nrm = np.sqrt(np.dot(x, x))
            x /= nrm
            if it > 0 and _residual(d, e, sigma, x) <= bound:
                status[j] = it
                break
            if it == maxit:
                status[j] = -1
                break
            x = _solve_factored(dd, dl, du, du2, swap, x)
        if status[j] > 0:
            # the bound is loose when the scale is large; one more solve
            # removes the remaining contamination from nearby eigenvectors
            x = _solve_factored(dd, dl, du, du2, swap, x)
            for p in range(cluster_start, j):
                x -= np.dot(vecs[p], x) * vecs[p]
            nrm = np.sqrt(np.dot(x, x))
            if nrm > 0.0 and np.isfinite(nrm):
                x /= nrm
            else:
                status[j] = -1
        _fix_sign(x)
        vecs[j] = x
    return vecs, status
