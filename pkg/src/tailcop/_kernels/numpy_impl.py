"""Pure NumPy implementations of the hot counting kernels.

These are the reference semantics; the numba backend mirrors them loop
for loop.  All rank arrays are 1-based permutations of ``1..n`` and all
thresholds arrive pre-clipped to ``[0, n]`` (an infinite coordinate is
encoded as threshold ``n``, which drops the constraint).
"""

from __future__ import annotations

import numpy as np

FAMILY_ANEGLOG = 0
FAMILY_MIXED = 1


def count_pairs_leq(r2_by_r1, a, c):
    """Count points with rank1 <= a[p] and rank2 <= c[p].

    ``r2_by_r1[j]`` is the second-coordinate rank of the point whose
    first-coordinate rank is ``j + 1``.
    """
    n = r2_by_r1.shape[0]
    out = np.empty(a.shape[0], dtype=np.int64)
    for p in range(a.shape[0]):
        ap = min(int(a[p]), n)
        out[p] = np.count_nonzero(r2_by_r1[:ap] <= c[p]) if ap > 0 else 0
    return out


def segment_sums(W, indptr, indices):
    """Row sums of W over index segments: S[b, p] = sum W[b, indices of p]."""
    B = W.shape[0]
    P = indptr.shape[0] - 1
    out = np.zeros((B, P))
    for p in range(P):
        idx = indices[indptr[p]: indptr[p + 1]]
        if idx.shape[0]:
            out[:, p] = W[:, idx].sum(axis=1)
    return out


def dm_weighted_counts(W, order1, order2, r1, r2, q1, q2):
    """Weighted pair counts with per-draw weighted-quantile thresholds.

    For draw ``b`` and point ``p`` this computes

        sum_i W[b,i] * 1{rank1_i <= j1, rank2_i <= j2}

    where ``j1`` is the smallest rank at which the weighted empirical mass
    of the first coordinate reaches ``q1[p]`` (a fraction of the total
    weight), and similarly for ``j2``.  A non-finite ``q`` drops the
    constraint; ``q <= 0`` empties it.
    """
    B, n = W.shape
    P = q1.shape[0]
    out = np.zeros((B, P))
    for b in range(B):
        w = W[b]
        cums1 = np.cumsum(w[order1])
        cums2 = np.cumsum(w[order2])
        total = cums1[-1]
        j1 = _mass_thresholds(cums1, q1, total, n)
        j2 = _mass_thresholds(cums2, q2, total, n)
        keep1 = r1[None, :] <= j1[:, None]
        keep2 = r2[None, :] <= j2[:, None]
        out[b] = (keep1 & keep2) @ w
    return out


def _mass_thresholds(cums, q, total, n):
    j = np.empty(q.shape[0], dtype=np.int64)
    for p in range(q.shape[0]):
        if not np.isfinite(q[p]):
            j[p] = n
        elif q[p] <= 0.0:
            j[p] = 0
        else:
            j[p] = np.searchsorted(cums, q[p] * total, side="left") + 1
            if j[p] > n:
                j[p] = n
    return j


def resample_count_matrix(r1, r2, idx, a, c):
    """Pair counts after resampling with replacement.

    ``idx[b]`` lists the original row indices drawn for resample ``b``.
    Within each resample, ties (rows drawn more than once) are ranked in
    order of occurrence, so the resample ranks are again a permutation of
    ``1..n``.
    """
    B = idx.shape[0]
    n = r1.shape[0]
    P = a.shape[0]
    out = np.empty((B, P), dtype=np.int64)
    finite = (a < n) & (c < n)
    amax = int(a[finite].max()) if finite.any() else 0
    cmax = int(c[finite].max()) if finite.any() else 0
    for b in range(B):
        s1 = _occurrence_ranks(r1[idx[b]])
        s2 = _occurrence_ranks(r2[idx[b]])
        if amax and cmax:
            small = (s1 <= amax) & (s2 <= cmax)
            hist = np.zeros((amax + 1, cmax + 1), dtype=np.int64)
            np.add.at(hist, (s1[small], s2[small]), 1)
            pref = hist.cumsum(axis=0).cumsum(axis=1)
        for p in range(P):
            ap, cp = int(a[p]), int(c[p])
            if ap >= n:
                out[b, p] = min(cp, n)
            elif cp >= n:
                out[b, p] = ap
            elif ap == 0 or cp == 0:
                out[b, p] = 0
            else:
                out[b, p] = pref[ap, cp]
    return out


def _occurrence_ranks(values):
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0], dtype=np.int64)
    ranks[order] = np.arange(1, values.shape[0] + 1)
    return ranks


def ev_conditional_quantile(u, p, family, theta, p1, p2):
    """Invert the conditional CDF of an extreme-value copula.

    Solves H(v | u) = p for v, where H is the partial derivative in u of
    ``C(u, v) = exp(-l(-log u, -log v))`` and ``l(x) = x1 + x2 - L(x)``.
    Sixty-four bisection steps pin v well below the 1e-10 tolerance.
    """
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    a = -np.log(u)
    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        h = _ev_conditional_cdf(a, -np.log(mid), family, theta, p1, p2)
        take = h < p
        lo = np.where(take, mid, lo)
        hi = np.where(take, hi, mid)
    return 0.5 * (lo + hi)


def _ev_conditional_cdf(a, b, family, theta, p1, p2):
    # H(v | u) = exp(L(a, b) - b) * (1 - dL/da), with a = -log u, b = -log v
    if family == FAMILY_ANEGLOG:
        with np.errstate(over="ignore"):
            s = (p1 * a) ** -theta + (p2 * b) ** -theta
        lam = s ** (-1.0 / theta)
        with np.errstate(divide="ignore", over="ignore"):
            d1 = p1 * (lam / (p1 * a)) ** (1.0 + theta)
    else:
        lam = theta * a * b / (a + b)
        d1 = theta * b * b / (a + b) ** 2
    h = np.exp(lam - b) * (1.0 - d1)
    return np.where(np.isinf(b), 0.0, h)
