"""Numba-compiled counting kernels.

Same contracts as :mod:`tailcop._kernels.numpy_impl`; see there for the
semantics.  The dm kernel replaces the broadcast count with a Fenwick
tree so each draw costs O(n + P log n) instead of O(n * P).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

FAMILY_ANEGLOG = 0
FAMILY_MIXED = 1


@njit(cache=True)
def count_pairs_leq(r2_by_r1, a, c):
    n = r2_by_r1.shape[0]
    P = a.shape[0]
    out = np.zeros(P, dtype=np.int64)
    for p in range(P):
        ap = min(a[p], n)
        cp = c[p]
        total = 0
        for j in range(ap):
            if r2_by_r1[j] <= cp:
                total += 1
        out[p] = total
    return out


@njit(cache=True)
def segment_sums(W, indptr, indices):
    B = W.shape[0]
    P = indptr.shape[0] - 1
    out = np.zeros((B, P))
    for b in range(B):
        for p in range(P):
            acc = 0.0
            for t in range(indptr[p], indptr[p + 1]):
                acc += W[b, indices[t]]
            out[b, p] = acc
    return out


@njit(cache=True)
def _fenwick_add(tree, i, value):
    # 1-based Fenwick tree over ranks
    while i < tree.shape[0]:
        tree[i] += value
        i += i & (-i)


@njit(cache=True)
def _fenwick_prefix(tree, i):
    acc = 0.0
    while i > 0:
        acc += tree[i]
        i -= i & (-i)
    return acc


@njit(cache=True)
def _mass_threshold(cums, q, total, n):
    if not np.isfinite(q):
        return n
    if q <= 0.0:
        return 0
    j = np.searchsorted(cums, q * total, side="left") + 1
    if j > n:
        j = n
    return j


@njit(cache=True)
def dm_weighted_counts(W, order1, order2, r1, r2, q1, q2):
    B, n = W.shape
    P = q1.shape[0]
    out = np.zeros((B, P))
    cums1 = np.empty(n)
    cums2 = np.empty(n)
    tree = np.empty(n + 1)
    j1 = np.empty(P, dtype=np.int64)
    j2 = np.empty(P, dtype=np.int64)
    for b in range(B):
        acc = 0.0
        for j in range(n):
            acc += W[b, order1[j]]
            cums1[j] = acc
        total = acc
        acc = 0.0
        for j in range(n):
            acc += W[b, order2[j]]
            cums2[j] = acc
        for p in range(P):
            j1[p] = _mass_threshold(cums1, q1[p], total, n)
            j2[p] = _mass_threshold(cums2, q2[p], total, n)
        # sweep points in first-rank order, answering queries sorted by j1
        qorder = np.argsort(j1, kind="mergesort")
        tree[:] = 0.0
        inserted = 0
        for t in range(P):
            p = qorder[t]
            while inserted < j1[p]:
                i = order1[inserted]
                _fenwick_add(tree, r2[i], W[b, i])
                inserted += 1
            if j2[p] > 0:
                out[b, p] = _fenwick_prefix(tree, j2[p])
    return out


@njit(cache=True)
def _occurrence_ranks_into(values, counts, ranks, n):
    # counting sort keyed by the original (distinct) rank values
    for v in range(n + 1):
        counts[v] = 0
    for j in range(n):
        counts[values[j]] += 1
    acc = 0
    for v in range(1, n + 1):
        prev = counts[v]
        counts[v] = acc
        acc += prev
    for j in range(n):
        counts[values[j]] += 1
        ranks[j] = counts[values[j]]


@njit(cache=True)
def resample_count_matrix(r1, r2, idx, a, c):
    B = idx.shape[0]
    n = r1.shape[0]
    P = a.shape[0]
    out = np.zeros((B, P), dtype=np.int64)
    amax = 0
    cmax = 0
    for p in range(P):
        if a[p] < n and c[p] < n:
            amax = max(amax, a[p])
            cmax = max(cmax, c[p])
    v1 = np.empty(n, dtype=np.int64)
    v2 = np.empty(n, dtype=np.int64)
    s1 = np.empty(n, dtype=np.int64)
    s2 = np.empty(n, dtype=np.int64)
    counts = np.empty(n + 1, dtype=np.int64)
    pref = np.zeros((amax + 1, cmax + 1), dtype=np.int64)
    for b in range(B):
        for j in range(n):
            v1[j] = r1[idx[b, j]]
            v2[j] = r2[idx[b, j]]
        _occurrence_ranks_into(v1, counts, s1, n)
        _occurrence_ranks_into(v2, counts, s2, n)
        if amax > 0 and cmax > 0:
            for u in range(amax + 1):
                for v in range(cmax + 1):
                    pref[u, v] = 0
            for j in range(n):
                if s1[j] <= amax and s2[j] <= cmax:
                    pref[s1[j], s2[j]] += 1
            for u in range(1, amax + 1):
                for v in range(cmax + 1):
                    pref[u, v] += pref[u - 1, v]
            for u in range(amax + 1):
                for v in range(1, cmax + 1):
                    pref[u, v] += pref[u, v - 1]
        for p in range(P):
            ap = a[p]
            cp = c[p]
            if ap >= n:
                out[b, p] = min(cp, n)
            elif cp >= n:
                out[b, p] = ap
            elif ap == 0 or cp == 0:
                out[b, p] = 0
            else:
                out[b, p] = pref[ap, cp]
    return out


@njit(cache=True)
def _ev_conditional_cdf(a, b, family, theta, p1, p2):
    if b == np.inf:
        return 0.0
    if family == FAMILY_ANEGLOG:
        if b <= 0.0:
            return 1.0
        s = (p1 * a) ** -theta + (p2 * b) ** -theta
        lam = s ** (-1.0 / theta)
        d1 = p1 * (lam / (p1 * a)) ** (1.0 + theta)
    else:
        lam = theta * a * b / (a + b)
        d1 = theta * b * b / (a + b) ** 2
    return math.exp(lam - b) * (1.0 - d1)


@njit(cache=True)
def ev_conditional_quantile(u, p, family, theta, p1, p2):
    n = u.shape[0]
    out = np.empty(n)
    for i in range(n):
        a = -math.log(u[i])
        lo = 0.0
        hi = 1.0
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            h = _ev_conditional_cdf(a, -math.log(mid), family, theta, p1, p2)
            if h < p[i]:
                lo = mid
            else:
                hi = mid
        out[i] = 0.5 * (lo + hi)
    return out
