"""Compiled kernels for growing and evaluating weighted Gini trees.

Features arrive rank-encoded: ``codes[i, f]`` indexes ``uniq[f, :nuniq[f]]``,
the sorted distinct values of column f. A node scans a feature with a weighted
histogram over codes when the feature has fewer distinct values than the
node has rows, and by sorting otherwise. Both scans visit the same candidate
thresholds in the same ascending order.
"""

import numpy as np
from numba import njit

# Relative slack under which two split qualities count as tied.
_TIE_EPS = 1e-12


def encode(X):
    """Rank-encode the columns of X; returns (codes, uniq, nuniq)."""
    n, d = X.shape
    columns = [np.unique(X[:, f]) for f in range(d)]
    nuniq = np.array([len(c) for c in columns], dtype=np.int64)
    uniq = np.zeros((d, max(int(nuniq.max(initial=1)), 1)))
    codes = np.empty((n, d), dtype=np.int64)
    for f, col in enumerate(columns):
        uniq[f, : len(col)] = col
        codes[:, f] = np.searchsorted(col, X[:, f])
    return codes, uniq, nuniq


@njit(cache=True, nogil=True)
def _midpoint(lo, hi):
    t = 0.5 * (lo + hi)
    if t >= hi:
        t = lo
    return t


@njit(cache=True, nogil=True)
def best_split(codes, uniq, nuniq, y, w, rows, features, min_leaf, hw, hp, hc):
    """Best (feature, threshold code, threshold) for the node holding ``rows``.

    Minimizes the weighted child impurity ``sum_c P_c (W_c - P_c) / W_c``
    (proportional to weighted Gini). Features are scanned in ascending index
    order and thresholds in ascending order; a candidate replaces the incumbent
    only when strictly better, so ties go to the lowest feature, then the
    lowest threshold. Feature -1 means no split improves the node. The split
    sends codes ``<= code`` left. ``hw``, ``hp``, ``hc`` are scratch buffers.
    """
    m = rows.shape[0]
    W = 0.0
    P = 0.0
    for r in rows:
        W += w[r]
        P += w[r] * y[r]
    best = P * (W - P) / W - _TIE_EPS * W
    best_f = -1
    best_c = -1
    for f in features:
        k = nuniq[f]
        if k < 2:
            continue
        if k <= m:
            for c in range(k):
                hw[c] = 0.0
                hp[c] = 0.0
                hc[c] = 0
            for r in rows:
                c = codes[r, f]
                hw[c] += w[r]
                hp[c] += w[r] * y[r]
                hc[c] += 1
            wl = 0.0
            pl = 0.0
            nl = 0
            prev = -1
            for c in range(k):
                if hc[c] == 0:
                    continue
                if prev >= 0 and nl >= min_leaf and m - nl >= min_leaf:
                    wr = W - wl
                    pr = P - pl
                    imp = pl * (wl - pl) / wl + pr * (wr - pr) / wr
                    if imp < best - _TIE_EPS * W:
                        best = imp
                        best_f = f
                        best_c = prev
                wl += hw[c]
                pl += hp[c]
                nl += hc[c]
                prev = c
        else:
            vals = np.empty(m, np.int64)
            for i in range(m):
                vals[i] = codes[rows[i], f]
            order = np.argsort(vals, kind="mergesort")
            wl = 0.0
            pl = 0.0
            for i in range(m - min_leaf):
                r = rows[order[i]]
                wl += w[r]
                pl += w[r] * y[r]
                if i + 1 < min_leaf:
                    continue
                if vals[order[i]] == vals[order[i + 1]]:
                    continue
                wr = W - wl
                pr = P - pl
                imp = pl * (wl - pl) / wl + pr * (wr - pr) / wr
                if imp < best - _TIE_EPS * W:
                    best = imp
                    best_f = f
                    best_c = vals[order[i]]
    if best_f < 0:
        return -1, -1, 0.0
    # threshold sits halfway to the next value present in the node
    nxt = nuniq[best_f]
    for r in rows:
        c = codes[r, best_f]
        if c > best_c and c < nxt:
            nxt = c
    return best_f, best_c, _midpoint(uniq[best_f, best_c], uniq[best_f, nxt])


@njit(cache=True, nogil=True)
def grow(codes, uniq, nuniq, y, w, min_leaf, n_sub, keys):
    """Grow one tree depth-first.

    ``keys[k]`` is a row of random numbers used to pick the ``n_sub``
    candidate features at node k. Returns the node arrays (feature,
    threshold, left, right, value) trimmed to the nodes used.
    """
    n = codes.shape[0]
    cap = keys.shape[0]
    kmax = uniq.shape[1]
    hw = np.empty(kmax)
    hp = np.empty(kmax)
    hc = np.empty(kmax, np.int64)
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)

    idx = np.arange(n)
    buf = np.empty(n, np.int64)
    stack_node = np.empty(cap, np.int64)
    stack_lo = np.empty(cap, np.int64)
    stack_hi = np.empty(cap, np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        rows = idx[lo:hi]
        W = 0.0
        P = 0.0
        for r in rows:
            W += w[r]
            P += w[r] * y[r]
        value[node] = P / W
        if hi - lo < 2 * min_leaf or P <= 0.0 or P >= W or n_nodes + 2 > cap:
            continue
        feats = np.sort(np.argsort(keys[node])[:n_sub])
        f, c, t = best_split(codes, uniq, nuniq, y, w, rows, feats, min_leaf, hw, hp, hc)
        if f < 0:
            continue
        # stable partition, left rows first
        m = hi - lo
        for i in range(m):
            buf[i] = rows[i]
        mid = lo
        for i in range(m):
            if codes[buf[i], f] <= c:
                idx[mid] = buf[i]
                mid += 1
        a = mid
        for i in range(m):
            if codes[buf[i], f] > c:
                idx[a] = buf[i]
                a += 1
        feature[node] = f
        threshold[node] = t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes + 1
        stack_lo[top] = mid
        stack_hi[top] = hi
        top += 1
        stack_node[top] = n_nodes
        stack_lo[top] = lo
        stack_hi[top] = mid
        top += 1
        n_nodes += 2
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True, nogil=True)
def apply(feature, threshold, left, right, value, roots, X):
    """Mean leaf value over the trees rooted at ``roots`` (packed node arrays)."""
    out = np.zeros(X.shape[0])
    for i in range(X.shape[0]):
        total = 0.0
        for root in roots:
            node = root
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            total += value[node]
        out[i] = total / roots.shape[0]
    return out
