"""Regression-tree growing and traversal kernels.

Two interchangeable backends: ``*_nb`` numba kernels and ``*_np`` numpy
paths. They consume the same pre-drawn uniforms, number nodes in the same
depth-first order and accumulate sums in the same sequence, so they grow
identical trees.

Split score for a node with target sum ``s`` over ``n`` samples is
``s**2 / (n + lam)``; the gain of a split is ``score(L) + score(R) -
score(parent)``. With ``lam = 0`` that is exactly the drop in squared error.
"""

import numpy as np

from aeromap import _accel

SPLIT_BEST = 0
SPLIT_RANDOM = 1


def max_nodes(n_samples, max_depth):
    bound = 2 * n_samples - 1
    if max_depth is not None and max_depth < 40:
        bound = min(bound, 2 ** (max_depth + 1) - 1)
    return max(bound, 1)


# ---------------------------------------------------------------- numba path

@_accel.njit(cache=True, nogil=True)
def _pick_features(u_row, p, k, out):
    perm = np.arange(p)
    for i in range(k):
        j = i + int(u_row[i] * (p - i))
        if j >= p:
            j = p - 1
        t = perm[i]
        perm[i] = perm[j]
        perm[j] = t
    sel = np.sort(perm[:k])
    for i in range(k):
        out[i] = sel[i]


@_accel.njit(cache=True, nogil=True)
def presort_nb(xc):
    p, n = xc.shape
    order = np.empty((p, n), dtype=np.int32)
    for f in range(p):
        order[f] = np.argsort(xc[f], kind="mergesort").astype(np.int32)
    return order


@_accel.njit(cache=True, nogil=True)
def _build_tree_nb(xc, g, root_order, mode, max_depth, min_leaf, lam, min_gain, k_feat,
                   feat_u, thr_u):
    p, n = xc.shape
    cap = feat_u.shape[0]
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)
    gain = np.zeros(cap)
    leaf_of = np.zeros(n, dtype=np.int64)

    # row 0 holds positions in sample order, rows 1..p positions sorted by each feature
    nord = p + 1 if mode == SPLIT_BEST else 1
    order = np.empty((nord, n), dtype=np.int32)
    for i in range(n):
        order[0, i] = i
    if mode == SPLIT_BEST:
        for f in range(p):
            for i in range(n):
                order[f + 1, i] = root_order[f, i]
    tmp = np.empty(n, dtype=np.int32)
    tmp_r = np.empty(n, dtype=np.int32)
    goes_left = np.zeros(n, dtype=np.int64)
    feats = np.empty(p, dtype=np.int64)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        m = end - start

        s_node = 0.0
        gmin = np.inf
        gmax = -np.inf
        for q in range(start, end):
            v = g[order[0, q]]
            s_node += v
            gmin = min(gmin, v)
            gmax = max(gmax, v)
        value[node] = s_node / (m + lam)
        count[node] = m

        parent = s_node * s_node / (m + lam)
        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        can_split = (depth < max_depth) and (m >= 2 * min_leaf) and (gmin < gmax)
        if can_split and node < cap:
            _pick_features(feat_u[node], p, k_feat, feats)
            for kk in range(k_feat):
                f = feats[kk]
                if mode == SPLIT_BEST:
                    row = f + 1
                    sl = 0.0
                    xb = xc[f, order[row, start]]
                    for q in range(start, end - 1):
                        sl += g[order[row, q]]
                        xa = xb
                        xb = xc[f, order[row, q + 1]]
                        nl = q - start + 1
                        nr = m - nl
                        if nl < min_leaf or nr < min_leaf:
                            continue
                        if not xa < xb:
                            continue
                        sr = s_node - sl
                        gn = sl * sl / (nl + lam) + sr * sr / (nr + lam) - parent
                        if gn > best_gain:
                            best_gain = gn
                            best_f = f
                            thr = (xa + xb) * 0.5
                            if thr >= xb:
                                thr = xa
                            best_thr = thr
                else:
                    lo = np.inf
                    hi = -np.inf
                    for q in range(start, end):
                        x = xc[f, order[0, q]]
                        lo = min(lo, x)
                        hi = max(hi, x)
                    if not lo < hi:
                        continue
                    thr = lo + thr_u[node, f] * (hi - lo)
                    if thr >= hi:
                        thr = lo
                    sl = 0.0
                    nl = 0
                    for q in range(start, end):
                        i = order[0, q]
                        if xc[f, i] <= thr:
                            sl += g[i]
                            nl += 1
                    nr = m - nl
                    if nl < min_leaf or nr < min_leaf:
                        continue
                    sr = s_node - sl
                    gn = sl * sl / (nl + lam) + sr * sr / (nr + lam) - parent
                    if gn > best_gain:
                        best_gain = gn
                        best_f = f
                        best_thr = thr

        if best_f < 0 or not best_gain * 0.5 > min_gain or n_nodes + 2 > cap:
            for q in range(start, end):
                leaf_of[order[0, q]] = node
            continue

        feature[node] = best_f
        threshold[node] = best_thr
        gain[node] = best_gain
        for q in range(start, end):
            i = order[0, q]
            goes_left[i] = xc[best_f, i] <= best_thr
        nl = 0
        # children at the depth limit never split, so only sample order is needed
        nrows = nord if depth + 1 < max_depth else 1
        for row in range(nrows):
            # branch-free stable partition: left run into tmp, right run into tmp_r
            a = start
            b = 0
            for q in range(start, end):
                i = order[row, q]
                gl = goes_left[i]
                tmp[a] = i
                tmp_r[b] = i
                a += gl
                b += 1 - gl
            nl = a - start
            for q in range(start, a):
                order[row, q] = tmp[q]
            for q in range(b):
                order[row, a + q] = tmp_r[q]

        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # push right first so the left subtree is grown first
        stack_node[top] = rnode
        stack_start[top] = start + nl
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = lnode
        stack_start[top] = start
        stack_end[top] = start + nl
        stack_depth[top] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), count[:n_nodes].copy(),
            gain[:n_nodes].copy(), leaf_of)


@_accel.njit(cache=True, nogil=True)
def _predict_sum_nb(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    out = np.zeros(n)
    for t in range(roots.shape[0]):
        root = roots[t]
        for r in range(n):
            node = root
            while feature[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[r] += value[node]
    return out


# ---------------------------------------------------------------- numpy path

def _pick_features_np(u_row, p, k):
    perm = np.arange(p)
    for i in range(k):
        j = min(i + int(u_row[i] * (p - i)), p - 1)
        perm[i], perm[j] = perm[j], perm[i]
    return np.sort(perm[:k])


def _build_tree_np(xc, g, root_order, mode, max_depth, min_leaf, lam, min_gain, k_feat,
                   feat_u, thr_u):
    p, n = xc.shape
    cap = feat_u.shape[0]
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)
    gain = np.zeros(cap)
    leaf_of = np.zeros(n, dtype=np.int64)
    Xs = xc.T
    gs = g

    stack = [(0, np.arange(n), 0)]
    n_nodes = 1
    while stack:
        node, pos, depth = stack.pop()
        m = pos.size
        gn_ = gs[pos]
        s_node = np.cumsum(gn_)[-1]
        value[node] = s_node / (m + lam)
        count[node] = m
        best_gain, best_f, best_thr = 0.0, -1, 0.0
        if depth < max_depth and m >= 2 * min_leaf and gn_.min() < gn_.max() and node < cap:
            feats = _pick_features_np(feat_u[node], p, k_feat)
            xn = Xs[pos][:, feats]
            if mode == SPLIT_BEST:
                o = np.argsort(xn, axis=0, kind="stable")
                xs = np.take_along_axis(xn, o, axis=0)
                cs = np.cumsum(gn_[o], axis=0)
                s = s_node
                nl = np.arange(1, m, dtype=np.float64)[:, None]
                nr = m - nl
                sl = cs[:-1]
                sr = s - sl
                with np.errstate(invalid="ignore", divide="ignore"):
                    gains = sl * sl / (nl + lam) + sr * sr / (nr + lam) - s * s / (m + lam)
                ok = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
                gains = np.where(ok, gains, -np.inf)
                for kk, f in enumerate(feats):
                    q = int(np.argmax(gains[:, kk]))
                    if gains[q, kk] > best_gain:
                        best_gain, best_f = gains[q, kk], int(f)
                        xa, xb = xs[q, kk], xs[q + 1, kk]
                        thr = (xa + xb) * 0.5
                        best_thr = xa if thr >= xb else thr
            else:
                s = s_node
                for kk, f in enumerate(feats):
                    col = xn[:, kk]
                    lo, hi = col.min(), col.max()
                    if not lo < hi:
                        continue
                    thr = lo + thr_u[node, f] * (hi - lo)
                    if thr >= hi:
                        thr = lo
                    mask = col <= thr
                    nl = int(mask.sum())
                    nr = m - nl
                    if nl < min_leaf or nr < min_leaf:
                        continue
                    sl = np.cumsum(gn_[mask])[-1]
                    sr = s - sl
                    gn = sl * sl / (nl + lam) + sr * sr / (nr + lam) - s * s / (m + lam)
                    if gn > best_gain:
                        best_gain, best_f, best_thr = gn, int(f), thr
        if best_f < 0 or not best_gain * 0.5 > min_gain or n_nodes + 2 > cap:
            leaf_of[pos] = node
            continue
        feature[node], threshold[node], gain[node] = best_f, best_thr, best_gain
        mask = Xs[pos, best_f] <= best_thr
        lnode, rnode = n_nodes, n_nodes + 1
        n_nodes += 2
        left[node], right[node] = lnode, rnode
        stack.append((rnode, pos[~mask], depth + 1))
        stack.append((lnode, pos[mask], depth + 1))
    k = n_nodes
    return (feature[:k], threshold[:k], left[:k], right[:k], value[:k], count[:k],
            gain[:k], leaf_of)


def _predict_sum_np(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    out = np.zeros(n)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            nd = node[active]
            go_left = X[rows[active], feature[nd]] <= threshold[nd]
            node[active] = np.where(go_left, left[nd], right[nd])
            active = feature[node] >= 0
        out += value[node]
    return out


# ---------------------------------------------------------------- dispatch

def sample_columns(X, sidx):
    """Feature-major copy of the sampled rows, the layout the builders read."""
    return np.ascontiguousarray(np.asarray(X, dtype=np.float64)[sidx].T)


def presort(xc):
    """Per-feature stable sort order of the sampled rows (numba path only)."""
    if _accel.USE_NUMBA:
        return presort_nb(xc)
    return None


def build_tree(xc, g, mode, max_depth, min_leaf, lam, min_gain, k_feat, feat_u, thr_u,
               root_order=None):
    """Grow one tree on feature-major data ``xc`` (p, n) with targets ``g`` (n,).

    Returns ``(feature, threshold, left, right, value, count, gain, leaf_of)``
    where ``leaf_of`` gives the leaf reached by each training position.
    """
    g = np.ascontiguousarray(g, dtype=np.float64)
    if _accel.USE_NUMBA:
        if mode == SPLIT_BEST and root_order is None:
            root_order = presort_nb(xc)
        elif mode != SPLIT_BEST:
            root_order = np.zeros((1, 1), dtype=np.int32)
        kernel = _build_tree_nb
    else:
        kernel = _build_tree_np
    return kernel(xc, g, root_order, int(mode), int(max_depth), int(min_leaf), float(lam),
                  float(min_gain), int(k_feat), np.ascontiguousarray(feat_u),
                  np.ascontiguousarray(thr_u))


def predict_sum(X, feature, threshold, left, right, value, roots):
    """Sum of the outputs of every tree rooted at ``roots`` (accumulated in order)."""
    args = (np.ascontiguousarray(X, dtype=np.float64), feature, threshold, left, right, value,
            np.ascontiguousarray(roots, dtype=np.int64))
    if _accel.USE_NUMBA:
        return _predict_sum_nb(*args)
    return _predict_sum_np(*args)
