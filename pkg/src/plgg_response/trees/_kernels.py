"""Compiled kernels: exact greedy tree growth, boosting loop, prediction, TreeSHAP.

Trees are stored as flat arrays indexed by node id (root = 0). Leaves have
``feature == -1``. Rows go left when ``x[feature] < threshold``.
"""
import numba
import numpy as np


@numba.njit(cache=True)
def _soft_threshold(G, alpha):
    if G > alpha:
        return G - alpha
    if G < -alpha:
        return G + alpha
    return 0.0


@numba.njit(cache=True)
def _score(G, H, lam, alpha):
    denom = H + lam
    if denom <= 0.0:
        return 0.0
    t = _soft_threshold(G, alpha)
    return t * t / denom


@numba.njit(cache=True)
def leaf_weight(G, H, lam, alpha):
    denom = H + lam
    if denom <= 0.0:
        return 0.0
    return -_soft_threshold(G, alpha) / denom


@numba.njit(cache=True)
def build_tree(X, order, g, h, in_sample, use_col, max_depth, min_child_weight, lam, alpha, gamma,
               feature, threshold, left, right, value, cover, gain):
    """Grow one tree level by level; fills the output arrays, returns the node count.

    Candidate thresholds are midpoints between consecutive distinct values.
    Ties in gain keep the lowest feature index, then the lowest threshold.
    """
    n, F = X.shape
    cap = feature.shape[0]
    for i in range(cap):
        feature[i] = -1
        left[i] = -1
        right[i] = -1
        threshold[i] = 0.0
        value[i] = 0.0
        cover[i] = 0.0
        gain[i] = 0.0
    Gn = np.zeros(cap)
    Hn = np.zeros(cap)
    node_of = np.full(n, -1, dtype=np.int64)
    for r in range(n):
        if in_sample[r]:
            node_of[r] = 0
            Gn[0] += g[r]
            Hn[0] += h[r]
    n_nodes = 1
    lo, hi = 0, 1
    best_gain = np.zeros(cap)
    best_feat = np.full(cap, -1, dtype=np.int64)
    best_thr = np.zeros(cap)
    GL = np.zeros(cap)
    HL = np.zeros(cap)
    last = np.zeros(cap)
    seen = np.zeros(cap, dtype=np.bool_)
    open_node = np.zeros(cap, dtype=np.bool_)

    # per used feature: rows still in play, in sorted order
    cols = np.empty(F, dtype=np.int64)
    n_cols = 0
    for f in range(F):
        if use_col[f]:
            cols[n_cols] = f
            n_cols += 1
    active = np.empty((n_cols, n), dtype=np.int64)
    active_val = np.empty((n_cols, n))
    n_active = 0
    for c in range(n_cols):
        m = 0
        for t in range(n):
            r = order[cols[c], t]
            if node_of[r] >= 0:
                active[c, m] = r
                active_val[c, m] = X[r, cols[c]]
                m += 1
        n_active = m
    parent_score = np.zeros(cap)

    for depth in range(max_depth):
        any_open = False
        for nd in range(lo, hi):
            best_gain[nd] = 0.0
            best_feat[nd] = -1
            # both children need min_child_weight and a node needs two rows
            open_node[nd] = Hn[nd] >= 2.0 * min_child_weight and Hn[nd] > 0.0
            parent_score[nd] = _score(Gn[nd], Hn[nd], lam, alpha)
            any_open = any_open or open_node[nd]
        if not any_open:
            break
        if depth > 0:
            for c in range(n_cols):
                m = 0
                for t in range(n_active):
                    r = active[c, t]
                    nd = node_of[r]
                    if nd >= lo and open_node[nd]:
                        active[c, m] = r
                        active_val[c, m] = active_val[c, t]
                        m += 1
            n_active = m
        for c in range(n_cols):
            f = cols[c]
            for nd in range(lo, hi):
                GL[nd] = 0.0
                HL[nd] = 0.0
                seen[nd] = False
            for t in range(n_active):
                r = active[c, t]
                nd = node_of[r]
                if not open_node[nd]:
                    continue
                v = active_val[c, t]
                if seen[nd] and v != last[nd]:
                    hl = HL[nd]
                    hr = Hn[nd] - hl
                    if hl >= min_child_weight and hr >= min_child_weight:
                        gl = GL[nd]
                        gr = Gn[nd] - gl
                        gn = 0.5 * (_score(gl, hl, lam, alpha) + _score(gr, hr, lam, alpha)
                                    - parent_score[nd]) - gamma
                        if gn > best_gain[nd]:
                            best_gain[nd] = gn
                            best_feat[nd] = f
                            thr = 0.5 * (last[nd] + v)
                            if thr <= last[nd]:
                                thr = v
                            best_thr[nd] = thr
                GL[nd] += g[r]
                HL[nd] += h[r]
                last[nd] = v
                seen[nd] = True
        first_child = n_nodes
        for nd in range(lo, hi):
            if best_feat[nd] >= 0:
                feature[nd] = best_feat[nd]
                threshold[nd] = best_thr[nd]
                gain[nd] = best_gain[nd]
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                n_nodes += 2
        if n_nodes == first_child:
            break
        for r in range(n):
            nd = node_of[r]
            if nd >= lo and nd < hi and feature[nd] >= 0:
                if X[r, feature[nd]] < threshold[nd]:
                    child = left[nd]
                else:
                    child = right[nd]
                node_of[r] = child
                Gn[child] += g[r]
                Hn[child] += h[r]
        lo, hi = first_child, n_nodes
    for nd in range(n_nodes):
        cover[nd] = Hn[nd]
        if feature[nd] < 0:
            value[nd] = leaf_weight(Gn[nd], Hn[nd], lam, alpha)
    return n_nodes


@numba.njit(cache=True)
def predict_tree(X, feature, threshold, left, right, value, out, scale):
    """``out += scale * tree(X)``."""
    for r in range(X.shape[0]):
        nd = 0
        while feature[nd] >= 0:
            if X[r, feature[nd]] < threshold[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[r] += scale * value[nd]


@numba.njit(cache=True)
def _log_loss(margin, y):
    total = 0.0
    for i in range(margin.shape[0]):
        m = margin[i]
        # log(1 + exp(-m)) for y=1, log(1 + exp(m)) for y=0, computed stably
        z = m if y[i] == 0 else -m
        if z > 0:
            total += z + np.log1p(np.exp(-z))
        else:
            total += np.log1p(np.exp(z))
    return total / margin.shape[0]


@numba.njit(cache=True)
def boost(X, y, order, row_masks, col_masks, base_margin, learning_rate, max_depth,
          min_child_weight, lam, alpha, gamma,
          feature, threshold, left, right, value, cover, gain, n_nodes, losses):
    """Second-order boosting with logistic loss; tree ``t`` fills row ``t`` of the outputs."""
    n = X.shape[0]
    margin = np.full(n, base_margin)
    g = np.empty(n)
    h = np.empty(n)
    losses[0] = _log_loss(margin, y)
    for t in range(row_masks.shape[0]):
        for i in range(n):
            p = 1.0 / (1.0 + np.exp(-margin[i]))
            g[i] = p - y[i]
            h[i] = p * (1.0 - p)
        n_nodes[t] = build_tree(X, order, g, h, row_masks[t], col_masks[t], max_depth,
                                min_child_weight, lam, alpha, gamma,
                                feature[t], threshold[t], left[t], right[t], value[t],
                                cover[t], gain[t])
        predict_tree(X, feature[t], threshold[t], left[t], right[t], value[t], margin, learning_rate)
        losses[t + 1] = _log_loss(margin, y)


# ------------------------------------------------------------------ TreeSHAP


@numba.njit(cache=True)
def _extend_path(feat, zero, one, pw, depth, zero_fraction, one_fraction, feature_index):
    feat[depth] = feature_index
    zero[depth] = zero_fraction
    one[depth] = one_fraction
    pw[depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[i + 1] += one_fraction * pw[i] * (i + 1) / (depth + 1)
        pw[i] = zero_fraction * pw[i] * (depth - i) / (depth + 1)


@numba.njit(cache=True)
def _unwind_path(feat, zero, one, pw, depth, path_index):
    one_fraction = one[path_index]
    zero_fraction = zero[path_index]
    next_one = pw[depth]
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = pw[i]
            pw[i] = next_one * (depth + 1) / ((i + 1) * one_fraction)
            next_one = tmp - pw[i] * zero_fraction * (depth - i) / (depth + 1)
        else:
            pw[i] = pw[i] * (depth + 1) / (zero_fraction * (depth - i))
    for i in range(path_index, depth):
        feat[i] = feat[i + 1]
        zero[i] = zero[i + 1]
        one[i] = one[i + 1]


@numba.njit(cache=True)
def _unwound_path_sum(feat, zero, one, pw, depth, path_index):
    one_fraction = one[path_index]
    zero_fraction = zero[path_index]
    next_one = pw[depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = next_one * (depth + 1) / ((i + 1) * one_fraction)
            total += tmp
            next_one = pw[i] - tmp * zero_fraction * (depth - i) / (depth + 1)
        else:
            total += (pw[i] / zero_fraction) / ((depth - i) / (depth + 1))
    return total


# recursive kernels are not cached: numba's on-disk cache mishandles self-recursion
@numba.njit
def _shap_recurse(x, feature, threshold, left, right, value, cover, phi, node, depth,
                  p_feat, p_zero, p_one, p_pw, parent_zero, parent_one, parent_feature, offset):
    # each recursion level copies the path into its own segment of the scratch buffers
    new_offset = offset + depth + 1
    feat = p_feat[new_offset:]
    zero = p_zero[new_offset:]
    one = p_one[new_offset:]
    pw = p_pw[new_offset:]
    for i in range(depth):
        feat[i] = p_feat[offset + i]
        zero[i] = p_zero[offset + i]
        one[i] = p_one[offset + i]
        pw[i] = p_pw[offset + i]
    _extend_path(feat, zero, one, pw, depth, parent_zero, parent_one, parent_feature)

    if feature[node] < 0:
        for i in range(1, depth + 1):
            w = _unwound_path_sum(feat, zero, one, pw, depth, i)
            phi[feat[i]] += w * (one[i] - zero[i]) * value[node]
        return

    split = feature[node]
    if x[split] < threshold[node]:
        hot, cold = left[node], right[node]
    else:
        hot, cold = right[node], left[node]
    w = cover[node]
    hot_zero = cover[hot] / w if w > 0 else 0.0
    cold_zero = cover[cold] / w if w > 0 else 0.0
    incoming_zero = 1.0
    incoming_one = 1.0
    path_index = 0
    while path_index <= depth:
        if feat[path_index] == split:
            break
        path_index += 1
    if path_index != depth + 1:
        incoming_zero = zero[path_index]
        incoming_one = one[path_index]
        _unwind_path(feat, zero, one, pw, depth, path_index)
        depth -= 1
    if hot_zero * incoming_zero > 0 or incoming_one > 0:
        _shap_recurse(x, feature, threshold, left, right, value, cover, phi, hot, depth + 1,
                      p_feat, p_zero, p_one, p_pw, hot_zero * incoming_zero, incoming_one, split,
                      new_offset)
    if cold_zero * incoming_zero > 0:
        _shap_recurse(x, feature, threshold, left, right, value, cover, phi, cold, depth + 1,
                      p_feat, p_zero, p_one, p_pw, cold_zero * incoming_zero, 0.0, split,
                      new_offset)


@numba.njit
def tree_shap(x, feature, threshold, left, right, value, cover, max_depth, phi):
    """Add the path-dependent Shapley values of one tree at ``x`` into ``phi``."""
    size = (max_depth + 2) * (max_depth + 3) // 2 + max_depth + 3
    p_feat = np.zeros(size, dtype=np.int64)
    p_zero = np.zeros(size)
    p_one = np.zeros(size)
    p_pw = np.zeros(size)
    _shap_recurse(x, feature, threshold, left, right, value, cover, phi, 0, 0,
                  p_feat, p_zero, p_one, p_pw, 1.0, 1.0, -1, 0)


@numba.njit(cache=True)
def expected_value(feature, left, right, value, cover, n_nodes):
    """Cover-weighted mean leaf value."""
    total = 0.0
    for nd in range(n_nodes):
        if feature[nd] < 0:
            total += value[nd] * cover[nd]
    return total / cover[0] if cover[0] > 0 else 0.0
