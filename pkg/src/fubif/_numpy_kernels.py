"""Pure-numpy counterparts of the numba kernels.

Same signatures and outputs as ``_kernels``; work is vectorised per tree
node rather than per point. The random draws happen in the same order, so
for families whose values are exact copies of coordinates the two backends
grow identical trees.
"""
from __future__ import annotations

import numpy as np

from .splitting import (
    SplitFamilyDescriptor,
    compute_range,
    evaluate_batch,
    gradient_batch,
    sample_params,
)
from .threshold import ThresholdKind, fit_threshold_model, sample_threshold

GRAD_EPS = 1e-18


def influence_batch(desc: SplitFamilyDescriptor, params, X) -> np.ndarray:
    g = gradient_batch(desc, params, X)
    sq = g * g
    total = np.sum(sq, axis=1)
    flat = total < GRAD_EPS
    out = sq / np.where(flat, 1.0, total)[:, None]
    out[flat] = 1.0 / X.shape[1]
    return out


def build_tree(Xs, desc: SplitFamilyDescriptor, kind: ThresholdKind, eta: float,
               max_depth: int, max_attempts: int, rng: np.random.Generator):
    n, d = Xs.shape
    n_params = max(desc.param_len(d), 1)
    left, right, size, thr, params = [], [], [], [], []

    def grow(idx, depth):
        node = len(size)
        left.append(-1)
        right.append(-1)
        size.append(len(idx))
        thr.append(np.nan)
        params.append(np.zeros(n_params))
        m = len(idx)
        if m <= 1 or depth >= max_depth:
            return node
        Y = Xs[idx]
        bounds = compute_range(Y) if desc.needs_range else None
        for _ in range(max_attempts):
            p = sample_params(desc, Y, rng, bounds=bounds)
            vals = evaluate_batch(desc, p, Y)
            model = fit_threshold_model(vals, kind, eta)
            if model.degenerate:
                continue
            tau = sample_threshold(model, rng)
            go_left = vals <= tau
            nl = int(go_left.sum())
            if kind is ThresholdKind.UNIFORM and (nl == 0 or nl == m):
                continue
            thr[node] = tau
            params[node][:p.size] = p
            left[node] = grow(idx[go_left], depth + 1)
            right[node] = grow(idx[~go_left], depth + 1)
            return node
        return node

    grow(np.arange(n), 0)
    return (np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
            np.array(size, dtype=np.int64), np.array(thr, dtype=np.float64),
            np.array(params, dtype=np.float64).reshape(len(size), n_params))


def path_lengths(left, right, size, thr, params, desc, c_table, X, depth):
    n = X.shape[0]
    out = np.empty(n)
    members = {0: np.arange(n)}
    for node in range(left.shape[0]):
        rows = members.pop(node, None)
        if rows is None or rows.size == 0:
            continue
        if left[node] < 0:
            out[rows] = depth[node] + c_table[size[node]]
            continue
        go_left = evaluate_batch(desc, params[node], X[rows]) <= thr[node]
        members[left[node]] = rows[go_left]
        members[right[node]] = rows[~go_left]
    return out


def influence_table(left, right, thr, params, desc, train):
    n_nodes = left.shape[0]
    d = train.shape[1]
    table = np.zeros((n_nodes, d))
    counts = np.zeros(n_nodes, dtype=np.int64)
    members = {0: np.arange(train.shape[0])}
    for node in range(n_nodes):
        rows = members.pop(node, None)
        if rows is None or rows.size == 0 or left[node] < 0:
            continue
        pts = train[rows]
        go_left = evaluate_batch(desc, params[node], pts) <= thr[node]
        infl = influence_batch(desc, params[node], pts)
        for child, mask in ((left[node], go_left), (right[node], ~go_left)):
            members[child] = rows[mask]
            counts[child] = int(mask.sum())
            if counts[child]:
                table[child] = infl[mask].mean(axis=0)
    return table, counts


def tree_importance(left, right, size, thr, params, desc, table, counts, X):
    n, d = X.shape
    out = np.zeros((n, d))
    plen = np.zeros(n)
    members = {0: np.arange(n)}
    for node in range(left.shape[0]):
        rows = members.pop(node, None)
        if rows is None or rows.size == 0 or left[node] < 0:
            continue
        go_left = evaluate_batch(desc, params[node], X[rows]) <= thr[node]
        for child, mask in ((left[node], go_left), (right[node], ~go_left)):
            sub = rows[mask]
            members[child] = sub
            if sub.size == 0:
                continue
            weight = size[node] / (size[child] + 1.0)
            if counts[child] > 0:
                out[sub] += weight * table[child]
            else:
                out[sub] += weight * influence_batch(desc, params[node], X[sub])
            plen[sub] += 1
    walked = plen > 0
    out[walked] /= plen[walked, None]
    return out
