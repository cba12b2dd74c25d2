"""numba kernels for tree construction, traversal and importance.

Family codes follow ``Family`` declaration order. Parameter rows use the
flat layout of :func:`fubif.splitting.param_layout`; ``widths`` carries the
NN hidden widths (empty for other families).

Kernels address points and parameter rows by index (``X[i, j]``,
``P[k, j]``) rather than slicing row views; creating views in the inner
loops costs several times the arithmetic.

Sampling here must consume the Generator in exactly the order used by
:func:`fubif.splitting.sample_params`.
"""
import math

import numpy as np
from numba import njit

IF, EIF, HIF, ELLIPSE, HYPER, PARA, QUAD, NN, SINE = range(9)
UNIFORM, NORMAL = 0, 1
RADIAL_EPS = 1e-12
GRAD_EPS = 1e-18


@njit(cache=True)
def scratch(widths, d):
    """Work buffers for NN evaluation/gradients: (acts, up, down)."""
    wmax = max(d, 1)
    for k in range(widths.shape[0]):
        wmax = max(wmax, widths[k])
    return np.zeros((max(widths.shape[0], 1), wmax)), np.zeros(wmax), np.zeros(wmax)


@njit(cache=True)
def _dist(P, k, off, X, i):
    d = X.shape[1]
    s = 0.0
    for j in range(d):
        t = X[i, j] - P[k, off + j]
        s += t * t
    return math.sqrt(s)


@njit(cache=True)
def _nn_forward(P, k, X, i, widths, acts):
    d = X.shape[1]
    pos = 0
    n_in = d
    for layer in range(widths.shape[0]):
        w = widths[layer]
        bpos = pos + w * n_in
        for r in range(w):
            z = P[k, bpos + r]
            base = pos + r * n_in
            if layer == 0:
                for c in range(n_in):
                    z += P[k, base + c] * X[i, c]
            else:
                for c in range(n_in):
                    z += P[k, base + c] * acts[layer - 1, c]
            acts[layer, r] = math.tanh(z)
        pos = bpos + w
        n_in = w
    last = widths.shape[0] - 1
    out = P[k, pos + n_in]
    for c in range(n_in):
        out += P[k, pos + c] * acts[last, c]
    return out


@njit(cache=True)
def evaluate_node(code, P, k, X, idx, start, end, widths, acts, out):
    """out[t] = f(X[idx[t]]) for t in [start, end), f stored in row P[k].

    The family branch is taken once per node; the loops inside each branch
    are small enough for LLVM to inline and vectorise.
    """
    d = X.shape[1]
    if code == IF:
        f = int(P[k, 0])
        for t in range(start, end):
            out[t] = X[idx[t], f]
    elif code == EIF:
        for t in range(start, end):
            i = idx[t]
            s = 0.0
            for j in range(d):
                s += P[k, j] * X[i, j]
            out[t] = s
    elif code == HIF:
        for t in range(start, end):
            i = idx[t]
            s = 0.0
            for j in range(d):
                u = X[i, j] - P[k, j]
                s += u * u
            out[t] = s
    elif code == ELLIPSE:
        for t in range(start, end):
            out[t] = _dist(P, k, 0, X, idx[t]) + _dist(P, k, d, X, idx[t])
    elif code == HYPER:
        for t in range(start, end):
            out[t] = _dist(P, k, 0, X, idx[t]) - _dist(P, k, d, X, idx[t])
    elif code == PARA:
        for t in range(start, end):
            i = idx[t]
            s = 0.0
            for j in range(d):
                s += P[k, d + j] * X[i, j]
            out[t] = _dist(P, k, 0, X, i) + s
    elif code == QUAD:
        for t in range(start, end):
            i = idx[t]
            q = 0.0
            for a in range(d):
                row = 0.0
                for b in range(d):
                    row += (P[k, a * d + b] + P[k, b * d + a]) * X[i, b]
                q += X[i, a] * row
            s = 0.0
            for j in range(d):
                s += P[k, d * d + j] * X[i, j]
            out[t] = q + s
    elif code == NN:
        for t in range(start, end):
            out[t] = _nn_forward(P, k, X, idx[t], widths, acts)
    else:
        for t in range(start, end):
            out[t] = X[idx[t], 1] - math.sin(X[idx[t], 0])


@njit(cache=True)
def _radial(P, k, off, X, i, sign, g):
    r = _dist(P, k, off, X, i)
    if r < RADIAL_EPS:
        return
    for j in range(X.shape[1]):
        g[j] += sign * (X[i, j] - P[k, off + j]) / r


@njit(cache=True)
def gradient(code, P, k, X, i, widths, acts, up, down, g):
    d = X.shape[1]
    for j in range(d):
        g[j] = 0.0
    if code == IF:
        g[int(P[k, 0])] = 1.0
    elif code == EIF:
        for j in range(d):
            g[j] = P[k, j]
    elif code == HIF:
        for j in range(d):
            g[j] = 2.0 * (X[i, j] - P[k, j])
    elif code == ELLIPSE:
        _radial(P, k, 0, X, i, 1.0, g)
        _radial(P, k, d, X, i, 1.0, g)
    elif code == HYPER:
        _radial(P, k, 0, X, i, 1.0, g)
        _radial(P, k, d, X, i, -1.0, g)
    elif code == PARA:
        _radial(P, k, 0, X, i, 1.0, g)
        for j in range(d):
            g[j] += P[k, d + j]
    elif code == QUAD:
        for a in range(d):
            row = 0.0
            for b in range(d):
                row += (P[k, a * d + b] + P[k, b * d + a]) * X[i, b]
            g[a] = 2.0 * row + P[k, d * d + a]
    elif code == NN:
        _nn_forward(P, k, X, i, widths, acts)
        n_layers = widths.shape[0]
        # start of the output layer block, then walk the hidden blocks backwards
        pos = 0
        n_in = d
        for layer in range(n_layers):
            pos += widths[layer] * n_in + widths[layer]
            n_in = widths[layer]
        last = n_layers - 1
        for c in range(widths[last]):
            up[c] = P[k, pos + c]
        for layer in range(last, -1, -1):
            w = widths[layer]
            n_in = d if layer == 0 else widths[layer - 1]
            pos -= w * n_in + w
            for c in range(n_in):
                down[c] = 0.0
            for r in range(w):
                delta = up[r] * (1.0 - acts[layer, r] * acts[layer, r])
                base = pos + r * n_in
                for c in range(n_in):
                    down[c] += delta * P[k, base + c]
            for c in range(n_in):
                up[c] = down[c]
        for c in range(d):
            g[c] = up[c]
    else:
        g[0] = -math.cos(X[i, 0])
        g[1] = 1.0


@njit(cache=True)
def influence(code, P, k, X, i, widths, acts, up, down, g):
    """Squared gradient normalised to sum 1; uniform when the gradient vanishes."""
    gradient(code, P, k, X, i, widths, acts, up, down, g)
    d = X.shape[1]
    s = 0.0
    for j in range(d):
        g[j] = g[j] * g[j]
        s += g[j]
    if s < GRAD_EPS:
        for j in range(d):
            g[j] = 1.0 / d
    else:
        for j in range(d):
            g[j] /= s


# -- batch helpers used for backend parity checks ---------------------------

@njit(cache=True)
def evaluate_rows(code, p, X, widths):
    P = p.reshape((1, p.shape[0]))
    acts, _, _ = scratch(widths, X.shape[1])
    out = np.empty(X.shape[0])
    evaluate_node(code, P, 0, X, np.arange(X.shape[0]), 0, X.shape[0], widths, acts, out)
    return out


@njit(cache=True)
def gradient_rows(code, p, X, widths):
    P = p.reshape((1, p.shape[0]))
    acts, up, down = scratch(widths, X.shape[1])
    out = np.empty(X.shape)
    g = np.empty(X.shape[1])
    for i in range(X.shape[0]):
        gradient(code, P, 0, X, i, widths, acts, up, down, g)
        out[i] = g
    return out


# -- sampling -----------------------------------------------------------------

@njit(cache=True)
def _sphere(rng, d, P, k, off):
    while True:
        v = rng.standard_normal(d)
        s = 0.0
        for j in range(d):
            s += v[j] * v[j]
        norm = math.sqrt(s)
        if norm > 0.0:
            for j in range(d):
                P[k, off + j] = v[j] / norm
            return


@njit(cache=True)
def _in_range(rng, lo, hi, P, k, off):
    d = lo.shape[0]
    u = rng.random(d)
    for j in range(d):
        P[k, off + j] = lo[j] + (hi[j] - lo[j]) * u[j]


@njit(cache=True)
def sample(code, d, lo, hi, lam, widths, rng, P, k):
    """Draw a function's parameters into row P[k]."""
    if code == IF:
        P[k, 0] = float(rng.integers(0, d))
    elif code == EIF:
        _sphere(rng, d, P, k, 0)
    elif code == HIF:
        _in_range(rng, lo, hi, P, k, 0)
    elif code == ELLIPSE or code == HYPER:
        _in_range(rng, lo, hi, P, k, 0)
        _in_range(rng, lo, hi, P, k, d)
    elif code == PARA:
        _in_range(rng, lo, hi, P, k, 0)
        _sphere(rng, d, P, k, d)
    elif code == QUAD:
        A = rng.standard_normal(d * d)
        v = rng.uniform(-lam, lam, d)
        for j in range(d * d):
            P[k, j] = A[j]
        for j in range(d):
            P[k, d * d + j] = v[j]
    elif code == NN:
        pos = 0
        n_in = d
        for layer in range(widths.shape[0] + 1):
            n_out = widths[layer] if layer < widths.shape[0] else 1
            W = rng.standard_normal(n_out * n_in)
            b = rng.uniform(-1.0, 1.0, n_out)
            for j in range(n_out * n_in):
                P[k, pos + j] = W[j]
            pos += n_out * n_in
            for j in range(n_out):
                P[k, pos + j] = b[j]
            pos += n_out
            n_in = n_out


@njit(cache=True)
def sample_one(code, d, lo, hi, lam, widths, n_params, rng):
    P = np.zeros((1, max(n_params, 1)))
    sample(code, d, lo, hi, lam, widths, rng, P, 0)
    return P[0, :n_params].copy()


# -- trees --------------------------------------------------------------------

@njit(cache=True)
def build_tree(Xs, code, widths, lam, needs_range, n_params, kind, eta,
               max_depth, max_attempts, rng):
    n, d = Xs.shape
    cap = 2 * n + 1
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    size = np.zeros(cap, dtype=np.int64)
    thr = np.full(cap, np.nan)
    params = np.zeros((cap, max(n_params, 1)))
    acts, _, _ = scratch(widths, d)

    idx = np.arange(n)
    tmp = np.empty(n, dtype=np.int64)
    vals = np.empty(n)
    lo = np.empty(d)
    hi = np.empty(d)

    # depth-first, left child first: node ids come out in preorder
    stack_cap = 2 * max_depth + 4
    st = np.empty((stack_cap, 5), dtype=np.int64)  # start, end, depth, parent, side
    st[0, 0] = 0
    st[0, 1] = n
    st[0, 2] = 0
    st[0, 3] = -1
    st[0, 4] = 0
    sp = 1
    n_nodes = 0

    while sp > 0:
        sp -= 1
        start = st[sp, 0]
        end = st[sp, 1]
        depth = st[sp, 2]
        parent = st[sp, 3]
        side = st[sp, 4]

        if n_nodes == cap:
            cap *= 2
            nleft = np.full(cap, -1, dtype=np.int64)
            nright = np.full(cap, -1, dtype=np.int64)
            nsize = np.zeros(cap, dtype=np.int64)
            nthr = np.full(cap, np.nan)
            nparams = np.zeros((cap, params.shape[1]))
            nleft[:n_nodes] = left[:n_nodes]
            nright[:n_nodes] = right[:n_nodes]
            nsize[:n_nodes] = size[:n_nodes]
            nthr[:n_nodes] = thr[:n_nodes]
            nparams[:n_nodes] = params[:n_nodes]
            left, right, size, thr, params = nleft, nright, nsize, nthr, nparams
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if side == 0:
                left[parent] = node
            else:
                right[parent] = node

        m = end - start
        size[node] = m
        if m <= 1 or depth >= max_depth:
            continue

        if needs_range:
            for j in range(d):
                lo[j] = Xs[idx[start], j]
                hi[j] = Xs[idx[start], j]
            for i in range(start + 1, end):
                for j in range(d):
                    v = Xs[idx[i], j]
                    if v < lo[j]:
                        lo[j] = v
                    if v > hi[j]:
                        hi[j] = v

        split = False
        tau = 0.0
        nl = 0
        for _ in range(max_attempts):
            sample(code, d, lo, hi, lam, widths, rng, params, node)
            evaluate_node(code, params, node, Xs, idx, start, end, widths, acts, vals)
            vmin = vals[start]
            vmax = vals[start]
            for i in range(start + 1, end):
                if vals[i] < vmin:
                    vmin = vals[i]
                if vals[i] > vmax:
                    vmax = vals[i]
            if vmin == vmax:
                continue
            if kind == UNIFORM:
                tau = rng.uniform(vmin, vmax)
            else:
                mean = 0.0
                for i in range(start, end):
                    mean += vals[i]
                mean /= m
                var = 0.0
                for i in range(start, end):
                    t = vals[i] - mean
                    var += t * t
                sigma = eta * math.sqrt(var / m)
                if sigma == 0.0:
                    continue
                tau = rng.normal(mean, sigma)
            nl = 0
            for i in range(start, end):
                if vals[i] <= tau:
                    nl += 1
            if kind == UNIFORM and (nl == 0 or nl == m):
                continue
            split = True
            break

        if not split:
            for j in range(params.shape[1]):
                params[node, j] = 0.0
            continue

        # stable partition: left block then right block, both in input order
        a = start
        b = start + nl
        for i in range(start, end):
            if vals[i] <= tau:
                tmp[a] = idx[i]
                a += 1
            else:
                tmp[b] = idx[i]
                b += 1
        for i in range(start, end):
            idx[i] = tmp[i]
        thr[node] = tau

        st[sp, 0] = start + nl
        st[sp, 1] = end
        st[sp, 2] = depth + 1
        st[sp, 3] = node
        st[sp, 4] = 1
        sp += 1
        st[sp, 0] = start
        st[sp, 1] = start + nl
        st[sp, 2] = depth + 1
        st[sp, 3] = node
        st[sp, 4] = 0
        sp += 1

    return (left[:n_nodes].copy(), right[:n_nodes].copy(), size[:n_nodes].copy(),
            thr[:n_nodes].copy(), params[:n_nodes].copy())


@njit(cache=True)
def _partition(idx, tmp, vals, tau, start, end):
    """Stable in-place split of idx[start:end] (and vals) on vals <= tau."""
    a = start
    for t in range(start, end):
        if vals[t] <= tau:
            a += 1
    mid = a
    a = start
    b = mid
    for t in range(start, end):
        if vals[t] <= tau:
            tmp[a] = idx[t]
            a += 1
        else:
            tmp[b] = idx[t]
            b += 1
    for t in range(start, end):
        idx[t] = tmp[t]
    return mid


@njit(cache=True)
def _route(left, right, thr, params, code, widths, X, acts, idx, tmp, vals, seg, k):
    """Split node k's segment of ``idx`` between its two children."""
    s = seg[k, 0]
    e = seg[k, 1]
    if e > s:
        evaluate_node(code, params, k, X, idx, s, e, widths, acts, vals)
    mid = _partition(idx, tmp, vals, thr[k], s, e)
    seg[left[k], 0] = s
    seg[left[k], 1] = mid
    seg[right[k], 0] = mid
    seg[right[k], 1] = e


@njit(cache=True)
def path_lengths(left, right, size, thr, params, code, widths, c_table, X):
    n = X.shape[0]
    n_nodes = left.shape[0]
    acts, _, _ = scratch(widths, X.shape[1])
    idx = np.arange(n)
    tmp = np.empty(n, dtype=np.int64)
    vals = np.empty(n)
    out = np.empty(n)
    seg = np.zeros((n_nodes, 2), dtype=np.int64)
    depth = np.zeros(n_nodes, dtype=np.int64)
    seg[0, 1] = n
    # preorder ids: a parent is always visited before its children
    for k in range(n_nodes):
        if left[k] < 0:
            c = depth[k] + c_table[size[k]]
            for t in range(seg[k, 0], seg[k, 1]):
                out[idx[t]] = c
            continue
        _route(left, right, thr, params, code, widths, X, acts, idx, tmp, vals, seg, k)
        depth[left[k]] = depth[k] + 1
        depth[right[k]] = depth[k] + 1
    return out


@njit(cache=True)
def influence_table(left, right, thr, params, code, widths, train):
    """Mean parent influence over the training points reaching each node."""
    n, d = train.shape
    n_nodes = left.shape[0]
    table = np.zeros((n_nodes, d))
    counts = np.zeros(n_nodes, dtype=np.int64)
    acts, up, down = scratch(widths, d)
    g = np.empty(d)
    idx = np.arange(n)
    tmp = np.empty(n, dtype=np.int64)
    vals = np.empty(n)
    seg = np.zeros((n_nodes, 2), dtype=np.int64)
    seg[0, 1] = n
    for k in range(n_nodes):
        if left[k] < 0:
            continue
        _route(left, right, thr, params, code, widths, train, acts, idx, tmp, vals, seg, k)
        for child in (left[k], right[k]):
            s = seg[child, 0]
            e = seg[child, 1]
            counts[child] = e - s
            for t in range(s, e):
                influence(code, params, k, train, idx[t], widths, acts, up, down, g)
                for j in range(d):
                    table[child, j] += g[j]
            if e > s:
                for j in range(d):
                    table[child, j] /= e - s
    return table, counts


@njit(cache=True)
def tree_importance(left, right, size, thr, params, code, widths, table, counts, X):
    n, d = X.shape
    n_nodes = left.shape[0]
    out = np.zeros((n, d))
    plen = np.zeros(n, dtype=np.int64)
    acts, up, down = scratch(widths, d)
    g = np.empty(d)
    idx = np.arange(n)
    tmp = np.empty(n, dtype=np.int64)
    vals = np.empty(n)
    seg = np.zeros((n_nodes, 2), dtype=np.int64)
    seg[0, 1] = n
    for k in range(n_nodes):
        if left[k] < 0:
            continue
        _route(left, right, thr, params, code, widths, X, acts, idx, tmp, vals, seg, k)
        for child in (left[k], right[k]):
            weight = size[k] / (size[child] + 1.0)
            for t in range(seg[child, 0], seg[child, 1]):
                i = idx[t]
                plen[i] += 1
                if counts[child] > 0:
                    for j in range(d):
                        out[i, j] += weight * table[child, j]
                else:
                    influence(code, params, k, X, i, widths, acts, up, down, g)
                    for j in range(d):
                        out[i, j] += weight * g[j]
    for i in range(n):
        if plen[i] > 0:
            for j in range(d):
                out[i, j] /= plen[i]
    return out
