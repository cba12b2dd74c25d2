"""Shared constants and small oracles for the test suite."""
from fractions import Fraction

import numpy as np

from fubif._backend import HAVE_NUMBA, NUMBA, NUMPY
from fubif.splitting import Family, SplitFamilyDescriptor, evaluate_batch

BACKENDS = [NUMBA, NUMPY] if HAVE_NUMBA else [NUMPY]
ALL_FAMILIES = [f.value for f in Family]
ND_FAMILIES = [f for f in ALL_FAMILIES if f != "Sine"]


def family_dim(name: str, d: int) -> int:
    return 2 if name == "Sine" else d


def desc(name: str) -> SplitFamilyDescriptor:
    return SplitFamilyDescriptor.parse(name)


def c_exact(n: int) -> float:
    """c(n) from an exact rational harmonic sum."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    h = sum(Fraction(1, k) for k in range(1, n))
    return float(2 * h - Fraction(2 * (n - 1), n))


def brute_path_length(tree, x) -> float:
    """Walk one point down a tree, re-evaluating each stored split from scratch."""
    node, depth = 0, 0
    while tree.left[node] >= 0:
        split = tree.split(node)
        fx = float(evaluate_batch(split.descriptor, split.params, x[None, :])[0])
        node = tree.left[node] if fx - split.threshold <= 0 else tree.right[node]
        depth += 1
    return depth + c_exact(int(tree.size[node]))


def brute_ap(scores, labels) -> float:
    """AP straight from the definition: one step per distinct score, quadratic time."""
    scores = list(map(float, scores))
    labels = list(map(int, labels))
    n_pos = sum(labels)
    total, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        sel = [y for s, y in zip(scores, labels) if s >= t]
        tp = sum(sel)
        recall = tp / n_pos
        total += (recall - prev_recall) * (tp / len(sel))
        prev_recall = recall
    return total


def brute_auc(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    acc = 0.0
    for p in pos:
        for q in neg:
            acc += 1.0 if p > q else 0.5 if p == q else 0.0
    return acc / (len(pos) * len(neg))


def finite_diff(desc, params, x, h):
    g = np.empty(x.size)
    for j in range(x.size):
        e = np.zeros(x.size)
        e[j] = h
        up = evaluate_batch(desc, params, (x + e)[None, :])[0]
        dn = evaluate_batch(desc, params, (x - e)[None, :])[0]
        g[j] = (up - dn) / (2 * h)
    return g


GRAD_REL_FLOOR = 1e-3


def grad_rel_error(g, fd) -> float:
    """Relative error of an analytic gradient against finite differences.

    The denominator is floored at GRAD_REL_FLOOR: where the true gradient is
    zero (Hyper beyond both foci in d=1, say) the finite difference holds
    only roundoff and a pure ratio is meaningless.
    """
    return float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), np.linalg.norm(g), GRAD_REL_FLOOR))
