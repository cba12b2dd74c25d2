"""Gradient-based feature importance for function-based isolation forests.

Per node, the influence of feature ``j`` at a point is the share of the
squared split-function gradient carried by coordinate ``j``. A tree's
vector for ``x`` averages, over the internal nodes on x's path, the node
influence (mean over the training points in x's child) weighted by
``|Y_k| / (|Y_{k+1}| + 1)``. Local importance averages trees; the global
vector divides the outlier mean by the inlier mean.
"""
from __future__ import annotations

import numpy as np

from . import _backend
from ._numpy_kernels import influence_batch
from .errors import DataError, DimensionMismatchError
from .forest import Forest, Tree
from .splitting import SplitInstance, gradient

GFI_EPS = 1e-12
_FLAT_EPS = 1e-18


def node_feature_influence(split: SplitInstance, y) -> np.ndarray:
    g = gradient(split, y)
    sq = g * g
    total = float(np.sum(sq))
    if total < _FLAT_EPS:
        return np.full(split.n_features, 1.0 / split.n_features)
    return sq / total


def node_importance(split: SplitInstance, Y_next) -> np.ndarray:
    Y_next = np.atleast_2d(np.asarray(Y_next, dtype=np.float64))
    if Y_next.shape[0] == 0 or Y_next.size == 0:
        raise DataError("explanation point not routed")
    if Y_next.shape[1] != split.n_features:
        raise DimensionMismatchError(f"points have {Y_next.shape[1]} features, split expects {split.n_features}")
    return influence_batch(split.descriptor, split.params, Y_next).mean(axis=0)


def path_weight(size_parent: int, size_child: int) -> float:
    return size_parent / (size_child + 1.0)


def tree_importance(tree: Tree, x, backend: str | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tree.n_features,):
        raise DimensionMismatchError(f"point has shape {x.shape}, tree expects ({tree.n_features},)")
    return tree.importance(x[None, :], backend)[0]


def local_importance_matrix(forest: Forest, X, backend: str | None = None) -> np.ndarray:
    """Local importance vectors for every row of ``X``, shape ``(n, d)``."""
    X = forest._check(X)
    backend = _backend.resolve(backend)
    total = np.zeros(X.shape)
    for tree in forest.trees:
        total += tree.importance(X, backend)
    return total / len(forest.trees)


def local_importance(forest: Forest, x, backend: str | None = None) -> np.ndarray:
    return local_importance_matrix(forest, np.asarray(x, dtype=np.float64)[None, :], backend)[0]


def outlier_mask(forest: Forest, X, labels=None, contamination: float | None = None,
                 backend: str | None = None) -> np.ndarray:
    """Labels when given, else the top ``contamination`` fraction of scores."""
    X = forest._check(X)
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (X.shape[0],):
            raise DataError("label vector length does not match the data")
        return labels.astype(bool)
    if contamination is None:
        raise DataError("global importance needs labels or a contamination fraction")
    if not 0.0 < contamination < 1.0:
        raise DataError(f"contamination must lie in (0, 1), got {contamination}")
    scores = forest.score_samples(X, backend)
    k = max(1, int(np.ceil(contamination * X.shape[0] - 1e-9)))
    mask = np.zeros(X.shape[0], dtype=bool)
    mask[np.argsort(-scores, kind="stable")[:k]] = True
    return mask


def gfi_from_groups(inlier_mean, outlier_mean) -> np.ndarray:
    return np.asarray(outlier_mean) / (np.asarray(inlier_mean) + GFI_EPS)


def global_importance(forest: Forest, X, labels=None, contamination: float | None = None,
                      backend: str | None = None) -> np.ndarray:
    """Ratio of outlier to inlier mean local importance, feature by feature."""
    X = forest._check(X)
    is_out = outlier_mask(forest, X, labels, contamination, backend)
    if is_out.all() or not is_out.any():
        raise DataError("degenerate partition")
    local = local_importance_matrix(forest, X, backend)
    return gfi_from_groups(local[~is_out].mean(axis=0), local[is_out].mean(axis=0))
