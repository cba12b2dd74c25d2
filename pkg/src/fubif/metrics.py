"""Detection and feature-selection metrics."""
from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

from .errors import DataError


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise DataError(f"{scores.size} scores but {labels.size} labels")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0 or 1")
    return scores, labels.astype(np.int64)


def average_precision(scores, labels) -> float:
    """Step-wise AP over descending score thresholds, ties forming one step."""
    scores, labels = _check(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise DataError("average precision needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    # last index of every tie group
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp_at = tp[ends]
    precision = tp_at / (ends + 1.0)
    recall = tp_at / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def roc_auc(scores, labels) -> float:
    """P(score of a positive > score of a negative) + 1/2 P(tie)."""
    scores, labels = _check(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC AUC needs both positive and negative labels")
    ranks = rankdata(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def precision_at_contamination(scores, labels, p: float) -> float:
    """Precision among the top ceil(p * n) scores; ties keep input order."""
    scores, labels = _check(scores, labels)
    if not 0.0 < p < 1.0:
        raise DataError(f"contamination must lie in (0, 1), got {p}")
    k = max(1, math.ceil(p * scores.size - 1e-9))
    top = np.argsort(-scores, kind="stable")[:k]
    return float(labels[top].mean())


def trapezoid_area(curve_direct, curve_inverse) -> float:
    """Unnormalised area between two curves sampled at unit steps of k."""
    diff = np.asarray(curve_direct, dtype=np.float64) - np.asarray(curve_inverse, dtype=np.float64)
    if diff.size < 2:
        return 0.0
    return float(np.sum(0.5 * (diff[1:] + diff[:-1])))


def feature_selection_curves(dataset, config, gfi, scenario="II", runs: int = 10,
                             backend: str | None = None):
    """Mean average precision as features are removed in GFI order.

    Returns ``(ks, direct, inverse)`` with ``ks = 1..d``; ``direct[k-1]`` keeps
    the ``k`` highest-GFI features, ``inverse[k-1]`` the ``k`` lowest. Every
    step refits ``runs`` forests with seeds ``config.seed + r``.
    """
    from .data import scenario_split
    from .forest import fit

    gfi = np.asarray(gfi, dtype=np.float64)
    d = dataset.d
    if d < 2:
        raise DataError("nothing to select")
    if gfi.shape != (d,):
        raise DataError(f"importance vector has length {gfi.size}, dataset has {d} features")
    if dataset.labels is None:
        raise DataError("feature selection needs labels")
    train, test = scenario_split(dataset, scenario)
    ranking = np.argsort(-gfi, kind="stable")
    ks = np.arange(1, d + 1)
    direct = np.zeros(d)
    inverse = np.zeros(d)
    for k in ks:
        for curve, cols in ((direct, ranking[:k]), (inverse, ranking[::-1][:k])):
            cols = np.sort(cols)
            aps = []
            for r in range(runs):
                forest = fit(train.points[:, cols], config.replace(seed=config.seed + r), backend)
                aps.append(average_precision(forest.score_samples(test.points[:, cols], backend), test.labels))
            curve[k - 1] = np.mean(aps)
    return ks, direct, inverse


def auc_fs(dataset, config, gfi, scenario="II", runs: int = 10, backend: str | None = None) -> float:
    """Area between the direct and inverse feature-elimination AP curves.

    Positive when the importance ranking puts informative features first.
    """
    _, direct, inverse = feature_selection_curves(dataset, config, gfi, scenario, runs, backend)
    return trapezoid_area(direct, inverse)
