"""Model-quality metrics: CVRMSE and a rank-based ROC-AUC."""

from __future__ import annotations

import numpy as np

from .errors import InputError, ShapeError, UndefinedMetricError


def cvrmse(pred, truth):
    """Coefficient of variation of the RMSE: rmse(pred, truth) / mean(truth).

    Undefined when the truth has zero mean.
    """
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.size == 0:
        raise InputError("cvrmse of an empty series")
    if pred.shape != truth.shape:
        raise ShapeError("prediction/truth lengths differ")
    mean = float(np.mean(truth))
    if mean == 0.0:
        raise UndefinedMetricError("cvrmse undefined for zero-mean truth")
    rmse = float(np.sqrt(np.mean((truth - pred) ** 2)))
    return rmse / mean


def roc_auc(scores, labels):
    """Area under the ROC curve via the rank statistic; ties count 1/2.

    Equivalent to the Mann-Whitney U normalization: the probability that a
    random positive outscores a random negative.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.size == 0:
        raise InputError("roc_auc of an empty series")
    if scores.shape != labels.shape:
        raise ShapeError("score/label lengths differ")
    if not np.all(np.isin(labels, (0, 1))):
        raise InputError("labels must be 0/1")
    labels = labels.astype(bool)
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("roc_auc needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size, dtype=np.float64)
    # Average ranks over tie groups (1-based ranks).
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    pos_rank_sum = float(ranks[labels].sum())
    u = pos_rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)
