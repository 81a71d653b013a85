"""CVRMSE and ROC-AUC contracts."""

import numpy as np
import pytest

from relearn_hvac.errors import InputError, ShapeError, UndefinedMetricError
from relearn_hvac.metrics import cvrmse, roc_auc


def test_cvrmse_perfect_prediction():
    assert cvrmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0


def test_cvrmse_documented_case():
    # rmse([0,0],[2,2]) = 2, mean = 2 -> 1.0
    assert cvrmse([0.0, 0.0], [2.0, 2.0]) == pytest.approx(1.0, rel=1e-12)


def test_cvrmse_simple_hand_value():
    # errors (1, -1) -> rmse = 1; mean truth = 2 -> 0.5
    assert cvrmse([3.0, 1.0], [2.0, 2.0]) == pytest.approx(0.5, rel=1e-12)


def test_cvrmse_scale_invariance():
    rng = np.random.default_rng(0)
    truth = rng.uniform(1.0, 5.0, size=50)
    pred = truth + rng.normal(scale=0.2, size=50)
    base = cvrmse(pred, truth)
    for scale in (0.5, 3.0, 100.0):
        assert cvrmse(pred * scale, truth * scale) == pytest.approx(base, rel=1e-9)


def test_cvrmse_zero_mean_undefined():
    with pytest.raises(UndefinedMetricError):
        cvrmse([0.0, 0.0], [1.0, -1.0])


def test_cvrmse_empty_and_mismatch():
    with pytest.raises(InputError):
        cvrmse([], [])
    with pytest.raises(ShapeError):
        cvrmse([1.0], [1.0, 2.0])


def test_auc_perfect_separation():
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0


def test_auc_inverted_scores():
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0


def test_auc_all_tied_scores():
    assert roc_auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5


def test_auc_partial_ties():
    # One tie across classes contributes 1/2 of its pair.
    assert roc_auc([0.3, 0.5, 0.5], [0, 0, 1]) == pytest.approx(0.75)


def test_auc_hand_computed():
    scores = [0.1, 0.4, 0.35, 0.8]
    labels = [0, 0, 1, 1]
    # pairs: (0.35 vs 0.1)=1, (0.35 vs 0.4)=0, (0.8 vs 0.1)=1, (0.8 vs 0.4)=1
    assert roc_auc(scores, labels) == pytest.approx(0.75)


def test_auc_monotone_transform_invariance():
    rng = np.random.default_rng(1)
    scores = rng.uniform(size=40)
    labels = rng.integers(0, 2, size=40)
    if labels.sum() in (0, 40):
        labels[0] = 1 - labels[0]
    base = roc_auc(scores, labels)
    assert roc_auc(np.exp(3 * scores), labels) == pytest.approx(base, rel=1e-12)
    assert roc_auc(scores * 100 - 5, labels) == pytest.approx(base, rel=1e-12)


def test_auc_single_class_undefined():
    with pytest.raises(UndefinedMetricError):
        roc_auc([0.1, 0.9], [1, 1])
    with pytest.raises(UndefinedMetricError):
        roc_auc([0.1, 0.9], [0, 0])


def test_auc_bad_labels():
    with pytest.raises(InputError):
        roc_auc([0.1, 0.9], [0, 2])


def test_auc_matches_pair_counting_property():
    rng = np.random.default_rng(2)
    for _ in range(10):
        n = int(rng.integers(5, 30))
        scores = rng.choice([0.1, 0.3, 0.5, 0.7, 0.9], size=n)
        labels = rng.integers(0, 2, size=n)
        if labels.sum() in (0, n):
            continue
        pos = scores[labels == 1]
        neg = scores[labels == 0]
        wins = (pos[:, None] > neg[None, :]).sum()
        ties = (pos[:, None] == neg[None, :]).sum()
        expected = (wins + 0.5 * ties) / (len(pos) * len(neg))
        assert roc_auc(scores, labels) == pytest.approx(expected, rel=1e-12)
