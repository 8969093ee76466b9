import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from bed.detectors import DetectionScores, DirectVerdicts
from bed.metrics import (CalibratedEvaluation, aupr, auroc,
                         calibrate_threshold, evaluate, f1_score, fpr_at_tpr,
                         mcc)

# label convention everywhere: True / 1 marks the OOD (positive) class

f1_oracle = oracles.f1
mcc_oracle = oracles.mcc
auroc_oracle = oracles.auroc_pairwise
auroc_trapezoid_oracle = oracles.auroc_trapezoid
aupr_oracle = oracles.aupr_stepwise
fpr_at_tpr_oracle = oracles.fpr_at_tpr
best_threshold_oracle = oracles.best_threshold
random_scored_instance = oracles.random_scored_instance


# ---------------------------------------------------------------------------
# confusion metrics

def test_f1_hand_worked():
    # TP=2 FP=1 FN=1 TN=6
    pred = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]
    truth = [1, 1, 0, 1, 0, 0, 0, 0, 0, 0]
    assert f1_score(pred, truth) == pytest.approx(2 / 3)
    assert mcc(pred, truth) == pytest.approx(11 / 21)


def test_perfect_prediction():
    truth = [1, 0, 1, 0]
    assert f1_score(truth, truth) == 1.0
    assert mcc(truth, truth) == 1.0


def test_inverted_prediction():
    truth = [1, 0, 1, 0]
    flipped = [0, 1, 0, 1]
    assert f1_score(flipped, truth) == 0.0
    assert mcc(flipped, truth) == -1.0


def test_all_negative_prediction_zero_denominators():
    truth = [1, 1, 0, 0]
    pred = [0, 0, 0, 0]
    assert f1_score(pred, truth) == 0.0
    assert mcc(pred, truth) == 0.0


def test_no_positives_anywhere():
    assert f1_score([0, 0], [0, 0]) == 0.0
    assert mcc([0, 0], [0, 0]) == 0.0


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        f1_score([1, 0], [1])
    with pytest.raises(ValueError):
        mcc([1], [1, 0])


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=200, deadline=None)
def test_f1_mcc_match_oracles(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 15))
    pred = rng.integers(0, 2, size=n).astype(bool)
    truth = rng.integers(0, 2, size=n).astype(bool)
    assert f1_score(pred, truth) == pytest.approx(f1_oracle(pred, truth),
                                                  abs=1e-12)
    assert mcc(pred, truth) == pytest.approx(mcc_oracle(pred, truth),
                                             abs=1e-12)


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=100, deadline=None)
def test_mcc_flip_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 15))
    pred = rng.integers(0, 2, size=n).astype(bool)
    truth = rng.integers(0, 2, size=n).astype(bool)
    assert mcc(~pred, truth) == pytest.approx(-mcc(pred, truth), abs=1e-12)


# ---------------------------------------------------------------------------
# ranking metrics vs oracles

def test_auroc_perfect_ranking():
    assert auroc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


def test_auroc_reversed_ranking():
    assert auroc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0


def test_auroc_all_tied_is_half():
    assert auroc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == pytest.approx(0.5)


def test_auroc_single_class_rejected():
    with pytest.raises(ValueError):
        auroc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        auroc([0.1, 0.2], [0, 0])


def test_aupr_perfect_ranking_is_one():
    assert aupr([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


def test_aupr_all_tied_is_prevalence():
    assert aupr([0.3] * 5, [1, 0, 0, 1, 0]) == pytest.approx(0.4)


def test_aupr_needs_a_positive():
    with pytest.raises(ValueError):
        aupr([0.1, 0.2], [0, 0])


def test_fpr_at_tpr_hand_worked():
    # descending thresholds admit TPR 0.5 at FPR 0, TPR 1.0 at FPR 0.5
    scores = [0.9, 0.7, 0.6, 0.2]
    labels = [1, 0, 1, 0]
    assert fpr_at_tpr(scores, labels, 0.5) == 0.0
    assert fpr_at_tpr(scores, labels, 0.9) == 0.5
    assert fpr_at_tpr(scores, labels, 1.0) == 0.5


def test_fpr_target_validation():
    with pytest.raises(ValueError):
        fpr_at_tpr([0.1], [1], 0.0)
    with pytest.raises(ValueError):
        fpr_at_tpr([0.1], [1], 1.5)


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=300, deadline=None)
def test_ranking_metrics_match_oracles(seed):
    rng = np.random.default_rng(seed)
    scores, labels = random_scored_instance(rng)
    assert auroc(scores, labels) == pytest.approx(
        auroc_oracle(scores, labels), abs=1e-9)
    assert auroc(scores, labels) == pytest.approx(
        auroc_trapezoid_oracle(scores, labels), abs=1e-9)
    assert aupr(scores, labels) == pytest.approx(
        aupr_oracle(scores, labels), abs=1e-9)
    for target in (0.90, 0.95):
        assert fpr_at_tpr(scores, labels, target) == pytest.approx(
            fpr_at_tpr_oracle(scores, labels, target), abs=1e-12)


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=100, deadline=None)
def test_auroc_complement_under_negation(seed):
    rng = np.random.default_rng(seed)
    scores, labels = random_scored_instance(rng)
    assert auroc(-np.asarray(scores), labels) == pytest.approx(
        1.0 - auroc(scores, labels), abs=1e-9)


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=100, deadline=None)
def test_fpr95_dominates_fpr90(seed):
    rng = np.random.default_rng(seed)
    scores, labels = random_scored_instance(rng)
    assert (fpr_at_tpr(scores, labels, 0.95)
            >= fpr_at_tpr(scores, labels, 0.90) - 1e-12)


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=100, deadline=None)
def test_ranking_metrics_monotone_invariant(seed):
    rng = np.random.default_rng(seed)
    scores, labels = random_scored_instance(rng)
    scores = np.asarray(scores)
    for transform in (lambda s: 2.0 * s + 1.0, lambda s: s ** 3):
        t = transform(scores)
        assert auroc(t, labels) == pytest.approx(auroc(scores, labels),
                                                 abs=1e-12)
        assert aupr(t, labels) == pytest.approx(aupr(scores, labels),
                                                abs=1e-12)
        for target in (0.90, 0.95):
            assert fpr_at_tpr(t, labels, target) == pytest.approx(
                fpr_at_tpr(scores, labels, target), abs=1e-12)


def test_accepts_detection_scores_wrapper():
    wrapped = DetectionScores(scores=np.array([0.9, 0.1]), detector_id="X")
    assert auroc(wrapped, [1, 0]) == 1.0


# ---------------------------------------------------------------------------
# threshold calibration

def test_calibration_separable_case():
    scores = [2.0, 1.8, 0.3, 0.1]
    labels = [1, 1, 0, 0]
    t = calibrate_threshold(scores, labels)
    assert 0.3 < t < 1.8
    assert t == pytest.approx((0.3 + 1.8) / 2)


def test_calibration_prefers_smallest_optimum():
    # every positive outranks every negative by a margin spanning several
    # midpoints; all those midpoints reach F1 = 1, the smallest wins
    scores = [5.0, 4.0, 1.0, 0.5]
    labels = [1, 1, 0, 0]
    assert calibrate_threshold(scores, labels) == pytest.approx(2.5)


def test_calibration_single_class_validation_rejected():
    with pytest.raises(ValueError):
        calibrate_threshold([0.4, 0.9], [1, 1])
    with pytest.raises(ValueError):
        calibrate_threshold([0.4, 0.9], [0, 0])


def test_calibration_single_distinct_score():
    t = calibrate_threshold([0.7, 0.7, 0.7], [1, 0, 1])
    assert t <= 0.7  # flag everything: F1 = 2*2/(2*2+1+0) beats predicting none


def test_calibration_requires_scores():
    with pytest.raises(ValueError):
        calibrate_threshold([], [])


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=200, deadline=None)
def test_calibration_matches_exhaustive_oracle(seed):
    rng = np.random.default_rng(seed)
    scores, labels = random_scored_instance(rng, n_max=30)
    got = calibrate_threshold(scores, labels)
    want = best_threshold_oracle(list(scores), list(labels))
    assert got == pytest.approx(want, abs=1e-12)
    # and the achieved F1 is globally optimal over a dense grid
    best = f1_oracle([s >= got for s in scores], labels)
    for t in np.linspace(scores.min() - 1, scores.max() + 1, 301):
        assert f1_oracle([s >= t for s in scores], labels) <= best + 1e-12


# ---------------------------------------------------------------------------
# evaluate composition

def test_evaluate_scoring_path():
    val = DetectionScores(scores=np.array([3.0, 2.5, 0.4, 0.2]),
                          detector_id="X")
    test = DetectionScores(scores=np.array([2.8, 2.6, 0.5, 0.3]),
                           detector_id="X")
    val_labels = [1, 1, 0, 0]
    test_labels = [1, 1, 0, 0]
    ev = evaluate(test, test_labels, val_scores=val, val_labels=val_labels)
    assert isinstance(ev, CalibratedEvaluation)
    assert ev.score_metrics_present
    assert ev.f1 == 1.0
    assert ev.mcc == 1.0
    assert ev.auroc == 1.0
    assert ev.aupr == 1.0
    assert ev.fpr_at_90 == 0.0
    assert ev.fpr_at_95 == 0.0
    assert ev.threshold == pytest.approx((0.4 + 2.5) / 2)


def test_evaluate_threshold_comes_from_validation_not_test():
    # validation calibrates a threshold that misclassifies one test row
    val = DetectionScores(scores=np.array([1.0, 0.0]), detector_id="X")
    test = DetectionScores(scores=np.array([0.4, 0.6]), detector_id="X")
    ev = evaluate(test, [1, 0], val_scores=val, val_labels=[1, 0])
    # threshold 0.5: test row 0 (true OOD, score 0.4) missed, row 1 flagged
    assert ev.threshold == pytest.approx(0.5)
    assert ev.f1 == 0.0
    # ranking metrics see the reversed ordering
    assert ev.auroc == 0.0


def test_evaluate_direct_path_blanks_score_metrics():
    verdicts = DirectVerdicts(is_ood=np.array([True, False, True, False]),
                              detector_id="ADB")
    ev = evaluate(verdicts, [1, 0, 0, 1])
    assert not ev.score_metrics_present
    assert ev.threshold is None
    assert ev.auroc is None and ev.aupr is None
    assert ev.fpr_at_90 is None and ev.fpr_at_95 is None
    # TP=1 FP=1 FN=1 TN=1
    assert ev.f1 == pytest.approx(0.5)
    assert ev.mcc == pytest.approx(0.0)


def test_evaluate_scores_without_validation_rejected():
    test = DetectionScores(scores=np.array([0.5, 0.1]), detector_id="X")
    with pytest.raises(ValueError):
        evaluate(test, [1, 0])


def test_evaluate_verdicts_ignore_validation_args():
    verdicts = DirectVerdicts(is_ood=np.array([True, False]),
                              detector_id="RAKE")
    ev = evaluate(verdicts, [1, 0],
                  val_scores=np.array([0.3, 0.1]), val_labels=[1, 0])
    assert not ev.score_metrics_present
    assert ev.threshold is None
    assert ev.f1 == 1.0
