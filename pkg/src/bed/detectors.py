"""Detection-score functions over embeddings, classifier outputs, and text.

Every scoring detector emits scores with a single fixed orientation:
higher = more likely out-of-distribution. Direct-inference detectors
(adaptive decision boundaries, keyword gating) emit boolean verdicts
instead; see adb.py and rake.py for their fitting code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    PcaModel,
    as_matrix,
    cosine_similarity_matrix,
    entropy_rows,
    euclidean_distance_matrix,
    fit_gaussian_classes,
    lof_fit,
    lof_score,
    mahalanobis_min_batch,
    pca_transform,
    softmax,
)

SCORE_ORIENTATION = "higher-is-OOD"

# Default temperature for the similarity-softmax entropy detectors.
DEFAULT_ENTROPY_TEMPERATURE = 0.1


@dataclass(frozen=True)
class DetectionScores:
    """Per-query real scores; orientation is always higher-is-OOD."""

    scores: np.ndarray
    detector_id: str
    orientation: str = SCORE_ORIENTATION

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1:
            raise ValueError(f"scores must be 1-d, got shape {scores.shape}")
        if not np.all(np.isfinite(scores)):
            raise ValueError(f"{self.detector_id}: non-finite scores")
        object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class DirectVerdicts:
    """Per-query boolean OOD verdicts for direct-inference detectors."""

    is_ood: np.ndarray
    detector_id: str

    def __post_init__(self):
        v = np.asarray(self.is_ood, dtype=bool)
        if v.ndim != 1:
            raise ValueError(f"is_ood must be 1-d, got shape {v.shape}")
        object.__setattr__(self, "is_ood", v)


def _maybe_pca(pca: PcaModel | None, *matrices):
    if pca is None:
        return [as_matrix(m) for m in matrices]
    return [pca_transform(pca, m) for m in matrices]


def score_similarity_nn(train, queries, metric: str = "cosine",
                        pca: PcaModel | None = None) -> DetectionScores:
    """Nearest-training-neighbor score.

    cosine: 1 - max cosine similarity to any training row.
    euclidean: min Euclidean distance to any training row.
    With a PCA model, both sides are transformed first.
    """
    train_m, query_m = _maybe_pca(pca, train, queries)
    if train_m.shape[0] == 0:
        raise ValueError("training matrix is empty")
    prefix = "BiEncoderPCA" if pca is not None else "BiEncoder"
    if metric == "cosine":
        sims = cosine_similarity_matrix(query_m, train_m)
        scores = 1.0 - sims.max(axis=1)
        detector = prefix + "Cosine"
    elif metric == "euclidean":
        dists = euclidean_distance_matrix(query_m, train_m)
        scores = dists.min(axis=1)
        detector = prefix + "Euclidean"
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return DetectionScores(scores=scores, detector_id=detector)


def score_class_entropy(train, train_labels, queries,
                        temperature: float = DEFAULT_ENTROPY_TEMPERATURE,
                        pca: PcaModel | None = None) -> DetectionScores:
    """Entropy of the temperature-softmax over per-class max similarities.

    Class logit = max cosine similarity to any training row of that class.
    """
    train_m, query_m = _maybe_pca(pca, train, queries)
    labels = np.array([str(l) for l in train_labels])
    if labels.shape[0] != train_m.shape[0]:
        raise ValueError("one label per training row required")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise ValueError(f"need >= 2 classes, got {len(classes)}")
    sims = cosine_similarity_matrix(query_m, train_m)
    logits = np.stack([sims[:, labels == c].max(axis=1) for c in classes],
                      axis=1)
    probs = softmax(logits, temperature=temperature)
    detector = "BiEncoderPCAEntropy" if pca is not None else "BiEncoderEntropy"
    return DetectionScores(scores=entropy_rows(probs), detector_id=detector)


def score_mahalanobis(train, train_labels, queries,
                      epsilon_scale: float | None = None) -> DetectionScores:
    """Minimum Mahalanobis distance to any class under pooled covariance."""
    kwargs = {} if epsilon_scale is None else {"epsilon_scale": epsilon_scale}
    model = fit_gaussian_classes(train, train_labels, **kwargs)
    scores = mahalanobis_min_batch(model, queries)
    return DetectionScores(scores=scores, detector_id="BiEncoderMaha")


def score_lof_detector(train, queries, k: int,
                       detector_id: str = "BiEncoderLOF") -> DetectionScores:
    """Raw local outlier factor of each query against the training points."""
    model = lof_fit(train, k)
    return DetectionScores(scores=lof_score(model, queries),
                           detector_id=detector_id)


def _check_prob_rows(probs: np.ndarray):
    if probs.ndim != 2:
        raise ValueError(f"probability matrix must be 2-d, got {probs.shape}")
    if np.any(probs < 0.0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("rows are not probability vectors (sum 1 within 1e-6)")


def score_msp(class_probs, ood_index: int | None = None,
              detector_id: str = "MSP") -> DetectionScores:
    """1 - max row probability, or the OOD-class probability when the
    classifier was trained with an explicit OOD column."""
    probs = np.asarray(class_probs, dtype=np.float64)
    _check_prob_rows(probs)
    if ood_index is not None:
        scores = probs[:, ood_index]
    else:
        scores = 1.0 - probs.max(axis=1)
    return DetectionScores(scores=scores, detector_id=detector_id)


def score_entropy_head(class_probs,
                       detector_id: str = "Entropy") -> DetectionScores:
    """Per-row Shannon entropy of the predicted distribution."""
    probs = np.asarray(class_probs, dtype=np.float64)
    _check_prob_rows(probs)
    return DetectionScores(scores=entropy_rows(probs), detector_id=detector_id)


def score_doc(per_class_confidences) -> DetectionScores:
    """1 - max row confidence over independent per-class sigmoid outputs."""
    conf = np.asarray(per_class_confidences, dtype=np.float64)
    if conf.ndim != 2:
        raise ValueError(f"confidence matrix must be 2-d, got {conf.shape}")
    if np.any(conf < 0.0) or np.any(conf > 1.0):
        raise ValueError("confidences must lie in [0, 1]")
    return DetectionScores(scores=1.0 - conf.max(axis=1), detector_id="DOC")


def score_knn_features(train_features, train_labels, query_features,
                       mode: str = "nearest") -> DetectionScores:
    """Euclidean distance to the nearest class.

    mode="nearest": min over classes of the min distance to that class's
    rows (equals the global nearest-neighbor distance). mode="centroid":
    min distance to any class centroid.
    """
    train_m = as_matrix(train_features)
    if train_m.shape[0] == 0:
        raise ValueError("training matrix is empty")
    labels = np.array([str(l) for l in train_labels])
    if mode == "nearest":
        dists = euclidean_distance_matrix(query_features, train_m)
        scores = dists.min(axis=1)
    elif mode == "centroid":
        centroids = np.stack([train_m[labels == c].mean(axis=0)
                              for c in sorted(set(labels))])
        scores = euclidean_distance_matrix(query_features, centroids).min(axis=1)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return DetectionScores(scores=scores, detector_id="KNN")


def score_trust(train_features, train_labels, query_features,
                predicted_labels) -> DetectionScores:
    """Distance to the predicted class over distance to any other class.

    Reciprocal of the trust ratio, so higher = less trustworthy = more OOD.
    """
    train_m = as_matrix(train_features)
    labels = np.array([str(l) for l in train_labels])
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise ValueError(f"need >= 2 classes, got {len(classes)}")
    predicted = [str(l) for l in predicted_labels]
    unknown = set(predicted) - set(classes)
    if unknown:
        raise ValueError(f"predicted labels not in training set: {sorted(unknown)}")
    query_m = as_matrix(query_features)
    if len(predicted) != query_m.shape[0]:
        raise ValueError("one predicted label per query required")
    per_class = {c: euclidean_distance_matrix(query_m, train_m[labels == c])
                 .min(axis=1) for c in classes}
    scores = np.empty(query_m.shape[0])
    for i, pred in enumerate(predicted):
        d_pred = per_class[pred][i]
        d_other = min(per_class[c][i] for c in classes if c != pred)
        scores[i] = d_pred / (d_other + 1e-12)
    return DetectionScores(scores=scores, detector_id="TrustScores")
