"""Benchmark grid runner: detector x extractor x flags x seed -> ResultRow.

Each grid cell runs the full pipeline (optional classifier training ->
detector scoring -> threshold calibration -> metrics) in isolation, so a
failing cell becomes an error row instead of aborting the table. Detectors
that model the in-domain distribution (similarity, Mahalanobis, LOF, KNN,
Trust, ADB, RAKE) always fit on in-domain training rows only; the
``is_ood_label_in_train`` flag controls whether "oos" is a trainable class
for the classifier head.
"""

from __future__ import annotations

import csv
import io
import os
import time
from dataclasses import dataclass

import numpy as np

from . import detectors as det
from .adb import AdbConfig, adb_fit, adb_predict
from .classifier import (MlpConfig, penultimate_features, predict_labels,
                         predict_proba, train_mlp)
from .datasets import (OOD_LABEL, SPLITS, LabeledDataset, binarize,
                       load_clinc150, load_rostd, load_snips, read_normalized,
                       synthesize_snips_ood)
from .embstore import StoreError, read_embeddings, store_basename
from .metrics import evaluate
from .numerics import fit_pca
from .rake import rake_fit, rake_predict

BI_ENCODER_EXTRACTOR = "bi-encoder-mpnet"
FROZEN_EXTRACTORS = ("use", "bert", "mpnet")
NO_EXTRACTOR = "-"

BI_ENCODER_DETECTORS = (
    "BiEncoderCosine", "BiEncoderEuclidean", "BiEncoderEntropy",
    "BiEncoderLOF", "BiEncoderMaha",
    "BiEncoderPCACosine", "BiEncoderPCAEuclidean", "BiEncoderPCAEntropy",
)
CLASSIFIER_DETECTORS = ("MSP", "BinaryMSP", "Entropy", "DOC", "KNN",
                        "TrustScores")
EMBEDDING_BASELINES = ("LOF", "ADB")
TEXT_DETECTORS = ("RAKE",)
DIRECT_DETECTORS = ("ADB", "RAKE")
ALL_DETECTORS = (BI_ENCODER_DETECTORS + CLASSIFIER_DETECTORS
                 + EMBEDDING_BASELINES + TEXT_DETECTORS)

DEFAULT_PCA_COMPONENTS = 128
DEFAULT_LOF_K = 20

CSV_COLUMNS = ("feature_extractor", "detector", "use_best_ckpt",
               "is_ood_label_in_train", "f1", "mcc", "fpr_at_95",
               "fpr_at_90", "aupr", "auroc", "seed", "wall_time_seconds",
               "error")


class ConfigurationError(ValueError):
    """Detector/extractor/flag combination rejected before any compute."""


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    extractor: str
    detector: str
    use_best_ckpt: bool = False
    is_ood_label_in_train: bool = False
    seed: int = 0


@dataclass(frozen=True)
class ResultRow:
    feature_extractor: str
    detector: str
    use_best_ckpt: bool
    is_ood_label_in_train: bool
    f1: float | None
    mcc: float | None
    fpr_at_95: float | None
    fpr_at_90: float | None
    aupr: float | None
    auroc: float | None
    seed: int
    wall_time_seconds: float
    error: str = ""


def validate_config(config: ExperimentConfig) -> None:
    d = config.detector
    if d == "LikelihoodRatio":
        raise ConfigurationError(
            "LikelihoodRatio is not implemented (needs a language-model "
            "training pipeline)")
    if d not in ALL_DETECTORS:
        raise ConfigurationError(
            f"unknown detector {d!r}; expected one of {', '.join(ALL_DETECTORS)}")
    if d in TEXT_DETECTORS:
        if config.extractor not in (NO_EXTRACTOR, "none"):
            raise ConfigurationError(
                f"{d} is text-only; use extractor {NO_EXTRACTOR!r}")
        return
    if config.extractor in (NO_EXTRACTOR, "none"):
        raise ConfigurationError(f"{d} needs an embedding extractor")
    if d in BI_ENCODER_DETECTORS and config.extractor in FROZEN_EXTRACTORS:
        raise ConfigurationError(
            f"{d} runs on the fine-tuned {BI_ENCODER_EXTRACTOR!r} extractor, "
            f"not frozen {config.extractor!r}")
    if (d in CLASSIFIER_DETECTORS or d in EMBEDDING_BASELINES) \
            and config.extractor == BI_ENCODER_EXTRACTOR:
        raise ConfigurationError(
            f"{d} pairs with frozen extractors ({', '.join(FROZEN_EXTRACTORS)})")
    if d == "BinaryMSP" and not config.is_ood_label_in_train:
        raise ConfigurationError(
            "BinaryMSP needs is_ood_label_in_train=true (its second class "
            "is the OOD label)")


def _train_view(config: ExperimentConfig, dataset: LabeledDataset,
                train_matrix):
    """Kept training rows (per the OOD flag) plus the in-domain subset."""
    keep = np.array([config.is_ood_label_in_train or not u.is_ood
                     for u in dataset.train], dtype=bool)
    train_utts = [u for u, k in zip(dataset.train, keep) if k]
    train_X = train_matrix.data[keep]
    id_mask = np.array([not u.is_ood for u in train_utts], dtype=bool)
    id_X = train_X[id_mask]
    id_labels = [u.intent for u, m in zip(train_utts, id_mask) if m]
    return train_utts, train_X, id_mask, id_X, id_labels


def _run_classifier_detector(config, dataset, train_utts, train_X,
                             id_X, id_labels, val_X, test_X):
    d = config.detector
    objective = {"DOC": "per-class-sigmoid", "BinaryMSP": "binary"}
    if d == "BinaryMSP":
        train_labels = [OOD_LABEL if u.is_ood else "id" for u in train_utts]
        val_keep = np.ones(len(dataset.val), dtype=bool)
        val_labels = [OOD_LABEL if u.is_ood else "id" for u in dataset.val]
    else:
        train_labels = [u.intent for u in train_utts]
        known = set(train_labels)
        val_keep = np.array([u.intent in known for u in dataset.val],
                            dtype=bool)
        val_labels = [u.intent for u in dataset.val if u.intent in known]
    cfg = MlpConfig(seed=config.seed, use_best_ckpt=config.use_best_ckpt,
                    objective=objective.get(d, "softmax-ce"))
    model, _ = train_mlp(train_X, train_labels, val_X[val_keep], val_labels,
                         cfg)

    if d in ("MSP", "BinaryMSP"):
        ood_index = (model.class_index.index(OOD_LABEL)
                     if OOD_LABEL in model.class_index else None)
        return tuple(det.score_msp(predict_proba(model, X),
                                   ood_index=ood_index, detector_id=d)
                     for X in (val_X, test_X))
    if d == "Entropy":
        return tuple(det.score_entropy_head(predict_proba(model, X))
                     for X in (val_X, test_X))
    if d == "DOC":
        return tuple(det.score_doc(predict_proba(model, X))
                     for X in (val_X, test_X))

    # feature-space baselines on the penultimate layer
    id_feats = penultimate_features(model, id_X)
    val_feats = penultimate_features(model, val_X)
    test_feats = penultimate_features(model, test_X)
    if d == "KNN":
        return tuple(det.score_knn_features(id_feats, id_labels, F)
                     for F in (val_feats, test_feats))
    # TrustScores: nearest-neighbor agreement with the predicted ID class
    id_classes = set(id_labels)
    out = []
    for X, F in ((val_X, val_feats), (test_X, test_feats)):
        predicted = predict_labels(model, X, restrict_to=id_classes)
        out.append(det.score_trust(id_feats, id_labels, F, predicted))
    return tuple(out)


def _run_embedding_detector(config, dataset, embeddings):
    train_utts, train_X, _, id_X, id_labels = _train_view(
        config, dataset, embeddings["train"])
    val_X = embeddings["val"].data
    test_X = embeddings["test"].data
    d = config.detector

    if d in ("BiEncoderCosine", "BiEncoderEuclidean",
             "BiEncoderPCACosine", "BiEncoderPCAEuclidean"):
        pca = None
        if "PCA" in d:
            n_comp = min(DEFAULT_PCA_COMPONENTS, id_X.shape[0], id_X.shape[1])
            pca = fit_pca(id_X, n_comp)
        metric = "cosine" if d.endswith("Cosine") else "euclidean"
        return tuple(det.score_similarity_nn(id_X, X, metric=metric, pca=pca)
                     for X in (val_X, test_X))
    if d in ("BiEncoderEntropy", "BiEncoderPCAEntropy"):
        pca = None
        if "PCA" in d:
            n_comp = min(DEFAULT_PCA_COMPONENTS, id_X.shape[0], id_X.shape[1])
            pca = fit_pca(id_X, n_comp)
        return tuple(det.score_class_entropy(id_X, id_labels, X, pca=pca)
                     for X in (val_X, test_X))
    if d == "BiEncoderMaha":
        return tuple(det.score_mahalanobis(id_X, id_labels, X)
                     for X in (val_X, test_X))
    if d in ("BiEncoderLOF", "LOF"):
        k = min(DEFAULT_LOF_K, id_X.shape[0] - 1)
        return tuple(det.score_lof_detector(id_X, X, k, detector_id=d)
                     for X in (val_X, test_X))
    if d == "ADB":
        model = adb_fit(id_X, id_labels, AdbConfig(seed=config.seed))
        return adb_predict(model, test_X)
    return _run_classifier_detector(config, dataset, train_utts, train_X,
                                    id_X, id_labels, val_X, test_X)


def run_cell(config: ExperimentConfig, dataset: LabeledDataset,
             embeddings=None) -> ResultRow:
    """Execute one grid cell; deterministic per config.seed."""
    validate_config(config)
    started = time.perf_counter()

    if config.detector in TEXT_DETECTORS:
        corpus = [u.text for u in dataset.train if not u.is_ood]
        outcome = rake_predict(rake_fit(corpus),
                               [u.text for u in dataset.test])
    else:
        if embeddings is None:
            raise ConfigurationError(
                f"{config.detector} needs per-split embeddings")
        for split_name in SPLITS:
            if split_name not in embeddings:
                raise ConfigurationError(f"missing {split_name} embeddings")
            if embeddings[split_name].n_rows != len(dataset.split(split_name)):
                raise ConfigurationError(
                    f"{split_name} embeddings have "
                    f"{embeddings[split_name].n_rows} rows but the split has "
                    f"{len(dataset.split(split_name))} utterances")
        outcome = _run_embedding_detector(config, dataset, embeddings)

    test_labels = binarize(dataset.test)
    if isinstance(outcome, det.DirectVerdicts):
        report = evaluate(outcome, test_labels)
    else:
        val_scores, test_scores = outcome
        report = evaluate(test_scores, test_labels, val_scores=val_scores.scores,
                          val_labels=binarize(dataset.val))
    wall = time.perf_counter() - started
    return ResultRow(
        feature_extractor=config.extractor, detector=config.detector,
        use_best_ckpt=config.use_best_ckpt,
        is_ood_label_in_train=config.is_ood_label_in_train,
        f1=report.f1, mcc=report.mcc, fpr_at_95=report.fpr_at_95,
        fpr_at_90=report.fpr_at_90, aupr=report.aupr, auroc=report.auroc,
        seed=config.seed, wall_time_seconds=wall,
    )


def _error_row(config: ExperimentConfig, message: str,
               wall: float) -> ResultRow:
    return ResultRow(
        feature_extractor=config.extractor, detector=config.detector,
        use_best_ckpt=config.use_best_ckpt,
        is_ood_label_in_train=config.is_ood_label_in_train,
        f1=None, mcc=None, fpr_at_95=None, fpr_at_90=None, aupr=None,
        auroc=None, seed=config.seed, wall_time_seconds=wall, error=message)


def run_grid(configs, dataset: LabeledDataset,
             embeddings_by_extractor) -> list[ResultRow]:
    """Run every cell in isolation; failures become error rows."""
    rows = []
    for config in configs:
        started = time.perf_counter()
        try:
            emb = None
            if config.detector not in TEXT_DETECTORS:
                emb = embeddings_by_extractor.get(config.extractor)
                if emb is None:
                    raise ConfigurationError(
                        f"no embeddings loaded for extractor "
                        f"{config.extractor!r}")
            rows.append(run_cell(config, dataset, emb))
        except Exception as exc:  # cell isolation: record, keep going
            rows.append(_error_row(config, str(exc),
                                   time.perf_counter() - started))
    rows.sort(key=lambda r: (r.feature_extractor, r.detector))
    return rows


# ---------------------------------------------------------------------------
# table output

def _cell(value, fmt=None) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and fmt:
        return fmt % value
    return repr(value) if isinstance(value, float) else str(value)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_markdown(rows) -> str:
    headers = ("Feature Extractor", "Detector", "best_ckpt", "ood_in_train",
               "F1 ↑", "MCC ↑", "FPR@95 ↓", "FPR@90 ↓", "AUPR ↑", "AUROC ↑",
               "seed", "time (s)", "error")
    lines = ["↑ higher is better; ↓ lower is better. "
             "Score columns are blank for direct-inference detectors.",
             "",
             "| " + " | ".join(headers) + " |",
             "|" + "|".join("---" for _ in headers) + "|"]
    for r in rows:
        cells = [r.feature_extractor, r.detector, _cell(r.use_best_ckpt),
                 _cell(r.is_ood_label_in_train)]
        cells += [_cell(getattr(r, c), fmt="%.3f")
                  for c in ("f1", "mcc", "fpr_at_95", "fpr_at_90", "aupr",
                            "auroc")]
        cells += [str(r.seed), "%.2f" % r.wall_time_seconds, r.error]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_rows(rows, path, fmt: str = "csv") -> None:
    if fmt not in ("csv", "md"):
        raise ValueError(f"format must be csv or md, got {fmt!r}")
    text = rows_to_csv(rows) if fmt == "csv" else rows_to_markdown(rows)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# artifact resolution for the CLI

def resolve_dataset(name: str, data_dir) -> LabeledDataset:
    """Map a dataset name to its loader; unknown names read the normalized
    file ``<name>.tsv`` under data_dir (how synthetic benches are stored)."""
    if name == "clinc150":
        path = data_dir if os.path.isfile(data_dir) else os.path.join(
            data_dir, "data_full.json")
        return load_clinc150(path)
    if name == "rostd":
        return load_rostd(data_dir)
    if name == "snips":
        return synthesize_snips_ood(load_snips(data_dir))
    path = data_dir if os.path.isfile(data_dir) else os.path.join(
        data_dir, f"{name}.tsv")
    return read_normalized(path, name=name)


def load_split_embeddings(emb_dir, extractor: str,
                          dataset: LabeledDataset) -> dict:
    """Read the three split matrices for one extractor, validated against
    the dataset."""
    out = {}
    for split_name in SPLITS:
        path = os.path.join(emb_dir,
                            store_basename(extractor, dataset.name, split_name))
        manifest, matrix = read_embeddings(path, dataset=dataset)
        if manifest.extractor != extractor or manifest.split != split_name \
                or manifest.dataset != dataset.name:
            raise StoreError(
                f"{path}: manifest names "
                f"{manifest.extractor}/{manifest.dataset}/{manifest.split}, "
                f"expected {extractor}/{dataset.name}/{split_name}")
        out[split_name] = matrix
    return out
