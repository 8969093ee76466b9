"""Embedding-based out-of-distribution detection: detectors, calibration,
metrics, and a benchmark grid runner over precomputed sentence embeddings."""

from .adb import AdbConfig, AdbModel, adb_fit, adb_predict
from .classifier import (MlpClassifier, MlpConfig, TrainLog, load_classifier,
                         penultimate_features, predict_labels, predict_proba,
                         save_classifier, train_mlp)
from .datasets import (OOD_LABEL, LabeledDataset, RostdLayout, Utterance,
                       apply_ood_filter, binarize, load_clinc150, load_rostd,
                       load_snips, read_normalized, synthesize_snips_ood,
                       write_normalized)
from .detectors import (DetectionScores, DirectVerdicts, score_class_entropy,
                        score_doc, score_entropy_head, score_knn_features,
                        score_lof_detector, score_mahalanobis, score_msp,
                        score_similarity_nn, score_trust)
from .embstore import (AlignmentError, EmbeddingManifest, IntegrityError,
                       StoreError, VersionError, read_embeddings,
                       store_basename, write_embeddings)
from .harness import (ALL_DETECTORS, ConfigurationError, ExperimentConfig,
                      ResultRow, resolve_dataset, rows_to_csv,
                      rows_to_markdown, run_cell, run_grid, validate_config)
from .metrics import (CalibratedEvaluation, aupr, auroc, calibrate_threshold,
                      evaluate, f1_score, fpr_at_tpr, mcc)
from .numerics import (EmbeddingMatrix, GaussianClassModel, LofModel,
                       PcaModel, cosine_similarity, euclidean_distance,
                       fit_gaussian_classes, fit_pca, lof_fit, lof_score,
                       mahalanobis_distance, pca_transform, shannon_entropy,
                       softmax)
from .rake import RakeModel, load_smart_stopwords, rake_fit, rake_predict
from .synth import SyntheticSpec, generate

__version__ = "0.1.0"
