"""Synthetic embedding benchmark: Gaussian ID clusters plus planted OOD.

Stands in for real encoder output so the whole pipeline (detectors ->
calibration -> metrics -> tables) runs with no model downloads. Class c
lives at separation * e_c (axis-aligned); OOD placement is selectable:

* ``far-shift``   -- one far cluster at -2 * separation * 1/sqrt(dim)
* ``inter-class`` -- points near midpoints of random class-mean pairs
* ``uniform-box`` -- uniform over the box spanning the class means
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import OOD_LABEL, LabeledDataset, Utterance
from .numerics import EmbeddingMatrix

OOD_MODES = ("far-shift", "inter-class", "uniform-box")
SYNTH_EXTRACTOR = "synthetic"


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 3
    per_class: int = 100
    dim: int = 16
    separation: float = 10.0
    id_noise_scale: float = 1.0
    ood_mode: str = "far-shift"
    seed: int = 0
    ood_count: int | None = None  # default: one class's worth

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.n_classes > self.dim:
            raise ValueError("axis-aligned means need n_classes <= dim")
        if self.per_class < 3:
            raise ValueError("need at least 3 points per class "
                             "(one for each split)")
        if self.separation <= 0:
            raise ValueError("separation must be positive")
        if self.ood_mode not in OOD_MODES:
            raise ValueError(f"ood_mode must be one of {OOD_MODES}")
        if self.ood_count is not None and self.ood_count < 3:
            raise ValueError("ood_count must be >= 3")


def class_means(spec: SyntheticSpec) -> np.ndarray:
    means = np.zeros((spec.n_classes, spec.dim))
    for c in range(spec.n_classes):
        means[c, c] = spec.separation
    return means


def _split_sizes(n: int) -> tuple[int, int, int]:
    # 70/15/15 with the remainder folded into train; every group lands
    # at least one point in val and test so small specs stay usable
    n_val = max(1, int(n * 0.15))
    n_test = max(1, int(n * 0.15))
    return n - n_val - n_test, n_val, n_test


def _ood_points(spec: SyntheticSpec, n: int,
                rng: np.random.Generator) -> np.ndarray:
    means = class_means(spec)
    if spec.ood_mode == "far-shift":
        center = -2.0 * spec.separation * np.ones(spec.dim) / np.sqrt(spec.dim)
        return center + rng.normal(scale=spec.id_noise_scale,
                                   size=(n, spec.dim))
    if spec.ood_mode == "inter-class":
        first = rng.integers(spec.n_classes, size=n)
        shift = rng.integers(1, spec.n_classes, size=n)
        second = (first + shift) % spec.n_classes
        mids = (means[first] + means[second]) / 2.0
        return mids + rng.normal(scale=spec.id_noise_scale, size=(n, spec.dim))
    lo = means.min(axis=0) - spec.separation / 2.0
    hi = means.max(axis=0) + spec.separation / 2.0
    return rng.uniform(lo, hi, size=(n, spec.dim))


def generate(spec: SyntheticSpec) -> tuple[LabeledDataset,
                                           dict[str, EmbeddingMatrix]]:
    """Deterministic per seed; returns the dataset and per-split embeddings."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    means = class_means(spec)

    rows = {"train": [], "val": [], "test": []}
    utts = {"train": [], "val": [], "test": []}

    def emit(points: np.ndarray, intent: str) -> None:
        n_train, n_val, n_test = _split_sizes(points.shape[0])
        bounds = {"train": (0, n_train), "val": (n_train, n_train + n_val),
                  "test": (n_train + n_val, points.shape[0])}
        for split_name, (lo, hi) in bounds.items():
            for i in range(lo, hi):
                idx = len(utts[split_name])
                utts[split_name].append(Utterance(
                    text=f"synthetic {intent} {split_name} {idx}",
                    intent=intent))
                rows[split_name].append(points[i])

    for c in range(spec.n_classes):
        points = means[c] + rng.normal(scale=spec.id_noise_scale,
                                       size=(spec.per_class, spec.dim))
        emit(points, f"class_{c}")

    n_ood = spec.per_class if spec.ood_count is None else spec.ood_count
    emit(_ood_points(spec, n_ood, rng), OOD_LABEL)

    ds = LabeledDataset(name="synthetic", train=tuple(utts["train"]),
                        val=tuple(utts["val"]), test=tuple(utts["test"]))
    embeddings = {name: EmbeddingMatrix(np.array(rows[name]))
                  for name in rows}
    return ds, embeddings
