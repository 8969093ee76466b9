"""Adaptive decision boundaries: per-class spheres with trainable radii.

Centers are frozen at the class means of the input features; only the
radius parameters are trained, by plain gradient descent on the boundary
loss, with radii produced through a softplus so they stay positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detectors import DirectVerdicts
from .numerics import as_matrix, euclidean_distance_matrix


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True)
class AdbConfig:
    learning_rate: float = 0.05
    epochs: int = 100
    seed: int = 0
    # all classes start at this raw parameter when set; seeded N(0,1) otherwise
    init_theta: float | None = None


@dataclass(frozen=True)
class AdbModel:
    """Class centers plus raw radius parameters; radii = softplus(theta)."""

    centers: dict[str, np.ndarray]
    radius_params: dict[str, float]
    loss_history: tuple[float, ...] = field(repr=False, default=())

    @property
    def radii(self) -> dict[str, float]:
        return {c: float(softplus(t)) for c, t in self.radius_params.items()}


def adb_fit(features, labels, config: AdbConfig = AdbConfig()) -> AdbModel:
    """Train per-class radii on the boundary loss.

    Each example contributes (d - r) when its distance d to its own center
    exceeds the class radius r, and (r - d) otherwise, averaged over
    examples; gradients flow through the softplus.
    """
    X = as_matrix(features)
    labels = [str(l) for l in labels]
    if len(labels) != X.shape[0]:
        raise ValueError("one label per row required")
    if X.shape[0] == 0:
        raise ValueError("no training examples")
    classes = sorted(set(labels))
    label_arr = np.array(labels)
    centers = {c: X[label_arr == c].mean(axis=0) for c in classes}

    # distance of each example to its own class center, grouped by class
    dists = {c: np.linalg.norm(X[label_arr == c] - centers[c], axis=1)
             for c in classes}
    counts = {c: int((label_arr == c).sum()) for c in classes}
    n = X.shape[0]

    rng = np.random.default_rng(config.seed)
    if config.init_theta is None:
        theta = {c: float(rng.standard_normal()) for c in classes}
    else:
        theta = {c: float(config.init_theta) for c in classes}

    history = []
    for epoch in range(config.epochs):
        loss = 0.0
        grads = {}
        for c in classes:
            r = float(softplus(theta[c]))
            d = dists[c]
            outside = d > r
            loss += float(np.where(outside, d - r, r - d).sum())
            # dL/dr summed over the class, then through softplus
            dl_dr = float(np.sum(np.where(outside, -1.0, 1.0)))
            grads[c] = (dl_dr / n) * float(_sigmoid(theta[c]))
        loss /= n
        if not np.isfinite(loss):
            raise ValueError(f"non-finite boundary loss at epoch {epoch}")
        history.append(loss)
        for c in classes:
            theta[c] -= config.learning_rate * grads[c]

    return AdbModel(centers=centers, radius_params=theta,
                    loss_history=tuple(history))


def adb_predict(model: AdbModel, query_features) -> DirectVerdicts:
    """OOD iff the query lies outside every class sphere."""
    Q = as_matrix(query_features)
    classes = sorted(model.centers)
    centers = np.stack([model.centers[c] for c in classes])
    radii = np.array([model.radii[c] for c in classes])
    dists = euclidean_distance_matrix(Q, centers)
    is_ood = np.all(dists > radii[None, :], axis=1)
    return DirectVerdicts(is_ood=is_ood, detector_id="ADB")
