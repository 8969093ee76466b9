"""Deterministic vector/matrix primitives shared by all detectors.

Similarity/distance kernels, softmax/entropy, PCA, pooled-covariance
Gaussian class models, and the local outlier factor. Everything here is
pure numpy, single-threaded, and deterministic; fitted models are frozen
dataclasses that are safe to score from concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

# Floor applied to k-distances and reachability distances so coincident
# duplicate points keep every LOF quantity finite and positive.
REACH_DIST_FLOOR = 1e-12

# Default scale for the Gaussian covariance ridge: eps = scale * trace/dim.
DEFAULT_EPSILON_SCALE = 1e-6


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Row-major matrix of fixed-dimension real vectors, one row per utterance.

    Attributes:
        data: (n_rows, dim) float array; every entry finite.
        row_ids: one unique identifier per row.
    """

    data: np.ndarray
    row_ids: tuple[str, ...] = ()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"embedding data must be 2-d, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("embedding data contains non-finite entries")
        object.__setattr__(self, "data", data)
        row_ids = tuple(self.row_ids) or tuple(str(i) for i in range(data.shape[0]))
        if len(row_ids) != data.shape[0]:
            raise ValueError(
                f"row_ids length {len(row_ids)} != n_rows {data.shape[0]}"
            )
        if len(set(row_ids)) != len(row_ids):
            raise ValueError("row_ids are not unique")
        object.__setattr__(self, "row_ids", row_ids)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def as_matrix(x) -> np.ndarray:
    """Accept an EmbeddingMatrix or a plain 2-d array-like and return ndarray."""
    if isinstance(x, EmbeddingMatrix):
        return x.data
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors.

    Zero-norm inputs yield 0.0 with a RuntimeWarning instead of an error so
    batch scoring stays total.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        warnings.warn("cosine_similarity of a zero-norm vector, returning 0.0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def euclidean_distance(a, b) -> float:
    """L2 norm of (a - b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def cosine_similarity_matrix(queries, reference) -> np.ndarray:
    """Pairwise cosine similarity, (n_queries, n_reference).

    Zero-norm rows on either side contribute similarity 0 (with a warning),
    matching the scalar kernel.
    """
    q = as_matrix(queries)
    r = as_matrix(reference)
    if q.shape[1] != r.shape[1]:
        raise ValueError(f"dimension mismatch: {q.shape[1]} vs {r.shape[1]}")
    qn = np.linalg.norm(q, axis=1)
    rn = np.linalg.norm(r, axis=1)
    if np.any(qn == 0.0) or np.any(rn == 0.0):
        warnings.warn("cosine similarity over zero-norm rows, treating as 0.0",
                      RuntimeWarning, stacklevel=2)
    denom = np.outer(qn, rn)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = (q @ r.T) / denom
    sims[~np.isfinite(sims)] = 0.0
    return sims


def euclidean_distance_matrix(queries, reference) -> np.ndarray:
    """Pairwise Euclidean distances, (n_queries, n_reference)."""
    q = as_matrix(queries)
    r = as_matrix(reference)
    if q.shape[1] != r.shape[1]:
        raise ValueError(f"dimension mismatch: {q.shape[1]} vs {r.shape[1]}")
    # ||q - r||^2 = ||q||^2 + ||r||^2 - 2 q.r, clamped for rounding
    sq = (q * q).sum(axis=1)[:, None] + (r * r).sum(axis=1)[None, :] - 2.0 * (q @ r.T)
    return np.sqrt(np.maximum(sq, 0.0))


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Softmax with max-subtraction; temperature divides logits first.

    Works on a vector or row-wise on a matrix.
    """
    if temperature <= 0.0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    z = z / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def shannon_entropy(p) -> float:
    """Natural-log Shannon entropy of a probability vector; 0*ln(0) := 0."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0.0):
        raise ValueError("probabilities must be non-negative")
    total = p.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {total}, expected 1 within 1e-6")
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def entropy_rows(p: np.ndarray) -> np.ndarray:
    """Row-wise natural-log entropy with the same validation as shannon_entropy."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0.0):
        raise ValueError("probabilities must be non-negative")
    sums = p.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError("at least one row does not sum to 1 within 1e-6")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PcaModel:
    """Principal axes of mean-centered data.

    Attributes:
        mean: (dim,) sample mean of the fitted data.
        components: (k, dim) orthonormal rows, ordered by explained variance.
        explained_variance: (k,) non-increasing, >= 0.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]


def fit_pca(X, n_components: int) -> PcaModel:
    """Fit PCA via eigendecomposition of the sample covariance (divisor n-1).

    Component signs are fixed deterministically: the largest-magnitude entry
    of each component is made positive. Rank-deficient tail components carry
    explained_variance 0.
    """
    X = as_matrix(X)
    n, dim = X.shape
    if n < 2:
        raise ValueError(f"PCA needs at least 2 rows, got {n}")
    if not 1 <= n_components <= min(n, dim):
        raise ValueError(
            f"n_components must be in [1, min(n_rows, dim)] = "
            f"[1, {min(n, dim)}], got {n_components}"
        )
    mean = X.mean(axis=0)
    centered = X - mean
    cov = (centered.T @ centered) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    variances = np.maximum(eigvals[order], 0.0)
    components = eigvecs[:, order].T.copy()
    for i, row in enumerate(components):
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0.0:
            components[i] = -row
    return PcaModel(mean=mean, components=components,
                    explained_variance=variances)


def pca_transform(model: PcaModel, X) -> np.ndarray:
    """Project (X - mean) onto the model's principal axes."""
    X = as_matrix(X)
    if X.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: data {X.shape[1]} vs model {model.dim}")
    return (X - model.mean) @ model.components.T


# ---------------------------------------------------------------------------
# Pooled-covariance Gaussian class model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianClassModel:
    """Per-class means with a shared regularized precision matrix."""

    class_means: dict[str, np.ndarray]
    precision: np.ndarray
    regularization_epsilon: float

    @property
    def dim(self) -> int:
        return self.precision.shape[0]


def fit_gaussian_classes(X, labels, epsilon_scale: float = DEFAULT_EPSILON_SCALE,
                         ) -> GaussianClassModel:
    """Per-class sample means plus pooled within-class covariance.

    Covariance = pooled scatter / (n - C), inverted after adding eps*I with
    eps = epsilon_scale * trace(cov)/dim (trace floored at dim so a fully
    degenerate covariance still inverts).
    """
    X = as_matrix(X)
    labels = [str(l) for l in labels]
    if len(labels) != X.shape[0]:
        raise ValueError("one label per row required")
    classes = sorted(set(labels))
    label_arr = np.array(labels)
    means: dict[str, np.ndarray] = {}
    n, dim = X.shape
    scatter = np.zeros((dim, dim))
    for c in classes:
        rows = X[label_arr == c]
        if rows.shape[0] < 2:
            raise ValueError(f"class {c!r} has {rows.shape[0]} rows, need >= 2")
        mu = rows.mean(axis=0)
        means[c] = mu
        centered = rows - mu
        scatter += centered.T @ centered
    cov = scatter / (n - len(classes))
    scale = float(np.trace(cov)) / dim
    if scale <= 0.0:
        scale = 1.0
    eps = epsilon_scale * scale
    precision = np.linalg.inv(cov + eps * np.eye(dim))
    precision = (precision + precision.T) / 2.0
    return GaussianClassModel(class_means=means, precision=precision,
                              regularization_epsilon=eps)


def mahalanobis_distance(model: GaussianClassModel, x) -> dict[str, float]:
    """Mahalanobis distance from x to each class mean under the shared precision."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ValueError(f"dimension mismatch: {x.shape} vs ({model.dim},)")
    out: dict[str, float] = {}
    for c, mu in model.class_means.items():
        d = x - mu
        q = float(d @ model.precision @ d)
        if q < -1e-10:
            raise ValueError(f"negative quadratic form {q} for class {c!r}; "
                             "precision is not PSD")
        out[c] = float(np.sqrt(max(q, 0.0)))
    return out


def mahalanobis_min_batch(model: GaussianClassModel, X) -> np.ndarray:
    """Per row of X, the minimum Mahalanobis distance over all classes."""
    X = as_matrix(X)
    if X.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {model.dim}")
    best = np.full(X.shape[0], np.inf)
    for mu in model.class_means.values():
        d = X - mu
        q = np.einsum("ij,jk,ik->i", d, model.precision, d)
        if np.any(q < -1e-10):
            raise ValueError("negative quadratic form; precision is not PSD")
        best = np.minimum(best, np.sqrt(np.maximum(q, 0.0)))
    return best


# ---------------------------------------------------------------------------
# Local outlier factor (Breunig et al. definition)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LofModel:
    """LOF statistics of the training set for novelty scoring.

    kdist and lrd carry one entry per training point; both are finite and
    positive even in the presence of coincident duplicates (floored).
    """

    train_points: np.ndarray
    k: int
    kdist: np.ndarray
    lrd: np.ndarray
    neighborhoods: tuple[np.ndarray, ...] = field(repr=False, default=())


def lof_fit(train, k: int) -> LofModel:
    """Compute k-distances and local reachability densities of the training set.

    The k-distance neighborhood of a point contains every other point at
    distance <= its k-distance (ties included), per the LOF definition.
    """
    X = as_matrix(train)
    n = X.shape[0]
    if n < 3:
        raise ValueError(f"LOF needs at least 3 training points, got {n}")
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n_train = {n}, got {k}")
    dist = euclidean_distance_matrix(X, X)
    np.fill_diagonal(dist, np.inf)
    sorted_dist = np.sort(dist, axis=1)
    kdist = np.maximum(sorted_dist[:, k - 1], REACH_DIST_FLOOR)
    # ties: neighborhood = all points within k-distance
    raw_kdist = sorted_dist[:, k - 1]
    neighborhoods = tuple(
        np.flatnonzero(dist[i] <= raw_kdist[i]) for i in range(n)
    )
    lrd = np.empty(n)
    for i, nbrs in enumerate(neighborhoods):
        reach = np.maximum(np.maximum(dist[i, nbrs], kdist[nbrs]),
                           REACH_DIST_FLOOR)
        lrd[i] = 1.0 / reach.mean()
    return LofModel(train_points=X, k=k, kdist=kdist, lrd=lrd,
                    neighborhoods=neighborhoods)


def lof_score(model: LofModel, queries) -> np.ndarray:
    """Raw LOF of each query against the training points only (novelty mode).

    ~1 for inliers, >> 1 for outliers.
    """
    Q = as_matrix(queries)
    if Q.shape[1] != model.train_points.shape[1]:
        raise ValueError(
            f"dimension mismatch: {Q.shape[1]} vs {model.train_points.shape[1]}"
        )
    dist = euclidean_distance_matrix(Q, model.train_points)
    sorted_dist = np.sort(dist, axis=1)
    q_kdist = sorted_dist[:, model.k - 1]
    scores = np.empty(Q.shape[0])
    for i in range(Q.shape[0]):
        nbrs = np.flatnonzero(dist[i] <= q_kdist[i])
        reach = np.maximum(np.maximum(dist[i, nbrs], model.kdist[nbrs]),
                           REACH_DIST_FLOOR)
        own_lrd = 1.0 / reach.mean()
        scores[i] = model.lrd[nbrs].mean() / own_lrd
    return scores
