"""Single-hidden-layer MLP classifier head, hand-rolled on numpy.

Three training objectives share one architecture:

* ``softmax-ce``        -- multi-class cross-entropy (MSP, Entropy, KNN, Trust)
* ``per-class-sigmoid`` -- independent one-vs-rest sigmoids (DOC)
* ``binary``            -- 2-class cross-entropy over collapsed ID/OOD labels

Training is deterministic per seed (PCG64 drives both the init and the
shuffle stream). Penultimate features are the post-ReLU hidden activations.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .numerics import as_matrix, softmax

OBJECTIVES = ("softmax-ce", "per-class-sigmoid", "binary")

_MAGIC = b"BEDM"
_FORMAT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class MlpConfig:
    hidden: int = 256
    learning_rate: float = 1e-3
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    use_best_ckpt: bool = False
    objective: str = "softmax-ce"

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(
                f"unknown objective {self.objective!r}; expected one of {OBJECTIVES}")
        if self.hidden < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("hidden, epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class MlpClassifier:
    """Trained parameters plus the label ordering of the output layer."""

    W1: np.ndarray  # hidden x dim
    b1: np.ndarray  # hidden
    W2: np.ndarray  # n_out x hidden
    b2: np.ndarray  # n_out
    objective: str
    class_index: tuple[str, ...]

    def __post_init__(self):
        for name in ("W1", "b1", "W2", "b2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite parameter {name}")
        if self.W2.shape[0] != len(self.class_index):
            raise ValueError("output rows must match class_index length")

    @property
    def dim(self) -> int:
        return self.W1.shape[1]


@dataclass(frozen=True)
class TrainLog:
    train_loss: tuple[float, ...]  # one entry per epoch
    val_loss: tuple[float, ...]
    best_epoch: int  # index of the minimum validation loss (first on ties)
    seed: int


def _encode_labels(labels, class_index: tuple[str, ...]) -> np.ndarray:
    lookup = {c: i for i, c in enumerate(class_index)}
    try:
        return np.array([lookup[l] for l in labels], dtype=np.intp)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} not in class index") from None


def _forward(params: dict, X: np.ndarray):
    pre = X @ params["W1"].T + params["b1"]
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ params["W2"].T + params["b2"]
    return pre, hidden, logits


def _loss_forward(logits: np.ndarray, y_idx: np.ndarray, objective: str):
    """Mean loss over the batch and dL/dlogits for backprop."""
    n = logits.shape[0]
    if objective in ("softmax-ce", "binary"):
        shifted = logits - logits.max(axis=1, keepdims=True)
        logsumexp = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
        loss = float(np.mean(logsumexp - logits[np.arange(n), y_idx]))
        dlogits = softmax(logits)
        dlogits[np.arange(n), y_idx] -= 1.0
        return loss, dlogits / n
    # per-class-sigmoid: sum of one-vs-rest binary cross-entropies
    targets = np.zeros_like(logits)
    targets[np.arange(n), y_idx] = 1.0
    # stable BCE-with-logits: max(z,0) - z*y + log(1 + exp(-|z|))
    per_entry = (np.maximum(logits, 0.0) - logits * targets
                 + np.log1p(np.exp(-np.abs(logits))))
    loss = float(per_entry.sum() / n)
    sig = np.where(logits >= 0,
                   1.0 / (1.0 + np.exp(-logits)),
                   np.exp(logits) / (1.0 + np.exp(logits)))
    return loss, (sig - targets) / n


def _loss_and_grads(params: dict, X: np.ndarray, y_idx: np.ndarray,
                    objective: str):
    pre, hidden, logits = _forward(params, X)
    loss, dlogits = _loss_forward(logits, y_idx, objective)
    grads = {
        "W2": dlogits.T @ hidden,
        "b2": dlogits.sum(axis=0),
    }
    dhidden = (dlogits @ params["W2"]) * (pre > 0)
    grads["W1"] = dhidden.T @ X
    grads["b1"] = dhidden.sum(axis=0)
    return loss, grads


def loss_and_gradients(model: MlpClassifier, features, labels):
    """Batch loss and analytic parameter gradients (for gradient checks)."""
    X = as_matrix(features)
    y_idx = _encode_labels(labels, model.class_index)
    params = {"W1": model.W1, "b1": model.b1, "W2": model.W2, "b2": model.b2}
    return _loss_and_grads(params, X, y_idx, model.objective)


def batch_loss(model: MlpClassifier, features, labels) -> float:
    X = as_matrix(features)
    y_idx = _encode_labels(labels, model.class_index)
    params = {"W1": model.W1, "b1": model.b1, "W2": model.W2, "b2": model.b2}
    _, _, logits = _forward(params, X)
    loss, _ = _loss_forward(logits, y_idx, model.objective)
    return loss


def _init_params(dim: int, hidden: int, n_out: int,
                 rng: np.random.Generator) -> dict:
    # uniform +-1/sqrt(fan_in) for weights and biases alike
    w1_bound = 1.0 / np.sqrt(dim)
    w2_bound = 1.0 / np.sqrt(hidden)
    return {
        "W1": rng.uniform(-w1_bound, w1_bound, size=(hidden, dim)),
        "b1": rng.uniform(-w1_bound, w1_bound, size=hidden),
        "W2": rng.uniform(-w2_bound, w2_bound, size=(n_out, hidden)),
        "b2": rng.uniform(-w2_bound, w2_bound, size=n_out),
    }


def train_mlp(features, labels, val_features, val_labels,
              config: MlpConfig | None = None) -> tuple[MlpClassifier, TrainLog]:
    """Train the head with Adam; optionally return the best-validation epoch.

    Validation labels must be drawn from the training label set (callers
    filter out-of-vocabulary rows first). With ``use_best_ckpt`` the
    parameters of the epoch with the lowest validation loss are returned,
    first epoch winning ties; otherwise the final epoch's.
    """
    if config is None:
        config = MlpConfig()
    X = as_matrix(features)
    Xval = as_matrix(val_features)
    if Xval.shape[1] != X.shape[1]:
        raise ValueError("validation dimension differs from training")
    if Xval.shape[0] == 0:
        raise ValueError("validation split must be non-empty")

    class_index = tuple(sorted(set(labels)))
    if len(class_index) < 2:
        raise ValueError("need at least 2 classes to train")
    if config.objective == "binary" and len(class_index) != 2:
        raise ValueError(
            f"binary objective needs exactly 2 classes, got {len(class_index)}")
    y = _encode_labels(labels, class_index)
    if y.size != X.shape[0]:
        raise ValueError("labels length must match feature rows")
    y_val = _encode_labels(val_labels, class_index)

    rng = np.random.Generator(np.random.PCG64(config.seed))
    params = _init_params(X.shape[1], config.hidden, len(class_index), rng)

    # Adam state
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(vv) for k, vv in params.items()}
    step = 0

    train_losses = []
    val_losses = []
    best_val = np.inf
    best_params = {k: p.copy() for k, p in params.items()}

    for epoch in range(config.epochs):
        order = rng.permutation(X.shape[0])
        epoch_loss = 0.0
        for start in range(0, X.shape[0], config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = _loss_and_grads(params, X[idx], y[idx],
                                          config.objective)
            if not np.isfinite(loss):
                raise ArithmeticError(
                    f"non-finite training loss at epoch {epoch}")
            epoch_loss += loss * idx.size
            step += 1
            for key in params:
                g = grads[key]
                m[key] = ADAM_BETA1 * m[key] + (1 - ADAM_BETA1) * g
                v[key] = ADAM_BETA2 * v[key] + (1 - ADAM_BETA2) * g * g
                m_hat = m[key] / (1 - ADAM_BETA1 ** step)
                v_hat = v[key] / (1 - ADAM_BETA2 ** step)
                params[key] -= (config.learning_rate * m_hat
                                / (np.sqrt(v_hat) + ADAM_EPS))
        train_losses.append(epoch_loss / X.shape[0])

        _, _, val_logits = _forward(params, Xval)
        val_loss, _ = _loss_forward(val_logits, y_val, config.objective)
        if not np.isfinite(val_loss):
            raise ArithmeticError(f"non-finite validation loss at epoch {epoch}")
        val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_params = {k: p.copy() for k, p in params.items()}

    chosen = best_params if config.use_best_ckpt else params
    model = MlpClassifier(
        W1=chosen["W1"].copy(), b1=chosen["b1"].copy(),
        W2=chosen["W2"].copy(), b2=chosen["b2"].copy(),
        objective=config.objective, class_index=class_index,
    )
    log = TrainLog(
        train_loss=tuple(train_losses),
        val_loss=tuple(val_losses),
        best_epoch=int(np.argmin(val_losses)),
        seed=config.seed,
    )
    return model, log


def predict_proba(model: MlpClassifier, features) -> np.ndarray:
    """Class probabilities (softmax/binary) or per-class sigmoid confidences."""
    X = as_matrix(features)
    if X.shape[1] != model.dim:
        raise ValueError(f"expected dim {model.dim}, got {X.shape[1]}")
    params = {"W1": model.W1, "b1": model.b1, "W2": model.W2, "b2": model.b2}
    _, _, logits = _forward(params, X)
    if model.objective == "per-class-sigmoid":
        return np.where(logits >= 0,
                        1.0 / (1.0 + np.exp(-logits)),
                        np.exp(logits) / (1.0 + np.exp(logits)))
    return softmax(logits)


def predict_labels(model: MlpClassifier, features,
                   restrict_to: set[str] | None = None) -> list[str]:
    """Argmax class per row, optionally restricted to a label subset."""
    probs = predict_proba(model, features)
    if restrict_to is None:
        cols = np.arange(len(model.class_index))
    else:
        cols = np.array([i for i, c in enumerate(model.class_index)
                         if c in restrict_to], dtype=np.intp)
        if cols.size == 0:
            raise ValueError("restrict_to excludes every known class")
    picks = cols[np.argmax(probs[:, cols], axis=1)]
    return [model.class_index[i] for i in picks]


def penultimate_features(model: MlpClassifier, features) -> np.ndarray:
    """Post-ReLU hidden activations, one row per input."""
    X = as_matrix(features)
    if X.shape[1] != model.dim:
        raise ValueError(f"expected dim {model.dim}, got {X.shape[1]}")
    params = {"W1": model.W1, "b1": model.b1, "W2": model.W2, "b2": model.b2}
    _, hidden, _ = _forward(params, X)
    return hidden


def save_classifier(model: MlpClassifier, path) -> None:
    """Versioned binary snapshot: header + little-endian float32 arrays."""
    objective_code = OBJECTIVES.index(model.objective)
    hidden, dim = model.W1.shape
    n_out = model.W2.shape[0]
    blob = bytearray()
    blob += struct.pack("<4sIBIII", _MAGIC, _FORMAT_VERSION, objective_code,
                        dim, hidden, n_out)
    for label in model.class_index:
        raw = label.encode("utf-8")
        blob += struct.pack("<I", len(raw)) + raw
    for arr in (model.W1, model.b1, model.W2, model.b2):
        blob += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_classifier(path) -> MlpClassifier:
    with open(path, "rb") as fh:
        raw = fh.read()
    header = struct.calcsize("<4sIBIII")
    magic, version, objective_code, dim, hidden, n_out = struct.unpack(
        "<4sIBIII", raw[:header])
    if magic != _MAGIC:
        raise ValueError(f"not a classifier snapshot: bad magic {magic!r}")
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    offset = header
    class_index = []
    for _ in range(n_out):
        (length,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        class_index.append(raw[offset:offset + length].decode("utf-8"))
        offset += length
    arrays = []
    for shape in ((hidden, dim), (hidden,), (n_out, hidden), (n_out,)):
        size = int(np.prod(shape)) * 4
        arr = np.frombuffer(raw[offset:offset + size], dtype="<f4")
        if arr.size * 4 != size:
            raise ValueError("snapshot truncated")
        arrays.append(arr.astype(np.float64).reshape(shape))
        offset += size
    if offset != len(raw):
        raise ValueError("trailing bytes after snapshot payload")
    W1, b1, W2, b2 = arrays
    return MlpClassifier(W1=W1, b1=b1, W2=W2, b2=b2,
                         objective=OBJECTIVES[objective_code],
                         class_index=tuple(class_index))
