"""On-disk embedding format: ``<name>.emb`` payload + ``<name>.manifest``.

The payload is row-major little-endian float32; the manifest is a JSON
sidecar carrying provenance (extractor, dataset, split), the shape, and a
SHA-256 checksum of the payload. This file pair is the only interface
between embedding producers and the benchmark engine.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .numerics import EmbeddingMatrix, as_matrix

FORMAT_VERSION = 1
PAYLOAD_SUFFIX = ".emb"
MANIFEST_SUFFIX = ".manifest"


class StoreError(ValueError):
    """Base class for embedding-store failures."""


class IntegrityError(StoreError):
    """Payload bytes do not match the manifest checksum."""


class AlignmentError(StoreError):
    """Payload size or row count disagrees with the declared shape."""


class VersionError(StoreError):
    """Manifest format_version is not supported."""


@dataclass(frozen=True)
class EmbeddingManifest:
    extractor: str
    dataset: str
    split: str
    dim: int
    count: int
    checksum: str = ""  # sha256 hex of the payload; filled on write
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.split not in ("train", "val", "test"):
            raise ValueError(f"split must be train/val/test, got {self.split!r}")
        if self.dim < 1 or self.count < 1:
            raise ValueError("dim and count must be positive")


def store_basename(extractor: str, dataset: str, split: str) -> str:
    return f"{extractor}__{dataset}__{split}"


def _paths(path):
    path = str(path)
    if path.endswith(PAYLOAD_SUFFIX):
        stem = path[: -len(PAYLOAD_SUFFIX)]
    elif path.endswith(MANIFEST_SUFFIX):
        stem = path[: -len(MANIFEST_SUFFIX)]
    else:
        stem = path
    return stem + PAYLOAD_SUFFIX, stem + MANIFEST_SUFFIX


def _atomic_write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_embeddings(manifest: EmbeddingManifest, matrix,
                     path) -> EmbeddingManifest:
    """Serialize the matrix and its sidecar; returns the stored manifest."""
    if not isinstance(matrix, EmbeddingMatrix):
        matrix = EmbeddingMatrix(as_matrix(matrix))
    if matrix.n_rows != manifest.count or matrix.dim != manifest.dim:
        raise AlignmentError(
            f"matrix is {matrix.n_rows}x{matrix.dim}, manifest declares "
            f"{manifest.count}x{manifest.dim}")
    payload = np.ascontiguousarray(matrix.data, dtype="<f4").tobytes()
    checksum = hashlib.sha256(payload).hexdigest()
    if manifest.checksum and manifest.checksum != checksum:
        raise IntegrityError("manifest carries a stale checksum")
    stored = replace(manifest, checksum=checksum)

    payload_path, manifest_path = _paths(path)
    _atomic_write(payload_path, payload)
    doc = {
        "extractor": stored.extractor,
        "dataset": stored.dataset,
        "split": stored.split,
        "dim": stored.dim,
        "count": stored.count,
        "checksum": stored.checksum,
        "format_version": stored.format_version,
    }
    _atomic_write(manifest_path,
                  (json.dumps(doc, indent=2) + "\n").encode("utf-8"))
    return stored


def read_embeddings(path, dataset=None) -> tuple[EmbeddingManifest,
                                                 EmbeddingMatrix]:
    """Load and validate a payload/manifest pair.

    When a LabeledDataset is supplied, the row count is additionally
    checked against the split the manifest names.
    """
    payload_path, manifest_path = _paths(path)
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise StoreError(f"missing manifest {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise StoreError(f"unreadable manifest {manifest_path}: {exc}") from None

    try:
        manifest = EmbeddingManifest(
            extractor=doc["extractor"], dataset=doc["dataset"],
            split=doc["split"], dim=int(doc["dim"]), count=int(doc["count"]),
            checksum=doc["checksum"],
            format_version=int(doc["format_version"]),
        )
    except KeyError as exc:
        raise StoreError(f"manifest missing field {exc.args[0]!r}") from None
    if manifest.format_version != FORMAT_VERSION:
        raise VersionError(
            f"unsupported format_version {manifest.format_version}")

    try:
        with open(payload_path, "rb") as fh:
            payload = fh.read()
    except FileNotFoundError:
        raise StoreError(f"missing payload {payload_path}") from None
    expected = manifest.count * manifest.dim * 4
    if len(payload) != expected:
        raise AlignmentError(
            f"payload is {len(payload)} bytes, expected {expected}")
    if hashlib.sha256(payload).hexdigest() != manifest.checksum:
        raise IntegrityError(f"checksum mismatch for {payload_path}")
    if dataset is not None:
        split_len = len(dataset.split(manifest.split))
        if split_len != manifest.count:
            raise AlignmentError(
                f"manifest counts {manifest.count} rows but dataset split "
                f"{manifest.split!r} has {split_len}")

    data = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    matrix = EmbeddingMatrix(data.reshape(manifest.count, manifest.dim))
    return manifest, matrix
