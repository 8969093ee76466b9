"""The two file contracts shared with the detection harness.

This package talks to the detector side purely through files: it reads the
normalized dataset format (one ``split<TAB>intent<TAB>text`` line per
utterance) and writes embedding stores (row-major float32-LE ``.emb``
payload plus a JSON ``.manifest`` sidecar carrying shape and checksum).
"""

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

SPLITS = ("train", "val", "test")
OOD_INTENT = "oos"
FORMAT_VERSION = 1

_UNESCAPE = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


@dataclass(frozen=True)
class DatasetFile:
    """A normalized dataset: utterances as (text, intent) rows per split."""

    name: str
    splits: dict  # split name -> list[(text, intent)]

    def texts(self, split: str) -> list:
        return [text for text, _ in self.splits[split]]


def _unescape(field: str) -> str:
    out = []
    i = 0
    while i < len(field):
        ch = field[i]
        if ch == "\\":
            if i + 1 >= len(field):
                raise ValueError("dangling escape at end of field")
            nxt = field[i + 1]
            if nxt not in _UNESCAPE:
                raise ValueError(f"invalid escape \\{nxt}")
            out.append(_UNESCAPE[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def read_dataset(path) -> DatasetFile:
    """Parse a normalized dataset file; the stem of the filename names it."""
    splits = {s: [] for s in SPLITS}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh.read().split("\n"), start=1):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, "
                                 f"got {len(parts)}")
            split_name, intent, text = parts
            if split_name not in SPLITS:
                raise ValueError(
                    f"{path}:{lineno}: unknown split {split_name!r}")
            splits[split_name].append((_unescape(text), _unescape(intent)))
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return DatasetFile(name=name, splits=splits)


def store_basename(extractor: str, dataset: str, split: str) -> str:
    return f"{extractor}__{dataset}__{split}"


def write_store(out_dir, extractor: str, dataset: str, split: str,
                matrix) -> str:
    """Write one ``.emb``/``.manifest`` pair; returns the path stem."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ValueError(f"need a non-empty 2-d matrix, got {matrix.shape}")
    payload = np.ascontiguousarray(matrix, dtype="<f4").tobytes()
    stem = os.path.join(str(out_dir), store_basename(extractor, dataset,
                                                     split))
    with open(stem + ".emb", "wb") as fh:
        fh.write(payload)
    manifest = {
        "extractor": extractor,
        "dataset": dataset,
        "split": split,
        "dim": int(matrix.shape[1]),
        "count": int(matrix.shape[0]),
        "checksum": hashlib.sha256(payload).hexdigest(),
        "format_version": FORMAT_VERSION,
    }
    with open(stem + ".manifest", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return stem
