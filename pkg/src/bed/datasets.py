"""Dataset loaders and the normalized on-disk utterance format.

Every corpus is converted to the same shape: train/val/test splits of
(text, intent) utterances where the reserved intent ``"oos"`` marks
out-of-distribution rows. The normalized file format is one record per
line -- ``split<TAB>intent<TAB>text`` -- with tab, newline, carriage
return and backslash escaped so round trips are lossless.
"""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass

import numpy as np

OOD_LABEL = "oos"
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class Utterance:
    text: str
    intent: str

    @property
    def is_ood(self) -> bool:
        return self.intent == OOD_LABEL


@dataclass(frozen=True)
class LabeledDataset:
    name: str
    train: tuple[Utterance, ...]
    val: tuple[Utterance, ...]
    test: tuple[Utterance, ...]

    def __post_init__(self):
        for split_name in SPLITS:
            if not self.split(split_name):
                raise ValueError(f"{self.name}: empty {split_name} split")
        allowed = {u.intent for u in self.train} | {OOD_LABEL}
        for split_name in ("val", "test"):
            extra = {u.intent for u in self.split(split_name)} - allowed
            if extra:
                raise ValueError(
                    f"{self.name}: {split_name} has labels outside the "
                    f"training vocabulary: {sorted(extra)[:5]}")

    def split(self, name: str) -> tuple[Utterance, ...]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def binarize(utterances) -> np.ndarray:
    """OOD flags for a split; OOD is the positive class everywhere."""
    return np.array([u.is_ood for u in utterances], dtype=bool)


def apply_ood_filter(ds: LabeledDataset,
                     is_ood_label_in_train: bool) -> LabeledDataset:
    """Drop OOD rows from train when the flag is false; val/test untouched."""
    if is_ood_label_in_train:
        return ds
    return LabeledDataset(
        name=ds.name,
        train=tuple(u for u in ds.train if not u.is_ood),
        val=ds.val,
        test=ds.test,
    )


# ---------------------------------------------------------------------------
# normalized format

def _escape(text: str) -> str:
    return (text.replace("\\", "\\\\").replace("\t", "\\t")
            .replace("\n", "\\n").replace("\r", "\\r"))


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text):
                raise ValueError("dangling escape at end of field")
            nxt = text[i + 1]
            try:
                out.append({"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}[nxt])
            except KeyError:
                raise ValueError(f"invalid escape \\{nxt}") from None
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def write_normalized(ds: LabeledDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for split_name in SPLITS:
            for u in ds.split(split_name):
                fh.write(f"{split_name}\t{_escape(u.intent)}\t"
                         f"{_escape(u.text)}\n")


def read_normalized(path, name: str | None = None) -> LabeledDataset:
    rows = {s: [] for s in SPLITS}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh.read().split("\n"), start=1):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, "
                    f"got {len(parts)}")
            split_name, intent, text = parts
            if split_name not in SPLITS:
                raise ValueError(f"{path}:{lineno}: unknown split "
                                 f"{split_name!r}")
            rows[split_name].append(
                Utterance(text=_unescape(text), intent=_unescape(intent)))
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    return LabeledDataset(name=name, train=tuple(rows["train"]),
                          val=tuple(rows["val"]), test=tuple(rows["test"]))


# ---------------------------------------------------------------------------
# corpus loaders

def _clinc_pairs(raw: dict, key: str, intent_override: str | None = None):
    if key not in raw:
        raise ValueError(f"clinc150 file missing key {key!r}")
    out = []
    for i, item in enumerate(raw[key]):
        if (not isinstance(item, (list, tuple)) or len(item) != 2
                or not all(isinstance(x, str) for x in item)):
            raise ValueError(f"malformed [text, label] pair at {key}[{i}]")
        text, label = item
        out.append(Utterance(text=text, intent=intent_override or label))
    return out


def load_clinc150(path) -> LabeledDataset:
    """CLINC150 ``data_full`` layout; oos_* entries merged into each split."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    splits = {}
    for split_name in SPLITS:
        in_domain = _clinc_pairs(raw, split_name)
        ood = _clinc_pairs(raw, f"oos_{split_name}", intent_override=OOD_LABEL)
        splits[split_name] = tuple(in_domain + ood)
    return LabeledDataset(name="clinc150", train=splits["train"],
                          val=splits["val"], test=splits["test"])


@dataclass
class RostdLayout:
    """File names and column positions; released variants differ."""
    train_file: str = "train.tsv"
    val_file: str = "eval.tsv"
    test_file: str = "test.tsv"
    label_col: int = 0
    text_col: int = 2
    ood_label: str = "outOfDomain"


def _rostd_split(path, layout: RostdLayout) -> tuple[Utterance, ...]:
    needed = max(layout.label_col, layout.text_col) + 1
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) < needed:
                raise ValueError(
                    f"{path}:{lineno}: expected >= {needed} columns, "
                    f"got {len(cols)}")
            raw_label = cols[layout.label_col]
            if raw_label == layout.ood_label:
                intent = OOD_LABEL
            else:
                # fine-grained labels look like "alarm/set_alarm"
                intent = raw_label.split("/", 1)[0]
            out.append(Utterance(text=cols[layout.text_col], intent=intent))
    if not out:
        raise ValueError(f"empty split file {path}")
    return tuple(out)


def load_rostd(path, layout: RostdLayout | None = None) -> LabeledDataset:
    """ROSTD coarse: 3 in-domain classes, "outOfDomain" rows become "oos"."""
    layout = layout or RostdLayout()
    return LabeledDataset(
        name="rostd",
        train=_rostd_split(os.path.join(path, layout.train_file), layout),
        val=_rostd_split(os.path.join(path, layout.val_file), layout),
        test=_rostd_split(os.path.join(path, layout.test_file), layout),
    )


def _snips_split(split_dir) -> tuple[Utterance, ...]:
    if not os.path.isdir(split_dir):
        raise ValueError(f"missing split directory {split_dir}")
    out = []
    for fname in sorted(os.listdir(split_dir)):
        fpath = os.path.join(split_dir, fname)
        if not os.path.isfile(fpath):
            continue
        intent = os.path.splitext(fname)[0]
        with open(fpath, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(Utterance(text=line, intent=intent))
    if not out:
        raise ValueError(f"no utterances under {split_dir}")
    return tuple(out)


def load_snips(path) -> LabeledDataset:
    """Per-intent text files under <path>/{train,val,test}/<intent>.txt."""
    return LabeledDataset(
        name="snips",
        train=_snips_split(os.path.join(path, "train")),
        val=_snips_split(os.path.join(path, "val")),
        test=_snips_split(os.path.join(path, "test")),
    )


def synthesize_snips_ood(ds: LabeledDataset) -> LabeledDataset:
    """Relabel the tail of the class-frequency distribution as OOD.

    Classes are ranked by training frequency (descending, ties broken
    alphabetically); the smallest prefix holding at least 75% of training
    points stays in-domain and every other class becomes "oos" across all
    three splits. Counts are preserved -- this relabels, never removes.
    """
    counts = Counter(u.intent for u in ds.train)
    if OOD_LABEL in counts:
        raise ValueError("dataset already contains OOD rows")
    if len(counts) < 2:
        raise ValueError("need at least 2 classes to synthesize an OOD split")
    ranked = sorted(counts, key=lambda c: (-counts[c], c))
    total = sum(counts.values())
    id_classes = set()
    covered = 0
    for cls in ranked:
        id_classes.add(cls)
        covered += counts[cls]
        if covered / total >= 0.75:
            break

    def relabel(split):
        return tuple(
            u if u.intent in id_classes else Utterance(u.text, OOD_LABEL)
            for u in split)

    return LabeledDataset(name=ds.name, train=relabel(ds.train),
                          val=relabel(ds.val), test=relabel(ds.test))
