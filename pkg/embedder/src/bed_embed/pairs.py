"""Training-pair construction for bi-encoder fine-tuning.

Every utterance anchors a handful of positive (same-intent) and negative
(different-intent) partners; the cosine-similarity target is 1.0 for
positives and 0.0 for negatives.
"""

import random
import warnings
from dataclasses import dataclass


@dataclass(frozen=True)
class PairSample:
    text_a: str
    text_b: str
    target: float

    def __post_init__(self):
        if self.target not in (0.0, 1.0):
            raise ValueError(f"target must be 0.0 or 1.0, got {self.target}")


def make_pairs(rows, positives: int = 1, negatives: int = 1,
               seed: int = 0) -> list:
    """Sample pair targets from (text, intent) rows, deterministically.

    Each row anchors up to ``positives`` same-intent and ``negatives``
    different-intent partners, drawn without replacement (fewer when the
    pool is smaller). An intent with a single utterance cannot anchor
    positives; it is skipped for those with a warning.
    """
    if positives < 0 or negatives < 0:
        raise ValueError("positives and negatives must be >= 0")
    rows = list(rows)
    by_intent = {}
    for i, (_, intent) in enumerate(rows):
        by_intent.setdefault(intent, []).append(i)
    if len(by_intent) < 2:
        raise ValueError("need at least 2 intents to sample negative pairs")

    rng = random.Random(seed)
    warned = set()
    out = []
    for i, (text, intent) in enumerate(rows):
        same = [j for j in by_intent[intent] if j != i]
        if not same and positives > 0 and intent not in warned:
            warnings.warn(f"intent {intent!r} has a single utterance; "
                          "it anchors no positive pairs")
            warned.add(intent)
        for j in rng.sample(same, min(positives, len(same))):
            out.append(PairSample(text, rows[j][0], 1.0))
        other = [j for j, (_, label) in enumerate(rows) if label != intent]
        for j in rng.sample(other, min(negatives, len(other))):
            out.append(PairSample(text, rows[j][0], 0.0))
    return out
