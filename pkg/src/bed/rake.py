"""Keyword-overlap OOD gate built on rapid automatic keyword extraction.

Candidate phrases are maximal runs of non-stopword words between stopwords
and punctuation. Word score = degree / frequency over the training corpus;
a phrase scores the sum of its word scores. Phrases at or above the corpus
mean phrase score contribute their tokens to the keyword set; a query with
no keyword token is flagged OOD.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from importlib import resources

from .detectors import DirectVerdicts

# Words keep interior apostrophes so contractions match the stopword list.
_WORD_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")

DEFAULT_DELIMITERS = "".join(ch for ch in string.punctuation if ch != "'")


def load_smart_stopwords() -> frozenset[str]:
    text = resources.files("bed.data").joinpath("smart_stopwords.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


@dataclass(frozen=True)
class RakeModel:
    keyword_tokens: frozenset[str]
    stopwords: frozenset[str]
    delimiters: str = DEFAULT_DELIMITERS


def _words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def candidate_phrases(text: str, stopwords: frozenset[str],
                      delimiters: str = DEFAULT_DELIMITERS) -> list[tuple[str, ...]]:
    """Split one utterance into candidate keyword phrases."""
    fragments = re.split("[" + re.escape(delimiters) + "]", text.lower())
    phrases = []
    for fragment in fragments:
        current: list[str] = []
        for word in _words(fragment):
            if word in stopwords:
                if current:
                    phrases.append(tuple(current))
                    current = []
            else:
                current.append(word)
        if current:
            phrases.append(tuple(current))
    return phrases


def rake_fit(train_texts, stopwords: frozenset[str] | None = None,
             delimiters: str = DEFAULT_DELIMITERS) -> RakeModel:
    """Harvest keyword tokens from the training utterances.

    Duplicate utterances are collapsed first, so the model has set
    semantics over the corpus.
    """
    if stopwords is None:
        stopwords = load_smart_stopwords()
    texts = list(dict.fromkeys(train_texts))
    if not texts:
        raise ValueError("training corpus is empty")

    all_phrases: list[tuple[str, ...]] = []
    for text in texts:
        all_phrases.extend(candidate_phrases(text, stopwords, delimiters))
    if not all_phrases:
        raise ValueError("training corpus yields no candidate phrases")

    freq: dict[str, int] = {}
    degree: dict[str, int] = {}
    for phrase in all_phrases:
        for word in phrase:
            freq[word] = freq.get(word, 0) + 1
            degree[word] = degree.get(word, 0) + len(phrase)
    word_score = {w: degree[w] / freq[w] for w in freq}

    distinct = set(all_phrases)
    phrase_score = {p: sum(word_score[w] for w in p) for p in distinct}
    mean_score = sum(phrase_score.values()) / len(distinct)

    tokens = set()
    for phrase, score in phrase_score.items():
        if score >= mean_score:
            tokens.update(phrase)
    return RakeModel(keyword_tokens=frozenset(tokens), stopwords=stopwords,
                     delimiters=delimiters)


def rake_predict(model: RakeModel, query_texts) -> DirectVerdicts:
    """OOD iff no non-stopword token of the query is a known keyword token."""
    verdicts = []
    for text in query_texts:
        tokens = [w for w in _words(text) if w not in model.stopwords]
        verdicts.append(not any(t in model.keyword_tokens for t in tokens))
    return DirectVerdicts(is_ood=verdicts, detector_id="RAKE")
