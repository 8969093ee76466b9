"""Sentence encoders behind one tiny contract: encode(texts) -> (n, dim).

Pretrained encoders (``use``, ``bert``, ``mpnet``) import their heavyweight
libraries lazily so the rest of the package works without them. The hash
encoders need nothing beyond numpy/torch and exist so pipelines can run — and
be tested — completely offline.
"""

import hashlib
import re

import numpy as np
import torch

_WORD = re.compile(r"[a-z0-9']+")
_BATCH = 32


def _tokens(text: str) -> list:
    words = _WORD.findall(text.lower())
    return words + [f"{a}_{b}" for a, b in zip(words, words[1:])]


class HashEncoder:
    """Deterministic bag-of-features encoder via signed feature hashing.

    Unigrams and bigrams are hashed into a fixed number of slots with a
    md5-derived sign; rows are L2-normalized. Not a language model — just a
    stable, offline stand-in that preserves lexical overlap.
    """

    def __init__(self, dim: int = 256):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim

    def _slot(self, token: str) -> tuple:
        digest = hashlib.md5(token.encode("utf-8")).digest()
        value = int.from_bytes(digest[:8], "little")
        return value % self.dim, 1.0 if digest[8] % 2 else -1.0

    def encode(self, texts) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            for token in _tokens(text):
                slot, sign = self._slot(token)
                out[i, slot] += sign
            norm = np.linalg.norm(out[i])
            if norm == 0.0:  # tokenless text: point at a fixed direction
                out[i, 0] = 1.0
            else:
                out[i] /= norm
        return out


class ProjectedHashEncoder(torch.nn.Module):
    """Hash features behind a trainable shared linear projection.

    The projection starts at identity, so an untuned instance encodes
    exactly like its underlying HashEncoder. Exposes the same
    tokenize/forward surface as the pretrained sentence encoders, which is
    what the fine-tuning loop trains through.
    """

    def __init__(self, dim: int = 256):
        super().__init__()
        self.base = HashEncoder(dim)
        self.projection = torch.nn.Linear(dim, dim, bias=False)
        with torch.no_grad():
            self.projection.weight.copy_(torch.eye(dim))

    def tokenize(self, texts):
        features = torch.as_tensor(self.base.encode(texts),
                                   dtype=torch.float32)
        return {"features": features}

    def forward(self, features):
        return {"sentence_embedding": self.projection(features["features"])}

    def encode(self, texts) -> np.ndarray:
        with torch.no_grad():
            emb = self.forward(self.tokenize(texts))["sentence_embedding"]
        return emb.double().numpy()


class _BertEncoder:
    """bert-base-uncased, sentence vector = masked mean over final layer."""

    def __init__(self, tokenizer, model):
        self.tokenizer = tokenizer
        self.model = model.eval()

    def encode(self, texts) -> np.ndarray:
        chunks = []
        for start in range(0, len(texts), _BATCH):
            batch = self.tokenizer(list(texts[start:start + _BATCH]),
                                   padding=True, truncation=True,
                                   return_tensors="pt")
            with torch.no_grad():
                states = self.model(**batch).last_hidden_state
            mask = batch["attention_mask"].unsqueeze(-1).to(states.dtype)
            pooled = (states * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
            chunks.append(pooled.double().numpy())
        return np.concatenate(chunks)


class _UseEncoder:
    """universal-sentence-encoder/4 behind the common encode() surface."""

    def __init__(self, module):
        self.module = module

    def encode(self, texts) -> np.ndarray:
        chunks = []
        for start in range(0, len(texts), _BATCH):
            chunks.append(np.asarray(
                self.module(list(texts[start:start + _BATCH]))))
        return np.concatenate(chunks).astype(float)


def load_encoder(name: str):
    """Instantiate an encoder by id: use | bert | mpnet | hash."""
    if name == "hash":
        return HashEncoder()
    if name == "use":
        try:
            import tensorflow_hub as hub
            module = hub.load(
                "https://tfhub.dev/google/universal-sentence-encoder/4")
        except Exception as exc:
            raise RuntimeError(f"checkpoint unavailable for {name!r}: "
                               f"{exc}") from exc
        return _UseEncoder(module)
    if name == "bert":
        try:
            from transformers import AutoModel, AutoTokenizer
            tokenizer = AutoTokenizer.from_pretrained("bert-base-uncased")
            model = AutoModel.from_pretrained("bert-base-uncased")
        except Exception as exc:
            raise RuntimeError(f"checkpoint unavailable for {name!r}: "
                               f"{exc}") from exc
        return _BertEncoder(tokenizer, model)
    if name == "mpnet":
        try:
            from sentence_transformers import SentenceTransformer
            return SentenceTransformer(
                "sentence-transformers/all-mpnet-base-v2")
        except Exception as exc:
            raise RuntimeError(f"checkpoint unavailable for {name!r}: "
                               f"{exc}") from exc
    raise ValueError(f"unknown encoder {name!r}; "
                     "expected use, bert, mpnet or hash")
